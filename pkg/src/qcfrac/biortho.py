"""Finite discrete biorthogonality attached to the terminating fraction.

Substituting b -> b/t, c -> mu*b*t, h -> 1 into the three-term
recurrence, with x = (t + 1/(mu*t))/2, makes the middle coefficient
linear in x and the trailing coefficient quadratic, so the continued
fraction becomes one of R_II type.  Choosing f = a*q^(N+1) terminates
it after N+1 levels; the partial-fraction residues of its value supply
an (N+1)-point measure, and the rational functions U_n, V_m built from
terminating 10W9's are biorthogonal with respect to it.

rii_map recovers the linear/quadratic structure numerically by fitting
the substituted coefficients at a few abscissas, which doubles as a
transcription check: the fitted leading coefficient must reproduce the
printed gamma_n product, and the fitted roots the printed interpolation
points.  nodes_weights_norms / un_vm / gram implement the closed-form
tables.  residue_check witnesses the summation step behind the weights
by comparing a perturb-and-extrapolate residue of the fraction value
against the closed product form.  corollary_suite exposes the six limit
regimes (mu -> infinity, N -> infinity, two parameter rescalings, the
q-Racah specialization, and the q -> 1 reduction, the last in exact
rational arithmetic).
"""

from __future__ import annotations

import dataclasses
import random
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import DegenerateFit, SamplerExhausted, SingularFactor, \
    TailNotGeometric
from .qnum import Precision, active, qpoch, qpoch_multi, shifted_factorial, \
    to_big
from .series import orbit_clear, r_phi_s, w10_9
from .recurrence import RecurrenceSystem, coeffs
from .cfrac import ContinuedFraction, convergents

__all__ = [
    "BiorthoSystem",
    "BiorthoTables",
    "GramReport",
    "RIIFraction",
    "alpha_point",
    "beta_point",
    "corollary_suite",
    "gamma_product",
    "gram",
    "gram_matrix",
    "nodes_weights_norms",
    "omega_total",
    "omega_weight",
    "norm",
    "residue_check",
    "residue_closed",
    "residue_numeric",
    "residue_sum",
    "rii_closed",
    "rii_map",
    "rii_value",
    "sample_biortho_systems",
    "u_at_node",
    "un_vm",
    "v_at_node",
    "variant_tables",
    "weight",
    "x_of_t",
]


@dataclasses.dataclass(frozen=True)
class BiorthoSystem:
    """Parameters of the terminating h = 1 configuration.

    f is pinned to a*q^(N+1), which kills the partial numerator after
    level N+1, and s = a^2 q^(2-N)/(mu b^2 d e) is the balance value the
    pinned f induces.
    """

    a: mpc
    b: mpc
    d: mpc
    e: mpc
    mu: mpc
    N: int
    q: mpc

    @classmethod
    def make(cls, a, b, d, e, mu, N, q, prec=None):
        prec = prec if prec is not None else Precision()
        with active(prec):
            sys = cls(to_big(a), to_big(b), to_big(d), to_big(e),
                      to_big(mu), int(N), to_big(q))
            if sys.N < 0:
                raise ValueError("N must be a nonnegative integer")
            if not _bio_clear(sys, prec, 2 * prec.singularity_gap):
                raise SingularFactor(
                    "a weight or norm denominator sits inside the gap")
            return sys

    @property
    def f(self):
        return self.a * self.q ** (self.N + 1)

    @property
    def s(self):
        return (self.a ** 2 * self.q ** (2 - self.N)
                / (self.mu * self.b ** 2 * self.d * self.e))

    def subbed(self, t):
        """Recurrence parameters at spectral coordinate t = e^xi."""
        return RecurrenceSystem(self.a, self.b / t, self.mu * self.b * t,
                                self.d, self.e, self.f, to_big(1), self.q)

    def swapped(self):
        """The involution exchanging the two rational families.

        a <-> a q^(1-N)/(de) with b, mu and the pair {aq/d, aq/e} kept,
        i.e. d -> q^(1-N)/e, e -> q^(1-N)/d; s and the nodes are fixed.
        """
        w = self.q ** (1 - self.N)
        return BiorthoSystem(self.a * w / (self.d * self.e), self.b,
                             w / self.e, w / self.d, self.mu, self.N, self.q)

    def node_t(self, k):
        return self.b * self.q ** k

    def node_x(self, k):
        return (self.b * self.q ** k
                + self.q ** (-k) / (self.b * self.mu)) / 2


def x_of_t(t, mu):
    """Spectral variable for coordinate t: x = (t + 1/(mu t))/2."""
    return (t + 1 / (mu * t)) / 2


def alpha_point(sys, j):
    """Interpolation point alpha_j (j >= 1) of the R_II numerators."""
    a, b, mu, q, s = sys.a, sys.b, sys.mu, sys.q, sys.s
    return (b * s * q ** (j - 3) / a
            + a * q ** (3 - j) / (b * s * mu)) / 2


def beta_point(sys, j):
    """Interpolation point beta_j (j >= 1) of the R_II numerators."""
    a, b, mu, q = sys.a, sys.b, sys.mu, sys.q
    return (a * q ** (j - 1) / (b * mu) + b * q ** (1 - j) / a) / 2


def gamma_product(sys, n, prec):
    """Closed form of the quadratic leading coefficient gamma_n.

    The eight-factor numerator follows the trailing coefficient's
    factored display; the sign, the extra power of q and the balanced
    denominator quartet come from the t -> infinity limit of the
    underlying coefficient product A_{n-1} B_n, whose denominators the
    factored display leaves implicit.
    """
    with active(prec):
        a, d, e, f, mu, q, s = (sys.a, sys.d, sys.e, sys.f, sys.mu,
                                sys.q, sys.s)
        val = 4 * mu * s * q ** (2 * n - 1)
        for fac in (1 - q ** n, 1 - s * q ** (n - 2),
                    1 - a * q ** n / d, 1 - a * q ** n / e,
                    1 - a * q ** n / f,
                    1 - d * s * q ** (n - 2) / a,
                    1 - e * s * q ** (n - 2) / a,
                    1 - f * s * q ** (n - 2) / a):
            if fac == 0:
                return mpc(0)
            val = val * fac
        gap = prec.singularity_gap
        for fac in (1 - s * q ** (2 * n - 3), 1 - s * q ** (2 * n - 2),
                    1 - s * q ** (2 * n - 2), 1 - s * q ** (2 * n - 1)):
            if abs(fac) < gap:
                raise SingularFactor(
                    f"gamma_{n} denominator factor {fac} inside the gap")
            val = val / fac
        return val


@dataclasses.dataclass(frozen=True)
class RIIFraction:
    """Fitted R_II data.

    c[i] holds c_{i+1} and lam[i] holds lambda_{i+1} for i = 0..N+1;
    alpha[i], beta[i] hold the interpolation points with the same
    offset.  u[i] holds the slope u_{i+1} of the level-i middle
    coefficient for i = 0..N+1 (the level -1 coefficient is singular
    at h = 1, so the chain starts at u_1).  gamma[n] is the fitted
    quadratic leading coefficient for n = 0..N+1; gamma_0 = 0 because
    the trailing coefficient vanishes identically at h = 1, which
    forces lambda_1 = 0 without ever dividing by the missing u_0.
    """

    c: tuple
    lam: tuple
    alpha: tuple
    beta: tuple
    u: tuple
    gamma: tuple


_FIT_THETAS = (0.37, -0.59, 0.83, -1.21, 1.47, 0.11, -0.73, 1.93,
               -1.87, 0.29, 1.62, -0.97)


def rii_map(sys, prec):
    """Fit the substituted coefficients and return the R_II data.

    The middle coefficient must be linear and the trailing one
    quadratic in x; four abscissas determine both and leave one spare
    point per fit whose misfit is checked against residual_tol.  The
    fitted leading coefficients are verified against the gamma_n
    product before anything is returned.
    """
    with active(prec):
        q = sys.q
        lnq = gmpy2.log(q)
        levels = range(0, sys.N + 2)
        rows = []
        xs = []
        for theta in _FIT_THETAS:
            if len(xs) == 4:
                break
            t = gmpy2.exp(mpfr(theta) * lnq)
            x = x_of_t(t, sys.mu)
            if any(abs(x - seen) < mpfr("1e-3") for seen in xs):
                continue
            try:
                row = [coeffs(sys.subbed(t), n, prec) for n in levels]
            except SingularFactor:
                continue
            rows.append(row)
            xs.append(x)
        if len(xs) < 4:
            raise DegenerateFit("could not place four clear fit abscissas")
        tol = prec.residual_tol
        x0, x1, x2, x3 = xs
        us, vs, gout = [], [], []
        for i, n in enumerate(levels):
            fa = [rows[j][i][0] for j in range(4)]
            scale = max(mpfr(1), *[abs(v) for v in fa])
            u = (fa[0] - fa[1]) / (x0 - x1)
            v = fa[0] - u * x0
            for xj, fj in ((x2, fa[2]), (x3, fa[3])):
                if abs(u * xj + v - fj) > tol * scale:
                    raise DegenerateFit(
                        f"middle coefficient at n={n} is not linear in x")
            if abs(u) <= tol * scale:
                raise DegenerateFit(f"vanishing slope at n={n}")
            us.append(u)
            vs.append(v)
            fb = [rows[j][i][1] for j in range(4)]
            scale = max(mpfr(1), *[abs(v) for v in fb])
            d1a = (fb[1] - fb[0]) / (x1 - x0)
            d1b = (fb[2] - fb[1]) / (x2 - x1)
            d2 = (d1b - d1a) / (x2 - x0)
            c1 = d1a - d2 * (x0 + x1)
            c0 = fb[0] - d1a * x0 + d2 * x0 * x1
            pred = d2 * x3 ** 2 + c1 * x3 + c0
            if abs(pred - fb[3]) > tol * scale:
                raise DegenerateFit(
                    f"trailing coefficient at n={n} is not quadratic in x")
            gp = gamma_product(sys, n, prec)
            if gp == 0:
                if abs(d2) > tol * scale:
                    raise DegenerateFit(
                        f"gamma_{n} should vanish, fit gives {d2}")
                gout.append(mpc(0))
            else:
                if abs(d2 - gp) > tol * max(abs(gp), mpfr(1)):
                    raise DegenerateFit(
                        f"gamma_{n} fit disagrees with the product form")
                gout.append(d2)
        cs, lams, alphas, betas = [], [], [], []
        for j in range(1, sys.N + 3):
            cs.append(-vs[j - 1] / us[j - 1])
            if gout[j - 1] == 0:
                lams.append(mpc(0))
            else:
                lams.append(gout[j - 1] / (us[j - 1] * us[j - 2]))
            alphas.append(alpha_point(sys, j))
            betas.append(beta_point(sys, j))
        return RIIFraction(c=tuple(cs), lam=tuple(lams),
                           alpha=tuple(alphas), beta=tuple(betas),
                           u=tuple(us), gamma=tuple(gout))


@dataclasses.dataclass(frozen=True)
class BiorthoTables:
    variant: str
    nodes: tuple
    weights: tuple
    norms: tuple


def _kratio(sys, k, prec):
    """The k-indexed factor of the top-level weight r_k."""
    a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu, sys.N,
                            sys.q)
    m2 = mu * b ** 2
    r = gmpy2.sqrt(m2)
    num = (m2, q * r, -q * r, m2 / a, a * q / d, a * q / e,
           m2 * d * e * q ** (N - 1) / a, q ** (-N))
    den = (r, -r, a * q, m2 * d / a, m2 * e / a, m2 * q ** (N + 1),
           a * q ** (2 - N) / (d * e), q)
    return (q ** k * qpoch_multi(num, q, k, prec)
            / qpoch_multi(den, q, k, prec))


def _nratio(sys, prec):
    """The k-independent normalizing factor of the weight r_k."""
    a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu, sys.N,
                            sys.q)
    m2 = mu * b ** 2
    num = (a * q, m2 * d / a, m2 * e / a, d * e / (a * q))
    den = (m2 * q, d, e, m2 * d * e / (a ** 2 * q))
    return qpoch_multi(num, q, N, prec) / qpoch_multi(den, q, N, prec)


def omega_total(sys, prec):
    """Total mass of the unnormalized weights (the n = 0 norm)."""
    with active(prec):
        return 1 / _nratio(sys, prec)


def weight(sys, k, prec):
    """Normalized weight r_k of the top-level measure."""
    with active(prec):
        return _kratio(sys, k, prec) * _nratio(sys, prec)


def norm(sys, n, prec):
    """Diagonal value C_n of the top-level biorthogonality.

    The sixth numerator argument is aq, not aq^N: the summed diagonal
    itself decides between the two printed variants, and only aq
    reproduces it (the q -> 1 reduction's (a+1)_n agrees).
    """
    with active(prec):
        a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu,
                                sys.N, sys.q)
        m2 = mu * b ** 2
        g = a ** 2 * q ** (1 - N) / (m2 * d * e)
        num = (q, a * q ** (1 - N) / (m2 * d), a * q ** (1 - N) / (m2 * e),
               a ** 2 * q ** 2 / (m2 * d * e), a * q ** (2 - N) / (d * e),
               a * q)
        den = (q ** (-N), a * q ** (1 - N) / (m2 * d * e), a * q / d,
               a * q / e, a / m2, g * q)
        return (q ** (-n) * qpoch_multi(num, q, n, prec)
                / qpoch_multi(den, q, n, prec)
                * (1 - g * q ** n) / (1 - g * q ** (2 * n)))


def nodes_weights_norms(sys, prec):
    """Closed-form nodes, weights and norms of the top-level system."""
    with active(prec):
        nodes = tuple(sys.node_x(k) for k in range(sys.N + 1))
        weights = tuple(weight(sys, k, prec) for k in range(sys.N + 1))
        norms = tuple(norm(sys, n, prec) for n in range(sys.N + 1))
        return BiorthoTables(variant="4.1", nodes=nodes, weights=weights,
                             norms=norms)


def _u_series(sys, n, k, prec):
    with active(prec):
        a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu,
                                sys.N, sys.q)
        m2 = mu * b ** 2
        params = (q ** (-k), m2 * q ** k, d, e, a * q ** (N + 1),
                  a ** 2 * q ** (1 - N + n) / (m2 * d * e), q ** (-n))
        return w10_9(a, params, q, prec)


def u_at_node(sys, n, k, prec):
    """First-family rational function U_n at the node indexed by k."""
    return _u_series(sys, n, k, prec).value


def _v_series(sys, m, k, prec):
    with active(prec):
        a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu,
                                sys.N, sys.q)
        m2 = mu * b ** 2
        base = a * q ** (1 - N) / (d * e)
        params = (q ** (-k), m2 * q ** k, q ** (1 - N) / d,
                  q ** (1 - N) / e, a * q ** 2 / (d * e),
                  a ** 2 * q ** (1 - N + m) / (m2 * d * e), q ** (-m))
        return w10_9(base, params, q, prec)


def v_at_node(sys, m, k, prec):
    """Second-family rational function V_m at the node indexed by k."""
    return _v_series(sys, m, k, prec).value


def un_vm(sys, n, m, k, prec):
    """(U_n, V_m) at node k; both are terminating sums."""
    if not (0 <= n <= sys.N and 0 <= m <= sys.N and 0 <= k <= sys.N):
        raise ValueError("n, m, k must lie in 0..N")
    return (u_at_node(sys, n, k, prec), v_at_node(sys, m, k, prec))


def gram(sys, n, m, prec, tables=None):
    """Sum of U_n V_m r_k over the support."""
    with active(prec):
        if tables is None:
            tables = nodes_weights_norms(sys, prec)
        total = mpc(0)
        for k in range(sys.N + 1):
            u, v = un_vm(sys, n, m, k, prec)
            total = total + u * v * tables.weights[k]
        return total


def gram_matrix(sys, prec, parallel=True):
    """Full (N+1) x (N+1) Gram matrix; entries are independent work."""
    tables = nodes_weights_norms(sys, prec)
    pairs = [(n, m) for n in range(sys.N + 1) for m in range(sys.N + 1)]

    def entry(nm):
        return gram(sys, nm[0], nm[1], prec, tables=tables)

    if parallel and len(pairs) > 1:
        with ThreadPoolExecutor() as pool:
            flat = list(pool.map(entry, pairs))
    else:
        flat = [entry(nm) for nm in pairs]
    w = sys.N + 1
    return tuple(tuple(flat[n * w + m] for m in range(w)) for n in range(w))


def residue_closed(sys, k, prec, u0=1):
    """Product form of the k-th residue of the fraction value in x.

    The overall normalization carries the fitted slope u0; relative
    quantities such as the weights are independent of it.  Two details
    are pinned by the partial-fraction identity itself (the residues
    must rebuild the fraction value): the last N-shifted denominator
    argument is mu b^2 de/(a^2 q), and the whole product carries 1/(2a)
    relative to the bare t-parametrized limit.
    """
    with active(prec):
        a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu,
                                sys.N, sys.q)
        m2 = mu * b ** 2
        r = gmpy2.sqrt(m2)
        cpre = (-to_big(u0) * b * d * e * (1 - a * q) * q ** N
                / ((1 - d) * (1 - e) * (1 - a * q ** (N + 1)) * 2 * a))
        nnum = (a * q ** 2, m2 * d / a, m2 * e / a, d * e / a)
        nden = (m2 * q, d * q, e * q, m2 * d * e / (a ** 2 * q))
        knum = (m2, q * r, -q * r, m2 / a, a * q / d, a * q / e,
                m2 * d * e * q ** N / a, q ** (-N))
        kden = (r, -r, a * q, m2 * d / a, m2 * e / a,
                a * q ** (1 - N) / (d * e), m2 * q ** (N + 1), q)
        return (cpre
                * qpoch_multi(nnum, q, N, prec)
                / qpoch_multi(nden, q, N, prec)
                * qpoch_multi(knum, q, k, prec)
                / qpoch_multi(kden, q, k, prec))


def _fraction_w109(sys, t, prec):
    """The terminating 10W9 appearing in the fraction's closed value."""
    a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu, sys.N,
                            sys.q)
    m2 = mu * b ** 2
    params = (q, a * q * t / b, a * q / (mu * b * t), a * q / d,
              a * q / e, m2 * d * e * q ** N / a, q ** (-N))
    return w10_9(a * q, params, q, prec).value


def rii_closed(sys, t, prec, u0):
    """Closed value of the R_II fraction at spectral coordinate t."""
    with active(prec):
        a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu,
                                sys.N, sys.q)
        m2 = mu * b ** 2
        pref = (to_big(u0) * m2 * d * e * q ** N * (1 - a * q)
                / (a * (1 - b / t) * (1 - mu * b * t) * (1 - d) * (1 - e)
                   * (1 - a * q ** (N + 1))))
        return pref * _fraction_w109(sys, t, prec)


def residue_numeric(sys, k, prec, u0=1):
    """Residue recovered from the fraction value near its pole.

    Evaluates at t = b q^k (1+eps) with eps = 10^(-digits/2), times the
    canceling factor, and Richardson-extrapolates over eps and eps/2.
    The gap must be narrowed below eps or the near-lattice lower
    parameter would be rejected as singular.  The 1/(2a) converts the
    t-parametrized limit into the residue of the fraction in x.
    """
    with active(prec):
        a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu,
                                sys.N, sys.q)
        eps = mpfr(10) ** (-(prec.digits // 2))
        inner = prec.replace(singularity_gap=eps * mpfr("1e-2"))
        cpre = (-to_big(u0) * b * d * e * (1 - a * q) * q ** N
                / ((1 - d) * (1 - e) * (1 - a * q ** (N + 1)) * 2 * a))

        def probe(ep):
            t = b * q ** k * (1 + ep)
            cancel = ((1 - q ** k * b / t) * (1 - mu * q ** k * t * b)
                      / ((1 - b / t) * (1 - mu * t * b)))
            return (cpre * q ** (-k) * cancel
                    * _fraction_w109(sys, t, inner))

        g1 = probe(eps)
        g2 = probe(eps / 2)
        return 2 * g2 - g1


def residue_check(sys, k, prec):
    """(numeric, closed) pair for the k-th residue.

    Both sides carry the same overall normalization (the fitted first
    slope), so their relative difference is normalization-free.
    """
    if not 0 <= k <= sys.N:
        raise ValueError("k must lie in 0..N")
    fr = rii_map(sys, prec)
    u0 = fr.u[0]
    return (residue_numeric(sys, k, prec, u0=u0),
            residue_closed(sys, k, prec, u0=u0))


def omega_weight(sys, k, prec):
    """Unnormalized weight built from the residues.

    omega_k = R_k (1 - a q^(1-N)/(de)) (1 - mu b^2 de q^(N-1)/a)
              / (R_0 (x_k - alpha_2) 2 mu b); the slope normalization
    cancels in R_k/R_0.
    """
    with active(prec):
        a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu,
                                sys.N, sys.q)
        rk = residue_closed(sys, k, prec)
        r0 = residue_closed(sys, 0, prec)
        m2 = mu * b ** 2
        fac = ((1 - a * q ** (1 - N) / (d * e))
               * (1 - m2 * d * e * q ** (N - 1) / a))
        return rk * fac / (r0 * (sys.node_x(k) - alpha_point(sys, 2))
                           * 2 * mu * b)


def rii_value(fr, x, prec):
    """Evaluate the fitted R_II fraction at x by its convergents."""
    with active(prec):
        x = to_big(x)
        length = len(fr.c) - 2

        def den(n):
            return x - fr.c[n]

        def num(n):
            return fr.lam[n] * (x - fr.alpha[n]) * (x - fr.beta[n])

        cf = ContinuedFraction(partial_num=num, partial_den=den,
                               length=length)
        return convergents(cf, length, prec).last()


def residue_sum(sys, x, prec, u0=1):
    """Partial-fraction form: sum of R_k/(x - x_k) over the support."""
    with active(prec):
        x = to_big(x)
        total = mpc(0)
        for k in range(sys.N + 1):
            total = total + (residue_closed(sys, k, prec, u0=u0)
                             / (x - sys.node_x(k)))
        return total


@dataclasses.dataclass(frozen=True)
class GramReport:
    """One biorthogonality probe: value vs expected at scale."""

    variant: str
    n: int
    m: int
    value: object
    expected: object
    scale: object
    support: int

    def defect(self):
        """|value - expected| relative to the largest term."""
        num = abs(self.value - self.expected)
        sc = max(abs(self.scale), abs(self.expected))
        return num / sc if sc else num


def corollary_suite(variant, params, n, m, cap=400, prec=None):
    """Gram probe for one limit regime of the top-level system.

    params maps parameter letters to values; the letters each variant
    needs are documented on its builder.  Finite variants sum over
    k = 0..N; the infinite-support ones truncate once three straight
    terms fall below tail_eps relative to the partial sum, and raise
    TailNotGeometric if that never happens before cap terms.
    """
    prec = prec if prec is not None else Precision()
    try:
        build = _VARIANTS[str(variant)]
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}") from None
    spec = build(params, prec)
    exact = spec.get("exact", False)
    support = spec.get("N")
    u_fn, v_fn, w_fn = spec["u"], spec["v"], spec["w"]
    if exact:
        total = Fraction(0)
        scale = Fraction(0)
        for k in range(support + 1):
            term = u_fn(n, k) * v_fn(m, k) * w_fn(k)
            total += term
            scale = max(scale, abs(term))
        used = support + 1
    else:
        with active(prec):
            total = mpc(0)
            scale = mpfr(0)
            tail = 0
            used = 0
            top = support + 1 if support is not None else cap
            for k in range(top):
                term = u_fn(n, k) * v_fn(m, k) * w_fn(k)
                total = total + term
                scale = max(scale, abs(term))
                used = k + 1
                if support is None:
                    if abs(term) < prec.tail_eps * max(mpfr(1), abs(total)):
                        tail += 1
                        if tail >= 3 and k >= 25:
                            break
                    else:
                        tail = 0
            else:
                if support is None:
                    raise TailNotGeometric(
                        f"no tail decay within {cap} terms")
    if n != m:
        expected = Fraction(0) if exact else mpc(0)
    elif exact:
        expected = spec["norm"](n)
    else:
        with active(prec):
            expected = spec["norm"](n)
    return GramReport(variant=str(variant), n=n, m=m, value=total,
                      expected=expected, scale=scale, support=used)


def variant_tables(variant, params, count=None, prec=None):
    """Nodes, weights, and norms for one limit regime.

    count rows are produced; it defaults to N+1 for the finite
    variants and must be given for the infinite-support ones.
    """
    prec = prec if prec is not None else Precision()
    try:
        build = _VARIANTS[str(variant)]
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}") from None
    spec = build(params, prec)
    if count is None:
        if spec.get("N") is None:
            raise ValueError("count is required for infinite support")
        count = spec["N"] + 1
    if spec.get("exact", False):
        rows = range(count)
        return BiorthoTables(
            variant=str(variant),
            nodes=tuple(spec["x"](k) for k in rows),
            weights=tuple(spec["w"](k) for k in rows),
            norms=tuple(spec["norm"](n) for n in rows))
    with active(prec):
        rows = range(count)
        return BiorthoTables(
            variant=str(variant),
            nodes=tuple(spec["x"](k) for k in rows),
            weights=tuple(spec["w"](k) for k in rows),
            norms=tuple(spec["norm"](n) for n in rows))


def _need(params, keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ValueError(f"missing parameters: {missing}")
    return [params[k] for k in keys]


def _phi43(upper, lower, q, prec):
    return r_phi_s(upper, lower, q, q, prec).value


def _variant_42(params, prec):
    """mu -> infinity; letters a, b, d, e, N, q; support 0..N."""
    with active(prec):
        a, b, d, e, N, q = _need(params, "abdeNq")
        a, b, d, e, q = map(to_big, (a, b, d, e, q))
        N = int(N)
        nr = (qpoch_multi((a * q, d * e / (a * q)), q, N, prec)
              / qpoch_multi((d, e), q, N, prec))

        def w_fn(k):
            return (qpoch_multi((a * q / d, a * q / e, q ** (-N)), q, k,
                                prec)
                    / qpoch_multi((a * q, a * q ** (2 - N) / (d * e), q),
                                  q, k, prec) * q ** k * nr)

        def norm_fn(j):
            return (q ** (-j)
                    * qpoch_multi((q, a * q, a * q ** (2 - N) / (d * e)),
                                  q, j, prec)
                    / qpoch_multi((q ** (-N), a * q / d, a * q / e), q, j,
                                  prec))

        def u_fn(j, k):
            pref = (qpoch_multi((a * q, a * q / (d * e)), q, j, prec)
                    / qpoch_multi((a * q / d, a * q / e), q, j, prec))
            return pref * _phi43(
                (q ** (k - N), d, e, q ** (-j)),
                (a * q ** (k + 1), q ** (-N), d * e * q ** (-j) / a),
                q, prec)

        def v_fn(j, k):
            pref = (qpoch_multi((a * q ** (2 - N) / (d * e), a * q ** N),
                                q, j, prec)
                    / qpoch_multi((a * q / e, a * q / d), q, j, prec))
            return pref * _phi43(
                (q ** (k - N), q ** (1 - N) / d, q ** (1 - N) / e,
                 q ** (-j)),
                (a * q ** (k + 2 - N) / (d * e), q ** (-N),
                 q ** (1 - N - j) / a),
                q, prec)

        def x_fn(k):
            return b * q ** k / 2

        return {"N": N, "w": w_fn, "norm": norm_fn, "u": u_fn, "v": v_fn,
                "x": x_fn}


def _variant_43(params, prec):
    """N -> infinity; letters a, b, d, e, mu, q; needs |de/(aq)| < 1."""
    with active(prec):
        a, b, d, e, mu, q = _need(params, ("a", "b", "d", "e", "mu", "q"))
        a, b, d, e, mu, q = map(to_big, (a, b, d, e, mu, q))
        m2 = mu * b ** 2
        r = gmpy2.sqrt(m2)
        ratio = d * e / (a * q)
        if abs(ratio) >= 1:
            raise TailNotGeometric("weights need |de/(aq)| < 1")
        inf = (qpoch_multi((a * q, m2 * d / a, m2 * e / a, ratio), q,
                           "inf", prec).value
               / qpoch_multi((m2 * q, d, e, m2 * d * e / (a ** 2 * q)),
                             q, "inf", prec).value)

        def w_fn(k):
            return (qpoch_multi((m2, q * r, -q * r, m2 / a, a * q / d,
                                 a * q / e), q, k, prec)
                    / qpoch_multi((r, -r, a * q, m2 * d / a, m2 * e / a,
                                   q), q, k, prec)
                    * ratio ** k * inf)

        def norm_fn(j):
            # q^(-j) survives the large-support limit of the norm
            # bracket; the summed diagonal requires it
            return (q ** (-j)
                    * qpoch_multi((q, a ** 2 * q ** 2 / (m2 * d * e),
                                   a * q), q, j, prec)
                    / qpoch_multi((a * q / d, a * q / e, a / m2), q, j,
                                  prec))

        def u_fn(j, k):
            pref = (qpoch_multi((a * q, a * q ** (1 - k) / (m2 * e)), q,
                                j, prec)
                    / qpoch_multi((a * q ** (1 - k) / m2, a * q / e), q,
                                  j, prec))
            return pref * _phi43(
                (a * q ** (k + 1) / d, m2 * q ** k, e, q ** (-j)),
                (a * q ** (k + 1), a * q / d, m2 * e * q ** (k - j) / a),
                q, prec)

        def v_fn(j, k):
            return _phi43(
                (q ** (-k), m2 * q ** k, a * q ** 2 / (d * e), q ** (-j)),
                (a * q / e, a * q / d, m2 * q ** (1 - j) / a),
                q, prec)

        def x_fn(k):
            return (b * q ** k + q ** (-k) / (mu * b)) / 2

        return {"N": None, "w": w_fn, "norm": norm_fn, "u": u_fn,
                "v": v_fn, "x": x_fn}


def _variant_44(params, prec):
    """e-shifted N -> infinity; letters as 4.3; needs |aq/(mu b^2 e)| < 1."""
    with active(prec):
        a, b, d, e, mu, q = _need(params, ("a", "b", "d", "e", "mu", "q"))
        a, b, d, e, mu, q = map(to_big, (a, b, d, e, mu, q))
        m2 = mu * b ** 2
        r = gmpy2.sqrt(m2)
        ratio = a * q / (m2 * e)
        if abs(ratio) >= 1:
            raise TailNotGeometric("weights need |aq/(mu b^2 e)| < 1")
        # fourth numerator argument is aq^2/(de): it arises from the
        # e-shifted limit of (de/(aq); q)_N and the n = 0 diagonal
        # pins it
        inf = (qpoch_multi((a * q, m2 * d / a, ratio,
                            a * q ** 2 / (d * e)), q, "inf", prec).value
               / qpoch_multi((m2 * q, d, q / e,
                              a ** 2 * q ** 2 / (m2 * d * e)), q, "inf",
                             prec).value)

        def w_fn(k):
            return (qpoch_multi((m2, q * r, -q * r, m2 / a, a * q / d,
                                 m2 * d * e / (a * q)), q, k, prec)
                    / qpoch_multi((r, -r, a * q, m2 * d / a,
                                   a * q ** 2 / (d * e), q), q, k, prec)
                    * ratio ** k * inf)

        def norm_fn(j):
            g = a ** 2 * q / (m2 * d * e)
            return (qpoch_multi((q, ratio, a * q ** 2 / (d * e), a * q),
                                q, j, prec)
                    / qpoch_multi((a * q / (m2 * d * e), a * q / d,
                                   a / m2, g * q), q, j, prec)
                    * (a / (m2 * d)) ** j
                    * (1 - g * q ** j) / (1 - g * q ** (2 * j)))

        def u_fn(j, k):
            pref = (qpoch_multi((a * q, ratio), q, j, prec)
                    / qpoch_multi((a * q / d, a * q / (m2 * d * e)), q,
                                  j, prec) * d ** (-j))
            return pref * _phi43(
                (a * q / m2, d, a ** 2 * q ** (1 + j) / (m2 * d * e),
                 q ** (-j)),
                (a * q ** (k + 1), a * q ** (1 - k) / m2, ratio),
                q, prec)

        def v_fn(j, k):
            pref = (qpoch_multi((a * q ** 2 / (d * e), ratio), q, j, prec)
                    / qpoch_multi((a * q / d, a / m2), q, j, prec)
                    * (e / q) ** j)
            return pref * _phi43(
                (a * q ** 2 / (m2 * d * e), q / e,
                 a ** 2 * q ** (j + 1) / (m2 * d * e), q ** (-j)),
                (a * q ** (k + 2) / (d * e), a * q ** (2 - k) / (m2 * d * e),
                 ratio),
                q, prec)

        def x_fn(k):
            return (b * q ** k + q ** (-k) / (mu * b)) / 2

        return {"N": None, "w": w_fn, "norm": norm_fn, "u": u_fn,
                "v": v_fn, "x": x_fn}


def _variant_45(params, prec):
    """Rescaled e and mu; letters a, b, d, e, mu, N, q; support 0..N."""
    with active(prec):
        a, b, d, e, mu, N, q = _need(params,
                                     ("a", "b", "d", "e", "mu", "N", "q"))
        a, b, d, e, mu, q = map(to_big, (a, b, d, e, mu, q))
        N = int(N)
        m2 = mu * b ** 2
        nr = ((d / (a * q)) ** N
              * qpoch_multi((a * q, m2 * e / a), q, N, prec)
              / qpoch_multi((d, m2 * d * e / (a ** 2 * q)), q, N, prec))

        def w_fn(k):
            return (qpoch_multi((a * q / d, q ** (-N),
                                 m2 * d * e * q ** (N - 1) / a), q, k,
                                prec)
                    / qpoch_multi((a * q, m2 * e / a, q), q, k, prec)
                    * q ** k * nr)

        def norm_fn(j):
            # second denominator argument carries q^(1-N), not q^(-N);
            # the summed diagonal only matches with the extra power
            g = a ** 2 * q ** (1 - N) / (m2 * d * e)
            return ((q ** (-N) / d) ** j
                    * qpoch_multi((q, a * q ** (1 - N) / (m2 * e),
                                   a ** 2 * q ** 2 / (m2 * d * e), a * q),
                                  q, j, prec)
                    / qpoch_multi((q ** (-N),
                                   a * q ** (1 - N) / (m2 * d * e),
                                   a * q / d, g * q), q, j, prec)
                    * (1 - g * q ** j) / (1 - g * q ** (2 * j)))

        def u_fn(j, k):
            pref = (qpoch_multi((a * q, a * q ** (k + 1) / d), q, j, prec)
                    / qpoch_multi((a * q / d, a * q ** (k + 1)), q, j,
                                  prec))
            return pref * _phi43(
                (m2 * d * e * q ** (-j) / (a ** 2 * q), d, q ** (-k),
                 q ** (-j)),
                (m2 * d * e * q ** (N - j) / a, q ** (-N),
                 d * q ** (-k - j) / a),
                q, prec)

        def v_fn(j, k):
            return _phi43(
                (q ** (-k), q ** (1 - N) / d,
                 a ** 2 * q ** (1 - N + j) / (m2 * d * e), q ** (-j)),
                (a * q ** (2 - N - k) / (m2 * d * e), a * q / d,
                 q ** (-N)),
                q, prec)

        def x_fn(k):
            return b * q ** k / 2

        return {"N": N, "w": w_fn, "norm": norm_fn, "u": u_fn, "v": v_fn,
                "x": x_fn}


def _variant_46(params, prec):
    """Simultaneous a, d, e rescaling; the polynomial (q-Racah) case."""
    with active(prec):
        a, b, d, e, mu, N, q = _need(params,
                                     ("a", "b", "d", "e", "mu", "N", "q"))
        a, b, d, e, mu, q = map(to_big, (a, b, d, e, mu, q))
        N = int(N)
        m2 = mu * b ** 2
        r = gmpy2.sqrt(m2)
        nr = (qpoch_multi((m2 * d / a, m2 * e / a), q, N, prec)
              / qpoch_multi((m2 * q, m2 * d * e / (a ** 2 * q)), q, N,
                            prec))

        def w_fn(k):
            return (qpoch_multi((m2, q * r, -q * r, a * q / d, a * q / e,
                                 q ** (-N)), q, k, prec)
                    / qpoch_multi((r, -r, m2 * d / a, m2 * e / a,
                                   m2 * q ** (N + 1), q), q, k, prec)
                    * q ** k
                    * (m2 * d * e * q ** (N - 2) / a ** 2) ** k * nr)

        def norm_fn(j):
            g = a ** 2 * q ** (1 - N) / (m2 * d * e)
            return (m2 ** j
                    * qpoch_multi((q, a * q ** (1 - N) / (m2 * d),
                                   a * q ** (1 - N) / (m2 * e),
                                   a ** 2 * q ** 2 / (m2 * d * e)), q, j,
                                  prec)
                    / qpoch_multi((q ** (-N), a * q / d, a * q / e,
                                   g * q), q, j, prec)
                    * (1 - g * q ** j) / (1 - g * q ** (2 * j)))

        def u_fn(j, k):
            return _phi43(
                (q ** (-k), m2 * q ** k,
                 a ** 2 * q ** (1 - N + j) / (m2 * d * e), q ** (-j)),
                (a * q / d, a * q / e, q ** (-N)),
                q, prec)

        def x_fn(k):
            return (b * q ** k + q ** (-k) / (mu * b)) / 2

        return {"N": N, "w": w_fn, "norm": norm_fn, "u": u_fn, "v": u_fn,
                "x": x_fn}


def _ordinary_ratio(num, den, k):
    top = Fraction(1)
    for x in num:
        top *= shifted_factorial(Fraction(x), k)
    bot = Fraction(1)
    for x in den:
        bot *= shifted_factorial(Fraction(x), k)
    return top / bot


def _f9_vwp(base, others):
    """Terminating very-well-poised 9F8 at unit argument, exact.

    base is the special parameter; others are the seven free numerator
    parameters, one of which must be a nonpositive integer.
    """
    base = Fraction(base)
    others = [Fraction(x) for x in others]
    upper = [base, 1 + base / 2] + others
    lower = [base / 2] + [1 + base - x for x in others]
    term = Fraction(1)
    total = Fraction(1)
    j = 0
    while True:
        num = Fraction(1)
        for x in upper:
            num *= x + j
        if num == 0:
            return total
        den = Fraction(j + 1)
        for x in lower:
            den *= x + j
        term = term * num / den
        total += term
        j += 1
        if j > 10000:
            raise TailNotGeometric("series failed to terminate")


def _variant_47(params, prec):
    """Ordinary-factorial reduction; letters a, b, d, e, mu, N, exact."""
    a, b, d, e, mu, N = _need(params, ("a", "b", "d", "e", "mu", "N"))
    a, b, d, e, mu = (Fraction(a), Fraction(b), Fraction(d), Fraction(e),
                      Fraction(mu))
    N = int(N)
    m2 = mu + 2 * b

    def w_fn(k):
        kpart = _ordinary_ratio(
            (m2, 1 + m2 / 2, m2 - a, a - d + 1, a - e + 1, -N,
             m2 + d + e - a + N - 1),
            (m2 / 2, a + 1, m2 + d - a, m2 + e - a, m2 + N + 1,
             a - d - e + 2 - N, 1), k)
        npart = _ordinary_ratio(
            (a + 1, m2 + d - a, m2 + e - a, d + e - a - 1),
            (m2 + 1, d, e, m2 + d + e - 2 * a - 1), N)
        return kpart * npart

    def norm_fn(j):
        g = 2 * a + 1 - N - m2 - d - e
        return (_ordinary_ratio(
            (Fraction(1), a + 1 - N - m2 - d, a + 1 - N - m2 - e,
             2 * a + 2 - m2 - d - e, a + 2 - N - d - e, a + 1),
            (Fraction(-N), a + 1 - N - m2 - d - e, a - d + 1, a - e + 1,
             a - m2, 2 * a + 2 - N - m2 - d - e), j)
            * (g + j) / (g + 2 * j))

    def u_fn(j, k):
        u = b + k
        return _f9_vwp(a, (b - u, b + u + mu, d, e, a + N + 1,
                           2 * a + 1 - N - m2 - d - e + j, -j))

    def v_fn(j, k):
        u = b + k
        base = a - d - e - N + 1
        return _f9_vwp(base, (b - u, b + mu + u, 1 - N - d, 1 - N - e,
                              a + 2 - d - e,
                              2 * a + 1 - N - m2 - d - e + j, -j))

    def x_fn(k):
        return (b + k) * (b + k + mu)

    return {"N": N, "w": w_fn, "norm": norm_fn, "u": u_fn, "v": v_fn,
            "x": x_fn, "exact": True}


_VARIANTS = {
    "4.2": _variant_42,
    "4.3": _variant_43,
    "4.4": _variant_44,
    "4.5": _variant_45,
    "4.6": _variant_46,
    "4.7": _variant_47,
}


def _orbit_bases(sys):
    """Bases whose forward q-orbits cover every table denominator."""
    a, b, d, e, mu, N, q = (sys.a, sys.b, sys.d, sys.e, sys.mu, sys.N,
                            sys.q)
    m2 = mu * b ** 2
    r = gmpy2.sqrt(m2)
    ra = gmpy2.sqrt(a)
    g = a ** 2 * q ** (1 - N) / (m2 * d * e)
    return (
        a, d, e, m2, r, -r, ra, -ra,
        m2 / a, a * q ** (1 - N) / m2, m2 * q ** (1 - N) / a,
        m2 * d / a, m2 * e / a, m2 * d * e / a,
        m2 * d * e / (a ** 2 * q),
        a * q / d, a * q / e, d * e / (a * q),
        a * q ** (2 - N) / (d * e), a * q ** (1 - N) / (d * e),
        a * q ** (1 - N) / (m2 * d), a * q ** (1 - N) / (m2 * e),
        a * q ** (1 - N) / (m2 * d * e),
        a * q ** (2 - 2 * N) / (m2 * d * e),
        g, g * q ** (N + 1),
    )


def _bio_clear(sys, prec, tol):
    """Reject parameter draws whose tables or series sit near a pole.

    The swapped system's tables appear in the symmetry checks, so its
    orbits must be clear as well.
    """
    for s in (sys, sys.swapped()):
        for x in _orbit_bases(s):
            if not orbit_clear(x, q=s.q, tol=tol):
                return False
    return True


def sample_biortho_systems(seed, count, prec=None, *, N_max=6, mu=None,
                           label="biortho"):
    """Seeded rejection sampler over terminating configurations.

    Draws a, b, d, e (and mu unless pinned) as q^theta over the
    standard box and N uniformly from 0..N_max, keeping draws whose
    weight and norm denominators all clear the gap.
    """
    prec = prec if prec is not None else Precision()
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = random.Random(f"{label}:{seed}")
    out = []
    rejections = 0
    with active(prec):
        tol = 2 * prec.singularity_gap
        while len(out) < count:
            if rejections > 1000 * count:
                raise SamplerExhausted(
                    f"{label}: {rejections} rejections for {len(out)}"
                    f"/{count} accepted draws")
            q = mpfr(rng.uniform(0.3, 0.7))
            lnq = gmpy2.log(q)
            vals = []
            for _ in range(5):
                re = rng.uniform(-1.5, 1.5)
                im = rng.uniform(-0.5, 0.5)
                vals.append(gmpy2.exp(mpc(re * lnq, im * lnq)))
            if mu is not None:
                vals[4] = to_big(mu)
            N = rng.randrange(0, N_max + 1)
            sys = BiorthoSystem(vals[0], vals[1], vals[2], vals[3],
                                vals[4], N, q)
            if _bio_clear(sys, prec, tol):
                out.append(sys)
            else:
                rejections += 1
    return out
