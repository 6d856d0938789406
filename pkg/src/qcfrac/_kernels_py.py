"""Pure-Python kernels for the innermost product/series loops.

These functions are deliberately type-agnostic: they only use +, -, *, /,
abs and integer powers, so they run on gmpy2 mpc/mpfr operands under the
caller's active context.  A compiled twin with identical semantics lives in
_kernels.pyx; tests assert the two agree bit for bit.

Callers normalize inputs and map the raw tuples onto SeriesValue.
"""

from .errors import Diverged, SingularFactor, TermCap


def qpoch_finite(a, q, n):
    """(a; q)_n for n >= 0 by direct product.

    Returns (value, min_abs_factor); min_abs_factor is -1 when n == 0.
    """
    prod = 1
    minfac = -1
    x = a
    for _ in range(n):
        f = 1 - x
        af = abs(f)
        if minfac < 0 or af < minfac:
            minfac = af
        prod = prod * f
        x = x * q
    return prod, minfac


def qpoch_inf(a, q, tail_eps, max_terms):
    """(a; q)_infinity truncated when |a q^j| < tail_eps.

    Returns (value, rel_err_bound, factors_used, min_abs_factor).  The
    relative bound comes from the remaining log-product estimate
    sum_{m>=M} |a q^m| / (1 - |a q^M|).
    """
    prod = 1
    minfac = -1
    x = a
    aq = abs(q)
    j = 0
    while abs(x) >= tail_eps:
        f = 1 - x
        af = abs(f)
        if minfac < 0 or af < minfac:
            minfac = af
        prod = prod * f
        x = x * q
        j += 1
        if j > max_terms:
            raise TermCap(f"q-Pochhammer tail needs more than {max_terms} factors")
    t = abs(x)
    rel = (t / (1 - aq)) / (1 - t)
    return prod, rel, j, minfac


def series_sum(upper, lower, q, z, excess, tail_eps, gap, max_terms, n_stop):
    """Sum a basic hypergeometric series term by term.

    lower must already include the implicit base factor q.  excess is
    1 + s - r; each step multiplies by (-q^n)^excess.  n_stop >= 0 sums
    exactly n_stop + 1 terms (terminating case, no tail error); n_stop < 0
    stops after three consecutive terms below tail_eps * max(1, |partial|).

    Returns (total, err_mag, terms_used, terminated).
    """
    term = 1
    total = term
    qn = 1
    nterms = 1
    small = 0
    err = 0
    hist = [abs(term)] * 4  # ring buffer of recent |term| for the cap diagnosis
    while True:
        if n_stop >= 0:
            if nterms == n_stop + 1:
                return total, 0, nterms, True
        else:
            at = abs(term)
            lim = abs(total)
            if lim < 1:
                lim = 1 + (lim - lim)
            if at < tail_eps * lim:
                small += 1
                if at > err:
                    err = at
                if small == 3:
                    return total, err, nterms, False
            else:
                small = 0
                err = 0
        if nterms > max_terms:
            if hist[-1] > hist[0]:
                raise Diverged(f"series terms growing after {max_terms} terms")
            raise TermCap(f"series needs more than {max_terms} terms")
        num = 1
        for u in upper:
            num = num * (1 - u * qn)
        den = 1
        for l in lower:
            fl = 1 - l * qn
            if abs(fl) < gap:
                raise SingularFactor(
                    f"lower-parameter factor within gap at term {nterms}")
            den = den * fl
        term = term * num / den * z
        if excess:
            term = term * (-qn) ** excess
        qn = qn * q
        total = total + term
        nterms += 1
        hist.pop(0)
        hist.append(abs(term))
