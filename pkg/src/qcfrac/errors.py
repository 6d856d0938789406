"""Exception taxonomy shared by every qcfrac module.

Each class marks one well-defined failure mode of the numerical contracts;
callers are expected to catch the specific class, never the base, except in
samplers where any admissibility failure triggers a redraw.
"""


class QcfracError(Exception):
    """Base class for all qcfrac errors."""


class BadBase(QcfracError):
    """Base q is zero or lies outside |q| < 1."""


class SingularFactor(QcfracError):
    """A required factor (1 - x) has modulus below the singularity gap."""


class TermCap(QcfracError):
    """A sum or product needed more than max_terms terms."""


class Diverged(QcfracError):
    """Series terms grow without the terminating parameter that would stop them."""


class BalanceViolation(QcfracError):
    """Parameter product fails the balance constraint beyond tolerance."""


class DistinguishedEqualsA(QcfracError):
    """The distinguished parameter coincides with the series base parameter."""


class InadmissibleShift(QcfracError):
    """A shifted parameter tuple is degenerate or breaks balance."""


class SamplerExhausted(QcfracError):
    """Rejection sampling failed to find an admissible point in the attempt budget."""


class OutsideConvergence(QcfracError):
    """A series argument lies outside its convergence region."""


class AliasRejected(QcfracError):
    """The requested solution family/distinguished pair duplicates another solution."""


class NotTerminating(QcfracError):
    """A finite evaluation was requested but no parameter has the form q^-N."""


class NonTerminating(NotTerminating):
    """Ordinary hypergeometric sum with no nonpositive-integer upper parameter."""


class DegenerateFit(QcfracError):
    """Linear or quadratic coefficient fit hit coincident or unstable sample points."""


class TailNotGeometric(QcfracError):
    """Truncated infinite sum whose tail fails to decay geometrically before the cap."""


class ZeroDenominatorConvergent(QcfracError):
    """A continued-fraction convergent denominator vanished."""


class DenominatorBracketZero(QcfracError):
    """The denominator combination of a closed-form ratio vanished."""
