"""qcfrac: verified numerics for balanced very-well-poised basic
hypergeometric series, their contiguous relations, three-term recurrences,
continued fractions and biorthogonal rational functions.

The compiled kernel is used automatically when present; set
QCFRAC_PURE_PYTHON=1 before import to force the pure-Python fallback.
"""

from ._backend import KERNEL_BACKEND
from .errors import (
    AliasRejected,
    BadBase,
    BalanceViolation,
    DegenerateFit,
    DenominatorBracketZero,
    DistinguishedEqualsA,
    Diverged,
    InadmissibleShift,
    NonTerminating,
    NotTerminating,
    OutsideConvergence,
    QcfracError,
    SamplerExhausted,
    SingularFactor,
    TailNotGeometric,
    TermCap,
    ZeroDenominatorConvergent,
)
from .qnum import (
    BigComplex,
    Precision,
    SeriesValue,
    qpoch,
    qpoch_inf,
    qpoch_multi,
    shifted_factorial,
)

__version__ = "0.1.0"
