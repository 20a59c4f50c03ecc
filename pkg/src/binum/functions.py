"""Scalar function families used throughout the solver.

Three kinds of functions live here:

* surrogate utilities ``U(x; alpha)`` — concave, known to the network,
  tuned via the scalar parameter ``alpha``;
* true utilities ``Ũ(x)`` — the users' actual satisfaction, queried only
  through values/gradients (possibly nonconcave);
* link regularizers ``B(y)`` — convex penalties on aggregate link rates.

All derivatives are exact closed forms. Vectorized evaluation is deliberate:
every function accepts scalars or numpy arrays.
"""

from dataclasses import dataclass
import math
import numpy as np

__all__ = [
    "SurrogateUtility", "TrueUtility", "Regularizer", "FunctionSet",
    "FunctionError",
    "surrogate_value", "surrogate_dx", "surrogate_dxx", "surrogate_dadx",
    "true_value", "true_grad",
    "barrier_value", "barrier_d", "barrier_dd",
    "psi_total",
]

SURROGATE_FAMILIES = ("alpha_fair", "log")
TRUE_FAMILIES = ("quadratic", "sqrt_diff", "sqrt_shifted", "log_form",
                 "alpha_fair", "s_shape")
REGULARIZER_FAMILIES = ("log_barrier", "quadratic")


class FunctionError(ValueError):
    pass


@dataclass(frozen=True)
class SurrogateUtility:
    """Parameterized utility with its admissible parameter interval.

    ``bounds = (lo, hi)`` is the interval (lo, hi]; projection in the
    parameter update clamps to the closed interval in practice. Neither
    endpoint may be 1 for the alpha_fair family (the form 1/(1-alpha) is
    singular there), and alpha0 may not be 1 either; values strictly
    between the endpoints other than 1 are legal during a run.
    """
    family: str
    lo: float
    hi: float
    alpha0: float

    def __post_init__(self):
        if self.family not in SURROGATE_FAMILIES:
            raise FunctionError(f"unknown surrogate family {self.family!r}")
        if not (0 < self.lo < self.hi):
            raise FunctionError(f"bad parameter bounds ({self.lo}, {self.hi}]")
        if not (self.lo <= self.alpha0 <= self.hi):
            raise FunctionError(
                f"alpha0={self.alpha0} outside bounds ({self.lo}, {self.hi}]")
        if self.family == "alpha_fair":
            if self.lo == 1.0 or self.hi == 1.0 or self.alpha0 == 1.0:
                raise FunctionError("alpha_fair is singular at alpha=1; "
                                    "move the bound or alpha0 off 1")


@dataclass(frozen=True)
class TrueUtility:
    family: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.family not in TRUE_FAMILIES:
            raise FunctionError(f"unknown true-utility family {self.family!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise FunctionError("non-finite utility parameter")
        if self.family == "alpha_fair" and self.a == 1.0:
            raise FunctionError("alpha_fair true utility is singular at a=1")
        if self.family in ("sqrt_diff", "sqrt_shifted") and self.b < 0:
            raise FunctionError(f"{self.family} needs b >= 0")
        if self.family == "s_shape" and self.a <= 0:
            raise FunctionError("s_shape needs a > 0")


@dataclass(frozen=True)
class Regularizer:
    """Convex link cost. log_barrier(tau, cap): -tau*log(cap - y);
    quadratic(mu): mu/2 * y^2."""
    family: str
    tau: float = 0.0
    mu: float = 0.0
    cap: float = 0.0

    def __post_init__(self):
        if self.family not in REGULARIZER_FAMILIES:
            raise FunctionError(f"unknown regularizer family {self.family!r}")
        if self.family == "log_barrier":
            if not (self.tau > 0):
                raise FunctionError("log_barrier needs tau > 0")
            if not (self.cap > 0):
                raise FunctionError("log_barrier needs a positive capacity")
        else:
            if not (self.mu > 0):
                raise FunctionError("quadratic regularizer needs mu > 0")


def _check_alpha_fair_alpha(alpha):
    if np.any(np.asarray(alpha) == 1.0):
        raise FunctionError("alpha_fair evaluated at the singular alpha=1")


def surrogate_value(u, x, alpha):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise FunctionError("surrogate utilities are defined for x > 0")
    if u.family == "alpha_fair":
        _check_alpha_fair_alpha(alpha)
        return x ** (1.0 - alpha) / (1.0 - alpha)
    return np.log(x)


def surrogate_dx(u, x, alpha):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise FunctionError("surrogate utilities are defined for x > 0")
    if u.family == "alpha_fair":
        _check_alpha_fair_alpha(alpha)
        return x ** (-alpha)
    return 1.0 / x


def surrogate_dxx(u, x, alpha):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise FunctionError("surrogate utilities are defined for x > 0")
    if u.family == "alpha_fair":
        _check_alpha_fair_alpha(alpha)
        return -alpha * x ** (-alpha - 1.0)
    return -1.0 / x ** 2


def surrogate_dadx(u, x, alpha):
    """Mixed derivative d/dalpha of dU/dx; zero for the log family."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise FunctionError("surrogate utilities are defined for x > 0")
    if u.family == "alpha_fair":
        _check_alpha_fair_alpha(alpha)
        return -(x ** (-alpha)) * np.log(x)
    return np.zeros_like(x) if x.shape else 0.0


def true_value(t, x):
    x = np.asarray(x, dtype=np.float64)
    if t.family == "quadratic":
        return t.a * x ** 2
    if t.family == "sqrt_diff":
        # decreasing in x for x > 0; kept as the default reading, with
        # sqrt_shifted as the increasing alternative
        return t.a * (np.sqrt(x + t.b) - np.sqrt(x))
    if t.family == "sqrt_shifted":
        return t.a * (np.sqrt(x + t.b) - np.sqrt(t.b))
    if t.family == "log_form":
        return t.a * np.log(t.b * x + 1.0)
    if t.family == "alpha_fair":
        return x ** (1.0 - t.a) / (1.0 - t.a)
    # s_shape: x^a on x >= 0, -b*(-x)^a on x < 0
    xa = np.where(x >= 0, np.abs(x), 0.0)
    xn = np.where(x < 0, -x, 0.0)
    return np.where(x >= 0, xa ** t.a, -t.b * xn ** t.a)


def true_grad(t, x):
    x = np.asarray(x, dtype=np.float64)
    if t.family == "quadratic":
        return 2.0 * t.a * x
    if t.family in ("sqrt_diff", "sqrt_shifted"):
        g = 0.5 * t.a / np.sqrt(x + t.b)
        if t.family == "sqrt_diff":
            g = g - 0.5 * t.a / np.sqrt(x)
        return g
    if t.family == "log_form":
        return t.a * t.b / (t.b * x + 1.0)
    if t.family == "alpha_fair":
        return x ** (-t.a)
    xa = np.where(x >= 0, np.abs(x), 1.0)
    xn = np.where(x < 0, -x, 1.0)
    return np.where(x >= 0, t.a * xa ** (t.a - 1.0), t.a * t.b * xn ** (t.a - 1.0))


def barrier_value(B, y):
    y = np.asarray(y, dtype=np.float64)
    if B.family == "log_barrier":
        room = B.cap - y
        if np.any(room <= 0):
            raise FunctionError(f"barrier domain violated: load {y} >= cap {B.cap}")
        return -B.tau * np.log(room)
    return 0.5 * B.mu * y ** 2


def barrier_d(B, y):
    y = np.asarray(y, dtype=np.float64)
    if B.family == "log_barrier":
        room = B.cap - y
        if np.any(room <= 0):
            raise FunctionError(f"barrier domain violated: load {y} >= cap {B.cap}")
        return B.tau / room
    return B.mu * y


def barrier_dd(B, y):
    y = np.asarray(y, dtype=np.float64)
    if B.family == "log_barrier":
        room = B.cap - y
        if np.any(room <= 0):
            raise FunctionError(f"barrier domain violated: load {y} >= cap {B.cap}")
        return B.tau / room ** 2
    return np.full_like(y, B.mu) if y.shape else B.mu


@dataclass(frozen=True)
class FunctionSet:
    """Per-user surrogates and true utilities, per-link regularizers, and
    the strong-concavity coefficient epsilon of the -eps/2 x^2 terms."""
    surrogates: tuple
    trues: tuple
    regularizers: tuple
    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise FunctionError("epsilon must be positive")
        if len(self.surrogates) == 0 or len(self.regularizers) == 0:
            raise FunctionError("empty function set")

    @property
    def n_users(self):
        return len(self.surrogates)

    @property
    def n_links(self):
        return len(self.regularizers)

    def alpha0(self):
        return np.array([s.alpha0 for s in self.surrogates], dtype=np.float64)

    def alpha_lo(self):
        return np.array([s.lo for s in self.surrogates], dtype=np.float64)

    def alpha_hi(self):
        return np.array([s.hi for s in self.surrogates], dtype=np.float64)


def psi_total(fs, x):
    """Total true utility of a rate vector, the upper-level objective."""
    x = np.asarray(x, dtype=np.float64)
    return float(sum(float(true_value(t, x[i])) for i, t in enumerate(fs.trues)))
