"""User feedback oracles for the hidden true utilities.

Three modes: exact gradient queries, and two derivative-free estimators
built from utility-value queries at Gaussian-smoothed points -- the
two-point difference quotient and the cheaper (noisier) one-point form.
Draws come from counter-based streams keyed by (seed, user, round), so a
round's feedback is reproducible regardless of evaluation order.
"""

from dataclasses import dataclass

import numpy as np

from .functions import FunctionError, true_grad, true_value

FEEDBACK_MODES = ("gradient", "two_point", "one_point")

# |u| beyond this is astronomically rare; clipping keeps smoothed query
# points from jumping a domain boundary, and every clip is counted.
_U_CLIP = 6.0


@dataclass(frozen=True)
class FeedbackMode:
    """How users answer utility queries: the mode tag, the smoothing width
    of the derivative-free estimators, queries averaged per round, and the
    base seed of the per-user streams."""
    mode: str = "gradient"
    delta_s: float = 1e-3
    samples_per_query: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in FEEDBACK_MODES:
            raise ValueError(f"unknown feedback mode {self.mode!r}")
        if self.mode != "gradient" and not (self.delta_s > 0):
            raise ValueError("smoothing width must be positive")
        if self.samples_per_query < 1:
            raise ValueError("samples_per_query must be >= 1")


def _check_domain(t, x):
    x = np.asarray(x)
    if t.family == "alpha_fair" and np.any(x <= 0):
        raise FunctionError("true utility queried outside its domain (x <= 0)")
    if t.family in ("sqrt_diff", "sqrt_shifted") and np.any(x < 0):
        raise FunctionError("true utility queried outside its domain (x < 0)")
    if t.family == "log_form" and np.any(t.b * x + 1.0 <= 0):
        raise FunctionError("true utility queried outside its domain")


def query_gradient(t, x):
    """Exact derivative of the true utility at x."""
    _check_domain(t, x)
    return true_grad(t, x)


def two_point_estimate(t, x, delta_s, u):
    """Difference quotient of two utility queries delta_s*u apart, scaled
    by the draw: ((U(x + delta_s*u) - U(x)) / delta_s) * u."""
    _check_domain(t, x)
    _check_domain(t, x + delta_s * u)
    return (true_value(t, x + delta_s * u) - true_value(t, x)) / delta_s * u


def one_point_estimate(t, x, delta_s, u):
    """Single utility query at the smoothed point: U(x + delta_s*u)*u/delta_s.
    Same mean as the two-point form, higher variance."""
    _check_domain(t, x + delta_s * u)
    return true_value(t, x + delta_s * u) * u / delta_s


def round_draws(mode, user, round_k, size):
    """The user's Gaussian draws for one round, clipped to |u| <= 6.

    Returns (draws, clip_count).  Stream identity is the Philox key
    (seed, user) with the round in the counter block, so streams never
    overlap across users or rounds.
    """
    bits = np.random.Philox(key=np.array([mode.seed, user], dtype=np.uint64),
                            counter=np.array([0, 0, 0, round_k],
                                             dtype=np.uint64))
    u = np.random.Generator(bits).standard_normal(size)
    clips = int(np.count_nonzero(np.abs(u) > _U_CLIP))
    if clips:
        u = np.clip(u, -_U_CLIP, _U_CLIP)
    return u, clips


def feedback_vector(mode, fs, x_hat, round_k):
    """Per-user feedback for one round: the mode's estimator averaged over
    samples_per_query draws.  Returns (estimates, clip_count)."""
    n = fs.n_users
    out = np.empty(n)
    clips = 0
    for r, t in enumerate(fs.trues):
        xr = float(x_hat[r])
        if mode.mode == "gradient":
            out[r] = float(query_gradient(t, xr))
            continue
        u, c = round_draws(mode, r, round_k, mode.samples_per_query)
        clips += c
        if mode.mode == "two_point":
            est = two_point_estimate(t, xr, mode.delta_s, u)
        else:
            est = one_point_estimate(t, xr, mode.delta_s, u)
        out[r] = float(np.mean(est))
    if not np.all(np.isfinite(out)):
        raise FunctionError("non-finite feedback value")
    return out, clips
