"""Base K-armed bandit policies: Exp3 and FTRL with 1/2-Tsallis entropy.

Both work on [0, 1] losses with bandit feedback and expose the same small
interface: ``distribution()``, ``sample(rng)``, ``update(arm, loss)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    FeedbackRangeError,
    InvalidArmError,
    InvariantViolation,
    NumericStateError,
    ParameterError,
)

LAMBDA_TOL = 1e-10
_MAX_SOLVER_ITERS = 200


@dataclass(frozen=True)
class LambdaSolution:
    lambda_: float
    residual: float


def _g_and_slope(v, x, eta):
    """``g`` at shifted point ``x`` and ``-dg/dx / 2``."""
    g = 0.0
    slope = 0.0
    for vi in v:
        gap = vi + x
        r = eta / gap
        r2 = r * r
        g += r2
        slope += r2 / gap
    return g, slope


def solve_lambda(w, eta: float) -> LambdaSolution:
    """Find the unique ``lam < min(w)`` with ``sum_i eta**2 / (w_i - lam)**2 == 1``.

    Works on the shifted variable ``x = min(w) - lam``, which is bracketed by
    ``[eta, eta * sqrt(K)]``: at the left end the smallest gap term alone equals
    one, at the right end every term is at most ``1/K``.
    """
    if not eta > 0 or not math.isfinite(eta):
        raise ParameterError(f"eta must be a finite positive number, got {eta}")
    w = np.ravel(np.asarray(w, dtype=np.float64)).tolist()
    if not w:
        raise ParameterError("w must be a non-empty vector")
    if not math.isfinite(sum(w)):
        raise NumericStateError("w contains non-finite entries")
    m = min(w)
    v = [x - m for x in w]

    lo, hi = eta, eta * math.sqrt(len(v))
    g_hi, _ = _g_and_slope(v, hi, eta)
    if g_hi > 1 + LAMBDA_TOL:
        raise InvariantViolation(f"lambda bracket check failed: g(hi)={g_hi!r}")

    # Newton on g**-0.5 - 1, which is exactly linear in x when all w are equal;
    # bisection takes over whenever a step leaves the current bracket.
    x = lo
    for _ in range(_MAX_SOLVER_ITERS):
        g, slope = _g_and_slope(v, x, eta)
        res = g - 1.0
        if abs(res) <= LAMBDA_TOL:
            break
        if res > 0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4e-16 * hi:
            break
        step = x - g * (1.0 - math.sqrt(g)) / slope
        x = step if lo < step < hi else 0.5 * (lo + hi)
    else:
        raise InvariantViolation("lambda solver did not converge")
    return LambdaSolution(m - x, res)


def tsallis_distribution(w, eta: float) -> np.ndarray:
    """Closed-form FTRL distribution ``q_i = eta**2 / (w_i - lam)**2``."""
    w = np.asarray(w, dtype=np.float64)
    sol = solve_lambda(w, eta)
    return (eta / (w - sol.lambda_)) ** 2


def tsallis_objective(q, w, eta: float) -> float:
    q = np.asarray(q, dtype=np.float64)
    return float(np.dot(w, q) - 2.0 * eta * np.sqrt(q).sum())


def positive_movement(q_old, q_new) -> float:
    """``sum_i (q_new(i) - q_old(i))^+``."""
    diff = np.asarray(q_new) - np.asarray(q_old)
    return float(diff[diff > 0].sum())


def sample_from(probs: np.ndarray, rng: np.random.Generator, cdf=None) -> int:
    """Inverse-CDF draw using one uniform from ``rng``."""
    if cdf is None:
        cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


class Policy:
    """Common base: subclasses keep ``_probs`` equal to the current distribution."""

    algo = ""

    def __init__(self, K: int, eta: float):
        if int(K) != K or K < 1:
            raise ParameterError(f"K must be a positive integer, got {K}")
        if not (eta > 0 and math.isfinite(eta)):
            raise ParameterError(
                f"eta must be finite and > 0, got {eta} (eta = 0 / Follow-The-Leader is not supported)")
        self.K = int(K)
        self.eta = float(eta)
        self.round = 1
        self._probs = np.full(self.K, 1.0 / self.K)
        self._cdf = None

    def distribution(self) -> np.ndarray:
        return self._probs.copy()

    def sample(self, rng: np.random.Generator) -> int:
        if self._cdf is None:
            self._cdf = np.cumsum(self._probs)
        return sample_from(self._probs, rng, self._cdf)

    def _check_feedback(self, arm, loss):
        if not 0 <= arm < self.K:
            raise InvalidArmError(f"arm {arm} outside 0..{self.K - 1}")
        if not 0.0 <= loss <= 1.0:
            raise FeedbackRangeError(f"loss {loss!r} outside [0, 1]")
        q = self._probs[arm]
        if not q > 0:
            raise NumericStateError(f"played arm {arm} has probability {q!r}")
        return q

    def update(self, arm: int, loss: float) -> None:
        raise NotImplementedError

    def copy(self):
        return type(self).from_json(self.to_json())

    def to_json(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_json(cls, obj: dict):
        raise NotImplementedError


class Exp3(Policy):
    """Exponential weights with importance-weighted loss estimates, no explicit exploration.

    Weights are kept in log space and shifted so their maximum is zero.
    """

    algo = "exp3"

    def __init__(self, K: int, eta: float):
        super().__init__(K, eta)
        self.log_weights = np.zeros(self.K)

    def _refresh(self):
        lw = self.log_weights
        if not np.all(np.isfinite(lw)):
            raise NumericStateError("Exp3 log-weights are not finite")
        lw -= lw.max()
        w = np.exp(lw)
        self._probs = w / w.sum()
        self._cdf = None

    def update(self, arm, loss):
        q = self._check_feedback(arm, loss)
        if loss > 0:
            self.log_weights[arm] -= self.eta * loss / q
            self._refresh()
        self.round += 1

    def to_json(self):
        return {"algo": self.algo, "K": self.K, "eta": self.eta, "round": self.round,
                "log_weights": self.log_weights.tolist()}

    @classmethod
    def from_json(cls, obj):
        pol = cls(obj["K"], obj["eta"])
        pol.round = int(obj.get("round", 1))
        pol.log_weights = np.asarray(obj["log_weights"], dtype=np.float64).copy()
        pol._refresh()
        return pol


class FtrlTsallis(Policy):
    """FTRL over the simplex with regularizer ``-2 * eta * sum_i sqrt(q_i)``.

    Larger ``eta`` means stronger regularization (slower movement).
    """

    algo = "ftrl"

    def __init__(self, K: int, eta: float):
        super().__init__(K, eta)
        self.cum_est_loss = np.zeros(self.K)

    def _refresh(self):
        self._probs = tsallis_distribution(self.cum_est_loss, self.eta)
        self._cdf = None

    def update(self, arm, loss):
        q = self._check_feedback(arm, loss)
        if loss > 0:
            self.cum_est_loss[arm] += loss / q
            if not math.isfinite(self.cum_est_loss[arm]):
                raise NumericStateError("cumulative estimated loss overflowed")
            self._refresh()
        self.round += 1

    def to_json(self):
        return {"algo": self.algo, "K": self.K, "eta": self.eta, "round": self.round,
                "cum_est_loss": self.cum_est_loss.tolist()}

    @classmethod
    def from_json(cls, obj):
        pol = cls(obj["K"], obj["eta"])
        pol.round = int(obj.get("round", 1))
        cum = np.asarray(obj["cum_est_loss"], dtype=np.float64).copy()
        if cum.shape != (pol.K,) or not np.all(np.isfinite(cum)) or np.any(cum < 0):
            raise NumericStateError("cum_est_loss must be K finite nonnegative values")
        pol.cum_est_loss = cum
        pol._refresh()
        return pol


POLICIES = {"exp3": Exp3, "ftrl": FtrlTsallis}


def make_policy(config: dict) -> Policy:
    """Build a fresh policy from ``{"algo": "exp3" | "ftrl", "eta": ..., "K": ...}``."""
    try:
        cls = POLICIES[config["algo"]]
    except KeyError:
        raise ParameterError(f"unknown or missing algo in {config!r}") from None
    return cls(config["K"], config["eta"])


def default_tunings(algo: str, K: int, T: int, d: int) -> tuple[float, float]:
    """Learning rate and Bernoulli bias for a horizon-``T`` wrapped run.

    FTRL: ``eta = sqrt(floor(T / (2d+1)) / 2)``. Exp3: ``eta = sqrt(d ln K / (K T))``,
    or the undelayed ``sqrt(2 ln K / (K T))`` when ``d = 0``. Both use
    ``beta = 1 / (2d+1)``.
    """
    if T < 1 or d < 0 or K < 1:
        raise ParameterError(f"need T >= 1, d >= 0, K >= 1 (got T={T}, d={d}, K={K})")
    beta = 1.0 / (2 * d + 1)
    if algo == "ftrl":
        n_blocks = T // (2 * d + 1)
        if n_blocks == 0:
            raise ParameterError(
                f"T={T} < 2d+1={2 * d + 1}: default FTRL eta degenerates to 0, pass eta explicitly")
        return math.sqrt(0.5 * n_blocks), beta
    if algo == "exp3":
        if K < 2:
            raise ParameterError("the Exp3 tuning needs K >= 2")
        if d == 0:
            return math.sqrt(2 * math.log(K) / (K * T)), beta
        return math.sqrt(d * math.log(K) / (K * T)), beta
    raise ParameterError(f"unknown algo {algo!r}")
