"""Loss tensors, composite losses and regret accounting.

A :class:`LossTensor` stores the loss components ``values[t-1, s, i]``: the part
of arm ``i``'s round-``t`` loss that is charged ``s`` rounds later. Reads at
rounds outside ``1..T`` are zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidArmError, ParameterError, TensorValidationError

SUM_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class LossTensor:
    """Dense, immutable array of loss components with shape ``(T, d + 1, K)``."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 3:
            raise ParameterError(f"loss tensor must be 3-dimensional, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[2] < 1:
            raise ParameterError(f"need T >= 1 and K >= 1, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        self.validate()

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1] - 1

    @property
    def K(self) -> int:
        return self.values.shape[2]

    def __repr__(self):
        return f"LossTensor(T={self.T}, d={self.d}, K={self.K})"

    def validate(self) -> None:
        """Raise :class:`TensorValidationError` naming the first offending (t, i)."""
        v = self.values
        if not np.all(np.isfinite(v)):
            t, _, i = np.argwhere(~np.isfinite(v))[0]
            raise TensorValidationError(
                f"non-finite component at t={t + 1}, i={i}", t=int(t) + 1, arm=int(i))
        if np.any(v < 0):
            t, _, i = np.argwhere(v < 0)[0]
            raise TensorValidationError(
                f"negative component at t={t + 1}, i={i}", t=int(t) + 1, arm=int(i))
        totals = v.sum(axis=1)
        bad = np.argwhere(totals > 1 + SUM_TOLERANCE)
        if len(bad):
            t, i = bad[0]
            raise TensorValidationError(
                f"components of (t={t + 1}, i={i}) sum to {float(totals[t, i])!r} > 1",
                t=int(t) + 1, arm=int(i))

    def true_losses(self) -> np.ndarray:
        """Per-round losses ``l_t(i)`` as a ``(T, K)`` array."""
        return self.values.sum(axis=1)

    def scaled(self, alpha: float) -> "LossTensor":
        if not 0 <= alpha <= 1:
            raise ParameterError("scale factor must lie in [0, 1]")
        return LossTensor(self.values * alpha)

    # -- serialization --------------------------------------------------

    def to_json(self) -> dict:
        return {"T": self.T, "d": self.d, "K": self.K, "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "LossTensor":
        try:
            T, d, K = int(obj["T"]), int(obj["d"]), int(obj["K"])
            values = np.asarray(obj["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed tensor JSON: {exc}") from exc
        if values.shape != (T, d + 1, K):
            raise ParameterError(
                f"tensor JSON declares shape {(T, d + 1, K)} but holds {values.shape}")
        return cls(values)

    def to_csv(self, path) -> None:
        """Dense CSV with header ``t,s,i,value``; ``t`` is 1-based, ``i`` 0-based."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "s", "i", "value"])
            for t in range(self.T):
                for s in range(self.d + 1):
                    for i in range(self.K):
                        writer.writerow([t + 1, s, i, format(self.values[t, s, i], ".17g")])

    @classmethod
    def from_csv(cls, path) -> "LossTensor":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["t", "s", "i", "value"]:
                raise ParameterError(f"expected header t,s,i,value, got {reader.fieldnames}")
            for row in reader:
                try:
                    rows.append((int(row["t"]), int(row["s"]), int(row["i"]), float(row["value"])))
                except (TypeError, ValueError) as exc:
                    raise ParameterError(f"bad CSV row {row}: {exc}") from exc
        if not rows:
            raise ParameterError("empty tensor CSV")
        ts, ss, arms, vals = (np.array(c) for c in zip(*rows))
        if ts.min() < 1 or ss.min() < 0 or arms.min() < 0:
            raise ParameterError("tensor CSV has out-of-range indices")
        values = np.zeros((int(ts.max()), int(ss.max()) + 1, int(arms.max()) + 1))
        values[ts - 1, ss, arms] = vals
        return cls(values)

    @classmethod
    def load(cls, path) -> "LossTensor":
        path = Path(path)
        if path.suffix.lower() == ".json":
            with open(path) as fh:
                return cls.from_json(json.load(fh))
        return cls.from_csv(path)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".json":
            with open(path, "w") as fh:
                json.dump(self.to_json(), fh)
        else:
            self.to_csv(path)


@dataclass(frozen=True)
class RegretRecord:
    cumulative_composite_loss: float
    comparator_losses: np.ndarray
    best_arm: int
    regret: float

    def to_json(self) -> dict:
        return {
            "cumulative_composite_loss": self.cumulative_composite_loss,
            "comparator_losses": [float(x) for x in self.comparator_losses],
            "best_arm": self.best_arm,
            "regret": self.regret,
        }


def _check_arm(arm, K):
    if not 0 <= arm < K:
        raise InvalidArmError(f"arm {arm} outside 0..{K - 1}")


def composite_loss(L: LossTensor, t: int, window: Sequence[int]) -> float:
    """Loss observed at round ``t`` after playing ``window = (i_{t-d}, ..., i_t)``.

    Entries of the window belonging to rounds ``<= 0`` are ignored and may be
    ``None``.
    """
    d = L.d
    if not 1 <= t <= L.T:
        raise ParameterError(f"round {t} outside 1..{L.T}")
    if len(window) != d + 1:
        raise ParameterError(f"window must hold d+1={d + 1} actions, got {len(window)}")
    total = 0.0
    for s in range(d + 1):
        tau = t - s
        if tau < 1:
            break
        arm = window[d - s]
        _check_arm(arm, L.K)
        total += L.values[tau - 1, s, arm]
    return float(total)


def composite_losses(L: LossTensor, actions: Sequence[int]) -> np.ndarray:
    """Composite loss of every round ``1..T`` for a full action sequence."""
    a = np.asarray(actions, dtype=np.int64)
    if a.shape != (L.T,):
        raise ParameterError(f"action sequence has length {a.size}, expected T={L.T}")
    if a.size and (a.min() < 0 or a.max() >= L.K):
        raise InvalidArmError(f"actions must lie in 0..{L.K - 1}")
    out = np.zeros(L.T)
    rounds = np.arange(L.T)
    for s in range(min(L.d, L.T - 1) + 1):
        # component s of round tau lands at round tau + s
        out[s:] += L.values[rounds[: L.T - s], s, a[: L.T - s]]
    return out


def comparator_losses(L: LossTensor) -> np.ndarray:
    """``sum_t composite_loss(L, t, [i]*(d+1))`` for every arm, as a length-K array."""
    total = np.zeros(L.K)
    for s in range(min(L.d, L.T - 1) + 1):
        total += L.values[: L.T - s, s, :].sum(axis=0)
    return total


def comparator_loss(L: LossTensor, arm: int) -> float:
    _check_arm(arm, L.K)
    return float(comparator_losses(L)[arm])


def regret(L: LossTensor, actions: Sequence[int]) -> RegretRecord:
    """Realized regret of ``actions`` against the best fixed arm (ties to lowest index)."""
    cumulative = float(composite_losses(L, actions).sum())
    comp = comparator_losses(L)
    best = int(np.argmin(comp))
    return RegretRecord(cumulative, comp, best, cumulative - float(comp[best]))
