"""The composite-loss wrapper: blocks of frozen actions ended by update rounds.

A round ``t >= 2d+1`` is an update round when the Bernoulli stream shows a one
at ``t`` preceded by ``2d`` zeros. The round after an update round (and round 1)
is a draw round, where a fresh action is sampled from the base policy; every
other round repeats the previous action. At an update round the base policy
receives the sum of the last ``d+1`` observed composite losses divided by
``2d+1``, which always lies in [0, 1].
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import LossTensor, RegretRecord, composite_loss, regret
from .errors import InvariantViolation, ParameterError
from .policies import Policy, make_policy, positive_movement

# labels for the two independent sub-streams derived from one episode seed
BERNOULLI_LABEL = 0
POLICY_LABEL = 1

FED_TOLERANCE = 1e-9


def episode_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(bernoulli_rng, policy_rng) derived from ``seed`` by fixed labels."""
    return (
        np.random.default_rng(np.random.SeedSequence([seed, BERNOULLI_LABEL])),
        np.random.default_rng(np.random.SeedSequence([seed, POLICY_LABEL])),
    )


def check_beta(beta: float, d: int) -> None:
    if d == 0:
        if not 0 < beta <= 1:
            raise ParameterError(f"beta must lie in (0, 1] for d=0, got {beta}")
    elif not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1) for d>0, got {beta}")


class BernoulliStream:
    """Lazily drawn i.i.d. Bernoulli(beta) bits with a short history buffer.

    ``prefix`` bits, when given, are emitted first; random bits follow.
    Values are drawn in chunks but each is consumed exactly once.
    """

    def __init__(self, beta: float, rng: np.random.Generator, d: int = 0,
                 prefix: Sequence[int] | None = None, chunk: int = 4096):
        if not 0 < beta <= 1:
            raise ParameterError(f"beta must lie in (0, 1], got {beta}")
        self.beta = float(beta)
        self.rng = rng
        self.history = deque(maxlen=2 * d + 1)
        self._prefix = [int(bool(b)) for b in (prefix or [])]
        self._chunk = chunk
        self._buf: list[int] = []
        self._pos = 0
        self.position = 0

    def next(self) -> int:
        if self.position < len(self._prefix):
            b = self._prefix[self.position]
        else:
            if self._pos == len(self._buf):
                self._buf = (self.rng.random(self._chunk) < self.beta).astype(int).tolist()
                self._pos = 0
            b = self._buf[self._pos]
            self._pos += 1
        self.position += 1
        self.history.append(b)
        return b


def is_update_round(t: int, d: int, booleans: Sequence[int]) -> bool:
    """Whether round ``t`` is an update round given ``booleans = b_{t-2d}, ..., b_t``.

    Missing history (fewer than ``2d+1`` values) counts as "not an update".
    """
    if t < 2 * d + 1 or len(booleans) < 2 * d + 1:
        return False
    tail = list(booleans)[-(2 * d + 1):]
    if not tail[-1]:
        return False
    return not any(tail[:-1])


@dataclass
class WrapperState:
    d: int
    K: int
    round: int = 0
    block_index: int = 0
    current_dist: np.ndarray | None = None
    current_action: int | None = None
    last_was_update: bool = False
    window_buffer: deque = field(default=None)
    action_window: deque = field(default=None)

    def __post_init__(self):
        if self.window_buffer is None:
            self.window_buffer = deque(maxlen=self.d + 1)
        if self.action_window is None:
            self.action_window = deque([None] * (self.d + 1), maxlen=self.d + 1)


@dataclass(frozen=True)
class StepRecord:
    t: int
    action: int
    composite_loss: float
    is_draw: bool
    is_update: bool
    fed_loss: float = math.nan
    movement: float = math.nan


def wrapper_step(state: WrapperState, policy: Policy, L: LossTensor,
                 stream: BernoulliStream, rng: np.random.Generator) -> StepRecord:
    """Advance the wrapper by one round. ``state`` and ``policy`` are updated in place."""
    t = state.round + 1
    if t > L.T:
        raise ParameterError(f"round {t} past the horizon T={L.T}")
    d = state.d

    is_draw = t == 1 or state.last_was_update
    if is_draw:
        state.block_index += 1
        state.current_dist = policy.distribution()
        state.current_action = policy.sample(rng)
    action = state.current_action

    state.action_window.append(action)
    observed = composite_loss(L, t, state.action_window)
    state.window_buffer.append(observed)

    stream.next()
    update = is_update_round(t, d, stream.history)
    fed = movement = math.nan
    if update:
        fed = sum(state.window_buffer) / (2 * d + 1)
        if not -FED_TOLERANCE <= fed <= 1 + FED_TOLERANCE:
            raise InvariantViolation(
                f"fed loss {fed!r} at round {t} outside [0, 1]; the loss tensor is corrupted")
        fed = min(max(fed, 0.0), 1.0)
        q_before = policy.distribution()
        policy.update(action, fed)
        movement = positive_movement(q_before, policy.distribution())

    state.round = t
    state.last_was_update = update
    return StepRecord(t, action, observed, is_draw, update, fed, movement)


@dataclass
class RunRecord:
    actions: np.ndarray
    composite_losses: np.ndarray
    is_update: np.ndarray
    update_rounds: list
    fed_losses: list
    stability_trace: list
    regret_record: RegretRecord
    seed: int | None = None

    @property
    def regret(self) -> float:
        return self.regret_record.regret

    @property
    def n_updates(self) -> int:
        return len(self.update_rounds)

    def summary(self) -> dict:
        return {"regret": self.regret, "best_arm": self.regret_record.best_arm,
                "n_updates": self.n_updates}

    def to_csv(self, path) -> None:
        """Per-round trace with header ``t,action,composite_loss,is_update,fed_loss``."""
        fed = dict(zip(self.update_rounds, self.fed_losses))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "action", "composite_loss", "is_update", "fed_loss"])
            for k, (a, c, u) in enumerate(zip(self.actions, self.composite_losses, self.is_update)):
                t = k + 1
                writer.writerow([t, int(a), format(c, ".17g"), int(u),
                                 format(fed[t], ".17g") if u else ""])

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def run_episode(L: LossTensor, policy_config: dict, beta: float, seed: int,
                bits: Sequence[int] | None = None) -> RunRecord:
    """Play the wrapped policy for ``L.T`` rounds on ``L``.

    ``policy_config`` is ``{"algo", "eta"}`` (``K`` is taken from the tensor).
    ``bits`` optionally fixes the first Bernoulli values.
    """
    check_beta(beta, L.d)
    policy = make_policy({**policy_config, "K": L.K})
    bern_rng, policy_rng = episode_rngs(seed)
    stream = BernoulliStream(beta, bern_rng, d=L.d, prefix=bits)
    state = WrapperState(d=L.d, K=L.K)

    actions = np.empty(L.T, dtype=np.int64)
    observed = np.empty(L.T)
    updates = np.zeros(L.T, dtype=bool)
    update_rounds, fed_losses, trace = [], [], []
    for k in range(L.T):
        rec = wrapper_step(state, policy, L, stream, policy_rng)
        actions[k] = rec.action
        observed[k] = rec.composite_loss
        if rec.is_update:
            updates[k] = True
            update_rounds.append(rec.t)
            fed_losses.append(rec.fed_loss)
            trace.append(rec.movement)
    return RunRecord(actions, observed, updates, update_rounds, fed_losses, trace,
                     regret(L, actions), seed)


def run_standalone(losses: np.ndarray, policy_config: dict, seed: int) -> RunRecord:
    """Run the bare base policy on a ``(N, K)`` array of [0, 1] losses.

    Uses the same policy sub-stream as :func:`run_episode`, so with ``d = 0``
    and ``beta = 1`` both produce the same actions.
    """
    losses = np.asarray(losses, dtype=np.float64)
    N, K = losses.shape
    policy = make_policy({**policy_config, "K": K})
    _, policy_rng = episode_rngs(seed)
    actions = np.empty(N, dtype=np.int64)
    trace = []
    for n in range(N):
        q = policy.distribution()
        arm = policy.sample(policy_rng)
        policy.update(arm, float(losses[n, arm]))
        actions[n] = arm
        trace.append(positive_movement(q, policy.distribution()))
    L = LossTensor(losses[:, None, :])
    rec = regret(L, actions)
    observed = losses[np.arange(N), actions]
    return RunRecord(actions, observed, np.ones(N, dtype=bool), list(range(1, N + 1)),
                     observed.tolist(), trace, rec, seed)
