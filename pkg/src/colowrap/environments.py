"""Generators of valid loss tensors.

All generators are pure functions of their arguments (and seed); the tensor is
built up front, so the adversary is oblivious to the player's randomness.
"""

from __future__ import annotations

import numpy as np

from .core import LossTensor
from .errors import ParameterError


def _check_dims(T, d, K):
    if T < 1 or d < 0 or K < 1:
        raise ParameterError(f"need T >= 1, d >= 0, K >= 1 (got T={T}, d={d}, K={K})")


def _base(base_losses, T, K):
    base = np.asarray(base_losses, dtype=np.float64)
    if base.shape != (T, K):
        raise ParameterError(f"base_losses must have shape {(T, K)}, got {base.shape}")
    if np.any(base < 0) or np.any(base > 1):
        raise ParameterError("base losses must lie in [0, 1]")
    return base


def make_delayed(T: int, d: int, K: int, base_losses, delays) -> LossTensor:
    """Round ``t``'s whole loss is charged ``delays[t]`` rounds later (classic delayed bandits)."""
    _check_dims(T, d, K)
    base = _base(base_losses, T, K)
    delays = np.asarray(delays)
    if delays.shape != (T,) or np.any(delays < 0) or np.any(delays > d) or \
            not np.all(np.equal(np.mod(delays, 1), 0)):
        raise ParameterError(f"delays must be T={T} integers in 0..{d}")
    values = np.zeros((T, d + 1, K))
    values[np.arange(T), delays.astype(np.int64), :] = base
    return LossTensor(values)


def make_spread(T: int, d: int, K: int, base_losses, weights) -> LossTensor:
    """``values[t, s, i] = base_losses[t, i] * weights[t, s]``."""
    _check_dims(T, d, K)
    base = _base(base_losses, T, K)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (T, d + 1):
        raise ParameterError(f"weights must have shape {(T, d + 1)}, got {weights.shape}")
    if np.any(weights < 0) or np.any(weights.sum(axis=1) > 1 + 1e-9):
        raise ParameterError("weights must be nonnegative with per-round sum <= 1")
    return LossTensor(base[:, None, :] * weights[:, :, None])


def make_reduction(T: int, d: int, K: int, linear_losses) -> LossTensor:
    """Linear-bandit embedding: block ``u`` of length ``d+1`` carries loss vector ``linear_losses[u]``.

    Component ``s`` of round ``t`` equals ``linear_losses[ceil(t/(d+1)) - 1][i]``
    when ``t + s`` is a multiple of ``d+1`` and is zero otherwise, so composite
    losses are nonzero only at the last round of each block.
    """
    _check_dims(T, d, K)
    if T % (d + 1):
        raise ParameterError(f"T={T} must be a multiple of d+1={d + 1}")
    n_blocks = T // (d + 1)
    lin = np.asarray(linear_losses, dtype=np.float64)
    if lin.shape != (n_blocks, K):
        raise ParameterError(f"linear_losses must have shape {(n_blocks, K)}, got {lin.shape}")
    if np.any(lin < 0) or np.any(lin > 1):
        raise ParameterError("linear losses must lie in [0, 1]")
    values = np.zeros((T, d + 1, K))
    for t in range(1, T + 1):
        s = (-t) % (d + 1)
        values[t - 1, s, :] = lin[(t - 1) // (d + 1)]
    return LossTensor(values)


def make_random_valid(T: int, d: int, K: int, seed: int, sparsity: float = 0.0,
                      mean: float = 0.5) -> LossTensor:
    """Random tensor for property tests.

    Each true loss ``l_t(i)`` is Beta-distributed with the given mean and split
    over the delay slots by Dirichlet weights; a fraction ``sparsity`` of the
    slots is zeroed (at least one slot always keeps the mass).
    """
    _check_dims(T, d, K)
    if not 0 <= sparsity <= 1:
        raise ParameterError("sparsity must lie in [0, 1]")
    if not 0 < mean < 1:
        raise ParameterError("mean must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    totals = rng.beta(2 * mean, 2 * (1 - mean), size=(T, K))
    raw = rng.exponential(size=(T, d + 1, K))
    keep = rng.random((T, d + 1, K)) >= sparsity
    forced = rng.integers(0, d + 1, size=(T, K))
    keep[np.arange(T)[:, None], forced, np.arange(K)[None, :]] = True
    raw *= keep
    split = raw / raw.sum(axis=1, keepdims=True)
    return LossTensor(split * totals[:, None, :])


def make_stochastic_gap(T: int, d: int, K: int, gap: float, seed: int,
                        best_arm: int = 0) -> LossTensor:
    """Bernoulli losses with mean ``(1 - gap)/2`` on ``best_arm`` and ``(1 + gap)/2`` elsewhere.

    Each 0/1 loss is spread evenly over the ``d+1`` components.
    """
    _check_dims(T, d, K)
    if not 0 < gap <= 1:
        raise ParameterError(f"gap must lie in (0, 1], got {gap}")
    if not 0 <= best_arm < K:
        raise ParameterError(f"best_arm {best_arm} outside 0..{K - 1}")
    means = np.full(K, 0.5 + gap / 2)
    means[best_arm] = 0.5 - gap / 2
    rng = np.random.default_rng(seed)
    draws = (rng.random((T, K)) < means).astype(np.float64)
    return LossTensor(np.repeat(draws[:, None, :] / (d + 1), d + 1, axis=1))


def random_linear_losses(n_blocks: int, K: int, seed: int, gap: float = 0.2,
                         best_arm: int = 0) -> np.ndarray:
    """Bernoulli loss vectors for :func:`make_reduction`, with one planted better arm."""
    if not 0 <= gap < 1:
        raise ParameterError("gap must lie in [0, 1)")
    means = np.full(K, 0.5 + gap / 2)
    means[best_arm] = 0.5 - gap / 2
    rng = np.random.default_rng(seed)
    return (rng.random((n_blocks, K)) < means).astype(np.float64)


ENV_KINDS = ("delayed", "spread", "reduction", "gap", "random")


def build_env(spec: str, T: int, d: int, K: int, seed: int) -> LossTensor:
    """Build a tensor from a CLI-style spec string.

    ``gap[:g]``, ``random[:sparsity]``, ``delayed``, ``spread``,
    ``reduction[:g]`` or ``file:<path>``. For ``reduction`` the horizon is cut
    down to the largest multiple of ``d+1`` not exceeding ``T``.
    """
    kind, _, arg = spec.partition(":")
    if kind == "file":
        if not arg:
            raise ParameterError("file env needs a path: file:<path>")
        return LossTensor.load(arg)
    try:
        param = float(arg) if arg else None
    except ValueError:
        raise ParameterError(f"bad env parameter in {spec!r}") from None
    rng = np.random.default_rng(seed)
    if kind == "gap":
        return make_stochastic_gap(T, d, K, 0.2 if param is None else param, seed)
    if kind == "random":
        return make_random_valid(T, d, K, seed, sparsity=param or 0.0)
    if kind == "delayed":
        return make_delayed(T, d, K, rng.random((T, K)), rng.integers(0, d + 1, size=T))
    if kind == "spread":
        weights = rng.dirichlet(np.ones(d + 1), size=T)
        return make_spread(T, d, K, rng.random((T, K)), weights)
    if kind == "reduction":
        n_blocks = T // (d + 1)
        if n_blocks == 0:
            raise ParameterError(f"T={T} shorter than one block of d+1={d + 1} rounds")
        lin = random_linear_losses(n_blocks, K, seed, gap=0.2 if param is None else param)
        return make_reduction(n_blocks * (d + 1), d, K, lin)
    raise ParameterError(f"unknown env {spec!r}; choose from {', '.join(ENV_KINDS)} or file:<path>")
