"""Exit criteria, one test each, at the stated sizes and tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line (visible without ``-s``).
The regret-bound grid (criterion 1) runs 360 episodes of 50,000 rounds and
takes several minutes on one core.
"""

import math

import numpy as np
import pytest

from colowrap.core import LossTensor, comparator_losses, composite_losses
from colowrap.environments import (
    make_random_valid,
    make_reduction,
    make_stochastic_gap,
    random_linear_losses,
)
from colowrap.harness import ExperimentConfig, regret_bound, measure_stability, run_experiment
from colowrap.policies import solve_lambda, tsallis_distribution, tsallis_objective
from colowrap.reference import (
    check_ragionieri,
    check_reduction,
    check_window_bound,
    oracle_tsallis_argmin,
    oracle_update_rounds,
)
from colowrap.wrapper import BernoulliStream, is_update_round, run_episode, run_standalone

BLOCK_EXAMPLE_BITS = [1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}  {detail}")
        assert ok, f"criterion {number} failed: {detail}"
    return emit


@pytest.mark.slow
def test_c01_wrapped_ftrl_regret_bound(report):
    failures, worst = [], 0.0
    for env in ("gap:0.2", "reduction:0.2"):
        for d in (0, 2, 8):
            for K in (2, 4, 16):
                cfg = ExperimentConfig(algo="ftrl", K=K, T=50_000, d=d, env=env, n_seeds=20,
                                       master_seed=2018).resolved()
                assert cfg.beta == 1 / (2 * d + 1)
                assert cfg.eta == math.sqrt(0.5 * (cfg.T // (2 * d + 1)))
                res = run_experiment(cfg)
                bound = regret_bound(d, K, cfg.T)
                worst = max(worst, res.mean_regret / bound)
                if not res.mean_regret <= bound:
                    failures.append(f"{env} d={d} K={K}: {res.mean_regret:.1f} > {bound:.1f}")
    report(1, "mean regret <= c*sqrt((d+1)KT) on every cell", not failures,
           f"worst mean/bound={worst:.3f} {failures}")


def test_c02_exp3_pointwise_stability(report):
    eta = 0.05
    worst = 0.0
    for losses in ("greedy", "spike", "anti"):
        rep = measure_stability({"algo": "exp3", "eta": eta, "K": 8}, losses, n_rounds=100_000)
        worst = max(worst, rep.max_step)
    report(2, "Exp3 per-round movement <= eta + 1e-12", worst <= eta + 1e-12,
           f"max step {worst:.6g} vs eta {eta}")


def test_c03_ftrl_stability(report):
    rows, ok = [], True
    for K in (2, 8, 64):
        for eta in (0.5, 5.0, 50.0):
            bound = 2 * (1 + math.log(K)) / eta
            for losses in ("greedy", "spike"):
                rep = measure_stability({"algo": "ftrl", "eta": eta, "K": K}, losses,
                                        n_rounds=10_000, exact_every=500)
                good = rep.empirical_xi <= bound and rep.max_conditional_xi <= bound
                ok &= good
                rows.append(f"K={K} eta={eta} {losses}: {rep.empirical_xi:.4g}/{bound:.4g}")
    report(3, "FTRL empirical xi <= 2(1+ln K)/eta", ok, "; ".join(rows))


def test_c04_ftrl_standalone_regret(report):
    N = 10_000
    eta = math.sqrt(N / 2)
    worst, ok = 0.0, True
    for K in (2, 8):
        bound = 2 * math.sqrt(2 * K * N)
        for seed in range(10):
            for L in (make_stochastic_gap(N, 0, K, 0.2, seed=seed),
                      make_random_valid(N, 0, K, seed=seed)):
                rec = run_standalone(L.true_losses(), {"algo": "ftrl", "eta": eta}, seed)
                worst = max(worst, rec.regret / bound)
                ok &= rec.regret <= bound
    report(4, "standalone FTRL regret <= 2 sqrt(2KN) in all runs", ok,
           f"worst regret/bound={worst:.3f}")


def test_c05_lambda_solver(report):
    rng = np.random.default_rng(5)
    max_res, max_excess, ok = 0.0, -math.inf, True
    for _ in range(10_000):
        K = int(rng.integers(1, 17))
        eta = float(10 ** rng.uniform(-2, 2))
        w = np.sort(rng.random(K) * 10 ** rng.uniform(-2, 3))
        base = solve_lambda(w, eta)
        max_res = max(max_res, abs(base.residual))
        ok &= abs(base.residual) <= 1e-10 and base.lambda_ < w.min()
        delta = float(rng.uniform(0, 100)) or 1e-3
        for j in range(K):
            shifted = w.copy()
            shifted[j] += delta
            diff = solve_lambda(shifted, eta).lambda_ - base.lambda_
            max_excess = max(max_excess, diff - delta / (j + 1))
            ok &= diff <= delta / (j + 1) + 1e-8
    report(5, "|g-1|<=1e-10, lambda<min w, shift bound", ok,
           f"max residual {max_res:.2e}, max shift excess {max_excess:.2e}")


def test_c06_grid_optimality(report):
    rng = np.random.default_rng(6)
    worst = -math.inf
    for _ in range(500):
        K = int(rng.integers(1, 5))
        eta = float(10 ** rng.uniform(-1, 1))
        w = rng.random(K) * float(rng.choice([0.1, 1.0, 5.0]))
        q = tsallis_distribution(w, eta)
        grid = oracle_tsallis_argmin(w, eta, grid_step=1e-3)
        worst = max(worst, tsallis_objective(q, w, eta) - tsallis_objective(grid, w, eta))
    report(6, "closed-form objective <= 1e-3 grid minimum + 1e-6", worst <= 1e-6,
           f"max(closed - grid) = {worst:.3e}")


def test_c07_d0_reduces_to_base(report):
    T = 10_000
    ok = True
    for algo, eta in (("ftrl", math.sqrt(T / 2)), ("exp3", 0.02)):
        L = make_stochastic_gap(T, 0, 4, 0.2, seed=70)
        wrapped = run_episode(L, {"algo": algo, "eta": eta}, 1.0, seed=71)
        base = run_standalone(L.true_losses(), {"algo": algo, "eta": eta}, seed=71)
        ok &= bool(np.array_equal(wrapped.actions, base.actions))
    report(7, "d=0, beta=1 wrapper actions == base policy actions", ok)


def test_c08_update_round_statistics(report):
    details, ok = [], True
    for d, beta in ((0, 0.5), (1, 1 / 3), (2, 0.2), (4, 1 / 9), (3, 0.05)):
        stream = BernoulliStream(beta, np.random.default_rng(800 + d), d=d)
        bits, updates = [], []
        for t in range(1, 1_000_001):
            bits.append(stream.next())
            if is_update_round(t, d, stream.history):
                updates.append(t)
        n = 1_000_000 - 2 * d
        p = beta * (1 - beta) ** (2 * d)
        freq = len(updates) / n
        se = math.sqrt(p * (1 - p) / n)
        gaps_ok = all(b - a >= 2 * d + 1 for a, b in zip(updates, updates[1:]))
        ok &= abs(freq - p) <= 3 * se and gaps_ok and updates == oracle_update_rounds(bits, d)
        details.append(f"d={d}: {freq:.5f} vs {p:.5f} ({abs(freq - p) / se:.2f} se)")
    L = LossTensor(np.zeros((23, 3, 2)))
    rec = run_episode(L, {"algo": "ftrl", "eta": 1.0}, 0.2, seed=0, bits=BLOCK_EXAMPLE_BITS)
    ok &= rec.update_rounds == [8, 18, 23]
    report(8, "update frequency within 3 se, gaps >= 2d+1, worked block example reproduced", ok,
           "; ".join(details))


def test_c09_window_and_summation_identities(report):
    ok = True
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        L = make_random_valid(int(rng.integers(1, 40)), int(rng.integers(0, 5)),
                              int(rng.integers(1, 4)), seed, float(rng.random()))
        ok &= check_window_bound(L)
    for d in range(1, 7):
        T = 8 * (d + 1)
        packed = np.zeros((T, d + 1, 2))
        for t in range(T):
            packed[t, d if t % (2 * d) < d else 0, :] = 1.0
        ok &= check_window_bound(LossTensor(packed))
        full_late = np.zeros((T, d + 1, 1))
        full_late[:, d, 0] = 1.0
        full_late[::2, :, 0] = np.eye(d + 1)[0]
        ok &= check_window_bound(LossTensor(full_late))
    rng = np.random.default_rng(9)
    for _ in range(1000):
        d = int(rng.integers(0, 7))
        a = int(rng.integers(-50, 50))
        b = a + int(rng.integers(0, 40))
        ok &= check_ragionieri(rng.normal(size=b - a + 2 * d + 1), a, b, d)
    report(9, "window bound and weighted-sum identity hold on all cases", ok)


def test_c10_reduction_equivalence(report):
    ok, n_checked = True, 0
    for d in (0, 1, 2, 5):
        for K in (2, 3, 5):
            blocks = 60
            lin = random_linear_losses(blocks, K, seed=10 * d + K)
            T = blocks * (d + 1)
            L = make_reduction(T, d, K, lin)
            beta = 1.0 if d == 0 else 1 / (2 * d + 1)
            rec = run_episode(L, {"algo": "exp3", "eta": 0.3}, beta, seed=d + K)
            rng = np.random.default_rng(d * 7 + K)
            for actions in (rec.actions, rng.integers(0, K, size=T)):
                ok &= check_reduction(L, lin, actions, tol=1e-12) == []
                comp = composite_losses(L, actions)
                for t in range(1, T + 1):
                    if t % (d + 1):
                        ok &= comp[t - 1] == 0
                    else:
                        q = np.bincount(actions[t - d - 1:t], minlength=K) / (d + 1)
                        ok &= abs(comp[t - 1] - (d + 1) * lin[t // (d + 1) - 1] @ q) <= 1e-12
                n_checked += 1
            ok &= comparator_losses(L).min() == (d + 1) * lin.sum(axis=0).min()
    report(10, "reduction composite losses and comparator identity", ok,
           f"{n_checked} action sequences")
