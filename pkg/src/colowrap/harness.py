"""Seeded Monte Carlo experiments, stability measurement and parameter sweeps.

Episode seeds are derived from ``(master_seed, cell_index, seed_index)`` with
:class:`numpy.random.SeedSequence`, which is platform independent. Within an
episode seed, label 0 drives the Bernoulli stream, label 1 the policy draws and
label 2 the instance generator.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environments import build_env
from .errors import ParameterError
from .policies import default_tunings, make_policy, positive_movement
from .wrapper import RunRecord, check_beta, run_episode

log = logging.getLogger(__name__)

ENV_LABEL = 2


def derive_seed(master_seed: int, cell: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, cell, index]).generate_state(1, np.uint64)[0])


def env_seed(episode_seed: int) -> int:
    return int(np.random.SeedSequence([episode_seed, ENV_LABEL]).generate_state(1, np.uint64)[0])


@dataclass
class ExperimentConfig:
    algo: str = "ftrl"
    K: int = 2
    T: int = 1000
    d: int = 0
    env: str = "gap:0.2"
    n_seeds: int = 1
    master_seed: int = 0
    beta: float | None = None
    eta: float | None = None
    cell: int = 0
    output: str | None = None

    def resolved(self) -> "ExperimentConfig":
        """Copy with ``beta``/``eta`` defaults filled in and all constraints checked.

        For ``reduction`` environments the horizon is first cut down to a
        multiple of ``d+1``, which costs at most ``d`` rounds of regret.
        """
        if self.algo not in ("exp3", "ftrl"):
            raise ParameterError(f"unknown algo {self.algo!r}")
        if self.n_seeds < 1:
            raise ParameterError("n_seeds must be >= 1")
        if self.K < 1 or self.T < 1 or self.d < 0:
            raise ParameterError("need K >= 1, T >= 1, d >= 0")
        T = self.T
        if self.env.partition(":")[0] == "reduction" and T % (self.d + 1):
            T = (self.d + 1) * (T // (self.d + 1))
            log.info("reduction env: horizon cut from %d to %d (multiple of d+1)", self.T, T)
            if T == 0:
                raise ParameterError("reduction env needs T >= d+1")
        eta, beta = self.eta, self.beta
        if eta is None or beta is None:
            default_eta, default_beta = default_tunings(self.algo, self.K, T, self.d)
            eta = default_eta if eta is None else eta
            beta = default_beta if beta is None else beta
        check_beta(beta, self.d)
        if not eta > 0:
            raise ParameterError("eta must be > 0")
        return dataclasses.replace(self, T=T, eta=float(eta), beta=float(beta))

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    seeds: list

    @property
    def regrets(self) -> np.ndarray:
        return np.array([r.regret for r in self.records])

    @property
    def mean_regret(self) -> float:
        return float(self.regrets.mean())

    @property
    def std_regret(self) -> float:
        return float(self.regrets.std(ddof=1)) if len(self.records) > 1 else 0.0

    @property
    def sem_regret(self) -> float:
        return self.std_regret / math.sqrt(len(self.records))

    def summary(self) -> dict:
        cfg = self.config
        return {
            "algo": cfg.algo, "K": cfg.K, "T": cfg.T, "d": cfg.d, "env": cfg.env,
            "eta": cfg.eta, "beta": cfg.beta, "n_seeds": cfg.n_seeds,
            "master_seed": cfg.master_seed,
            "mean_regret": self.mean_regret, "std_regret": self.std_regret,
            "sem_regret": self.sem_regret,
            "bound": regret_bound(cfg.d, cfg.K, self.records[0].actions.size),
            "runs": [{"seed": s, **r.summary()} for s, r in zip(self.seeds, self.records)],
        }


def regret_bound(d: int, K: int, T: int) -> float:
    """``c * sqrt((d+1) K T)`` with ``c = 2 sqrt 2`` for ``d = 0`` and 28 otherwise."""
    c = 2 * math.sqrt(2) if d == 0 else 28.0
    return c * math.sqrt((d + 1) * K * T)


def _episode(args):
    cfg, seed = args
    L = build_env(cfg.env, cfg.T, cfg.d, cfg.K, env_seed(seed))
    return run_episode(L, {"algo": cfg.algo, "eta": cfg.eta}, cfg.beta, seed)


def _map(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run ``cfg.n_seeds`` independent episodes; deterministic in ``cfg.master_seed``."""
    cfg = cfg.resolved()
    seeds = [derive_seed(cfg.master_seed, cfg.cell, k) for k in range(cfg.n_seeds)]
    records = _map(_episode, [(cfg, s) for s in seeds], workers)
    return ExperimentResult(cfg, records, seeds)


def write_experiment(result: ExperimentResult, outdir) -> None:
    """Write ``summary.json`` and one ``trace_<k>.csv`` per seed into ``outdir``."""
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "summary.json", "w") as fh:
        json.dump(result.summary(), fh, indent=2)
    for k, rec in enumerate(result.records):
        rec.to_csv(outdir / f"trace_{k}.csv")


# -- stability ---------------------------------------------------------------

LOSS_STREAMS = ("zero", "uniform", "spike", "greedy", "anti")


def _loss_vector(kind, n, q, K, rng):
    if kind == "zero":
        return np.zeros(K)
    if kind == "uniform":
        return rng.random(K)
    if kind == "spike":
        # all mass on one arm, rotating every 50 rounds, with rare full-loss bursts
        vec = np.zeros(K)
        vec[(n // 50) % K] = 1.0
        if n % 97 == 0:
            vec[:] = 1.0
        return vec
    if kind == "greedy":
        vec = np.zeros(K)
        vec[int(np.argmax(q))] = 1.0
        return vec
    if kind == "anti":
        vec = np.ones(K)
        vec[int(np.argmin(q))] = 0.0
        return vec
    raise ParameterError(f"unknown loss stream {kind!r}; choose from {', '.join(LOSS_STREAMS)}")


@dataclass
class StabilityReport:
    algo: str
    eta: float
    K: int
    losses: str
    empirical_xi: float
    max_step: float
    n_updates: int
    max_conditional_xi: float = math.nan
    bound: float = math.nan

    def to_json(self) -> dict:
        """Plain dict; NaN (statistic not computed) becomes ``None`` so the output is strict JSON."""
        out = dataclasses.asdict(self)
        return {k: None if isinstance(v, float) and math.isnan(v) else v for k, v in out.items()}


def stability_bound(algo: str, eta: float, K: int) -> float:
    return eta if algo == "exp3" else 2 * (1 + math.log(K)) / eta


def conditional_movement(policy, loss_vec) -> float:
    """Exact ``E[sum_i (q_next - q)^+]`` over the policy's own arm draw."""
    q = policy.distribution()
    total = 0.0
    for j in range(policy.K):
        if q[j] <= 0:
            continue
        trial = policy.copy()
        trial.update(j, float(loss_vec[j]))
        total += q[j] * positive_movement(q, trial.distribution())
    return total


def measure_stability(algo_config: dict, losses: str = "spike", n_rounds: int = 10_000,
                      n_seeds: int = 1, master_seed: int = 0,
                      exact_every: int = 0) -> StabilityReport:
    """Run the bare policy and record ``sum_i (q_{n+1}(i) - q_n(i))^+`` every round.

    With ``exact_every > 0`` the exact conditional expectation of that movement
    is also evaluated every ``exact_every`` rounds (costs K policy updates).
    """
    if n_rounds < 1 or n_seeds < 1:
        raise ParameterError("n_rounds and n_seeds must be >= 1")
    steps = []
    cond_max = -math.inf
    K = int(algo_config["K"])
    for k in range(n_seeds):
        seed = derive_seed(master_seed, 0, k)
        loss_rng = np.random.default_rng(np.random.SeedSequence([seed, ENV_LABEL]))
        pol_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        policy = make_policy(algo_config)
        for n in range(n_rounds):
            q = policy.distribution()
            vec = _loss_vector(losses, n, q, K, loss_rng)
            if exact_every and n % exact_every == 0:
                cond_max = max(cond_max, conditional_movement(policy, vec))
            arm = policy.sample(pol_rng)
            policy.update(arm, float(vec[arm]))
            steps.append(positive_movement(q, policy.distribution()))
    steps = np.array(steps)
    return StabilityReport(
        algo=algo_config["algo"], eta=float(algo_config["eta"]), K=K, losses=losses,
        empirical_xi=float(steps.mean()), max_step=float(steps.max()),
        n_updates=int(steps.size),
        max_conditional_xi=cond_max if exact_every else math.nan,
        bound=stability_bound(algo_config["algo"], float(algo_config["eta"]), K))


# -- sweeps ------------------------------------------------------------------

SWEEP_COLUMNS = ["d", "K", "T", "seed", "regret", "bound_28", "ratio"]


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def cell_summary(self) -> list:
        """Per (d, K, T): mean regret, max ratio and the worst-case regret bound."""
        out = []
        key = lambda r: (r["d"], r["K"], r["T"])
        for (d, K, T), group in itertools.groupby(sorted(self.rows, key=key), key=key):
            group = list(group)
            regrets = [r["regret"] for r in group]
            out.append({"d": d, "K": K, "T": T, "n": len(group),
                        "mean_regret": float(np.mean(regrets)),
                        "max_ratio": max(r["ratio"] for r in group),
                        "bound": regret_bound(d, K, T)})
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for r in self.rows:
                writer.writerow([r["d"], r["K"], r["T"], r["seed"],
                                 format(r["regret"], ".17g"), format(r["bound_28"], ".17g"),
                                 format(r["ratio"], ".17g")])

    @classmethod
    def from_csv(cls, path) -> "SweepResult":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != SWEEP_COLUMNS:
                raise ParameterError(f"expected columns {SWEEP_COLUMNS}, got {reader.fieldnames}")
            for row in reader:
                rows.append({"d": int(row["d"]), "K": int(row["K"]), "T": int(row["T"]),
                             "seed": int(row["seed"]), "regret": float(row["regret"]),
                             "bound_28": float(row["bound_28"]), "ratio": float(row["ratio"])})
        return cls(rows)


def sweep(ds, Ks, Ts, env: str = "gap:0.2", n_seeds: int = 5, master_seed: int = 0,
          algo: str = "ftrl", workers: int = 1) -> SweepResult:
    """Run every (d, K, T) cell with default tunings. Cell ``c`` uses seeds derived with index ``c``."""
    cells = list(itertools.product(ds, Ks, Ts))
    jobs, meta = [], []
    for c, (d, K, T) in enumerate(cells):
        cfg = ExperimentConfig(algo=algo, K=K, T=T, d=d, env=env, n_seeds=n_seeds,
                               master_seed=master_seed, cell=c).resolved()
        for k in range(n_seeds):
            seed = derive_seed(master_seed, c, k)
            jobs.append((cfg, seed))
            meta.append((d, K, seed))
    records = _map(_episode, jobs, workers)
    rows = []
    for (d, K, seed), rec in zip(meta, records):
        T_eff = int(rec.actions.size)
        b28 = 28.0 * math.sqrt((d + 1) * K * T_eff)
        rows.append({"d": d, "K": K, "T": T_eff, "seed": seed, "regret": rec.regret,
                     "bound_28": b28, "ratio": rec.regret / b28})
    rows.sort(key=lambda r: (r["d"], r["K"], r["T"]))
    return SweepResult(rows)
