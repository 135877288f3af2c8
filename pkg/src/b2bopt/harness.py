"""Experiment driver: dataset loading, synthetic instances, Monte Carlo
trials over the solver family, trace/summary emission and the
invariant-check suites behind the ``check`` subcommand.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .core import ConfigError, DescentViolationError, SparseMatrix
from .metrics import stationarity_equivalence_check
from .bregman import relative_smoothness_check
from .nmf import NmfProblem, nmf_block_update
from .solvers import ALGORITHMS, RunTrace, SolverConfig, run

TRACE_HEADER = ["iter", "block_updates", "elapsed_s", "objective", "rel_residual",
                "proj_grad_norm", "rel_proj_grad", "chosen_block", "alpha"]


@dataclass(frozen=True)
class SyntheticSpec:
    m: int
    n: int
    rank: int
    noise_level: float = 0.0
    seed: int = 0


@dataclass
class ExperimentConfig:
    data_source: object        # path (str) or SyntheticSpec
    rank: int
    algorithms: tuple = ("gb2b",)
    epsilon: float = 1e-4
    max_iter: int = 1000
    trials: int = 1
    seed: int = 0
    assertions: bool = False
    iter_unit: str = "epoch"
    output_dir: str = "results"
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ConfigError("epsilon must lie in (0, 1]")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")


def generate_synthetic(m, n, rank, noise_level=0.0, seed=0):
    """Exactly factorizable (or noise-perturbed) nonnegative data.

    A = U* V*^T with factor entries uniform on [0, 1]; Gaussian noise of the
    given level is added and the result clamped at zero.  Deterministic per
    seed.  Returns (A, U*, V*).
    """
    if rank > min(m, n):
        raise ConfigError("rank must be at most min(m, n)")
    if noise_level < 0:
        raise ConfigError("noise_level must be nonnegative")
    rng = np.random.default_rng(seed)
    Ustar = rng.uniform(0.0, 1.0, (m, rank))
    Vstar = rng.uniform(0.0, 1.0, (n, rank))
    A = Ustar @ Vstar.T
    if noise_level > 0:
        A = np.maximum(A + noise_level * rng.standard_normal((m, n)), 0.0)
    return A, Ustar, Vstar


def load_data(config):
    from .mmio import load_matrix

    if isinstance(config.data_source, SyntheticSpec):
        src = config.data_source
        A, _, _ = generate_synthetic(src.m, src.n, src.rank,
                                     src.noise_level, src.seed)
        return A
    return load_matrix(str(config.data_source))


# ---------------------------------------------------------------------------
# traces and summaries


def write_trace(path, trace: RunTrace):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in trace.records:
            w.writerow([
                r.iteration, r.block_updates, repr(float(r.elapsed_s)),
                repr(float(r.objective)),
                "" if r.rel_residual is None else repr(float(r.rel_residual)),
                repr(float(r.proj_grad_norm)), repr(float(r.rel_proj_grad)),
                "" if r.chosen_block is None else r.chosen_block,
                "" if r.alpha is None else repr(float(r.alpha)),
            ])


def read_trace(path):
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header {header}")
        return [row for row in reader]


@dataclass
class ResultRow:
    algorithm: str
    trial: int
    iterations: int
    block_updates: int
    wall_time_s: float
    final_objective: float
    final_sq_error: float
    final_rel_residual: float | None
    final_rel_proj_grad: float
    status: str
    init_hash: str
    error: str = ""


SUMMARY_FIELDS = [f for f in ResultRow.__dataclass_fields__]
_AGG_FIELDS = ["iterations", "block_updates", "wall_time_s",
               "final_rel_residual", "final_rel_proj_grad"]


@dataclass
class ResultsSummary:
    rows: list = field(default_factory=list)

    def aggregates(self):
        """Per-algorithm mean and standard deviation over trials."""
        out = {}
        for algo in sorted({r.algorithm for r in self.rows}):
            rows = [r for r in self.rows if r.algorithm == algo and not r.error]
            stats = {"trials": len(rows)}
            for name in _AGG_FIELDS:
                vals = [getattr(r, name) for r in rows if getattr(r, name) is not None]
                if vals:
                    stats[f"{name}_mean"] = float(np.mean(vals))
                    stats[f"{name}_std"] = float(np.std(vals))
            out[algo] = stats
        return out


def write_summary(out_dir, summary: ResultsSummary):
    csv_path = os.path.join(out_dir, "summary.csv")
    with open(csv_path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for r in summary.rows:
            w.writerow([_cell(getattr(r, f)) for f in SUMMARY_FIELDS])
    json_path = os.path.join(out_dir, "summary.json")
    payload = {"rows": [asdict(r) for r in summary.rows],
               "aggregates": summary.aggregates()}
    with open(json_path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return csv_path, json_path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_summary(out_dir):
    rows = []
    with open(os.path.join(out_dir, "summary.csv"), newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(ResultRow(
                algorithm=rec["algorithm"], trial=int(rec["trial"]),
                iterations=int(rec["iterations"]),
                block_updates=int(rec["block_updates"]),
                wall_time_s=float(rec["wall_time_s"]),
                final_objective=float(rec["final_objective"]),
                final_sq_error=float(rec["final_sq_error"]),
                final_rel_residual=None if rec["final_rel_residual"] == ""
                else float(rec["final_rel_residual"]),
                final_rel_proj_grad=float(rec["final_rel_proj_grad"]),
                status=rec["status"], init_hash=rec["init_hash"],
                error=rec["error"]))
    return ResultsSummary(rows=rows)


# ---------------------------------------------------------------------------
# experiments


def run_experiment(config: ExperimentConfig):
    """Monte Carlo trials: one shared initial point per trial, every
    configured algorithm started from it.  Per-run errors are recorded on
    their row; remaining runs continue.  Returns the summary; traces land in
    ``output_dir`` as ``<algo>_t<trial>.csv``.
    """
    A = load_data(config)
    m, n = A.shape
    if not 1 <= config.rank <= min(m, n):
        raise ConfigError(f"rank {config.rank} must lie in [1, {min(m, n)}]")
    os.makedirs(config.output_dir, exist_ok=True)
    problem = NmfProblem(A, config.rank)

    jobs = []
    for trial in range(config.trials):
        trial_seed = config.seed ^ trial
        x0 = np.random.default_rng(trial_seed).uniform(0.0, 1.0, problem.n)
        init_hash = hashlib.sha1(x0.tobytes()).hexdigest()[:16]
        for algo in config.algorithms:
            jobs.append((algo, trial, trial_seed, x0, init_hash))

    def one(job):
        algo, trial, trial_seed, x0, init_hash = job
        solver_cfg = SolverConfig(
            algorithm=algo, epsilon=config.epsilon, max_iter=config.max_iter,
            iter_unit=config.iter_unit, seed=trial_seed,
            assertions=config.assertions)
        try:
            trace = run(problem, solver_cfg, x0=x0)
        except Exception as exc:  # noqa: BLE001 - recorded per row
            return ResultRow(algo, trial, 0, 0, 0.0, np.nan, np.nan, None,
                             np.nan, "Error", init_hash, error=str(exc))
        write_trace(os.path.join(config.output_dir, f"{algo}_t{trial}.csv"), trace)
        return ResultRow(
            algorithm=algo, trial=trial,
            iterations=trace.records[-1].iteration,
            block_updates=trace.block_updates,
            wall_time_s=trace.wall_time_s,
            final_objective=trace.final_objective,
            final_sq_error=2.0 * trace.final_objective,
            final_rel_residual=trace.final_rel_residual,
            final_rel_proj_grad=trace.final_rel_proj_grad,
            status=trace.status, init_hash=init_hash)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    rows.sort(key=lambda r: (r.algorithm, r.trial))
    summary = ResultsSummary(rows=rows)
    write_summary(config.output_dir, summary)
    return summary


# ---------------------------------------------------------------------------
# invariant suites


def finite_difference_check(problem, x, step=1e-6, rtol=1e-5):
    """Central-difference validation of every block gradient.

    Returns (ok, per-block relative errors); a failing block is identified
    by its index in the report.
    """
    x = np.asarray(x, dtype=np.float64)
    errors = np.zeros(problem.s)
    for b in range(problem.s):
        sl = problem.partition.slice(b)
        g = problem.partial_gradient(x, b)
        fd = np.zeros_like(g)
        for k in range(sl.stop - sl.start):
            xp = x.copy()
            xp[sl.start + k] += step
            xm = x.copy()
            xm[sl.start + k] -= step
            fd[k] = (problem.objective(xp) - problem.objective(xm)) / (2 * step)
        denom = max(float(np.linalg.norm(g)), 1e-12)
        errors[b] = float(np.linalg.norm(fd - g)) / denom
    return bool(np.all(errors <= rtol)), errors


def hals_column_oracle(A, U, V, block, rank):
    """Independent HALS column update in the Gram formulation.

    Recomputes Gram and cross products from scratch; this path never touches
    the maintained residual and serves as the equivalence oracle.
    """
    if isinstance(A, SparseMatrix):
        A = A.to_dense()
    if block < rank:  # U column, V fixed
        b = block
        G = V.T @ V
        num = A @ V[:, b] - U @ G[:, b] + U[:, b] * G[b, b]
        return np.maximum(num / G[b, b], 0.0)
    b = block - rank
    G = U.T @ U
    num = A.T @ U[:, b] - V @ G[:, b] + V[:, b] * G[b, b]
    return np.maximum(num / G[b, b], 0.0)


def check_invariants(seed=0, verbose=False):
    """Run the cross-module invariant suites on seeded synthetic instances.

    Returns (all_passed, report) where the report is a list of
    {name, passed, detail} dicts, JSON-ready.
    """
    report = []

    def add(name, passed, detail=""):
        report.append({"name": name, "passed": bool(passed), "detail": str(detail)})
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name}  {detail}")

    rng = np.random.default_rng(seed)

    # finite differences on random instances
    worst = 0.0
    ok_all = True
    for k in range(5):
        A, _, _ = generate_synthetic(18, 14, 3, seed=seed + k)
        problem = NmfProblem(A, 3)
        x = rng.uniform(0.1, 1.0, problem.n)
        ok, errs = finite_difference_check(problem, x)
        ok_all &= ok
        worst = max(worst, float(errs.max()))
    add("finite-difference block gradients", ok_all, f"worst rel err {worst:.2e}")

    # relative smoothness: L=1 passes, L=0.9 must fail
    A, _, _ = generate_synthetic(16, 12, 3, seed=seed + 11)
    problem = NmfProblem(A, 3)
    rep1 = relative_smoothness_check(problem, b=4, L=1.0, samples=2000, rng=seed)
    add("relative smoothness holds at L=1", rep1.ok,
        f"worst excess {rep1.worst_excess:.2e}")
    rep2 = relative_smoothness_check(problem, b=4, L=0.9, samples=2000, rng=seed)
    add("relative smoothness fails at L=0.9 (negative probe)", not rep2.ok,
        f"worst excess {rep2.worst_excess:.2e}")

    # descent and rate certificates along assertion-enabled runs
    failures = []
    updates = 0
    for k, algo in enumerate(["gb2b", "rb2b", "cbbcd", "b2b-ls"]):
        A, _, _ = generate_synthetic(40, 30, 4, noise_level=0.02, seed=seed + 20 + k)
        problem = NmfProblem(A, 4)
        cfg = SolverConfig(algorithm=algo, epsilon=1e-8, max_iter=60,
                           seed=seed + k, assertions=True)
        try:
            trace = run(problem, cfg)
            updates += trace.block_updates
        except (DescentViolationError,) as exc:
            failures.append(f"{algo}: {exc}")
    add("descent and rate certificates", not failures,
        "; ".join(failures) or f"{updates} certified block updates")

    # HALS equivalence of the unit-stepsize block update
    worst = 0.0
    for k in range(50):
        A, _, _ = generate_synthetic(12, 10, 3, noise_level=0.05, seed=seed + 300 + k)
        problem = NmfProblem(A, 3)
        x = np.random.default_rng(seed + 400 + k).uniform(0.0, 1.0, problem.n)
        state = problem.start(x)
        b = int(np.random.default_rng(seed + 500 + k).integers(problem.s))
        U0, V0 = problem.factors(state.x.copy())
        expected = hals_column_oracle(problem.A, U0, V0, b, problem.rank)
        nmf_block_update(state, b)
        got = state.x[problem.partition.slice(b)]
        worst = max(worst, float(np.max(np.abs(got - expected))))
    add("HALS column-update equivalence", worst <= 1e-14,
        f"worst entry gap {worst:.2e}")

    # stationarity certificate agreement; deep runs on noisy instances so the
    # certificates sit far from the tolerance boundary (their metrics differ
    # by the block conditioning, so marginal points legitimately disagree)
    disagreements = 0
    for k in range(10):
        A, _, _ = generate_synthetic(14, 10, 2, noise_level=0.1, seed=seed + 600 + k)
        problem = NmfProblem(A, 2)
        cfg = SolverConfig(algorithm="gb2b", epsilon=1e-10, max_iter=2500, seed=seed + k)
        x_near = run(problem, cfg).final_x
        if not stationarity_equivalence_check(problem, x_near, tol=1e-6).agree:
            disagreements += 1
        x_rand = np.random.default_rng(seed + 700 + k).uniform(0.0, 1.0, problem.n)
        if not stationarity_equivalence_check(problem, x_rand, tol=1e-6).agree:
            disagreements += 1
    add("stationarity certificates agree", disagreements == 0,
        f"{disagreements} disagreements")

    return all(r["passed"] for r in report), report
