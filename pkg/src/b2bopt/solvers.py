"""Solver engine: projected gradient, Bregman proximal gradient, cyclic
Bregman block descent, and the two-reference block method with cyclic,
greedy and randomized schedules.

Constant-stepsize block updates follow the pattern: pick a valid block,
drop its invalid coordinates, take the exact Bregman direction, move with a
fixed or backtracked stepsize, and clamp to the nonnegative orthant.  With
assertions enabled every update is certified against the sufficient-decrease
and rate inequalities (see ``checks``-related helpers); a violation beyond
the 1e-9 tolerance raises :class:`DescentViolationError` naming the block.

A note on the certified inequalities.  The textbook sufficient-decrease
bound is stated with the full subproblem direction d_b, but it is provable
only while the orthant clamp is inactive on the moving coordinates; a
clamped update can (and in practice does) decrease the objective by less
than that bound while still decreasing it by the same factor times the
squared *realized* step direction (x_b+ - x_b)/alpha.  The runtime
assertions therefore certify the realized form, which coincides with the
textbook form whenever no interior coordinate hits the boundary.  The
greedy per-step rate check is likewise asserted exactly on clamp-free
updates.  ``strict_decrease_bound_holds`` exposes the literal full-direction
form for tests that document where it fails.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bregman import bregman_step, decrease_coefficient
from .core import (
    BlockedIterate,
    ConfigError,
    DescentViolationError,
    InvalidBlockError,
    InvalidReferenceError,
    LineSearchError,
)
from .metrics import optimality_report

ALGORITHMS = ("pg", "bpg", "cbbcd", "gb2b", "rb2b", "b2b-ls")
CHECK_TOL = 1e-9

TOLERANCE_REACHED = "ToleranceReached"
MAX_ITERATIONS = "MaxIterations"
STALL_DETECTED = "StallDetected"


def valid_coordinates(x_b, g_b):
    """Mask of coordinates where progress is possible.

    A coordinate is valid when the negative partial gradient is not a
    subgradient of the orthant indicator there: interior with nonzero
    gradient, or at the boundary with strictly negative gradient.
    """
    x_b = np.asarray(x_b, dtype=np.float64)
    g_b = np.asarray(g_b, dtype=np.float64)
    return ((x_b > 0) & (g_b != 0)) | ((x_b == 0) & (g_b < 0))


@dataclass(frozen=True)
class SearchDirection:
    """A block direction, its validity-filtered form and the feasible split.

    ``d_b`` is the exact subproblem direction with invalid coordinates
    zeroed; ``restricted_d_b`` zeroes in addition the coordinates whose sign
    pattern cannot move (the boundary set of the feasibility split).
    """

    block: int
    d_b: np.ndarray
    restricted_d_b: np.ndarray

    @classmethod
    def build(cls, block, x_b, d_b):
        active = ((x_b > 0) & (d_b != 0)) | ((x_b == 0) & (d_b > 0))
        return cls(block, d_b, np.where(active, d_b, 0.0))


class BlockSchedule:
    """Block selection rule: cyclic round-robin, greedy or seeded uniform."""

    def __init__(self, rule, seed=None):
        if rule not in ("cyclic", "greedy", "randomized"):
            raise ConfigError(f"unknown schedule rule {rule!r}")
        self.rule = rule
        self._cursor = 0
        self._rng = np.random.default_rng(seed) if rule == "randomized" else None

    @classmethod
    def cyclic(cls):
        return cls("cyclic")

    @classmethod
    def greedy(cls):
        return cls("greedy")

    @classmethod
    def randomized(cls, seed):
        return cls("randomized", seed=seed)

    def select(self, scores):
        """Pick a block given per-block validity scores (> 0 means valid).

        Greedy takes the argmax with lowest-index tie-breaking, randomized
        draws uniformly over valid blocks, cyclic returns the next valid
        block after the last one served.  Returns None when no block is
        valid (the iterate is stationary).
        """
        valid = np.flatnonzero(scores > 0.0)
        if valid.size == 0:
            return None
        if self.rule == "greedy":
            return int(np.argmax(scores))
        if self.rule == "randomized":
            return int(valid[self._rng.integers(valid.size)])
        s = scores.size
        for off in range(s):
            b = (self._cursor + off) % s
            if scores[b] > 0.0:
                self._cursor = b + 1
                return int(b)
        return None


def greedy_select(problem, x):
    """Valid block with the largest projected partial-gradient magnitude.

    Validity filtering precedes the argmax: invalid blocks score zero by
    construction (their projected gradient vanishes).  Ties break to the
    lowest index.  Returns None when every block is invalid.
    """
    report = optimality_report(problem, x)
    if report.per_block_norms.max(initial=0.0) <= 0.0:
        return None
    return int(np.argmax(report.per_block_norms))


def pg_step(problem, x, alpha):
    """One projected-gradient step [x - alpha grad f(x)]_+."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    g = problem.full_gradient(x.values)
    return BlockedIterate(np.maximum(x.values - alpha * g, 0.0), x.partition)


def bpg_step(problem, x, alpha, h=None):
    """One full-vector Bregman step: per-block exact directions, then clamp.

    With the energy reference this reduces to ``pg_step`` exactly.  ``h``
    overrides the problem's per-block references when given.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    part = x.partition
    d = np.empty(part.n)
    for b in range(part.s):
        g_b = problem.partial_gradient(x.values, b)
        if h is not None:
            d[part.slice(b)] = bregman_step(h, x.block(b), g_b)
        else:
            d[part.slice(b)] = _block_direction_or_zero(problem, x.values, b, g_b)
    return BlockedIterate(np.maximum(x.values + alpha * d, 0.0), x.partition)


def _block_direction_or_zero(problem, x, b, g_b):
    try:
        return problem.direction(x, b, g_b)
    except (InvalidBlockError, InvalidReferenceError):
        if np.any(g_b != 0):
            raise
        return np.zeros_like(g_b)


def armijo_line_search(problem, x, b, d_b, alpha0=1.0, tau=0.5, sigma=0.1,
                       max_backtracks=60):
    """Smallest backtrack count m >= 0 with sufficient decrease along d_b.

    Accepts alpha = tau^m alpha0 once
    f(x) - f(x(alpha)) >= -sigma <grad_b f(x), x_b(alpha) - x_b>
    where x_b(alpha) = [x_b + alpha d_b]_+.  A zero direction accepts
    alpha0 vacuously.  Exhausting the backtrack budget signals a
    non-descent direction (or a broken gradient) and raises.
    """
    _check_ls_params(alpha0, tau, sigma)
    values = x.values if isinstance(x, BlockedIterate) else np.asarray(x, dtype=np.float64)
    session = problem.start(values)
    g_b = session.partial_gradient(b)
    return _armijo(session, b, np.asarray(d_b, dtype=np.float64), g_b,
                   alpha0, tau, sigma, max_backtracks)


def _check_ls_params(alpha0, tau, sigma):
    if alpha0 <= 0:
        raise ConfigError("alpha0 must be positive")
    if not 0 < tau < 1:
        raise ConfigError("tau must lie in (0, 1)")
    if not 0 < sigma < 0.5:
        raise ConfigError("sigma must lie in (0, 0.5)")


def _armijo(session, b, d_b, g_b, alpha0, tau, sigma, max_backtracks):
    if float(g_b @ d_b) > 0:
        raise LineSearchError(
            f"direction on block {b} is not a descent direction "
            "(positive inner product with the gradient)")
    x_b = session.x[session.partition.slice(b)]
    f0 = session.objective()
    alpha = alpha0
    for _ in range(max_backtracks + 1):
        trial = np.maximum(x_b + alpha * d_b, 0.0)
        decrease = f0 - session.objective_with_block(b, trial)
        if decrease >= -sigma * float(g_b @ (trial - x_b)):
            return alpha
        alpha *= tau
    raise LineSearchError(
        f"no sufficient decrease within {max_backtracks} backtracks on block {b}; "
        "the gradient is likely inconsistent with the objective"
    )


def _armijo_full(session, d, g, alpha0, tau, sigma, max_backtracks):
    if float(g @ d) > 0:
        raise LineSearchError("full-step direction is not a descent direction")
    f0 = session.objective()
    x = session.x
    alpha = alpha0
    for _ in range(max_backtracks + 1):
        trial = np.maximum(x + alpha * d, 0.0)
        if f0 - session.objective_at(trial) >= -sigma * float(g @ (trial - x)):
            return alpha
        alpha *= tau
    raise LineSearchError(
        f"no sufficient decrease within {max_backtracks} backtracks (full step)"
    )


# ---------------------------------------------------------------------------
# decrease / rate certificates


def decrease_bound(h, alpha, direction):
    """Sufficient-decrease amount for a direction under reference h at stepsize alpha."""
    d = np.asarray(direction, dtype=np.float64)
    return decrease_coefficient(h, alpha) * float(d @ d)


def strict_decrease_bound_holds(f_before, f_after, h, alpha, d_b, tol=CHECK_TOL):
    """Literal sufficient-decrease test with the full direction norm.

    Provable only while the clamp is inactive on the moving coordinates;
    kept for tests that exhibit its failure under clamping.
    """
    return f_after <= f_before - decrease_bound(h, alpha, d_b) + tol


@dataclass
class _StepCertificate:
    block: int
    clamped: bool
    f_before: float
    f_after: float
    pg_sq: float | None      # squared projected-gradient norm at the pre-step iterate
    rate_coeff: float | None  # per-step greedy/randomized rate coefficient


def _certify_block_step(h, alpha, step, d_b, cert, s, greedy, iteration):
    """Raise unless the realized decrease inequalities hold for this update."""
    f_before, f_after = cert.f_before, cert.f_after
    realized = step / alpha
    bound = decrease_bound(h, alpha, realized)
    if f_after > f_before - bound + CHECK_TOL:
        raise DescentViolationError(
            f"sufficient-decrease violation on block {cert.block}: "
            f"decrease {f_before - f_after:.6e} < bound {bound:.6e}",
            block=cert.block, iteration=iteration)
    m, M = h.strong_convexity, h.gradient_smoothness
    L, beta = h.relative_smoothness, h.symmetry
    alpha_star = (1.0 + beta) * m / (2.0 * L * M)
    if alpha <= alpha_star * (1 + 1e-12):
        prop4 = 0.5 * L * M * float(step @ step)
        if f_after > f_before - prop4 + CHECK_TOL:
            raise DescentViolationError(
                f"squared-step decrease violation on block {cert.block}: "
                f"decrease {f_before - f_after:.6e} < bound {prop4:.6e}",
                block=cert.block, iteration=iteration)
    if greedy and not cert.clamped and cert.pg_sq is not None:
        rate = cert.rate_coeff * cert.pg_sq
        if f_after > f_before - rate + CHECK_TOL:
            raise DescentViolationError(
                f"greedy rate violation on block {cert.block}: "
                f"decrease {f_before - f_after:.6e} < bound {rate:.6e}",
                block=cert.block, iteration=iteration)


def _rate_coefficient(h, alpha, s):
    """Per-step coefficient of ||proj grad||^2 in the greedy/randomized descent bound.

    alpha (1+beta) m_b / (4 s M_b^2): the extra factor of M_b converts the
    direction norm to a gradient norm through the inverse reference map, so
    the modulus enters squared.
    """
    return (alpha * (1.0 + h.symmetry) * h.strong_convexity
            / (4.0 * s * h.gradient_smoothness ** 2))


def check_rate_envelope(pg_sq, coeffs, f0, f_best, tol=CHECK_TOL):
    """Validate min_{k<=N} ||proj grad||^2 against the telescoped rate bound for all N.

    Returns (violations, worst_ratio).  The bound at N uses the running
    minimum of the per-step coefficients and the best objective seen over
    the whole run in place of the unknown infimum.
    """
    violations = 0
    worst = 0.0
    run_min = np.inf
    coeff_min = np.inf
    gap = f0 - f_best
    for N in range(len(pg_sq)):
        run_min = min(run_min, pg_sq[N])
        coeff_min = min(coeff_min, coeffs[N])
        bound = gap / ((N + 1) * coeff_min) if coeff_min > 0 else np.inf
        if run_min > bound * (1 + tol) + tol:
            violations += 1
            worst = max(worst, run_min / bound if bound > 0 else np.inf)
    return violations, worst


def check_sweep_envelope(dsums, alpha, L, f0, f_best, tol=CHECK_TOL):
    """Validate min_{k<=N} sum_b D_h against the cyclic rate bound for all N."""
    violations = 0
    run_min = np.inf
    denom = 1.0 - alpha * L
    gap = f0 - f_best
    for N in range(len(dsums)):
        run_min = min(run_min, dsums[N])
        bound = alpha * gap / ((N + 1) * denom)
        if run_min > bound * (1 + tol) + tol:
            violations += 1
    return violations


# ---------------------------------------------------------------------------
# single-step public operations


def b2b_step(problem, x, schedule, policy=None, assertions=False):
    """One two-reference block update.

    Selects a valid block per the schedule, removes invalid coordinates,
    takes the exact Bregman direction and clamps the stepped block.  Returns
    ``(new_iterate, search_direction, alpha_used)``; when every block is
    invalid the iterate is stationary and ``(x, None, 0.0)`` comes back.
    """
    policy = policy or StepPolicy.optimal()
    session = problem.start(x.values)
    report = optimality_report(problem, session.x, gradient=session.full_gradient())
    scores = _validity_scores(problem, session.x, report.per_block_norms)
    b = schedule.select(scores)
    if b is None:
        return x.copy(), None, 0.0
    direction, alpha, _ = _update_block(
        session, b, policy, assertions=assertions, s=problem.s,
        greedy=(schedule.rule == "greedy"), pg_sq=report.proj_grad_norm ** 2)
    return BlockedIterate(session.x.copy(), x.partition), direction, alpha


def cbbcd_sweep(problem, x, alpha, assertions=False):
    """One full cyclic pass of exact Bregman block subproblem solves.

    Each block solves the linearized subproblem with weight 1/alpha exactly
    (for separable quadratic references this is a damped clamped step).
    With assertions on, the per-block decrease inequality is certified and
    a violation names the block.
    """
    L = problem.relative_smoothness_bound()
    if not 0 < alpha < 1.0 / L:
        raise ConfigError(f"cyclic sweeps need 0 < alpha < 1/L = {1.0 / L:g}, got {alpha}")
    session = problem.start(x.values)
    _sweep(session, alpha, assertions, iteration=0)
    return BlockedIterate(session.x.copy(), x.partition)


def _sweep(session, alpha, assertions, iteration):
    """One cyclic pass over all blocks; returns the summed Bregman movement."""
    part = session.partition
    dsum = 0.0
    for b in range(part.s):
        g_b = session.partial_gradient(b)
        try:
            h = session.reference(b)
        except (InvalidBlockError, InvalidReferenceError):
            if np.any(g_b != 0):
                raise
            continue  # degenerate block with zero gradient: leave unchanged
        if h.weight is not None:
            raise ConfigError(
                "cyclic sweeps solve the constrained subproblem in closed form, "
                "which needs a separable (energy-type) reference; block "
                f"{b} uses a weighted quadratic")
        x_b = session.x[part.slice(b)].copy()
        d = bregman_step(h, x_b, g_b)
        new_b = np.maximum(x_b + alpha * d, 0.0)
        f_before = session.objective() if assertions else None
        session.apply_block(b, new_b)
        dist = h.distance(new_b, x_b)
        dsum += dist
        if assertions:
            f_after = session.objective()
            bound = (1.0 / alpha - h.relative_smoothness) * dist
            if f_after > f_before - bound + CHECK_TOL:
                raise DescentViolationError(
                    f"cyclic decrease violation on block {b}: "
                    f"decrease {f_before - f_after:.6e} < bound {bound:.6e}",
                    block=b, iteration=iteration)
    return dsum


def _validity_scores(problem, x, per_block_norms):
    """Per-block scores: projected-gradient norms, zeroed where the reference degenerates."""
    scores = per_block_norms.copy()
    for b in np.flatnonzero(scores > 0.0):
        try:
            problem.reference(x, b)
        except (InvalidBlockError, InvalidReferenceError):
            scores[b] = 0.0
    return scores


def _update_block(session, b, policy, assertions, s, greedy, pg_sq=None):
    """Core two-reference block update on a session. Returns (SearchDirection, alpha, clamped)."""
    part = session.partition
    sl = part.slice(b)
    x_b = session.x[sl].copy()
    g_b = session.partial_gradient(b)
    h = session.reference(b)
    d = session.direction(b, g_b)
    d = np.where(valid_coordinates(x_b, g_b), d, 0.0)
    direction = SearchDirection.build(b, x_b, d)

    if policy.mode == "line-search":
        alpha = _armijo(session, b, d, g_b, policy.alpha0, policy.tau,
                        policy.sigma, policy.max_backtracks)
    elif policy.mode == "optimal":
        m, M = h.strong_convexity, h.gradient_smoothness
        alpha = (1.0 + h.symmetry) * m / (2.0 * h.relative_smoothness * M)
    else:
        alpha = policy.alpha

    new_b = np.maximum(x_b + alpha * d, 0.0)
    step = new_b - x_b
    clamped = bool(np.any((x_b > 0) & (x_b + alpha * d < 0)))
    f_before = session.objective() if assertions else None
    session.apply_block(b, new_b)
    if assertions:
        f_after = session.objective()
        if f_after > f_before + CHECK_TOL:
            raise DescentViolationError(
                f"objective increased on block {b}: {f_before:.6e} -> {f_after:.6e}",
                block=b)
        if policy.mode != "line-search":
            cert = _StepCertificate(b, clamped, f_before, f_after, pg_sq,
                                    _rate_coefficient(h, alpha, s))
            _certify_block_step(h, alpha, step, d, cert, s, greedy, iteration=None)
    return direction, alpha, clamped


@dataclass(frozen=True)
class StepPolicy:
    """Stepsize policy for block updates.

    ``constant`` uses a fixed value, ``optimal`` evaluates the updated
    block's own (1+beta) m / (2 L M) at use time, ``line-search`` backtracks
    per update.  Full runs resolve ``alpha="optimal"`` once at configuration
    time instead (the two coincide for state-independent constants, and for
    the matrix-factorization problem where every block's value is 1).
    """

    mode: str  # "constant" | "optimal" | "line-search"
    alpha: float = 0.0
    alpha0: float = 1.0
    tau: float = 0.5
    sigma: float = 0.1
    max_backtracks: int = 60

    @classmethod
    def constant(cls, alpha):
        if alpha <= 0:
            raise ConfigError("constant stepsize must be positive")
        return cls("constant", alpha=float(alpha))

    @classmethod
    def optimal(cls):
        return cls("optimal")

    @classmethod
    def line_search(cls, alpha0=1.0, tau=0.5, sigma=0.1, max_backtracks=60):
        _check_ls_params(alpha0, tau, sigma)
        return cls("line-search", alpha0=alpha0, tau=tau, sigma=sigma,
                   max_backtracks=max_backtracks)


# ---------------------------------------------------------------------------
# full runs


@dataclass
class SolverConfig:
    """Algorithm choice plus stepsize, stopping and accounting parameters.

    ``alpha`` is a positive constant, or ``"optimal"`` to resolve the
    decrease-maximizing constant from the block constants at the starting
    point (for the cyclic method, half the admissible 1/L bound), or
    ``"line-search"`` for Armijo backtracking.  ``epsilon`` is the relative
    projected-gradient stopping tolerance; ``max_iter`` counts iterations in
    ``iter_unit`` ("epoch" normalizes s block updates to one iteration).
    """

    algorithm: str = "gb2b"
    alpha: float | str = "default"
    alpha0: float = 1.0
    tau: float = 0.5
    sigma: float = 0.1
    epsilon: float = 1e-4
    max_iter: int = 1000
    iter_unit: str = "epoch"
    seed: int = 0
    assertions: bool = False
    stall_decrease: float = 1e-15
    stall_epochs: int = 50
    max_backtracks: int = 60

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not 0 < self.epsilon:
            raise ConfigError("epsilon must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.iter_unit not in ("epoch", "block"):
            raise ConfigError("iter_unit must be 'epoch' or 'block'")
        if isinstance(self.alpha, str):
            if self.alpha == "default":
                self.alpha = "line-search" if self.algorithm in ("pg", "bpg", "b2b-ls") \
                    else "optimal"
            if self.alpha not in ("optimal", "line-search"):
                raise ConfigError(f"alpha must be positive or 'optimal'/'line-search', got {self.alpha!r}")
            if self.algorithm == "b2b-ls" and self.alpha != "line-search":
                raise ConfigError("b2b-ls always uses the line search")
        elif self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        _check_ls_params(self.alpha0, self.tau, self.sigma)


@dataclass
class TraceRecord:
    iteration: int
    block_updates: int
    elapsed_s: float
    objective: float
    rel_residual: float | None
    proj_grad_norm: float
    rel_proj_grad: float
    chosen_block: int | None
    alpha: float | None


@dataclass
class RunTrace:
    """Per-iteration records plus terminal status and rate-check artifacts."""

    algorithm: str
    records: list[TraceRecord] = field(default_factory=list)
    status: str = MAX_ITERATIONS
    block_updates: int = 0
    epochs: int = 0
    wall_time_s: float = 0.0
    final_objective: float = np.nan
    final_rel_residual: float | None = None
    final_rel_proj_grad: float = np.nan
    final_x: np.ndarray | None = None
    envelope: dict | None = None
    envelope_violations: int = 0

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])


def run(problem, config, x0=None):
    """Drive one solver to its stopping rule and return the trace.

    Stops when the projected-gradient norm falls to ``epsilon`` times its
    starting value, when ``max_iter`` iterations complete, or when the
    objective stalls.  With ``assertions`` enabled every block update is
    certified and the rate envelopes are validated over the whole trace
    (randomized envelope misses are recorded, not raised: the randomized
    rate statement only holds in expectation).
    """
    if not isinstance(config, SolverConfig):
        raise ConfigError("config must be a SolverConfig")
    t0 = time.perf_counter()
    if x0 is None:
        x0 = np.random.default_rng(config.seed).uniform(0.0, 1.0, problem.n)
    elif isinstance(x0, BlockedIterate):
        x0 = x0.values
    session = problem.start(x0)
    s = problem.s

    alpha_mode, fixed_alpha, policy = _resolve_stepsize(problem, config, session.x)
    schedule = _make_schedule(config)
    is_block_method = config.algorithm in ("cbbcd", "gb2b", "rb2b", "b2b-ls")
    track_envelope = config.assertions and config.algorithm in ("gb2b", "rb2b", "cbbcd")

    trace = RunTrace(algorithm=config.algorithm)
    env_pg, env_coeff, env_dsum = [], [], []
    f0 = session.objective()
    report = optimality_report(problem, session.x, gradient=session.full_gradient())
    ref_norm = report.proj_grad_norm
    updates = 0

    def log(it, block=None, alpha=None, rep=None):
        if rep is None:
            rep = optimality_report(problem, session.x, reference_norm=ref_norm,
                                    gradient=session.full_gradient())
        rel = 0.0 if ref_norm == 0.0 else rep.proj_grad_norm / ref_norm
        trace.records.append(TraceRecord(
            iteration=it, block_updates=updates,
            elapsed_s=time.perf_counter() - t0,
            objective=session.objective(), rel_residual=session.quality(),
            proj_grad_norm=rep.proj_grad_norm, rel_proj_grad=rel,
            chosen_block=block, alpha=alpha))
        return rep

    rep = log(0, rep=report)
    stop = rep.proj_grad_norm <= config.epsilon * ref_norm
    stall_rows = 0
    stall_limit = config.stall_epochs * (1 if config.iter_unit == "epoch" else s)
    last_f = trace.records[-1].objective
    it = 0
    status = TOLERANCE_REACHED if stop else None

    while status is None and it < config.max_iter:
        it += 1
        last_block = None
        last_alpha = None
        if config.algorithm in ("pg", "bpg"):
            last_alpha = _full_step(session, problem, config.algorithm,
                                    alpha_mode, fixed_alpha, config)
            updates += 1
        elif config.algorithm == "cbbcd":
            dsum = _sweep(session, fixed_alpha, config.assertions, iteration=it)
            if track_envelope:
                env_dsum.append(dsum)
            updates += s
            last_alpha = fixed_alpha
        else:
            n_inner = s if config.iter_unit == "epoch" else 1
            for _ in range(n_inner):
                rep_inner = optimality_report(problem, session.x, reference_norm=ref_norm,
                                              gradient=session.full_gradient())
                scores = _validity_scores(problem, session.x, rep_inner.per_block_norms)
                b = schedule.select(scores)
                if b is None:
                    break  # stationary: the logged record will trigger the stop rule
                pg_sq = rep_inner.proj_grad_norm ** 2
                h = session.reference(b)
                direction, alpha_used, clamped = _update_block(
                    session, b, policy, assertions=config.assertions,
                    s=s, greedy=(config.algorithm == "gb2b"), pg_sq=pg_sq)
                if track_envelope:
                    env_pg.append(pg_sq)
                    env_coeff.append(_rate_coefficient(h, alpha_used, s))
                updates += 1
                last_block, last_alpha = b, alpha_used
        trace.block_updates = updates
        rep = log(it, block=last_block, alpha=last_alpha)
        f_now = trace.records[-1].objective
        if rep.proj_grad_norm <= config.epsilon * ref_norm:
            status = TOLERANCE_REACHED
            break
        if last_f - f_now < config.stall_decrease:
            stall_rows += 1
            if stall_rows >= stall_limit:
                status = STALL_DETECTED
                break
        else:
            stall_rows = 0
        last_f = f_now

    trace.status = status or MAX_ITERATIONS
    trace.block_updates = updates
    trace.epochs = updates // s if s else 0
    trace.wall_time_s = time.perf_counter() - t0
    last = trace.records[-1]
    trace.final_objective = last.objective
    trace.final_rel_residual = last.rel_residual
    trace.final_rel_proj_grad = last.rel_proj_grad
    trace.final_x = session.x.copy()

    if track_envelope:
        f_best = min(r.objective for r in trace.records)
        if config.algorithm == "cbbcd":
            L = problem.relative_smoothness_bound()
            v = check_sweep_envelope(env_dsum, fixed_alpha, L, f0, f_best)
            trace.envelope = {"dsum": env_dsum, "alpha": fixed_alpha, "L": L,
                              "f0": f0, "f_best": f_best}
            if v:
                raise DescentViolationError(
                    f"cyclic rate envelope violated on {v} prefixes")
        else:
            v, worst = check_rate_envelope(env_pg, env_coeff, f0, f_best)
            trace.envelope = {"pg_sq": env_pg, "coeff": env_coeff,
                              "f0": f0, "f_best": f_best}
            trace.envelope_violations = v
            if v and config.algorithm == "gb2b":
                raise DescentViolationError(
                    f"greedy rate envelope violated on {v} prefixes (worst x{worst:.3f})")
    return trace


def _make_schedule(config):
    if config.algorithm in ("gb2b", "b2b-ls"):
        return BlockSchedule.greedy()
    if config.algorithm == "rb2b":
        return BlockSchedule.randomized(config.seed)
    return None


def _resolve_stepsize(problem, config, x0):
    """Map config.alpha to (mode, fixed_alpha, block policy) for the chosen algorithm."""
    alg = config.algorithm
    ls_policy = StepPolicy.line_search(config.alpha0, config.tau, config.sigma,
                                       config.max_backtracks)
    if alg == "b2b-ls":
        return "line-search", None, ls_policy
    if config.alpha == "line-search":
        return "line-search", None, ls_policy
    if alg == "cbbcd":
        L = problem.relative_smoothness_bound()
        if config.alpha == "optimal":
            alpha = 0.5 / L  # midpoint of the admissible (0, 1/L) range
        else:
            alpha = float(config.alpha)
            if not alpha * L < 1.0:
                raise ConfigError(f"cyclic stepsize must satisfy alpha L < 1 (L={L:g})")
        return "constant", alpha, None
    if config.alpha == "optimal":
        alpha_star = problem.optimal_stepsize_hint(x0)
        if alg in ("gb2b", "rb2b"):
            return "constant", alpha_star, StepPolicy.constant(alpha_star)
        return "constant", alpha_star, None  # pg/bpg with an explicit optimal constant
    alpha = float(config.alpha)
    if alg in ("gb2b", "rb2b") and config.assertions:
        alpha_star = problem.optimal_stepsize_hint(x0)
        if alpha > alpha_star * (1 + 1e-12):
            raise ConfigError(
                f"constant stepsize {alpha:g} exceeds the certified bound {alpha_star:g}")
    policy = StepPolicy.constant(alpha) if alg in ("gb2b", "rb2b") else None
    return "constant", alpha, policy


def _full_step(session, problem, algorithm, alpha_mode, fixed_alpha, config):
    """One pg/bpg full-vector update on the session; returns the stepsize used."""
    g = session.full_gradient()
    if algorithm == "pg":
        d = -g
    else:
        part = session.partition
        d = np.empty(part.n)
        for b in range(part.s):
            d[part.slice(b)] = _block_direction_or_zero(
                session.problem, session.x, b, g[part.slice(b)])
    if alpha_mode == "line-search":
        alpha = _armijo_full(session, d, g, config.alpha0, config.tau,
                             config.sigma, config.max_backtracks)
    else:
        alpha = fixed_alpha
    f_before = session.objective() if config.assertions else None
    session.set_all(np.maximum(session.x + alpha * d, 0.0))
    if config.assertions and alpha_mode == "line-search":
        f_after = session.objective()
        if f_after > f_before + CHECK_TOL:
            raise DescentViolationError(
                f"line-searched full step increased the objective: "
                f"{f_before:.6e} -> {f_after:.6e}")
    return alpha
