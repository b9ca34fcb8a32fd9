"""Iteration kernels and the run loop.

The main iteration interleaves inertia, a forward-backward-forward update
built from two independent mini-batches, and relaxation:

    Z_k = X_k + alpha_k (X_k - X_{k-1})
    A_k = mini-batch estimate at Z_k          (m_k draws)
    Y_k = J_{lam_k T}(Z_k - lam_k A_k)
    B_k = independent mini-batch at Y_k       (m_k draws)
    X_{k+1} = (1-rho_k) Z_k + rho_k (Y_k + lam_k (A_k - B_k))

An algebraically identical fixed-point form X_{k+1} = Z_k - rho_k Phi(Z_k)
is provided to cross-check the arithmetic. Baselines: the same update
without inertia/relaxation (two-call forward-backward-forward), the
twice-projected extragradient, projected stochastic approximation with a
1/sqrt(k) step, and the relaxed inertial proximal point recursion (no
operator calls at all).

Batches are drawn A first then B from the caller-owned stream, so runs are
bitwise reproducible given (seed, config, problem).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import merit, policy as policy_mod
from .oracle import BatchSchedule, batch_size, minibatch_estimate

__all__ = [
    "SolverState",
    "SolverConfig",
    "Trajectory",
    "RunResult",
    "init_state",
    "risfbf_step",
    "risfbf_step_fixedpoint_form",
    "sfbf_step",
    "seg_step",
    "sa_step",
    "proxpoint_step",
    "run",
    "METHODS",
]

METHODS = ("risfbf", "sfbf", "seg", "sa", "proxpoint")


@dataclass
class SolverState:
    """Mutable iteration state.

    oracle_calls counts draws: 2 sum m_i for the two-call methods, sum m_i
    for the one-call baseline. avg_num/avg_den accumulate the rho-weighted
    Y_k average reported as X_bar.
    """

    X_prev: np.ndarray
    X: np.ndarray
    rng: object
    k: int = 1
    oracle_calls: int = 0
    avg_num: np.ndarray = None
    avg_den: float = 0.0

    def x_bar(self):
        if self.avg_den <= 0:
            return self.X.copy()
        return self.avg_num / self.avg_den


def init_state(x0, rng) -> SolverState:
    x0 = np.asarray(x0, dtype=np.float64)
    return SolverState(X_prev=x0.copy(), X=x0.copy(), rng=rng,
                       avg_num=np.zeros_like(x0))


def _extrapolate(state: SolverState, alpha_k: float) -> np.ndarray:
    if alpha_k == 0.0:
        return state.X
    return state.X + alpha_k * (state.X - state.X_prev)


def _commit(state: SolverState, X_new, Y, rho_k, calls):
    state.X_prev = state.X
    state.X = X_new
    state.k += 1
    state.oracle_calls += calls
    if Y is not None:
        state.avg_num += rho_k * Y
        state.avg_den += rho_k


def risfbf_step(state: SolverState, problem, alpha_k, lam_k, rho_k, m_k):
    """One inertial relaxed forward-backward-forward update (two batches)."""
    Z = _extrapolate(state, alpha_k)
    A, _ = minibatch_estimate(problem.oracle, Z, m_k, state.rng)
    Y = problem.resolvent.apply(Z - lam_k * A, lam_k)
    B, _ = minibatch_estimate(problem.oracle, Y, m_k, state.rng)
    correction = Y + lam_k * (A - B)
    if rho_k == 1.0:
        X_new = correction
    else:
        X_new = (1.0 - rho_k) * Z + rho_k * correction
    _commit(state, X_new, Y, rho_k, 2 * m_k)
    return state


def risfbf_step_fixedpoint_form(state: SolverState, problem, alpha_k, lam_k,
                                rho_k, m_k):
    """Same update written as X_{k+1} = Z_k - rho_k Phi(Z_k).

    Phi(z) = (z - lam A(z)) - (J(z - lam A(z)) - lam B(J(...))) collects the
    displacement of the corrected forward-backward step; under a shared
    stream the iterates match risfbf_step to round-off.
    """
    Z = _extrapolate(state, alpha_k)
    A, _ = minibatch_estimate(problem.oracle, Z, m_k, state.rng)
    forward = Z - lam_k * A
    Y = problem.resolvent.apply(forward, lam_k)
    B, _ = minibatch_estimate(problem.oracle, Y, m_k, state.rng)
    phi = forward - (Y - lam_k * B)
    X_new = Z - rho_k * phi
    _commit(state, X_new, Y, rho_k, 2 * m_k)
    return state


def sfbf_step(state: SolverState, problem, lam, m_k):
    """Forward-backward-forward with two batches, no inertia or relaxation."""
    X = state.X
    A, _ = minibatch_estimate(problem.oracle, X, m_k, state.rng)
    Y = problem.resolvent.apply(X - lam * A, lam)
    B, _ = minibatch_estimate(problem.oracle, Y, m_k, state.rng)
    X_new = Y + lam * (A - B)
    _commit(state, X_new, Y, 1.0, 2 * m_k)
    return state


def seg_step(state: SolverState, problem, lam, m_k):
    """Extragradient: both the trial and the final point are projected."""
    X = state.X
    A, _ = minibatch_estimate(problem.oracle, X, m_k, state.rng)
    Y = problem.resolvent.apply(X - lam * A, lam)
    B, _ = minibatch_estimate(problem.oracle, Y, m_k, state.rng)
    X_new = problem.resolvent.apply(X - lam * B, lam)
    _commit(state, X_new, Y, 1.0, 2 * m_k)
    return state


def sa_step(state: SolverState, problem, k, m: int = 1):
    """Projected stochastic approximation with step 1/sqrt(k), one draw."""
    lam_k = 1.0 / np.sqrt(k)
    est, _ = minibatch_estimate(problem.oracle, state.X, m, state.rng)
    X_new = problem.resolvent.apply(state.X - lam_k * est, lam_k)
    _commit(state, X_new, X_new, 1.0, m)
    return state


def proxpoint_step(state: SolverState, problem, alpha_k, lam_k, rho_k):
    """Relaxed inertial proximal point: no operator evaluations."""
    Z = _extrapolate(state, alpha_k)
    J = problem.resolvent.apply(Z, lam_k)
    if rho_k == 1.0:
        X_new = J
    else:
        X_new = (1.0 - rho_k) * Z + rho_k * J
    _commit(state, X_new, J, rho_k, 0)
    return state


@dataclass
class SolverConfig:
    """Run-level knobs: schedules, stopping, and what to record.

    Exactly the stop rules that are set apply (at least one of max_iters,
    max_oracle_calls, residual_target is required). lam overrides the
    policy step for the baselines; when absent, 1/(4L) is used. The
    residual column uses residual_lam (default 1/(4L)).
    """

    policy: policy_mod.RegimePolicy | None = None
    batches: BatchSchedule = field(default_factory=lambda: BatchSchedule.constant(1))
    lam: float | None = None
    max_iters: int | None = None
    max_oracle_calls: int | None = None
    residual_target: float | None = None
    record_stride: int = 1
    residual_lam: float | None = None
    record_residual: bool = True
    record_energy: bool = False
    gap_region: object = None
    est_batch: int = 10_000
    strict: bool = False


@dataclass
class Trajectory:
    """Per-iterate records; metric entries are nan when not computed."""

    k: np.ndarray
    oracle_calls: np.ndarray
    residual: np.ndarray
    rel_error: np.ndarray
    gap: np.ndarray
    H_k: np.ndarray
    wall_time_s: np.ndarray
    points: list | None
    residual_estimated: bool = False


@dataclass
class RunResult:
    trajectory: Trajectory
    X: np.ndarray
    X_bar: np.ndarray
    iterations: int
    oracle_calls: int
    stopped_by: str
    reached_target: bool


def _baseline_lam(config: SolverConfig, problem) -> float:
    if config.lam is not None:
        return float(config.lam)
    if config.policy is not None and config.policy.lam is not None:
        return policy_mod.lam_at(config.policy, 1)
    if problem.lipschitz > 0:
        return 1.0 / (4.0 * problem.lipschitz)
    raise ValueError("no step size: set config.lam or a policy with lam")


def run(problem, method: str, config: SolverConfig, rng=None) -> RunResult:
    """Drive `method` on `problem` until a stop rule fires.

    The starting point comes from the problem (its sampler consumes the
    stream first). Trajectory rows hold the iterate X_k indexed from k=1
    (the initial point) at the configured stride, plus the final iterate.
    If the oracle lacks an exact mean, residuals are mini-batch estimates
    drawn from a side stream seeded from the main one at start; the
    trajectory is flagged accordingly.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if (config.max_iters is None and config.max_oracle_calls is None
            and config.residual_target is None):
        raise ValueError("config sets no stop rule")
    if rng is None:
        rng = np.random.default_rng()

    pol = config.policy
    mu = problem.strong_monotonicity if problem.strong_monotonicity > 0 else None
    if pol is not None:
        diags = policy_mod.validate(pol, problem.lipschitz, mu)
        if diags:
            msg = "; ".join(diags)
            if config.strict:
                raise policy_mod.PolicyViolation(msg)
            warnings.warn(f"policy diagnostics: {msg}", stacklevel=2)
    if method in ("risfbf", "proxpoint") and pol is None:
        raise ValueError(f"{method} needs a RegimePolicy")

    eval_seed = int(rng.integers(0, 2**63 - 1))
    eval_rng = None
    estimated = problem.oracle.mean is None

    x0 = problem.initial(rng)
    state = init_state(x0, rng)
    lam_baseline = None
    if method in ("sfbf", "seg"):
        lam_baseline = _baseline_lam(config, problem)
    res_lam = config.residual_lam
    if res_lam is None:
        res_lam = (1.0 / (4.0 * problem.lipschitz)
                   if problem.lipschitz > 0 else 1.0)

    rows_k, rows_calls, rows_res, rows_rel = [], [], [], []
    rows_gap, rows_H, rows_wall = [], [], []
    points = [] if problem.dim <= 256 else None
    t0 = time.perf_counter()
    L_tilde = float(np.sqrt(problem.lipschitz ** 2 + 0.5))

    def residual_now():
        nonlocal eval_rng
        if not config.record_residual:
            return np.nan
        if estimated and eval_rng is None:
            eval_rng = np.random.default_rng(eval_seed)
        return merit.residual(problem, state.X, res_lam,
                              rng=eval_rng, est_batch=config.est_batch)

    def record():
        rows_k.append(state.k)
        rows_calls.append(state.oracle_calls)
        r = residual_now()
        rows_res.append(r)
        rows_rel.append(problem.rel_error_fn(state.X)
                        if problem.rel_error_fn is not None else np.nan)
        if config.gap_region is not None and problem.affine_matrix is not None:
            rows_gap.append(merit.dual_gap_affine(problem, state.X,
                                                  config.gap_region))
        else:
            rows_gap.append(np.nan)
        if (config.record_energy and problem.solution is not None
                and pol is not None and state.k >= 2):
            ak, lk, rk = _params_at(state.k)
            rows_H.append(merit.energy_H(state.X, state.X_prev,
                                         problem.solution, ak, rk, lk,
                                         L_tilde, pol.a))
        else:
            rows_H.append(np.nan)
        rows_wall.append(time.perf_counter() - t0)
        if points is not None:
            points.append(state.X.copy())
        return r

    def _params_at(k):
        return policy_mod.schedule_at(pol, k, problem.lipschitz, mu)

    stopped_by = "max_iters"
    reached = False
    last_recorded_k = -1

    r0 = record()
    last_recorded_k = state.k
    if config.residual_target is not None and not np.isnan(r0) \
            and r0 <= config.residual_target:
        reached = True
        stopped_by = "residual_target"

    while not reached:
        k = state.k
        if config.max_iters is not None and k > config.max_iters:
            stopped_by = "max_iters"
            break
        if method == "sa":
            m_k = batch_size(config.batches, k)
            cost = m_k
        elif method == "proxpoint":
            m_k, cost = 0, 0
        else:
            m_k = batch_size(config.batches, k)
            cost = 2 * m_k
        if (config.max_oracle_calls is not None
                and state.oracle_calls + cost > config.max_oracle_calls):
            stopped_by = "max_oracle_calls"
            break

        if method == "risfbf":
            ak, lk, rk = _params_at(k)
            risfbf_step(state, problem, ak, lk, rk, m_k)
        elif method == "proxpoint":
            ak, lk, rk = _params_at(k)
            proxpoint_step(state, problem, ak, lk, rk)
        elif method == "sfbf":
            sfbf_step(state, problem, lam_baseline, m_k)
        elif method == "seg":
            seg_step(state, problem, lam_baseline, m_k)
        else:
            sa_step(state, problem, k, m_k)

        due = (state.k - 1) % max(1, config.record_stride) == 0
        if due or config.residual_target is not None:
            r = record() if due else residual_now()
            if due:
                last_recorded_k = state.k
            if config.residual_target is not None and not np.isnan(r) \
                    and r <= config.residual_target:
                reached = True
                stopped_by = "residual_target"

    if last_recorded_k != state.k:
        record()

    traj = Trajectory(
        k=np.array(rows_k, dtype=np.int64),
        oracle_calls=np.array(rows_calls, dtype=np.int64),
        residual=np.array(rows_res),
        rel_error=np.array(rows_rel),
        gap=np.array(rows_gap),
        H_k=np.array(rows_H),
        wall_time_s=np.array(rows_wall),
        points=points,
        residual_estimated=estimated,
    )
    return RunResult(
        trajectory=traj,
        X=state.X.copy(),
        X_bar=state.x_bar(),
        iterations=state.k,
        oracle_calls=state.oracle_calls,
        stopped_by=stopped_by,
        reached_target=reached,
    )
