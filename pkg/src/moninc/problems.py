"""Built-in problem instances.

Three families, each packaged as a ProblemInstance holding the stochastic
oracle, the resolvent of the set-valued part, the Lipschitz constant of the
mean operator, and whatever ground truth is available:

* a two-stage capacity game among N firms with a smoothed stochastic
  recourse term (merely or strongly monotone depending on configuration),
* an overlapping group-lasso regression posed as a primal-dual saddle
  point (monotone, affine mean), and
* a synthetic affine operator mu*I + S with S skew, whose reference
  solution is computed at build time (the verification workhorse).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (BallSet, BoxSet, BallResolvent, BoxResolvent,
                   operator_norm, project_box, resolvent_product)
from .oracle import StochasticOracle

__all__ = [
    "ProblemInstance",
    "CournotInstance",
    "cournot_build",
    "cournot_oracle_sample",
    "cournot_mean",
    "expected_min_uniform",
    "CapInstance",
    "cap_build",
    "cap_apply_L",
    "cap_apply_L_adjoint",
    "cap_oracle_sample",
    "cap_mean",
    "SyntheticAffineInstance",
    "synthetic_build",
]


@dataclass
class ProblemInstance:
    """Everything a solver or merit function needs to know about a problem.

    solution is a point with zero residual when one is known (synthetic);
    rel_error_fn maps an iterate to a scalar relative error when a ground
    truth exists (synthetic, and the regression weights for the group-lasso
    problem); affine_matrix/affine_shift are set when the mean operator is
    exactly x -> M x + c, enabling the restricted dual gap.
    """

    dim: int
    oracle: StochasticOracle
    resolvent: object
    lipschitz: float
    strong_monotonicity: float = 0.0
    feasible: object = None
    solution: np.ndarray | None = None
    rel_error_fn: object = None
    affine_matrix: np.ndarray | None = None
    affine_shift: np.ndarray | None = None
    initial_point: object = None
    name: str = ""
    detail: object = None

    def initial(self, rng) -> np.ndarray:
        """Starting point; callables get the replication stream first."""
        if callable(self.initial_point):
            return np.asarray(self.initial_point(rng), dtype=np.float64)
        if self.initial_point is not None:
            return np.asarray(self.initial_point, dtype=np.float64).copy()
        return np.zeros(self.dim)


# ----------------------------------------------------------------------
# Two-stage capacity game with smoothed recourse
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CournotInstance:
    """Parameters of the N-firm capacity game.

    Firm i pays quadratic production cost 0.5*b_hat_i*x_i^2 + a_i*x_i and
    sells at the linear inverse-demand price. The game map sums the
    marginal cost b_hat_i*x_i + a_i, the price term r*(sum_j x_j + x_i) - d,
    and a smoothed recourse gradient whose per-scenario value is
    min(x_i/eps, h_i) with h_i drawn from Uniform[h_low, h_high].
    """

    n: int
    r: float
    d: float
    a: np.ndarray
    b_hat: np.ndarray
    eps: float
    box: BoxSet
    h_low: float = -5.0
    h_high: float = 0.0


def expected_min_uniform(c, lo=-5.0, hi=0.0):
    """E[min(c, h)] for h ~ Uniform[lo, hi], componentwise in c.

    For the default [-5, 0] law: c when c <= -5, -(c^2+25)/10 on (-5, 0),
    and -2.5 (the mean of h) once c >= 0.
    """
    if not (lo == -5.0 and hi == 0.0):
        # general uniform: integrate min(c,h) piecewise
        c = np.asarray(c, dtype=np.float64)
        width = hi - lo
        mid = (c * (hi - c) + 0.5 * (c * c - lo * lo)) / width
        return np.where(c <= lo, c, np.where(c >= hi, (lo + hi) / 2.0, mid))
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= -5.0, c,
                    np.where(c >= 0.0, -2.5, -(c * c + 25.0) / 10.0))


def _cournot_deterministic(inst: CournotInstance, x):
    x = np.asarray(x, dtype=np.float64)
    marginal_cost = inst.b_hat * x + inst.a
    price_term = inst.r * (np.sum(x) + x) - inst.d
    return marginal_cost + price_term


def cournot_oracle_sample(inst: CournotInstance, x, h):
    """One oracle draw: deterministic part plus min(x/eps, h) per firm."""
    h = np.asarray(h, dtype=np.float64)
    return _cournot_deterministic(inst, x) + np.minimum(
        np.asarray(x, dtype=np.float64) / inst.eps, h)


def cournot_mean(inst: CournotInstance, x):
    """Exact mean operator (recourse expectation in closed form)."""
    c = np.asarray(x, dtype=np.float64) / inst.eps
    return _cournot_deterministic(inst, x) + expected_min_uniform(
        c, inst.h_low, inst.h_high)


class _CournotOracle(StochasticOracle):
    def __init__(self, inst: CournotInstance):
        self.inst = inst
        self.mean = lambda x: cournot_mean(inst, x)
        # min(c, .) is a 1-Lipschitz transform of h, so each coordinate's
        # variance is at most var(h) = width^2/12
        width = inst.h_high - inst.h_low
        self.variance_bound = float(np.sqrt(inst.n * width ** 2 / 12.0))

    def sample(self, x, rng):
        h = rng.uniform(self.inst.h_low, self.inst.h_high, self.inst.n)
        return cournot_oracle_sample(self.inst, x, h)

    def batch(self, x, m, rng):
        inst = self.inst
        h = rng.uniform(inst.h_low, inst.h_high, (m, inst.n))
        recourse = np.minimum(np.asarray(x, dtype=np.float64) / inst.eps, h)
        return _cournot_deterministic(inst, x) + recourse.mean(axis=0)


def cournot_build(L_V_target: float, seed: int = 0, n_firms: int = 10,
                  box_upper: float = 10.0) -> ProblemInstance:
    """Capacity game sized to a target Lipschitz constant.

    The constant decomposes as L_V = L_C + L_R + L_D with L_R = r(N+1),
    L_D = 1/eps where the smoothing is eps = 10/L_V, and L_C = max b_hat
    absorbed by the first firm; the remaining quadratic coefficients are
    Uniform[0, L_C] and the linear ones Uniform[2, 3].
    """
    r, d = 0.1, 1.0
    L_R = r * (n_firms + 1)
    L_D = L_V_target / 10.0
    L_C = L_V_target - L_R - L_D
    if L_C <= 0:
        raise ValueError(
            f"L_V_target={L_V_target:g} infeasible: needs "
            f"L_V > L_R + L_V/10 with L_R={L_R:g}")
    rng = np.random.default_rng(seed)
    b_hat = np.empty(n_firms)
    b_hat[0] = L_C
    b_hat[1:] = rng.uniform(0.0, L_C, n_firms - 1)
    a = rng.uniform(2.0, 3.0, n_firms)
    box = BoxSet(np.zeros(n_firms), np.full(n_firms, float(box_upper)))
    inst = CournotInstance(n=n_firms, r=r, d=d, a=a, b_hat=b_hat,
                           eps=10.0 / L_V_target, box=box)
    return ProblemInstance(
        dim=n_firms,
        oracle=_CournotOracle(inst),
        resolvent=BoxResolvent(box),
        lipschitz=float(L_V_target),
        strong_monotonicity=float(np.min(b_hat) + r),
        feasible=box,
        initial_point=lambda rng_: rng_.uniform(0.0, 1.0, n_firms),
        name=f"cournot(L={L_V_target:g})",
        detail=inst,
    )


# ----------------------------------------------------------------------
# Overlapping group-lasso saddle point
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CapInstance:
    """Primal-dual data for the overlapping group regularized regression.

    Primal block w lives in R^d inside a ball of radius D; one dual block
    per group lives in the unit ball. The linear coupling stacks eta times
    the group slices of w.
    """

    d: int
    groups: tuple
    eta: float
    w_true: np.ndarray
    sigma_eps: float
    D: float

    @property
    def dual_dim(self) -> int:
        return sum(len(g) for g in self.groups)


def _build_groups(n_groups, group_size, overlap):
    stride = group_size - overlap
    groups = tuple(np.arange(g * stride, g * stride + group_size)
                   for g in range(n_groups))
    return groups


def cap_apply_L(inst: CapInstance, w):
    """Stacked coupling: block g equals eta * w[group g]."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != inst.d:
        raise ValueError(f"dimension mismatch: {w.shape[0]} vs {inst.d}")
    return np.concatenate([inst.eta * w[g] for g in inst.groups])


def cap_apply_L_adjoint(inst: CapInstance, v):
    """Adjoint of the stacking map: scatter-add eta * v blocks."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != inst.dual_dim:
        raise ValueError(f"dimension mismatch: {v.shape[0]} vs {inst.dual_dim}")
    out = np.zeros(inst.d)
    pos = 0
    for g in inst.groups:
        out[g] += inst.eta * v[pos:pos + len(g)]
        pos += len(g)
    return out


def cap_oracle_sample(inst: CapInstance, z, a, b):
    """One draw: (a (a^T w - b) + L^* v, -L w) at z = (w, v)."""
    z = np.asarray(z, dtype=np.float64)
    w, v = z[:inst.d], z[inst.d:]
    gw = a * (a @ w - b) + cap_apply_L_adjoint(inst, v)
    return np.concatenate([gw, -cap_apply_L(inst, w)])


def cap_mean(inst: CapInstance, z):
    """Mean operator: the Gaussian design gives E[aa^T] = I, E[ab] = w_true."""
    z = np.asarray(z, dtype=np.float64)
    w, v = z[:inst.d], z[inst.d:]
    gw = w - inst.w_true + cap_apply_L_adjoint(inst, v)
    return np.concatenate([gw, -cap_apply_L(inst, w)])


class _CapOracle(StochasticOracle):
    def __init__(self, inst: CapInstance):
        self.inst = inst
        self.mean = lambda z: cap_mean(inst, z)
        # uniform bound over the primal ball: E||aa^T u - u||^2 = (d+1)||u||^2
        # for unit-variance Gaussian a, plus d*sigma_eps^2 from the labels
        reach = inst.D + float(np.linalg.norm(inst.w_true))
        self.variance_bound = float(np.sqrt(
            (inst.d + 1) * reach ** 2 + inst.d * inst.sigma_eps ** 2))

    def sample(self, z, rng):
        inst = self.inst
        a = rng.standard_normal(inst.d)
        b = a @ inst.w_true + inst.sigma_eps * rng.standard_normal()
        return cap_oracle_sample(inst, z, a, b)

    def batch(self, z, m, rng):
        inst = self.inst
        z = np.asarray(z, dtype=np.float64)
        w, v = z[:inst.d], z[inst.d:]
        A = rng.standard_normal((m, inst.d))
        e = rng.standard_normal(m)
        # residuals against noisy labels b_t = a_t.w_true + sigma*e_t
        res = A @ (w - inst.w_true) - inst.sigma_eps * e
        gw = (A.T @ res) / m + cap_apply_L_adjoint(inst, v)
        return np.concatenate([gw, -cap_apply_L(inst, w)])


def cap_build(seed: int = 0, n_groups: int = 10, group_size: int = 10,
              overlap: int = 2, eta: float = 1e-4, noise_std: float = 0.1,
              ball_radius: float | None = None) -> ProblemInstance:
    """Overlapping group-lasso regression as a monotone saddle-point problem.

    Defaults reproduce the 82-dimensional design: 10 groups of 10 with 2
    shared coordinates between neighbors, ground-truth weights Gaussian on
    groups 4 and 5 (coordinates 24..41, 0-based) and zero elsewhere.
    """
    groups = _build_groups(n_groups, group_size, overlap)
    d = int(groups[-1][-1]) + 1
    rng = np.random.default_rng(seed)
    if n_groups >= 5:
        support = np.unique(np.concatenate([groups[3], groups[4]]))
    else:
        support = groups[-1]
    w_true = np.zeros(d)
    w_true[support] = rng.standard_normal(len(support))
    D = float(ball_radius) if ball_radius is not None \
        else 10.0 * float(np.linalg.norm(w_true))
    inst = CapInstance(d=d, groups=groups, eta=float(eta), w_true=w_true,
                       sigma_eps=float(noise_std), D=D)
    dual_dim = inst.dual_dim
    total = d + dual_dim

    # dense affine form for merit functions: mean(z) = M z + c
    L_mat = np.zeros((dual_dim, d))
    pos = 0
    for g in groups:
        L_mat[np.arange(pos, pos + len(g)), g] = eta
        pos += len(g)
    M = np.zeros((total, total))
    M[:d, :d] = np.eye(d)
    M[:d, d:] = L_mat.T
    M[d:, :d] = -L_mat
    c = np.concatenate([-w_true, np.zeros(dual_dim)])

    blocks = [(BallResolvent(BallSet(np.zeros(d), D)), (0, d))]
    pos = d
    for g in groups:
        blocks.append((BallResolvent(BallSet(np.zeros(len(g)), 1.0)),
                       (pos, pos + len(g))))
        pos += len(g)
    resolvent = resolvent_product(blocks)

    lipschitz = operator_norm(lambda zz: M @ zz, lambda zz: M.T @ zz, total)
    wn = float(np.linalg.norm(w_true))
    return ProblemInstance(
        dim=total,
        oracle=_CapOracle(inst),
        resolvent=resolvent,
        lipschitz=lipschitz,
        strong_monotonicity=0.0,
        feasible=None,
        rel_error_fn=lambda z: float(np.linalg.norm(z[:d] - w_true) / wn),
        affine_matrix=M,
        affine_shift=c,
        initial_point=np.zeros(total),
        name="cap",
        detail=inst,
    )


# ----------------------------------------------------------------------
# Synthetic affine instance with computed reference solution
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticAffineInstance:
    M: np.ndarray
    c: np.ndarray
    box: BoxSet
    mu: float
    x_ref: np.ndarray


class _AffineGaussianOracle(StochasticOracle):
    """Affine mean plus Gaussian mini-batch noise, sampled by its law.

    A batch of m iid draws with total per-draw variance sigma^2 has mean
    distributed as V(x) + (sigma_c/sqrt(m)) z with z standard normal and
    sigma_c = sigma/sqrt(d) per coordinate; the oracle draws that batch-mean
    directly, which is exact in distribution and keeps geometric batch
    schedules (m in the millions) at O(d) cost per iteration. An optional
    deterministic offset of norm bias/sqrt(m) along a fixed unit direction
    models the asymptotically vanishing bias regime.
    """

    def __init__(self, M, c, sigma, bias):
        self.M = M
        self.c = c
        d = c.shape[0]
        self.dim = d
        self.mean = lambda x: M @ np.asarray(x, dtype=np.float64) + c
        self.sigma = float(sigma)
        self.variance_bound = float(sigma)
        self.bias_bound = float(bias)
        self._coord_sigma = float(sigma) / np.sqrt(d)
        self._u = np.ones(d) / np.sqrt(d)

    def sample(self, x, rng):
        return self.batch(x, 1, rng)

    def batch(self, x, m, rng):
        v = self.mean(x)
        if self.sigma > 0.0:
            v = v + (self._coord_sigma / np.sqrt(m)) * \
                rng.standard_normal(self.dim)
        if self.bias_bound > 0.0:
            v = v + (self.bias_bound / np.sqrt(m)) * self._u
        return v


def synthetic_build(dim: int = 20, mu: float = 1.0, skew_norm: float = 1.0,
                    sigma: float = 0.0, bias: float = 0.0,
                    box_halfwidth: float = 1.0, seed: int = 0,
                    ref_tol: float = 1e-12, ref_max_iters: int = 1_000_000
                    ) -> ProblemInstance:
    """Affine operator V(x) = (mu I + S) x + c on a centered box.

    S is a random skew matrix rescaled to the requested spectral norm, so
    the symmetric part of M is exactly mu*I. The reference solution is
    computed at build time by a deterministic extragradient sweep with step
    1/(4 ||M||) run to residual ref_tol; failing to reach 1e-10 within
    ref_max_iters is a build error.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    rng = np.random.default_rng(seed)
    d = int(dim)
    if skew_norm > 0:
        A = rng.standard_normal((d, d))
        S = A - A.T
        S *= skew_norm / np.linalg.norm(S, 2)
    else:
        S = np.zeros((d, d))
    M = mu * np.eye(d) + S
    g = rng.standard_normal(d)
    c = g / np.linalg.norm(g)
    box = BoxSet(np.full(d, -float(box_halfwidth)),
                 np.full(d, float(box_halfwidth)))

    L = float(np.linalg.norm(M, 2))
    lam = 1.0 / (4.0 * L) if L > 0 else 0.25
    x = np.zeros(d)
    mean = lambda z: M @ z + c
    resid = np.inf
    for _ in range(ref_max_iters):
        fx = mean(x)
        y = project_box(x - lam * fx, box)
        resid = float(np.linalg.norm(x - y))
        if resid <= ref_tol:
            break
        x = project_box(x - lam * mean(y), box)
    if resid > 1e-10:
        raise RuntimeError(
            f"reference solve stalled at residual {resid:.3e} "
            f"after {ref_max_iters} iterations")

    inst = SyntheticAffineInstance(M=M, c=c, box=box, mu=float(mu), x_ref=x)
    xr = x.copy()
    xn = float(np.linalg.norm(xr))
    return ProblemInstance(
        dim=d,
        oracle=_AffineGaussianOracle(M, c, sigma, bias),
        resolvent=BoxResolvent(box),
        lipschitz=L,
        strong_monotonicity=float(mu),
        feasible=box,
        solution=xr,
        rel_error_fn=(lambda z: float(np.linalg.norm(z - xr) / xn))
        if xn > 0 else None,
        affine_matrix=M,
        affine_shift=c,
        initial_point=np.zeros(d),
        name=f"synthetic(d={d},mu={mu:g})",
        detail=inst,
    )
