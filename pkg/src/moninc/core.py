"""Ambient-space primitives: points, feasible sets, projections, resolvents.

Everything downstream (solvers, merit functions, problem builders) works with
dense 1-D float64 arrays. Set-valued parts enter only through their resolvents,
which for every built-in problem are closed-form projections; a product
resolvent composes blockwise maps over a partition of the coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericFailure",
    "UnsupportedOperation",
    "as_point",
    "BoxSet",
    "BallSet",
    "project_box",
    "project_ball",
    "ResolventMap",
    "IdentityResolvent",
    "BoxResolvent",
    "BallResolvent",
    "resolvent_product",
    "operator_norm",
]


class NumericFailure(RuntimeError):
    """A non-finite value surfaced where finite arithmetic was required."""


class UnsupportedOperation(RuntimeError):
    """The object lacks the contract needed for the requested computation."""


def as_point(x) -> np.ndarray:
    """Coerce to a 1-D float64 array and reject non-finite coordinates."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise ValueError(f"point must be 1-D, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise NumericFailure("point has non-finite coordinates")
    return p


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box {x : lower <= x <= upper} (componentwise)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True)
class BallSet:
    """Euclidean ball {x : ||x - center|| <= radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_point(self.center)
        r = float(self.radius)
        if r < 0:
            raise ValueError("ball radius must be nonnegative")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


def project_box(x, box: BoxSet) -> np.ndarray:
    """Orthogonal projection onto a box (componentwise clamp).

    Ties at a bound return the bound itself, so the map is deterministic
    and idempotent.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != box.lower.shape:
        raise ValueError(
            f"dimension mismatch: point {x.shape} vs box {box.lower.shape}"
        )
    return np.clip(x, box.lower, box.upper)


def project_ball(x, ball: BallSet) -> np.ndarray:
    """Orthogonal projection onto a Euclidean ball (radial scaling)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != ball.center.shape:
        raise ValueError(
            f"dimension mismatch: point {x.shape} vs ball {ball.center.shape}"
        )
    diff = x - ball.center
    dist = float(np.linalg.norm(diff))
    if dist <= ball.radius:
        return x.copy()
    return ball.center + (ball.radius / dist) * diff


class ResolventMap:
    """Evaluation contract for J = (Id + lam*T)^(-1) of a maximal monotone T.

    Subclasses implement apply(x, lam). Every map produced here is firmly
    nonexpansive: ||J(x) - J(y)|| <= ||x - y||.
    """

    def apply(self, x: np.ndarray, lam: float) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray, lam: float) -> np.ndarray:
        return self.apply(x, lam)


class IdentityResolvent(ResolventMap):
    """Resolvent of T = 0: the identity for every lam."""

    def apply(self, x, lam):
        return np.asarray(x, dtype=np.float64).copy()


class BoxResolvent(ResolventMap):
    """Resolvent of the normal cone of a box: projection, independent of lam."""

    def __init__(self, box: BoxSet):
        self.box = box

    def apply(self, x, lam):
        return project_box(x, self.box)


class BallResolvent(ResolventMap):
    """Resolvent of the normal cone of a ball: projection, independent of lam."""

    def __init__(self, ball: BallSet):
        self.ball = ball

    def apply(self, x, lam):
        return project_ball(x, self.ball)


class _ProductResolvent(ResolventMap):
    def __init__(self, blocks, dim):
        self.blocks = blocks  # list of (resolvent, start, stop)
        self.dim = dim

    def apply(self, x, lam):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: {x.shape[0]} vs {self.dim}")
        out = np.empty_like(x)
        for res, start, stop in self.blocks:
            out[start:stop] = res.apply(x[start:stop], lam)
        return out


def resolvent_product(blocks) -> ResolventMap:
    """Blockwise resolvent over a partition of the coordinates.

    `blocks` is a sequence of (ResolventMap, index_range) pairs where
    index_range is a (start, stop) pair or a range object. The ranges must
    partition [0, d) with d the largest stop; overlaps or gaps are errors.
    """
    norm = []
    for res, rng in blocks:
        if isinstance(rng, range):
            if rng.step != 1:
                raise ValueError("index ranges must have step 1")
            start, stop = rng.start, rng.stop
        else:
            start, stop = int(rng[0]), int(rng[1])
        if not (0 <= start < stop):
            raise ValueError(f"bad index range ({start}, {stop})")
        norm.append((res, start, stop))
    if not norm:
        raise ValueError("resolvent_product needs at least one block")
    norm.sort(key=lambda b: b[1])
    cursor = 0
    for _, start, stop in norm:
        if start < cursor:
            raise ValueError(f"overlapping index ranges at {start}")
        if start > cursor:
            raise ValueError(f"gap in index ranges at [{cursor}, {start})")
        cursor = stop
    return _ProductResolvent(norm, cursor)


def operator_norm(apply, apply_adjoint, dim: int, iters: int = 200,
                  tol: float = 1e-12) -> float:
    """Spectral norm of a linear map via power iteration on adjoint(apply(.)).

    The starting vector is deterministic (normalized all-ones) so that
    Lipschitz estimates feeding step sizes are reproducible. Stops when the
    eigenvalue estimate changes by at most tol, or after `iters` steps.
    A zero map returns 0.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    v = np.ones(dim) / np.sqrt(dim)
    est = 0.0
    for _ in range(iters):
        w = apply_adjoint(apply(v))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        new_est = float(v @ w)  # Rayleigh quotient for the PSD composition
        v = w / nw
        if abs(new_est - est) <= tol * max(1.0, abs(new_est)):
            est = new_est
            break
        est = new_est
    return float(np.sqrt(max(est, 0.0)))
