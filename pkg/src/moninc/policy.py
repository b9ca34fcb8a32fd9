"""Parameter laws for the inertial relaxed splitting iteration.

Each supported regime fixes how the inertia alpha_k, step lam_k, and
relaxation rho_k evolve:

    asymptotic        small steps lam < 1/(4L), relaxation from the
                      almost-sure convergence rule
    constant          the asymptotic rule with constant inertia
    larger_step       steps up to (1-nu)/(2L) with the matching relaxation cap
    strongly_monotone steps capped by lambda_strong, relaxation from the
                      linear-rate rule (uses L_tilde = sqrt(L^2 + 1/2))
    monotone_gap      merely monotone case, lam < 1/(2L), relaxation from the
                      averaged-gap rule
    custom            user-supplied constants; validate() still reports any
                      violated regime hypotheses as warnings

Formulas are evaluated exactly as stated; validation never silently alters
a user's numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolicyViolation",
    "RegimePolicy",
    "alpha_at",
    "lam_at",
    "rho_asymptotic",
    "rho_strong",
    "rho_monotone",
    "lambda_strong",
    "schedule_at",
    "validate",
]

_REGIMES = ("asymptotic", "constant", "larger_step", "strongly_monotone",
            "monotone_gap", "custom")


class PolicyViolation(ValueError):
    """A parameter landed outside the range its regime requires."""


@dataclass(frozen=True)
class RegimePolicy:
    """Declarative bundle of regime name and constants.

    alpha is the constant inertia in "constant" mode, or the supremum
    alpha_0 in "increasing" mode where alpha_k = alpha_0 * (1 - 1/(k+1)).
    alpha_bar (the upper bound used by the relaxation formulas) equals alpha.
    lam may be a positive float or a callable k -> lam_k.
    rho is only consulted in the custom regime (float or callable k -> rho_k).
    """

    regime: str
    alpha: float
    lam: object = None
    alpha_mode: str = "constant"
    eps_bar: float = 0.1
    nu: float = 0.5
    a: float = 0.5
    b: float = 0.5
    rho: object = None

    def __post_init__(self):
        if self.regime not in _REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.alpha_mode not in ("constant", "increasing"):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError("alpha must lie in [0, 1)")

    @property
    def alpha_bar(self) -> float:
        return self.alpha


def alpha_at(policy: RegimePolicy, k: int) -> float:
    """Inertia at iteration k >= 1; increasing mode tends to alpha from below."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if policy.alpha_mode == "constant":
        return policy.alpha
    return policy.alpha * (1.0 - 1.0 / (k + 1.0))


def lam_at(policy: RegimePolicy, k: int) -> float:
    if callable(policy.lam):
        return float(policy.lam(k))
    if policy.lam is None:
        raise ValueError("policy has no step size lam")
    return float(policy.lam)


def rho_asymptotic(alpha_k, lam_k, L, eps_bar, alpha_bar) -> float:
    """Relaxation for the small-step almost-sure convergence rule.

    rho_k = 5 (1-eps_bar)(1-alpha_bar)^2
            / (4 (2 alpha_k^2 - alpha_k + 1)(1 + L lam_k)),
    valid only for lam_k in (0, 1/(4L)).
    """
    if not (0.0 < eps_bar < 1.0):
        raise ValueError("eps_bar must lie in (0,1)")
    if not (0.0 <= alpha_k <= alpha_bar < 1.0):
        raise ValueError("need 0 <= alpha_k <= alpha_bar < 1")
    if L > 0 and not (0.0 < lam_k < 1.0 / (4.0 * L)):
        raise PolicyViolation(
            f"lam={lam_k:g} outside (0, 1/(4L)) = (0, {1.0 / (4.0 * L):g})")
    if L == 0 and lam_k <= 0:
        raise PolicyViolation("lam must be positive")
    num = 5.0 * (1.0 - eps_bar) * (1.0 - alpha_bar) ** 2
    den = 4.0 * (2.0 * alpha_k ** 2 - alpha_k + 1.0) * (1.0 + L * lam_k)
    return num / den


def rho_strong(alpha_k, lam, L_tilde, a, floor=False) -> float:
    """Relaxation for the linear-rate regime.

    rho_k = (3-a)(1-alpha_k)^2 / (2 (2 alpha_k^2 - alpha_k/2 + 1)(1 + L_tilde lam)).
    With floor=True, returns instead the k-independent lower bound
    16 (3-a)(1-alpha_bar)^2 / (31 (1 + L_tilde lam)), reading alpha_k as
    alpha_bar. (31/16 is the minimum of 2(2t^2 - t/2 + 1) over t, at t=1/8.)
    """
    if not (0.0 < a < 1.0):
        raise ValueError("a must lie in (0,1)")
    if not (0.0 <= alpha_k < 1.0):
        raise ValueError("alpha_k must lie in [0,1)")
    if lam <= 0 or L_tilde < 0:
        raise ValueError("need lam > 0 and L_tilde >= 0")
    if floor:
        return (16.0 * (3.0 - a) * (1.0 - alpha_k) ** 2
                / (31.0 * (1.0 + L_tilde * lam)))
    num = (3.0 - a) * (1.0 - alpha_k) ** 2
    den = 2.0 * (2.0 * alpha_k ** 2 - 0.5 * alpha_k + 1.0) * (1.0 + L_tilde * lam)
    return num / den


def rho_monotone(alpha_k, lam, L, alpha_bar) -> float:
    """Relaxation for the averaged-gap (merely monotone) rule.

    rho_k = 3 (1-alpha_bar)^2 / (2 (2 alpha_k^2 - alpha_k + 1)(1 + L lam)),
    valid for lam in (0, 1/(2L)); always < 3/(2(1+L lam)).
    """
    if not (0.0 <= alpha_k <= alpha_bar < 1.0):
        raise ValueError("need 0 <= alpha_k <= alpha_bar < 1")
    if L > 0 and not (0.0 < lam < 1.0 / (2.0 * L)):
        raise PolicyViolation(
            f"lam={lam:g} outside (0, 1/(2L)) = (0, {1.0 / (2.0 * L):g})")
    if L == 0 and lam <= 0:
        raise PolicyViolation("lam must be positive")
    num = 3.0 * (1.0 - alpha_bar) ** 2
    den = 2.0 * (2.0 * alpha_k ** 2 - alpha_k + 1.0) * (1.0 + L * lam)
    return num / den


def lambda_strong(mu, L, a, b) -> float:
    """Largest admissible constant step in the linear-rate regime.

    min{ a/(2 mu), b mu, (1-a)/(2 L_tilde) } with L_tilde = sqrt(L^2 + 1/2).
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ValueError("a and b must lie in (0,1)")
    if L < 0:
        raise ValueError("L must be nonnegative")
    lt = np.sqrt(L * L + 0.5)
    return float(min(a / (2.0 * mu), b * mu, (1.0 - a) / (2.0 * lt)))


def _rho_larger_step(alpha_k, lam, L, nu, eps_bar) -> float:
    # Cap (3-nu)(1-alpha_k)^2 / (2 (2 alpha_k^2 - alpha_k + 1)(1 + L lam)),
    # backed off by the eps_bar margin; steps up to (1-nu)/(2L) are allowed.
    cap = (3.0 - nu) * (1.0 - alpha_k) ** 2 / (
        2.0 * (2.0 * alpha_k ** 2 - alpha_k + 1.0) * (1.0 + L * lam))
    return (1.0 - eps_bar) * cap


def schedule_at(policy: RegimePolicy, k: int, L: float, mu: float | None = None):
    """(alpha_k, lam_k, rho_k) at iteration k under the policy's regime."""
    ak = alpha_at(policy, k)
    regime = policy.regime
    if regime in ("asymptotic", "constant"):
        lk = lam_at(policy, k)
        return ak, lk, rho_asymptotic(ak, lk, L, policy.eps_bar, policy.alpha_bar)
    if regime == "larger_step":
        if not (0.0 < policy.nu < 1.0):
            raise ValueError("nu must lie in (0,1)")
        lk = lam_at(policy, k)
        if L > 0 and not (0.0 < lk < (1.0 - policy.nu) / (2.0 * L)):
            raise PolicyViolation(
                f"lam={lk:g} outside (0, (1-nu)/(2L)) for nu={policy.nu:g}")
        return ak, lk, _rho_larger_step(ak, lk, L, policy.nu, policy.eps_bar)
    if regime == "strongly_monotone":
        if policy.lam is not None:
            lk = lam_at(policy, k)
        else:
            if mu is None or mu <= 0:
                raise ValueError("strongly_monotone regime needs mu > 0")
            lk = lambda_strong(mu, L, policy.a, policy.b)
        lt = float(np.sqrt(L * L + 0.5))
        return ak, lk, rho_strong(ak, lk, lt, policy.a)
    if regime == "monotone_gap":
        lk = lam_at(policy, k)
        return ak, lk, rho_monotone(ak, lk, L, policy.alpha_bar)
    # custom
    lk = lam_at(policy, k)
    if policy.rho is None:
        raise ValueError("custom regime needs an explicit rho")
    rk = float(policy.rho(k)) if callable(policy.rho) else float(policy.rho)
    return ak, lk, rk


def validate(policy: RegimePolicy, L: float, mu: float | None = None):
    """Human-readable diagnostics; empty list means the regime hypotheses hold.

    Never raises: custom configurations are allowed to break the sufficient
    conditions, the caller decides whether that is fatal.
    """
    out = []
    try:
        lam1 = lam_at(policy, 1)
    except ValueError:
        if (policy.regime == "strongly_monotone" and mu is not None
                and mu > 0 and 0.0 < policy.a < 1.0
                and 0.0 < policy.b < 1.0):
            # lam defaults to lambda_strong here, which satisfies its own cap
            lam1 = lambda_strong(mu, L, policy.a, policy.b)
        else:
            return ["policy has no step size lam"]
    if lam1 <= 0:
        out.append(f"lam = {lam1:g} is not positive")
        return out
    if not (0.0 < policy.alpha < 1.0):
        if not (policy.alpha == 0.0 and policy.regime == "custom"):
            out.append(f"alpha = {policy.alpha:g} outside (0,1)")
    regime = policy.regime
    check = regime if regime != "custom" else _closest_regime(policy)
    if check in ("asymptotic", "constant"):
        if not (0.0 < policy.eps_bar < 1.0):
            out.append(f"eps_bar = {policy.eps_bar:g} outside (0,1)")
        if L > 0 and not (lam1 < 1.0 / (4.0 * L)):
            out.append(f"lam = {lam1:g} not in (0, 1/(4L)) = (0, {1/(4*L):g})")
    elif check == "larger_step":
        if policy.alpha_mode != "constant":
            out.append("larger_step regime assumes constant inertia")
        if not (0.0 < policy.nu < 1.0):
            out.append(f"nu = {policy.nu:g} outside (0,1)")
        elif L > 0 and not (lam1 < (1.0 - policy.nu) / (2.0 * L)):
            out.append(
                f"lam = {lam1:g} not in (0, (1-nu)/(2L)) = "
                f"(0, {(1 - policy.nu) / (2 * L):g})")
    elif check == "strongly_monotone":
        if not (0.0 < policy.a < 1.0):
            out.append(f"a = {policy.a:g} outside (0,1)")
        if not (0.0 < policy.b < 1.0):
            out.append(f"b = {policy.b:g} outside (0,1)")
        if mu is None or mu <= 0:
            out.append("strongly_monotone regime without a positive mu")
        elif 0.0 < policy.a < 1.0 and 0.0 < policy.b < 1.0:
            cap = lambda_strong(mu, L, policy.a, policy.b)
            if lam1 > cap:
                out.append(f"lam = {lam1:g} exceeds lambda_strong = {cap:g}")
    elif check == "monotone_gap":
        if L > 0 and not (lam1 < 1.0 / (2.0 * L)):
            out.append(f"lam = {lam1:g} not in (0, 1/(2L)) = (0, {1/(2*L):g})")
    if regime == "custom" and policy.rho is None:
        out.append("custom regime without an explicit rho")
    return out


def _closest_regime(policy: RegimePolicy) -> str:
    # custom runs are checked against the hypotheses they most plausibly
    # target: strongly monotone if rho is 1-ish, else the asymptotic rule.
    rho = policy.rho
    if rho is not None and not callable(rho) and float(rho) >= 1.0:
        return "strongly_monotone"
    return "asymptotic"
