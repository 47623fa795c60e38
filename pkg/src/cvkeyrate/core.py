"""Ideal GMCS key-rate evaluation (homodyne detection, reverse reconciliation).

All quadrature variances and noises are expressed in shot-noise units
(vacuum variance = 1). The channel is a Gaussian channel with transmittance
T and excess noise eps referred to the channel input; Bob's homodyne
detector has efficiency eta and electronic noise v_el and is trusted
(inaccessible to the eavesdropper). The secret fraction is

    R0 = beta * I_AB - chi_BE

with I_AB the Alice-Bob mutual information and chi_BE the Holevo bound on
the eavesdropper's information about Bob's data, computed from the
symplectic eigenvalues of the shared Gaussian state. Rates are in bits per
pulse and are NOT clamped at zero here; clamping belongs to reporting
layers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonphysicalStateError, NoPositiveRateError

# Discriminants this far below zero (after scaling) are treated as float
# noise and clamped; anything worse raises NonphysicalStateError.
_DISC_TOL = 1e-9


class CaseTag(enum.Enum):
    """Which security analysis produced a KeyRateResult."""

    CASE0 = "Case0"
    CASE1 = "Case1"
    CASE1R = "Case1R"
    CASE2A = "Case2A"
    CASE2B_DIRECT = "Case2B_direct"
    CASE2B_REVERSE = "Case2B_reverse"


@dataclass(frozen=True)
class SystemParams:
    """Detector and protocol constants.

    Defaults are the standard evaluation set used throughout:
    eta=0.60, eps_c=0.02, v_el=0.02, V_A=18, beta=0.956, with
    0.2 dB/km fiber attenuation.
    """

    eta: float = 0.60
    v_el: float = 0.02
    eps_c: float = 0.02
    v_a: float = 18.0
    beta: float = 0.956
    alpha_db_per_km: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise DomainError(f"detector efficiency eta must be in (0, 1], got {self.eta}")
        if self.v_el < 0.0:
            raise DomainError(f"electronic noise v_el must be >= 0, got {self.v_el}")
        if self.eps_c < 0.0:
            raise DomainError(f"channel excess noise eps_c must be >= 0, got {self.eps_c}")
        if self.v_a <= 0.0:
            raise DomainError(f"modulation variance v_a must be > 0, got {self.v_a}")
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"reconciliation efficiency beta must be in (0, 1], got {self.beta}")
        if self.alpha_db_per_km <= 0.0:
            raise DomainError(f"fiber attenuation must be > 0 dB/km, got {self.alpha_db_per_km}")


@dataclass(frozen=True)
class ChannelPoint:
    """A (transmittance, excess noise) pair referred to the channel input.

    Physical values satisfy 0 < t <= 1 and eps >= 0. Construction does not
    enforce this because estimated points (montecarlo.estimate_params) can
    legitimately land slightly outside those ranges through sampling noise;
    every rate computation calls validate() and rejects invalid points.
    """

    t: float
    eps: float

    def validate(self):
        if not np.isfinite(self.t) or not 0.0 < self.t <= 1.0:
            raise DomainError(f"channel transmittance must be in (0, 1], got {self.t}")
        if not np.isfinite(self.eps) or self.eps < 0.0:
            raise DomainError(f"channel excess noise must be >= 0, got {self.eps}")
        return self

    @classmethod
    def from_distance(cls, distance_km, params: SystemParams) -> "ChannelPoint":
        """Channel point of a fiber span at the params' attenuation and eps_c."""
        return cls(channel_transmittance(distance_km, params.alpha_db_per_km), params.eps_c)


@dataclass(frozen=True)
class HolevoBreakdown:
    """Intermediate quantities behind a Holevo-bound evaluation."""

    chi_line: float
    chi_hom: float
    chi_tot: float
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    a_coef: float
    b_coef: float
    c_coef: float
    d_coef: float


@dataclass(frozen=True)
class KeyRateResult:
    """A key rate in bits/pulse plus its information-theoretic breakdown."""

    rate: float
    i_ab: float
    chi_be: float
    case_tag: CaseTag
    diagnostics: dict[str, float] | None = None


@dataclass(frozen=True)
class MaxDistanceResult:
    """Zero-rate distance search outcome; crossed_zero is False when the
    rate stayed positive over the whole search window."""

    distance_km: float
    crossed_zero: bool


def g_func(x):
    """Bosonic entropy kernel (x+1)log2(x+1) - x log2(x), with g_func(0) = 0.

    Accepts scalars or arrays; raises DomainError for negative input.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("g_func is defined for x >= 0 only")
    safe = np.where(arr > 0.0, arr, 1.0)
    out = np.where(arr > 0.0, (arr + 1.0) * np.log2(arr + 1.0) - safe * np.log2(safe), 0.0)
    return float(out) if arr.ndim == 0 else out


def channel_transmittance(distance_km, alpha_db_per_km):
    """Fiber power transmittance 10^(-alpha*L/10)."""
    dist = np.asarray(distance_km, dtype=float)
    if np.any(dist < 0.0):
        raise DomainError("distance must be >= 0 km")
    if alpha_db_per_km <= 0.0:
        raise DomainError("attenuation must be > 0 dB/km")
    out = 10.0 ** (-alpha_db_per_km * dist / 10.0)
    return float(out) if dist.ndim == 0 else out


def _noise_terms(t, eps, eta, v_el):
    """chi_line, chi_hom, chi_tot for channel (t, eps) and detector (eta, v_el)."""
    chi_line = 1.0 / t - 1.0 + eps
    chi_hom = (1.0 + v_el) / eta - 1.0
    chi_tot = chi_line + chi_hom / t
    return chi_line, chi_hom, chi_tot


def _sym_eig_pair(p, q):
    """Roots lam_+/- with lam^2 = (p +/- sqrt(p^2 - 4q)) / 2, guarding tiny
    negative discriminants and flagging genuinely negative ones."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    disc = p * p - 4.0 * q
    tol = _DISC_TOL * np.maximum(1.0, p * p)
    if np.any(disc < -tol):
        raise NonphysicalStateError(
            "negative symplectic discriminant: channel/source parameters are inconsistent"
        )
    disc = np.maximum(disc, 0.0)
    root = np.sqrt(disc)
    return np.sqrt(0.5 * (p + root)), np.sqrt(np.maximum(0.5 * (p - root), 0.0))


def _entropy_arg(lam):
    """Map a symplectic eigenvalue to the g_func argument (lam-1)/2, clamping
    float-level dips below 1."""
    arg = (np.asarray(lam, dtype=float) - 1.0) / 2.0
    if np.any(arg < -_DISC_TOL):
        raise NonphysicalStateError("symplectic eigenvalue below 1 beyond float tolerance")
    return np.maximum(arg, 0.0)


def _rate_arrays(t, eps, v_a, eta, v_el, beta):
    """Vectorized (rate, i_ab, chi_be) plus the full eigenvalue breakdown.

    Inputs broadcast; this is the workhorse behind the scalar public
    operations and the distribution-average rates.
    """
    t = np.asarray(t, dtype=float)
    eps = np.asarray(eps, dtype=float)
    v_a = np.asarray(v_a, dtype=float)
    V = v_a + 1.0

    chi_line, chi_hom, chi_tot = _noise_terms(t, eps, eta, v_el)
    i_ab = 0.5 * np.log2((V + chi_tot) / (1.0 + chi_tot))

    a = V * V * (1.0 - 2.0 * t) + 2.0 * t + t * t * (V + chi_line) ** 2
    b = t * t * (V * chi_line + 1.0) ** 2
    sqrt_b = np.sqrt(b)
    denom = t * (V + chi_tot)
    c = (V * sqrt_b + t * (V + chi_line) + a * chi_hom) / denom
    d = sqrt_b * (V + sqrt_b * chi_hom) / denom

    lam1, lam2 = _sym_eig_pair(a, b)
    lam3, lam4 = _sym_eig_pair(c, d)

    chi_be = (
        g_func(_entropy_arg(lam1))
        + g_func(_entropy_arg(lam2))
        - g_func(_entropy_arg(lam3))
        - g_func(_entropy_arg(lam4))
    )
    # chi_be is nonnegative for any consistent state; absorb float dust.
    chi_be = np.where(chi_be < 0.0, np.where(chi_be > -_DISC_TOL, 0.0, np.nan), chi_be)
    if np.any(np.isnan(chi_be)):
        raise NonphysicalStateError("Holevo bound came out negative beyond float tolerance")

    rate = beta * i_ab - chi_be
    breakdown = (chi_line, chi_hom, chi_tot, lam1, lam2, lam3, lam4, a, b, c, d)
    return rate, i_ab, chi_be, breakdown


def mutual_info(params: SystemParams, ch: ChannelPoint) -> float:
    """Alice-Bob mutual information 0.5*log2((V_A+1+chi_tot)/(1+chi_tot))."""
    ch.validate()
    _, _, chi_tot = _noise_terms(ch.t, ch.eps, params.eta, params.v_el)
    return float(0.5 * np.log2((params.v_a + 1.0 + chi_tot) / (1.0 + chi_tot)))


def holevo_bound(params: SystemParams, ch: ChannelPoint) -> tuple[float, HolevoBreakdown]:
    """Holevo bound on Eve's information about Bob's data, with breakdown."""
    ch.validate()
    _, _, chi_be, bd = _rate_arrays(ch.t, ch.eps, params.v_a, params.eta, params.v_el, params.beta)
    chi_line, chi_hom, chi_tot, l1, l2, l3, l4, a, b, c, d = (float(v) for v in bd)
    return float(chi_be), HolevoBreakdown(
        chi_line=chi_line,
        chi_hom=chi_hom,
        chi_tot=chi_tot,
        lambda1=l1,
        lambda2=l2,
        lambda3=l3,
        lambda4=l4,
        a_coef=a,
        b_coef=b,
        c_coef=c,
        d_coef=d,
    )


def key_rate_r0(params: SystemParams, ch: ChannelPoint) -> KeyRateResult:
    """Ideal-source secret key rate beta*I_AB - chi_BE in bits/pulse."""
    ch.validate()
    rate, i_ab, chi_be, _ = _rate_arrays(
        ch.t, ch.eps, params.v_a, params.eta, params.v_el, params.beta
    )
    return KeyRateResult(
        rate=float(rate), i_ab=float(i_ab), chi_be=float(chi_be), case_tag=CaseTag.CASE0
    )


def max_distance(
    rate_fn, search_limit_km, n_probe: int = 129, xtol_km: float = 1e-6
) -> MaxDistanceResult:
    """Largest distance with positive rate, by bracketing bisection.

    rate_fn maps distance in km to a rate in bits/pulse; it must be positive
    at 0 and, beyond its last positive point, stay nonpositive (checked on a
    probe grid). Bisection runs on the positivity predicate rather than a
    sign change because clamped rates sit exactly at zero past their edge.
    When the rate is still positive at the search limit, the limit itself is
    returned with crossed_zero=False.
    """
    if search_limit_km <= 0.0:
        raise DomainError("search limit must be positive")
    r_start = rate_fn(0.0)
    if r_start <= 0.0:
        raise NoPositiveRateError(f"rate at zero distance is {r_start}; nothing to search")

    grid = np.linspace(0.0, search_limit_km, n_probe)
    rates = np.array([r_start] + [rate_fn(L) for L in grid[1:]])
    nonpos = np.nonzero(rates <= 0.0)[0]
    if nonpos.size == 0:
        return MaxDistanceResult(distance_km=float(search_limit_km), crossed_zero=False)

    first = int(nonpos[0])
    # Monotone-decay precondition: no return to positive after the crossing.
    if np.any(rates[first:] > 0.0):
        raise DomainError("rate function turns positive again beyond its first zero crossing")

    lo, hi = float(grid[first - 1]), float(grid[first])
    while hi - lo > xtol_km:
        mid = 0.5 * (lo + hi)
        if rate_fn(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return MaxDistanceResult(distance_km=0.5 * (lo + hi), crossed_zero=True)
