"""Secret-key rates under intensity fluctuations.

Three device assumptions, three analyses:

* Case 1 (monitored): Alice reads the per-pulse multiplier d and rescales
  her records, so the rate is the distribution average of the ideal rate
  with modulation variance d*V_A. The refined variant additionally drops
  every d-set whose conditional rate is nonpositive (pointwise clamp under
  the average), which extends the zero-rate distance.

* Case 2A (unmonitored, Eve blind too): recording the intended X_A while
  sending sqrt(d)X_A is a virtual classical remapping of a Gaussian source;
  it is absorbed into an equivalent source transmittance/excess noise
  t_s = (1 - V_d/8)^2, eps_s = V_A*V_d/4, composed with the physical channel.

* Case 2B (unmonitored, Eve informed): pulses brighter than a cutoff d_max
  are tagged and conservatively surrendered to Eve. Alice records
  sqrt(d_max)*X_A, the equivalent source becomes t_s = (1 - V_d/8)^2/d_max,
  eps_s = V_A*V_d*d_max/4, and the untagged fraction p_s = P(d <= d_max)
  scales the penalty split between leaked raw entropy and the Holevo term.

The (1 - p_s) penalties use Gaussian differential entropies
0.5*log2(2*pi*e*Var) with Var in shot-noise units. This convention
dominates the tagged penalty at small p_s (differential entropy of a
continuous variable is a few bits here) and is the documented reading; a
per-symbol discrete-alphabet convention would need a reconciliation model
the protocol does not pin down.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CaseTag,
    ChannelPoint,
    KeyRateResult,
    SystemParams,
    _rate_arrays,
    g_func,
)
from .errors import DomainError, KeyRateError
from .fluctuation import FluctuationModel

_DMAX_COARSE = 64       # coarse-grid points before golden-section refinement
_DMAX_XTOL = 1e-4       # absolute d_max tolerance of the refinement
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EquivalentSource:
    """Source-equivalent transmittance and excess noise of a remapped frame."""

    t_s: float
    eps_s: float
    d_max: float | None = None


@dataclass(frozen=True)
class TaggedRateTerms:
    """Pieces of the tagged-rate formula for one (channel, cutoff, direction).

    untagged_fraction is the probability mass at or below the cutoff (called
    p_s in the cases analysis; the name avoids colliding with a signal
    p-quadrature). Entropies are differential, in bits, shot-noise units.
    """

    untagged_fraction: float
    i_ab_prime: float
    h_xb: float
    h_xa_prime: float
    chi_tagged_bound: float


def _diff_entropy(var):
    """Differential entropy 0.5*log2(2*pi*e*var) of a centered Gaussian."""
    if var <= 0.0:
        raise DomainError(f"entropy needs a positive variance, got {var}")
    return 0.5 * np.log2(2.0 * np.pi * np.e * var)


# -- case 1: monitored fluctuations -----------------------------------------


def _case1_components(params: SystemParams, model: FluctuationModel, ch: ChannelPoint, refined):
    ch.validate()
    d, w = model.quadrature()
    rate, i_ab, chi_be, _ = _rate_arrays(
        ch.t, ch.eps, d * params.v_a, params.eta, params.v_el, params.beta
    )
    keep = rate > 0.0 if refined else np.ones_like(rate, dtype=bool)
    return (
        float(np.dot(w, np.where(keep, rate, 0.0))),
        float(np.dot(w, np.where(keep, i_ab, 0.0))),
        float(np.dot(w, np.where(keep, chi_be, 0.0))),
    )


def key_rate_case1(params: SystemParams, model: FluctuationModel, ch: ChannelPoint) -> KeyRateResult:
    """Distribution-averaged ideal rate: E_d[R0 at modulation variance d*V_A]."""
    rate, i_ab, chi_be = _case1_components(params, model, ch, refined=False)
    return KeyRateResult(rate=rate, i_ab=i_ab, chi_be=chi_be, case_tag=CaseTag.CASE1)


def key_rate_case1_refined(
    params: SystemParams, model: FluctuationModel, ch: ChannelPoint
) -> KeyRateResult:
    """Like case 1 but dropping the d-regions with nonpositive conditional rate."""
    rate, i_ab, chi_be = _case1_components(params, model, ch, refined=True)
    return KeyRateResult(rate=rate, i_ab=i_ab, chi_be=chi_be, case_tag=CaseTag.CASE1R)


def partition_sets(samples, n_sets, model: FluctuationModel):
    """Group (d, record) pairs into n_sets equal-probability bins of the model.

    Bin edges are the model quantiles at k/n_sets; each record lands in the
    bin its d falls into. Returns a list of n_sets lists of records.
    """
    if n_sets < 1:
        raise DomainError(f"need n_sets >= 1, got {n_sets}")
    samples = list(samples)
    groups = [[] for _ in range(n_sets)]
    if not samples:
        return groups
    edges = np.array([model.quantile(k / n_sets) for k in range(1, n_sets)])
    for d, record in samples:
        idx = int(np.searchsorted(edges, d, side="right"))
        groups[idx].append(record)
    return groups


# -- case 2A: unmonitored, secure source -------------------------------------


def equivalent_source_2a(v_a, v_d) -> EquivalentSource:
    """Equivalent source of the desired-frame recording: t_s = (1 - V_d/8)^2,
    eps_s = V_A*V_d/4 (second-order accurate in the fluctuation spread)."""
    if v_d < 0.0:
        raise DomainError(f"fluctuation variance must be >= 0, got {v_d}")
    if v_d >= 8.0:
        raise DomainError("fluctuation variance >= 8 is outside the expansion's regime")
    return EquivalentSource(t_s=(1.0 - v_d / 8.0) ** 2, eps_s=v_a * v_d / 4.0)


def overall_channel_2a(src: EquivalentSource, ch: ChannelPoint) -> ChannelPoint:
    """Compose an equivalent source with the physical channel:
    T = t_s*T_c, eps = eps_c/t_s + eps_s."""
    return ChannelPoint(t=src.t_s * ch.t, eps=ch.eps / src.t_s + src.eps_s)


def key_rate_case2a(
    params: SystemParams, model: FluctuationModel, ch: ChannelPoint
) -> KeyRateResult:
    """Ideal rate evaluated at the source-composed channel (desired frame)."""
    ch.validate()
    src = equivalent_source_2a(params.v_a, model.variance())
    overall = overall_channel_2a(src, ch)
    overall.validate()
    rate, i_ab, chi_be, _ = _rate_arrays(
        overall.t, overall.eps, params.v_a, params.eta, params.v_el, params.beta
    )
    return KeyRateResult(
        rate=float(rate),
        i_ab=float(i_ab),
        chi_be=float(chi_be),
        case_tag=CaseTag.CASE2A,
        diagnostics={
            "t_s": src.t_s,
            "eps_s": src.eps_s,
            "t_overall": overall.t,
            "eps_overall": overall.eps,
        },
    )


# -- case 2B: unmonitored, tagged source --------------------------------------


def equivalent_source_2b(v_a, v_d, d_max) -> EquivalentSource:
    """Equivalent source when Alice records sqrt(d_max)*X_A:
    t_s = (1 - V_d/8)^2 / d_max, eps_s = V_A*V_d*d_max/4."""
    if d_max <= 0.0:
        raise DomainError(f"cutoff d_max must be > 0, got {d_max}")
    if v_d < 0.0:
        raise DomainError(f"fluctuation variance must be >= 0, got {v_d}")
    if v_d >= 8.0:
        raise DomainError("fluctuation variance >= 8 is outside the expansion's regime")
    return EquivalentSource(
        t_s=(1.0 - v_d / 8.0) ** 2 / d_max, eps_s=v_a * v_d * d_max / 4.0, d_max=float(d_max)
    )


def _holevo_alice_eve(t, eps, v_a):
    """Holevo bound on Eve's information about Alice's recorded data.

    Conditioning is on Alice's side of the source-replacement state, which
    does not involve Bob's trusted detector: the residual eigenvalue is
    1 + T*eps, and the unconditional entropy reuses the channel-output pair.
    """
    V = v_a + 1.0
    chi_line = 1.0 / t - 1.0 + eps
    a = V * V * (1.0 - 2.0 * t) + 2.0 * t + t * t * (V + chi_line) ** 2
    b = t * t * (V * chi_line + 1.0) ** 2
    disc = max(a * a - 4.0 * b, 0.0)
    lam1 = np.sqrt(0.5 * (a + np.sqrt(disc)))
    lam2 = np.sqrt(max(0.5 * (a - np.sqrt(disc)), 0.0))
    lam_cond = 1.0 + t * eps
    chi = (
        g_func(max((lam1 - 1.0) / 2.0, 0.0))
        + g_func(max((lam2 - 1.0) / 2.0, 0.0))
        - g_func(max((lam_cond - 1.0) / 2.0, 0.0))
    )
    return max(chi, 0.0)


def tagged_rate_terms(
    params: SystemParams,
    model: FluctuationModel,
    ch: ChannelPoint,
    d_max,
    direction: str = "reverse",
) -> TaggedRateTerms:
    """Assemble the tagged-rate pieces for one cutoff and direction."""
    if direction not in ("reverse", "direct"):
        raise DomainError(f"direction must be 'reverse' or 'direct', got {direction!r}")
    ch.validate()
    src = equivalent_source_2b(params.v_a, model.variance(), d_max)
    overall = overall_channel_2a(src, ch)
    overall.validate()
    v_rec = d_max * params.v_a

    _, i_ab, chi_be, _ = _rate_arrays(
        overall.t, overall.eps, v_rec, params.eta, params.v_el, params.beta
    )
    p_s = float(model.cdf(d_max))
    v_bob = overall.t * params.eta * (v_rec + overall.eps) + 1.0 + params.v_el
    h_xb = float(_diff_entropy(v_bob))
    h_xa = float(_diff_entropy(v_rec))
    if direction == "reverse":
        chi_bound = p_s * float(chi_be)
    else:
        chi_bound = p_s * _holevo_alice_eve(overall.t, overall.eps, v_rec)
    return TaggedRateTerms(
        untagged_fraction=p_s,
        i_ab_prime=float(i_ab),
        h_xb=h_xb,
        h_xa_prime=h_xa,
        chi_tagged_bound=chi_bound,
    )


def key_rate_case2b(
    params: SystemParams,
    model: FluctuationModel,
    ch: ChannelPoint,
    d_max,
    direction: str = "reverse",
) -> KeyRateResult:
    """Tagged-source rate at a fixed cutoff.

    reverse: beta*I_A'B - (1 - p_s)*H(X_B) - p_s*chi_BE
    direct:  beta*I_A'B - (1 - p_s)*H(X_A') - p_s*chi_A'E
    """
    terms = tagged_rate_terms(params, model, ch, d_max, direction)
    p_s = terms.untagged_fraction
    leak = terms.h_xb if direction == "reverse" else terms.h_xa_prime
    rate = params.beta * terms.i_ab_prime - (1.0 - p_s) * leak - terms.chi_tagged_bound
    src = equivalent_source_2b(params.v_a, model.variance(), d_max)
    tag = CaseTag.CASE2B_REVERSE if direction == "reverse" else CaseTag.CASE2B_DIRECT
    chi_full = terms.chi_tagged_bound / p_s if p_s > 0.0 else 0.0
    return KeyRateResult(
        rate=float(rate),
        i_ab=terms.i_ab_prime,
        chi_be=chi_full,
        case_tag=tag,
        diagnostics={
            "untagged_fraction": p_s,
            "d_max": float(d_max),
            "t_s": src.t_s,
            "eps_s": src.eps_s,
            "h_xb": terms.h_xb,
            "h_xa_prime": terms.h_xa_prime,
        },
    )


def _dmax_search_window(model: FluctuationModel) -> tuple[float, float]:
    # Bounded supports are searched end to end; the gaussian support already
    # carries the 6-sigma window, beyond which the untagged mass gain is nil.
    return model.support


def optimize_dmax(
    params: SystemParams,
    model: FluctuationModel,
    ch: ChannelPoint,
    direction: str = "reverse",
) -> tuple[float, KeyRateResult]:
    """Cutoff maximizing the tagged rate over the model's search window.

    Coarse 64-point grid, then golden-section refinement to 1e-4 absolute;
    ties break toward the smaller cutoff. When every cutoff loses money the
    best (still negative) point is returned with a no_positive_rate flag in
    the diagnostics.
    """
    lo, hi = _dmax_search_window(model)
    if hi <= lo:
        result = key_rate_case2b(params, model, ch, lo if lo > 0 else 1.0, direction)
        return (lo if lo > 0 else 1.0), result

    def rate_at(d):
        try:
            return key_rate_case2b(params, model, ch, d, direction).rate
        except KeyRateError:
            return -np.inf

    grid = np.linspace(lo, hi, _DMAX_COARSE)
    vals = np.array([rate_at(d) for d in grid])
    best = int(np.argmax(vals))  # argmax takes the first (smallest d) on ties

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, _DMAX_COARSE - 1)]
    while b - a > _DMAX_XTOL:
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        if rate_at(c) >= rate_at(d):
            b = d
        else:
            a = c
    refined = 0.5 * (a + b)

    # Pick the best of the refined point and the window edges it may have
    # crept toward: exact edges matter (p_s hits 1 at the support maximum).
    candidates = sorted({float(refined), float(grid[best]), lo, hi})
    best_d, best_rate = None, -np.inf
    for d in candidates:
        r = rate_at(d)
        if r > best_rate + 1e-15 or (best_d is None):
            best_d, best_rate = d, r
    result = key_rate_case2b(params, model, ch, best_d, direction)
    if result.rate <= 0.0:
        diag = dict(result.diagnostics or {})
        diag["no_positive_rate"] = 1.0
        result = replace(result, diagnostics=diag)
    return best_d, result
