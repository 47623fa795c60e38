"""Pulse-level Gaussian channel simulation and parameter estimation.

Only the x quadrature is simulated; the protocol measures one quadrature
per pulse and the p statistics are identical, so nothing tested here is
lost. Per pulse:

    x_a     ~ N(0, V_A)                 desired encoding
    d       ~ fluctuation model         intensity multiplier
    x_sent  = sqrt(d) * x_a             what actually leaves the lab
    x_bob   = sqrt(T*eta) * x_sent + z,  z ~ N(0, T*eta*eps + 1 + v_el)

What Alice writes down depends on the recording convention:
'truth' stores sqrt(d)*x_a (monitored source), 'desired' stores x_a
(unmonitored), 'scaled' stores sqrt(d_max)*x_a (tagged analysis).

Streams come from counter-based Philox generators keyed per fixed-size
shard, so the output for a given (seed, n) is bit-identical no matter how
the shards are later distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ChannelPoint, SystemParams
from .errors import DomainError, EstimationError
from .fluctuation import FluctuationModel

_SHARD = 1 << 20

RECORDINGS = ("truth", "desired", "scaled")


@dataclass(frozen=True)
class SampleSet:
    """Paired per-pulse records from one simulated session."""

    x_recorded: np.ndarray
    x_sent: np.ndarray
    x_bob: np.ndarray
    n: int
    seed: int
    d: np.ndarray
    x_alice: np.ndarray
    recording: str


@dataclass(frozen=True)
class ParamEstimate:
    """Estimated channel point with delta-method standard errors."""

    point: ChannelPoint
    t_err: float
    eps_err: float


def _shard_rng(seed, shard_index):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(shard_index,))
    return np.random.Generator(np.random.Philox(ss))


def simulate(
    params: SystemParams,
    ch: ChannelPoint,
    model: FluctuationModel,
    recording: str,
    n: int,
    seed: int,
    d_max: float | None = None,
) -> SampleSet:
    """Simulate n pulses; recording is one of 'truth', 'desired', 'scaled'."""
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    if recording not in RECORDINGS:
        raise DomainError(f"recording must be one of {RECORDINGS}, got {recording!r}")
    if recording == "scaled":
        if d_max is None or d_max <= 0.0:
            raise DomainError("scaled recording needs a positive d_max")
    ch.validate()

    noise_var = ch.t * params.eta * ch.eps + 1.0 + params.v_el
    sig_a = np.sqrt(params.v_a)
    gain = np.sqrt(ch.t * params.eta)

    d = np.empty(n)
    x_a = np.empty(n)
    x_bob = np.empty(n)
    for shard in range(0, n, _SHARD):
        stop = min(shard + _SHARD, n)
        m = stop - shard
        rng = _shard_rng(seed, shard // _SHARD)
        d[shard:stop] = model.sample_with(rng, m)
        x_a[shard:stop] = rng.normal(0.0, sig_a, m)
        x_bob[shard:stop] = rng.normal(0.0, np.sqrt(noise_var), m)

    x_sent = np.sqrt(d) * x_a
    x_bob += gain * x_sent
    if recording == "truth":
        x_recorded = x_sent
    elif recording == "desired":
        x_recorded = x_a
    else:
        x_recorded = np.sqrt(d_max) * x_a

    return SampleSet(
        x_recorded=x_recorded,
        x_sent=x_sent,
        x_bob=x_bob,
        n=int(n),
        seed=int(seed),
        d=d,
        x_alice=x_a,
        recording=recording,
    )


def _moments(samples: SampleSet):
    if samples.n < 2:
        raise EstimationError("need at least two pulses to estimate anything")
    m_aa = float(np.mean(samples.x_recorded**2))
    if m_aa == 0.0:
        raise EstimationError("recorded quadratures are identically zero; degenerate data")
    m_ab = float(np.mean(samples.x_recorded * samples.x_bob))
    return m_aa, m_ab


def estimate_params(samples: SampleSet, eta, v_el) -> ChannelPoint:
    """Channel-input (T, eps) from recorded/measured second moments.

    sqrt(T) = <x_rec x_bob> / (sqrt(eta) <x_rec^2>); the excess noise is the
    residual second moment <(x_bob - sqrt(T eta) x_rec)^2> minus shot and
    electronic noise, referred back to the channel input by T*eta. The
    returned point inherits estimation noise; see ChannelPoint.validate.
    """
    m_aa, m_ab = _moments(samples)
    slope = m_ab / m_aa  # = sqrt(T*eta), the through-origin regression slope
    t_hat = slope**2 / eta
    if t_hat <= 0.0:
        raise EstimationError(f"estimated transmittance {t_hat} is not positive")
    resid = samples.x_bob - slope * samples.x_recorded
    eps_hat = (float(np.mean(resid**2)) - 1.0 - v_el) / (t_hat * eta)
    return ChannelPoint(t=t_hat, eps=eps_hat)


def estimate_with_errors(samples: SampleSet, eta, v_el) -> ParamEstimate:
    """estimate_params plus 1-sigma standard errors via influence functions.

    The through-origin slope makes the residual orthogonal to the recorded
    data, so the two first-order influence pieces decouple cleanly.
    """
    point = estimate_params(samples, eta, v_el)
    m_aa, m_ab = _moments(samples)
    slope = m_ab / m_aa
    n = samples.n

    infl_slope = (samples.x_recorded * samples.x_bob - slope * samples.x_recorded**2) / m_aa
    var_slope = float(np.var(infl_slope)) / n
    t_err = 2.0 * abs(slope) / eta * np.sqrt(var_slope)

    resid = samples.x_bob - slope * samples.x_recorded
    s = float(np.mean(resid**2))
    infl_eps = (resid**2 - s) / slope**2 - 2.0 * (s - 1.0 - v_el) / slope**3 * infl_slope
    eps_err = float(np.sqrt(np.var(infl_eps) / n))
    return ParamEstimate(point=point, t_err=float(t_err), eps_err=eps_err)


def dump_samples(samples: SampleSet, path):
    """Write (recorded, sent, bob) as three whitespace-separated text columns."""
    data = np.column_stack([samples.x_recorded, samples.x_sent, samples.x_bob])
    np.savetxt(
        path,
        data,
        fmt="%.17g",
        header="x_recorded x_sent x_bob",
    )
