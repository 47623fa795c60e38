"""Homodyne decoding flaws and their software compensations.

Covers two decoding imperfections of a fiber homodyne receiver and the data
fixes that undo them without touching hardware:

* a splitter ratio of (50+delta):(50-delta) instead of 50:50, which scales
  the measured quadrature and leaks a local-oscillator offset; an affine
  remap of the data inverts a constant delta, while a fluctuating delta
  contributes V_delta * x_lo^2 / 10000 of excess noise at the detection
  stage;
* a local-oscillator phase offset theta, which projects the signal onto a
  rotated quadrature; rotating Alice's recorded pair by the same theta
  realigns her records with what Bob actually measured.

Wavelength dependence of the splitting ratio is not modeled: a narrow
bandpass filter in front of the splitter (typically 2 nm passband, 20 dB
extinction at 1550 nm) pins the ratio to its calibrated value, keeping the
residual effect below measurement error.

Signal quadratures are named x_sig / p_sig; 'p' alone is avoided because an
untagged fraction p_s lives in the cases module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

_PHASES = (0.0, math.pi / 2.0)


@dataclass(frozen=True)
class HomodyneConfig:
    """Detector imperfection settings: ratio deviation (percentage points),
    LO phase error (radians), LO amplitude and photodiode prefactor."""

    delta: float = 0.0
    theta: float = 0.0
    x_lo: float = 100.0
    k_prefactor: float = 1.0

    def __post_init__(self):
        if not abs(self.delta) < 50.0:
            raise DomainError(f"splitter deviation must satisfy |delta| < 50, got {self.delta}")
        if self.x_lo <= 0.0:
            raise DomainError(f"LO amplitude must be positive, got {self.x_lo}")
        if self.k_prefactor <= 0.0:
            raise DomainError(f"photodiode prefactor must be positive, got {self.k_prefactor}")


def homodyne_ideal(x_sig, p_sig, x_lo, phase, k=1.0):
    """Balanced-splitter measurement of the quadrature selected by the LO phase.

    The two output-arm intensities differ by k*x_lo*(x cos(phase) +
    p sin(phase)); dividing by k*x_lo leaves the projected quadrature. Only
    the calibrated phases 0 (x) and pi/2 (p) are valid here; arbitrary phase
    errors are homodyne_phase_error's business.
    """
    if x_lo <= 0.0:
        raise DomainError("LO amplitude must be positive")
    if not any(abs(phase - p) < 1e-9 for p in _PHASES):
        raise DomainError("measurement phase must be 0 or pi/2")
    intensity_diff = k * x_lo * (x_sig * math.cos(phase) + p_sig * math.sin(phase))
    return intensity_diff / (k * x_lo)


def _unbalanced_scale(delta):
    # 2*sqrt(1/2+f)*sqrt(1/2-f) written as 2*sqrt(1/4-f^2): same value,
    # exactly 1 at delta=0.
    frac = delta / 100.0
    return 2.0 * math.sqrt(0.25 - frac * frac)


def homodyne_unbalanced(x_sig, x_lo, delta, p_sig=0.0, exact=False):
    """x measurement through a (50+delta):(50-delta) splitter.

    Default is the LO-dominant linear map
        2*sqrt(1/2+delta/100)*sqrt(1/2-delta/100)*x_sig - (delta/100)*x_lo;
    exact=True keeps the quadratic signal terms that the strong-LO limit
    drops (they need p_sig as well).
    """
    if not abs(delta) < 50.0:
        raise DomainError(f"splitter deviation must satisfy |delta| < 50, got {delta}")
    frac = delta / 100.0
    out = _unbalanced_scale(delta) * x_sig - frac * x_lo
    if exact:
        out += frac * (x_sig**2 + p_sig**2) / x_lo
    return out


def compensate_unbalanced(measured, delta, x_lo):
    """Invert the linear unbalanced-splitter map for a known delta."""
    if not abs(delta) < 50.0:
        raise DomainError(f"splitter deviation must satisfy |delta| < 50, got {delta}")
    return (measured + (delta / 100.0) * x_lo) / _unbalanced_scale(delta)


def delta_variance_noise(v_delta, x_lo):
    """Detection-stage excess noise from a fluctuating splitting ratio:
    V_delta * x_lo^2 / 10000, in shot-noise units."""
    if v_delta < 0.0:
        raise DomainError(f"ratio variance must be >= 0, got {v_delta}")
    return v_delta * x_lo**2 / 1e4


def homodyne_phase_error(x_sig, p_sig, theta):
    """Measurement outcome with an LO phase offset: x cos(theta) + p sin(theta)."""
    return x_sig * math.cos(theta) + p_sig * math.sin(theta)


def phase_remap(x_a, p_a, theta):
    """Rotate a recorded quadrature pair by theta so its first component
    matches the mismeasured projection; composing remaps adds angles."""
    c, s = math.cos(theta), math.sin(theta)
    return (x_a * c + p_a * s, -x_a * s + p_a * c)
