"""Pulse-intensity fluctuation models.

The per-pulse intensity multiplier d is an i.i.d. random variable with unit
mean and variance V_d, characterized before a session by testing the source.
Four concrete shapes are supported:

* uniform(lo, hi) on 0 <= lo < hi,
* gaussian(mean=1, variance), truncated to [max(0, mean-6*sigma), mean+6*sigma]
  and renormalized (intensity multipliers cannot be negative; for the
  variances of interest, <= 1e-2, the discarded mass is far below 1e-9 and
  no stated tolerance can see it),
* tabulated(d, density) with linear interpolation between knots, renormalized
  on load,
* point_mass(), the degenerate d = 1 model (the V_d = 0 limit).

Every model is immutable once built; expectations use composite fixed-order
Gauss-Legendre panels over the support, and sampling takes an explicit seed
(counter-based Philox streams) so parallel reproducibility reduces to seed
partitioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .errors import DomainError, EvaluationError

_GL_NODES = 64          # Gauss-Legendre nodes per panel
_GAUSS_PANELS = 8       # panels across a truncated-gaussian support
_GAUSS_HALF_WIDTH = 6.0  # support half-width in standard deviations
_MEAN_TOL = 1e-6
_NORM_TOL = 1e-6


def _gl_panel(lo, hi, n=_GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return half * x + 0.5 * (hi + lo), half * w


@dataclass(frozen=True)
class FluctuationModel:
    """Distribution of the intensity multiplier d (unit mean, variance V_d).

    Build through the classmethods uniform / gaussian / tabulated /
    point_mass / from_file rather than the raw constructor.
    """

    kind: str
    lo: float
    hi: float
    sigma: float = 0.0
    grid_d: np.ndarray | None = None
    grid_p: np.ndarray | None = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def uniform(cls, lo, hi) -> "FluctuationModel":
        if not (0.0 <= lo < hi):
            raise DomainError(f"uniform support needs 0 <= lo < hi, got [{lo}, {hi}]")
        model = cls(kind="uniform", lo=float(lo), hi=float(hi))
        model._check_mean()
        return model

    @classmethod
    def gaussian(cls, mean=1.0, variance=None) -> "FluctuationModel":
        if variance is None or variance <= 0.0:
            raise DomainError(f"gaussian model needs variance > 0, got {variance}")
        sigma = float(np.sqrt(variance))
        lo = max(0.0, mean - _GAUSS_HALF_WIDTH * sigma)
        hi = mean + _GAUSS_HALF_WIDTH * sigma
        model = cls(kind="gaussian", lo=lo, hi=hi, sigma=sigma)
        model._check_mean()
        return model

    @classmethod
    def tabulated(cls, d, density) -> "FluctuationModel":
        d = np.asarray(d, dtype=float)
        density = np.asarray(density, dtype=float)
        if d.ndim != 1 or d.shape != density.shape or d.size < 2:
            raise DomainError("tabulated model needs matching 1-d arrays with >= 2 knots")
        if np.any(np.diff(d) <= 0.0):
            raise DomainError("tabulated knots must be strictly increasing")
        if np.any(d < 0.0):
            raise DomainError("tabulated support must not extend below d = 0")
        if np.any(density < 0.0) or not np.all(np.isfinite(density)):
            raise DomainError("tabulated density must be finite and >= 0")
        mass = np.trapezoid(density, d)
        if mass <= 0.0:
            raise DomainError("tabulated density integrates to zero")
        model = cls(
            kind="tabulated",
            lo=float(d[0]),
            hi=float(d[-1]),
            grid_d=d.copy(),
            grid_p=density / mass,
        )
        model._check_mean()
        return model

    @classmethod
    def point_mass(cls, center=1.0) -> "FluctuationModel":
        if abs(center - 1.0) > _MEAN_TOL:
            raise DomainError("the intensity multiplier must have unit mean")
        return cls(kind="point", lo=float(center), hi=float(center))

    @classmethod
    def from_file(cls, path) -> "FluctuationModel":
        """Tabulated model from a two-column text file (d, density).

        Whitespace-separated, '#' starts a comment. The density column is
        renormalized on load.
        """
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise DomainError(f"expected two columns (d, density) in {path}")
        return cls.tabulated(data[:, 0], data[:, 1])

    # -- internal checks ---------------------------------------------------

    def _check_mean(self):
        mean = self.expect(lambda d: d)
        if abs(mean - 1.0) > _MEAN_TOL:
            raise DomainError(f"fluctuation mean must be 1 (within {_MEAN_TOL}), got {mean}")
        mass = self.expect(lambda d: np.ones_like(d))
        if abs(mass - 1.0) > _NORM_TOL:
            raise DomainError(f"density must integrate to 1 (within {_NORM_TOL}), got {mass}")

    def _gauss_norm(self):
        """Mass of the parent normal inside the truncated support."""
        mu = 1.0
        return norm.cdf((self.hi - mu) / self.sigma) - norm.cdf((self.lo - mu) / self.sigma)

    # -- queries -----------------------------------------------------------

    @property
    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def pdf(self, d):
        """Density at d (vectorized); zero outside the support."""
        x = np.asarray(d, dtype=float)
        if self.kind == "uniform":
            out = np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)
        elif self.kind == "gaussian":
            inside = (x >= self.lo) & (x <= self.hi)
            out = np.where(inside, norm.pdf(x, loc=1.0, scale=self.sigma) / self._gauss_norm(), 0.0)
        elif self.kind == "tabulated":
            out = np.interp(x, self.grid_d, self.grid_p, left=0.0, right=0.0)
        elif self.kind == "point":
            # Degenerate law: an atom at lo. Report inf there so plots of the
            # density stay honest; cdf/expect/sample are the useful queries.
            out = np.where(x == self.lo, np.inf, 0.0)
        else:  # pragma: no cover
            raise DomainError(f"unknown model kind {self.kind!r}")
        return float(out) if x.ndim == 0 else out

    def variance(self) -> float:
        """V_d: closed form for uniform, the parameter for gaussian,
        numerically integrated for tabulated."""
        if self.kind == "uniform":
            return (self.hi - self.lo) ** 2 / 12.0
        if self.kind == "gaussian":
            return self.sigma**2
        if self.kind == "point":
            return 0.0
        mean = self.expect(lambda d: d)
        return self.expect(lambda d: (d - mean) ** 2)

    def cdf(self, d_max):
        """P(d <= d_max), vectorized and monotone in d_max."""
        x = np.asarray(d_max, dtype=float)
        if self.kind == "uniform":
            out = np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        elif self.kind == "gaussian":
            z = norm.cdf((np.clip(x, self.lo, self.hi) - 1.0) / self.sigma)
            z0 = norm.cdf((self.lo - 1.0) / self.sigma)
            out = np.clip((z - z0) / self._gauss_norm(), 0.0, 1.0)
        elif self.kind == "tabulated":
            knots = self._cdf_knots()
            idx = np.clip(np.searchsorted(self.grid_d, x, side="right") - 1, 0, len(knots) - 2)
            d0 = self.grid_d[idx]
            p0 = self.grid_p[idx]
            slope = (self.grid_p[idx + 1] - p0) / (self.grid_d[idx + 1] - d0)
            dx = np.clip(x - d0, 0.0, self.grid_d[idx + 1] - d0)
            out = np.clip(knots[idx] + p0 * dx + 0.5 * slope * dx * dx, 0.0, 1.0)
            out = np.where(x < self.lo, 0.0, np.where(x >= self.hi, 1.0, out))
        elif self.kind == "point":
            out = np.where(x >= self.lo, 1.0, 0.0)
        else:  # pragma: no cover
            raise DomainError(f"unknown model kind {self.kind!r}")
        return float(out) if x.ndim == 0 else out

    def _cdf_knots(self):
        seg = 0.5 * (self.grid_p[1:] + self.grid_p[:-1]) * np.diff(self.grid_d)
        knots = np.concatenate([[0.0], np.cumsum(seg)])
        return knots / knots[-1]

    def quantile(self, q) -> float:
        """Smallest d with cdf(d) >= q, for q in [0, 1]."""
        if not 0.0 <= q <= 1.0:
            raise DomainError(f"quantile level must be in [0, 1], got {q}")
        if self.kind == "point" or q == 0.0:
            return self.lo
        if q == 1.0:
            return self.hi
        if self.kind == "uniform":
            return self.lo + q * (self.hi - self.lo)
        if self.kind == "gaussian":
            z0 = norm.cdf((self.lo - 1.0) / self.sigma)
            return float(1.0 + self.sigma * norm.ppf(z0 + q * self._gauss_norm()))
        return float(brentq(lambda d: self.cdf(d) - q, self.lo, self.hi, xtol=1e-12))

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes d_i and weights w_i with sum w_i f(d_i) ~ E[f(d)].

        Composite 64-node Gauss-Legendre: one panel for uniform supports,
        eight equal panels across a truncated-gaussian support, one panel
        per knot interval for tabulated densities.
        """
        if self.kind == "point":
            return np.array([self.lo]), np.array([1.0])
        if self.kind == "uniform":
            edges = np.array([self.lo, self.hi])
        elif self.kind == "gaussian":
            edges = np.linspace(self.lo, self.hi, _GAUSS_PANELS + 1)
        else:
            edges = self.grid_d
        nodes, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = _gl_panel(a, b)
            nodes.append(x)
            weights.append(w * self.pdf(x))
        return np.concatenate(nodes), np.concatenate(weights)

    def expect(self, f) -> float:
        """E[f(d)] by panel quadrature; f may be scalar or vectorized."""
        nodes, weights = self.quadrature()
        try:
            vals = np.asarray(f(nodes), dtype=float)
            if vals.shape != nodes.shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.array([float(f(x)) for x in nodes])
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("integrand returned a non-finite value inside the support")
        return float(np.dot(weights, vals))

    def sample(self, seed, n) -> np.ndarray:
        """n deterministic draws of d from an explicit seed."""
        if n < 1:
            raise DomainError(f"sample count must be >= 1, got {n}")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        return self.sample_with(rng, int(n))

    def sample_with(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw from an existing generator (used for shard-level streams)."""
        if self.kind == "point":
            return np.full(n, self.lo)
        if self.kind == "uniform":
            return rng.uniform(self.lo, self.hi, n)
        if self.kind == "gaussian":
            out = rng.normal(1.0, self.sigma, n)
            bad = (out < self.lo) | (out > self.hi)
            while np.any(bad):
                out[bad] = rng.normal(1.0, self.sigma, int(bad.sum()))
                bad = (out < self.lo) | (out > self.hi)
            return out
        # tabulated: inverse-CDF through a refined piecewise grid
        fine_d = np.concatenate(
            [np.linspace(a, b, 33)[:-1] for a, b in zip(self.grid_d[:-1], self.grid_d[1:])]
            + [self.grid_d[-1:]]
        )
        fine_c = self.cdf(fine_d)
        u = rng.uniform(0.0, 1.0, n)
        return np.interp(u, fine_c, fine_d)


# Module-level aliases matching the operation names used elsewhere.

def pdf_eval(model: FluctuationModel, d):
    return model.pdf(d)


def variance(model: FluctuationModel) -> float:
    return model.variance()


def cdf(model: FluctuationModel, d_max):
    return model.cdf(d_max)


def expect(model: FluctuationModel, f) -> float:
    return model.expect(f)


def sample(model: FluctuationModel, seed, n) -> np.ndarray:
    return model.sample(seed, n)
