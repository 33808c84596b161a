"""Covariance kernels on a common observation grid, plus band approximation.

Families
--------
``matern12``, ``matern32``, ``matern52``
    Matern correlations at smoothness 1/2, 3/2, 5/2 (closed forms).
``se``
    Squared-exponential (Gaussian) correlation, the infinite-smoothness
    Matern limit.
``fbm``
    Fractional Brownian motion covariance with Hurst index H; nonstationary,
    ``scale`` multiplies (|s|^{2H} + |t|^{2H} - |s-t|^{2H}) / 2.
``iid``
    White noise, ``scale`` times the identity.

Every dense construction adds an unconditional positive-definiteness jitter
of ``1e-10 * scale`` to the diagonal.  Band truncation zeroes entries beyond
lag r and, when the truncated matrix's smallest eigenvalue falls at or below
``1e-8 * max(diag)``, shifts the diagonal so the minimum eigenvalue equals
that threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .blinalg import BandedSPD

__all__ = [
    "FAMILIES",
    "KernelSpec",
    "Grid",
    "family_for_smoothness",
    "smoothness_for_family",
    "build_covariance",
    "build_banded",
    "select_bandwidth",
    "band_truncate",
    "band_tail_bound",
]

FAMILIES = ("matern12", "matern32", "matern52", "se", "fbm", "iid")

_STATIONARY = ("matern12", "matern32", "matern52", "se")

# Diagonal jitter added unconditionally to every constructed covariance,
# relative to the kernel scale.
JITTER_REL = 1e-10

# Threshold for the conditional diagonal shift after band truncation,
# relative to the largest diagonal entry.
PD_SHIFT_REL = 1e-8

_NU_FAMILY = {0.5: "matern12", 1.5: "matern32", 2.5: "matern52", math.inf: "se"}
_FAMILY_NU = {v: k for k, v in _NU_FAMILY.items()}


def family_for_smoothness(nu: float) -> str:
    """Kernel family implementing Matern smoothness nu (inf -> ``se``)."""
    try:
        return _NU_FAMILY[float(nu)]
    except KeyError:
        raise ValueError(f"no closed-form family for smoothness {nu!r}") from None


def smoothness_for_family(family: str) -> float:
    return _FAMILY_NU[family]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with its parameters.

    ``length`` applies to the stationary families, ``hurst`` to ``fbm``;
    the irrelevant parameter is ignored but still validated so that config
    round-trips are unambiguous.
    """

    family: str
    scale: float = 1.0
    length: float = 1.0
    hurst: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale!r}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive and finite, got {self.length!r}")
        if not (0.0 < self.hurst < 1.0):
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst!r}")

    def with_scale(self, scale: float) -> "KernelSpec":
        return replace(self, scale=scale)

    def to_config(self) -> dict:
        out = {"family": self.family, "scale": self.scale}
        if self.family in _STATIONARY:
            out["length"] = self.length
        elif self.family == "fbm":
            out["hurst"] = self.hurst
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "KernelSpec":
        return cls(
            family=str(cfg["family"]),
            scale=float(cfg.get("scale", 1.0)),
            length=float(cfg.get("length", 1.0)),
            hurst=float(cfg.get("hurst", 0.5)),
        )


@dataclass
class Grid:
    """Ordered observation abscissae shared by every curve in a dataset."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        self.points = pts

    @property
    def m(self) -> int:
        return self.points.size

    @classmethod
    def regular(cls, m: int) -> "Grid":
        """Equispaced grid x_j = j / m for j = 1..m (excludes zero)."""
        return cls(np.arange(1, m + 1) / float(m))


def _stationary_corr(family: str, d, length: float):
    """Correlation rho(d) for the stationary families; d is |s - t| >= 0."""
    d = np.asarray(d, dtype=np.float64)
    u = d / length
    if family == "matern12":
        return np.exp(-u)
    if family == "matern32":
        a = math.sqrt(3.0) * u
        return (1.0 + a) * np.exp(-a)
    if family == "matern52":
        a = math.sqrt(5.0) * u
        return (1.0 + a + a * a / 3.0) * np.exp(-a)
    if family == "se":
        return np.exp(-0.5 * u * u)
    raise ValueError(f"not a stationary family: {family!r}")


def _pair_cov(spec: KernelSpec, s, t):
    """Covariance k(s, t) for arbitrary point arrays (broadcasting)."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if spec.family in _STATIONARY:
        return spec.scale * _stationary_corr(spec.family, np.abs(s - t), spec.length)
    if spec.family == "fbm":
        h2 = 2.0 * spec.hurst
        return 0.5 * spec.scale * (
            np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(s - t) ** h2
        )
    if spec.family == "iid":
        return np.where(s == t, spec.scale, 0.0)
    raise ValueError(f"unknown kernel family {spec.family!r}")


def build_covariance(spec: KernelSpec, grid: Grid) -> np.ndarray:
    """Dense m x m covariance of the kernel on the grid, jitter included."""
    x = grid.points
    cov = _pair_cov(spec, x[:, None], x[None, :])
    cov = np.asarray(cov, dtype=np.float64)
    cov[np.diag_indices_from(cov)] += JITTER_REL * spec.scale
    return cov


def build_banded(spec: KernelSpec, grid: Grid, r: int) -> BandedSPD:
    """Band-truncated covariance built directly in band storage.

    Equals ``band_truncate(build_covariance(spec, grid), r)`` without ever
    materializing the dense matrix.
    """
    x = grid.points
    m = x.size
    r = _check_bandwidth(m, r)
    # evaluate every diagonal in one kernel call: row d pairs x[j + d] with x[j]
    d = np.arange(r + 1)[:, None]
    j = np.arange(m)[None, :]
    band = np.where(j < m - d, _pair_cov(spec, x[np.minimum(d + j, m - 1)], x[j]), 0.0)
    band[0] += JITTER_REL * spec.scale
    return _shift_if_needed(BandedSPD(band))


def select_bandwidth(m: int, multiplier: float = 3.0) -> int:
    """Bandwidth rule r = min(ceil(multiplier * log m), m - 1), natural log."""
    if m < 2:
        raise ValueError(f"m must be at least 2, got {m}")
    if not multiplier > 0:
        raise ValueError(f"multiplier must be positive, got {multiplier}")
    return min(math.ceil(multiplier * math.log(m)), m - 1)


def _check_bandwidth(m: int, r) -> int:
    r = int(r)
    if not 0 <= r <= m - 1:
        raise ValueError(f"bandwidth must lie in [0, m - 1] = [0, {m - 1}], got {r}")
    return r


def _shift_if_needed(banded: BandedSPD) -> BandedSPD:
    """Conditional diagonal shift making the matrix safely positive definite.

    The shift applies exactly when the smallest eigenvalue is at most
    eps = PD_SHIFT_REL * maxdiag, i.e. when B - eps I is not positive
    definite.  That predicate is decided by a Cholesky probe (cheap); the
    eigensolver runs only on the shift path, where the shift magnitude
    eps - lambda_min needs the actual eigenvalue.
    """
    eps = PD_SHIFT_REL * float(np.max(banded.band[0]))
    probe = banded.band.copy()
    probe[0] -= eps
    _, info = lapack.dpbtrf(probe, lower=1)
    if info == 0:
        return banded
    lam = _min_eig_banded(banded)
    if lam <= eps:
        return banded.add_diagonal(eps - lam)
    return banded


def _min_eig_banded(banded: BandedSPD) -> float:
    vals = scipy.linalg.eig_banded(
        banded.band, lower=True, eigvals_only=True, select="i", select_range=(0, 0)
    )
    return float(vals[0])


def band_truncate(dense: np.ndarray, r: int) -> BandedSPD:
    """Zero entries beyond lag r and repair positive definiteness if needed."""
    dense = np.asarray(dense, dtype=np.float64)
    m = dense.shape[0]
    r = _check_bandwidth(m, r)
    return _shift_if_needed(BandedSPD.from_dense(dense, r))


def band_tail_bound(nu: float, r: int) -> float:
    """Operator-norm bound on the discarded tail of a unit-scale Matern band.

    For a Matern kernel of smoothness nu sampled at unit per-lag decay, the
    truncation error beyond bandwidth r is at most
    ``2 r^{nu - 1/2} e^{-r} r / (r - nu + 1/2)``.  Requires r > nu - 1/2
    (at equality the closed form divides by zero).
    """
    nu = float(nu)
    if not nu > 0:
        raise ValueError(f"smoothness must be positive, got {nu}")
    r = int(r)
    if r < 1:
        raise ValueError(f"bandwidth must be at least 1, got {r}")
    denom = r - nu + 0.5
    if denom <= 0:
        raise ValueError(
            f"bound requires r > nu - 1/2 (got r={r}, nu={nu}); "
            "the closed form is singular at the boundary"
        )
    return 2.0 * r ** (nu - 0.5) * math.exp(-r) * r / denom
