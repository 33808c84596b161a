"""Symmetric positive definite linear algebra, dense and banded.

Banded matrices use lower-band row-major storage: an (r + 1) x m array whose
row d holds the d-th subdiagonal, ``band[d, j] = A[j + d, j]`` for
``j < m - d`` (trailing entries of each row are zero).  This is the layout
LAPACK's pb/tb families consume, so factorizations cost O(m r^2) and solves
O(m r).  Dense matrices are plain float ndarrays factored through the usual
dense LAPACK path; the two routes are independent, which is what makes the
banded-versus-dense agreement checks in the test suite meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import blas, lapack

__all__ = [
    "NotPositiveDefiniteError",
    "BandedSPD",
    "CholeskyFactor",
    "banded_cholesky",
    "dense_cholesky",
    "factor_spd",
    "min_eigenvalue",
]

# Relative threshold for the minimal diagonal shift applied when a
# factorization hits a non-positive pivot: eps_pd = 1e-8 * max(diag).
PD_SHIFT_REL = 1e-8


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization meets a non-positive pivot."""


def _as_matrix(b):
    """Return (b as 2-d float array, was_vector flag)."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        return b[:, None], True
    return b, False


@dataclass
class CholeskyFactor:
    """Lower Cholesky factor of an SPD matrix, banded or dense.

    Exactly one of ``band`` (shape (r + 1, m)) and ``dense`` (shape (m, m),
    lower triangular) is set.
    """

    m: int
    r: int
    band: np.ndarray | None = None
    dense: np.ndarray | None = None

    @property
    def is_banded(self) -> bool:
        return self.band is not None

    def forward(self, b):
        """Solve L x = b; b may be a vector or an (m, k) matrix."""
        bm, vec = _as_matrix(b)
        if self.band is not None:
            x, info = lapack.dtbtrs(self.band, bm, uplo="L", trans="N", diag="N")
            if info != 0:
                raise NotPositiveDefiniteError(f"dtbtrs failed with info={info}")
        else:
            x, info = lapack.dtrtrs(self.dense, bm, lower=1, trans=0)
            if info != 0:
                raise NotPositiveDefiniteError(f"dtrtrs failed with info={info}")
        return x[:, 0] if vec else x

    def solve(self, b):
        """Solve A x = b where A = L L^T."""
        bm, vec = _as_matrix(b)
        if self.band is not None:
            x, info = lapack.dpbtrs(self.band, bm, lower=1)
            if info != 0:
                raise NotPositiveDefiniteError(f"dpbtrs failed with info={info}")
        else:
            y, info = lapack.dtrtrs(self.dense, bm, lower=1, trans=0)
            x, info2 = lapack.dtrtrs(self.dense, y, lower=1, trans=1)
            if info != 0 or info2 != 0:
                raise NotPositiveDefiniteError("dtrtrs failed")
        return x[:, 0] if vec else x

    def matvec(self, z):
        """Return L z (used to turn white noise into correlated draws)."""
        z = np.asarray(z, dtype=np.float64)
        if self.dense is not None:
            return self.dense @ z
        if z.ndim == 1:
            return blas.dtbmv(self.r, self.band, z, lower=1, trans=0, diag=0)
        out = np.empty_like(z)
        for j in range(z.shape[1]):
            out[:, j] = blas.dtbmv(self.r, self.band, np.ascontiguousarray(z[:, j]),
                                   lower=1, trans=0, diag=0)
        return out

    def logdet(self) -> float:
        """log det A = 2 sum log L_ii."""
        diag = self.band[0] if self.band is not None else np.diag(self.dense)
        return 2.0 * float(np.sum(np.log(diag)))

    def quad_form(self, v):
        """v^T A^{-1} v = ||L^{-1} v||^2; column-wise for matrix input."""
        x = self.forward(v)
        if x.ndim == 1:
            return float(x @ x)
        return np.einsum("ij,ij->j", x, x)


@dataclass
class BandedSPD:
    """Banded symmetric positive definite matrix in lower-band storage."""

    band: np.ndarray  # (r + 1, m)
    _factor: CholeskyFactor | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.band = np.ascontiguousarray(self.band, dtype=np.float64)
        if self.band.ndim != 2:
            raise ValueError("band storage must be 2-d, shape (r + 1, m)")
        if self.band.shape[0] > self.band.shape[1]:
            raise ValueError(
                f"bandwidth {self.band.shape[0] - 1} exceeds m - 1 = {self.band.shape[1] - 1}"
            )

    @property
    def m(self) -> int:
        return self.band.shape[1]

    @property
    def r(self) -> int:
        return self.band.shape[0] - 1

    @classmethod
    def from_dense(cls, a: np.ndarray, r: int) -> "BandedSPD":
        """Extract the lower band of a symmetric matrix (entries beyond lag r dropped)."""
        a = np.asarray(a, dtype=np.float64)
        m = a.shape[0]
        band = np.zeros((r + 1, m))
        for d in range(r + 1):
            band[d, : m - d] = np.diag(a, -d)
        return cls(band)

    def to_dense(self) -> np.ndarray:
        m, r = self.m, self.r
        a = np.zeros((m, m))
        for d in range(r + 1):
            idx = np.arange(m - d)
            a[idx + d, idx] = self.band[d, : m - d]
            a[idx, idx + d] = self.band[d, : m - d]
        return a

    def diagonal(self) -> np.ndarray:
        return self.band[0]

    def matvec(self, x):
        """Symmetric banded multiply A x."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        return blas.dsbmv(self.r, 1.0, self.band, x, lower=1)

    def add(self, other: "BandedSPD", scale: float = 1.0) -> "BandedSPD":
        """Return self + scale * other, widening to the larger bandwidth."""
        if other.m != self.m:
            raise ValueError("dimension mismatch")
        r = max(self.r, other.r)
        band = np.zeros((r + 1, self.m))
        band[: self.r + 1] = self.band
        band[: other.r + 1] += scale * other.band
        return BandedSPD(band)

    def scaled(self, c: float) -> "BandedSPD":
        return BandedSPD(c * self.band)

    def add_diagonal(self, c: float) -> "BandedSPD":
        band = self.band.copy()
        band[0] += c
        return BandedSPD(band)

    def cholesky(self) -> CholeskyFactor:
        """Cached factorization with one minimal-shift retry on pivot failure."""
        if self._factor is None:
            try:
                self._factor = banded_cholesky(self)
            except NotPositiveDefiniteError:
                eps = PD_SHIFT_REL * float(np.max(self.band[0]))
                lam = min_eigenvalue(self)
                shifted = self.add_diagonal(eps - lam)
                self._factor = banded_cholesky(shifted)  # second failure is fatal
                self.band = shifted.band
        return self._factor


def add_spd(a, b, scale_b: float = 1.0):
    """A + scale_b * B for any mix of BandedSPD and dense ndarray operands.

    Stays banded only when both operands are banded; a mixed pair densifies
    the banded one.
    """
    if isinstance(a, BandedSPD) and isinstance(b, BandedSPD):
        return a.add(b, scale=scale_b)
    if isinstance(a, BandedSPD):
        a = a.to_dense()
    if isinstance(b, BandedSPD):
        b = b.to_dense()
    return a + scale_b * b


def banded_cholesky(a: BandedSPD) -> CholeskyFactor:
    """Banded Cholesky factorization; raises NotPositiveDefiniteError on failure."""
    cb, info = lapack.dpbtrf(a.band, lower=1)
    if info != 0:
        raise NotPositiveDefiniteError(f"banded Cholesky pivot failure (info={info})")
    return CholeskyFactor(m=a.m, r=a.r, band=cb)


def dense_cholesky(a: np.ndarray) -> CholeskyFactor:
    """Dense Cholesky factorization; raises NotPositiveDefiniteError on failure."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info != 0:
        raise NotPositiveDefiniteError(f"dense Cholesky pivot failure (info={info})")
    return CholeskyFactor(m=a.shape[0], r=a.shape[0] - 1, dense=c)


def factor_spd(a) -> CholeskyFactor:
    """Factor a BandedSPD or dense ndarray, retrying once with a minimal shift."""
    if isinstance(a, BandedSPD):
        return a.cholesky()
    try:
        return dense_cholesky(a)
    except NotPositiveDefiniteError:
        eps = PD_SHIFT_REL * float(np.max(np.diag(a)))
        lam = min_eigenvalue(a)
        shifted = a + (eps - lam) * np.eye(a.shape[0])
        return dense_cholesky(shifted)


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of a symmetric matrix (dense ndarray or BandedSPD)."""
    if isinstance(a, BandedSPD):
        a = a.to_dense()
    return float(np.linalg.eigvalsh(a)[0])
