"""Multivariate Gaussian evaluation and sampling with splittable RNG streams.

Randomness flows through :class:`RngStream`, a thin wrapper around numpy's
counter-based Philox generator.  Streams are split by string/int labels, and
splitting is associative-by-construction: the child stream is a pure function
of (root seed, label path), so any (replicate, chain) combination gets the
same draws no matter how work is scheduled across processes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .blinalg import CholeskyFactor

__all__ = ["RngStream", "MvnParams", "log_pdf", "sample"]

LOG_2PI = float(np.log(2.0 * np.pi))


def _label_words(label) -> tuple[int, ...]:
    """Two uint32 words deterministically derived from a path label."""
    if isinstance(label, (int, np.integer)):
        token = f"i:{int(label)}"
    elif isinstance(label, str):
        token = f"s:{label}"
    else:
        raise TypeError(f"stream labels must be str or int, got {type(label)!r}")
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return (
        int.from_bytes(digest[0:4], "little"),
        int.from_bytes(digest[4:8], "little"),
    )


class RngStream:
    """Deterministic random stream addressable by a (seed, label path) pair."""

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(w) for w in _path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.Philox(ss))

    def split(self, *labels) -> "RngStream":
        """Child stream for the given labels; independent of the parent."""
        path = self.path
        for label in labels:
            path = path + _label_words(label)
        return RngStream(self.seed, path)

    def subseed(self) -> int:
        """A printable uint32 identifying this stream (for result rows)."""
        if not self.path:
            return self.seed & 0xFFFFFFFF
        mixed = 0
        for w in self.path:
            mixed = (mixed * 0x9E3779B1 + w) & 0xFFFFFFFF
        return mixed ^ (self.seed & 0xFFFFFFFF)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"


@dataclass
class MvnParams:
    """Mean vector plus a Cholesky factor of the covariance."""

    mean: np.ndarray
    factor: CholeskyFactor


def log_pdf(y: np.ndarray, params: MvnParams) -> float:
    """Gaussian log density; columns of a matrix ``y`` are scored separately."""
    y = np.asarray(y, dtype=np.float64)
    resid = y - (params.mean if y.ndim == 1 else params.mean[:, None])
    m = params.factor.m
    const = -0.5 * (m * LOG_2PI + params.factor.logdet())
    quad = params.factor.quad_form(resid)
    if y.ndim == 1:
        return const - 0.5 * float(quad)
    return const - 0.5 * quad


def sample(params: MvnParams, rng: RngStream) -> np.ndarray:
    """One draw from N(mean, L L^T) where L is the stored factor."""
    z = rng.gen.standard_normal(params.factor.m)
    return params.mean + params.factor.matvec(z)
