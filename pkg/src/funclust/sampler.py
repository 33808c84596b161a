"""Collapsed Gibbs sampler for mixture-of-Gaussian-process curve clustering.

The model: curve i belongs to cluster z_i, observed as
``y_i ~ N(theta_{z_i}, C_y)`` with cluster means ``theta_k ~ N(0, C_mean)``.
Both covariances split into a scale times a unit-scale structure matrix,
``C_y = tau_y2 * R_y(nu, ell_y)`` and ``C_mean = tau_mu2 * R_mu(ell_mu)``,
which keeps the inverse-gamma scale updates exactly conjugate.  Partition
labels follow a Dirichlet-process or Pitman-Yor urn.

One iteration is four moves:

(a) a sequential label sweep (empty clusters pruned immediately; a fresh
    cluster's mean is drawn from its conditional posterior given the one
    curve that founds it),
(b) conjugate cluster-mean updates,
(c) inverse-gamma updates of the two scales,
(d) Metropolis-Hastings on the structure hyperparameters: a short cycle of
    accept/reject blocks, each proposing smoothness nu uniformly from its
    support jointly with a reflected random walk on log ell_y, then the same
    walk on log ell_mu.  Skipped entirely for the ``iid`` and ``oracle``
    error models, whose structure is fixed.

Error models: ``iid`` (white noise), ``dense_gp`` (dense Matern),
``banded_gp`` (band-truncated Matern, bandwidth from ``select_bandwidth``;
the mean covariance is banded the same way), ``oracle`` (structure pinned at
a known generative kernel).

All stochastic choices flow through the supplied :class:`~funclust.gauss.RngStream`,
so a (config, seed) pair reproduces traces bit for bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .blinalg import BandedSPD, CholeskyFactor, add_spd, factor_spd
from .gauss import LOG_2PI, RngStream
from .kernels import (Grid, KernelSpec, build_banded, build_covariance,
                      family_for_smoothness, select_bandwidth,
                      smoothness_for_family)

__all__ = [
    "ERROR_KINDS",
    "PartitionPrior",
    "HyperPrior",
    "SamplerConfig",
    "WorkingCov",
    "ChainState",
    "ChainTrace",
    "canonical_labels",
    "label_weights",
    "gibbs_sweep_labels",
    "update_cluster_means",
    "update_scales",
    "mh_update_kernel_hyperparams",
    "run_chain",
]

ERROR_KINDS = ("iid", "dense_gp", "banded_gp", "oracle")

# Inverse-gamma prior for the initial white-noise variance, centered at
# INIT_SCALE_MULT times the pooled data variance.  See _initial_state for why
# the chain must start overdispersed.
INIT_SCALE_SHAPE = 10.0
INIT_SCALE_MULT = 50.0

# White-noise floor, relative to the unit correlation diagonal, added to the
# working covariances of the banded error model.  See WorkingCov.
NUGGET_REL = 0.08


@dataclass(frozen=True)
class PartitionPrior:
    """Dirichlet-process (``dp``) or Pitman-Yor (``py``) urn parameters."""

    kind: str = "dp"
    alpha: float = 1.0
    discount: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dp", "py"):
            raise ValueError(f"prior kind must be 'dp' or 'py', got {self.kind!r}")
        if self.kind == "dp":
            if self.discount != 0.0:
                raise ValueError("dp prior requires discount = 0")
            if not self.alpha > 0:
                raise ValueError(f"concentration must be positive, got {self.alpha}")
        else:
            if not 0.0 <= self.discount < 1.0:
                raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
            if not self.alpha > -self.discount:
                raise ValueError(
                    f"need concentration > -discount, got {self.alpha}")

    def log_existing(self, counts: np.ndarray) -> np.ndarray:
        """log(n_k - discount) for occupied clusters."""
        return np.log(counts - self.discount)

    def log_new(self, k_existing: int) -> float:
        """log(alpha + discount * K) for opening a new cluster."""
        return math.log(self.alpha + self.discount * k_existing)


@dataclass(frozen=True)
class HyperPrior:
    """Priors for scales and structure hyperparameters."""

    a_y: float = 1.0
    b_y: float = 1.0
    a_mu: float = 1.0
    b_mu: float = 1.0
    nu_support: tuple = (0.5, 1.5, 2.5, math.inf)
    length_bounds: tuple = (0.01, 10.0)


@dataclass(frozen=True)
class SamplerConfig:
    """Everything a chain needs besides the data and the random stream."""

    prior: PartitionPrior = field(default_factory=PartitionPrior)
    error_kind: str = "dense_gp"
    iterations: int = 5000
    burn_in: int = 2000
    rw_step: float = 0.3
    bandwidth_multiplier: float = 3.0
    # None resolves per error model: 0.5 dense, 0.05 banded.  Band truncation
    # of a kernel with length much beyond ~0.05 is indefinite at the default
    # bandwidth for m=64; the pd shift then leaves an almost singular matrix
    # that no proposal can accept, so the banded walk has to start inside the
    # clean region and feel its boundary through rejections.
    noise_length_init: float | None = None
    nu_init: float = 1.5
    mean_length_init: float = 0.15
    # Proposal cycle length for the Metropolis step.  At large m the chain
    # must adopt a structured kernel within the first few sweeps or the label
    # sweep shreds the partition for good (see _initial_state); one proposal
    # per sweep loses that race in a noticeable fraction of runs, a short
    # cycle essentially never does.  Composing accept/reject blocks leaves
    # the stationary distribution untouched.
    mh_proposals: int = 4
    # Band-truncate the cluster-mean covariance as well?  None resolves to
    # the error model's convention: truncated alongside the noise for the
    # banded model, dense otherwise.
    banded_mean: bool | None = None
    # White-noise floor on the working covariances, relative to the unit
    # correlation diagonal.  None resolves per error model: NUGGET_REL for
    # the banded model, whose truncation repairs need the floor (see
    # WorkingCov), zero otherwise.
    nugget: float | None = None
    oracle_spec: KernelSpec | None = None
    hyper: HyperPrior = field(default_factory=HyperPrior)
    seed: int = 0

    def __post_init__(self):
        if self.error_kind not in ERROR_KINDS:
            raise ValueError(f"unknown error model {self.error_kind!r}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.mh_proposals < 1:
            raise ValueError("need at least one proposal per Metropolis step")

    def use_banded_mean(self) -> bool:
        if self.banded_mean is None:
            return self.error_kind == "banded_gp"
        return bool(self.banded_mean)

    def resolve_nugget(self) -> float:
        if self.nugget is None:
            return NUGGET_REL if self.error_kind == "banded_gp" else 0.0
        return float(self.nugget)

    def to_config(self) -> dict:
        out = {
            "prior.kind": self.prior.kind,
            "prior.alpha": self.prior.alpha,
            "prior.delta": self.prior.discount,
            "error_model.kind": self.error_kind,
            "error_model.bandwidth_multiplier": self.bandwidth_multiplier,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "rw_step": self.rw_step,
            "seed": self.seed,
        }
        # Optional knobs ride along only when they differ from the defaults,
        # keeping the default serialization to the documented key set.
        if self.mh_proposals != 4:
            out["mh_proposals"] = self.mh_proposals
        if self.banded_mean is not None:
            out["error_model.banded_mean"] = self.banded_mean
        if self.nugget is not None:
            out["error_model.nugget"] = self.nugget
        if self.oracle_spec is not None:
            for key, val in self.oracle_spec.to_config().items():
                out[f"error_model.oracle.{key}"] = val
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "SamplerConfig":
        oracle = None
        oracle_keys = {k.split(".", 2)[2]: v for k, v in cfg.items()
                       if k.startswith("error_model.oracle.")}
        if oracle_keys:
            oracle = KernelSpec.from_config(oracle_keys)
        return cls(
            prior=PartitionPrior(
                kind=str(cfg.get("prior.kind", "dp")),
                alpha=float(cfg.get("prior.alpha", 1.0)),
                discount=float(cfg.get("prior.delta", 0.0)),
            ),
            error_kind=str(cfg.get("error_model.kind", "dense_gp")),
            bandwidth_multiplier=float(cfg.get("error_model.bandwidth_multiplier", 3.0)),
            iterations=int(cfg.get("iterations", 5000)),
            burn_in=int(cfg.get("burn_in", 2000)),
            rw_step=float(cfg.get("rw_step", 0.3)),
            mh_proposals=int(cfg.get("mh_proposals", 4)),
            banded_mean=(None if "error_model.banded_mean" not in cfg
                         else bool(cfg["error_model.banded_mean"])),
            nugget=(None if "error_model.nugget" not in cfg
                    else float(cfg["error_model.nugget"])),
            oracle_spec=oracle,
            seed=int(cfg.get("seed", 0)),
        )


def _scaled_factor(factor: CholeskyFactor, scale: float) -> CholeskyFactor:
    """Cholesky factor of scale * A given the factor of A."""
    s = math.sqrt(scale)
    if factor.band is not None:
        return CholeskyFactor(m=factor.m, r=factor.r, band=s * factor.band)
    return CholeskyFactor(m=factor.m, r=factor.r, dense=s * factor.dense)


class WorkingCov:
    """A covariance ``tau2 * (R + nugget*I)`` with lazily cached factorizations.

    ``R`` is the unit-scale structure matrix: dense when ``r`` is None,
    band-truncated (with the positive-definiteness shift policy) otherwise.
    Factors of the scaled matrix are derived from the factor of ``R``, so
    scale updates never trigger refactorization.

    The nugget is a small white-noise floor used by the adaptive error
    models.  Band truncation of a long-length kernel needs a large repair
    shift that leaves the result nearly singular; without a floor the
    whitened quadratic form of any generic residual explodes and every
    Metropolis proposal past the clean-truncation boundary is rejected,
    leaving level-like noise unmodelled and priced as spurious clusters.
    The floor bounds the whitening operator so long-length proposals stay
    comparable and absorbs the smooth per-curve offsets the truncated
    kernel cannot whiten, at the cost of never explaining that slice of
    variance.  Applied identically to dense and banded structures so the
    full-bandwidth banded model remains exactly the dense model.
    """

    def __init__(self, grid: Grid, spec: KernelSpec, tau2: float, r: int | None,
                 nugget: float = 0.0):
        if spec.scale != 1.0:
            spec = spec.with_scale(1.0)
        self.grid = grid
        self.spec = spec
        self.tau2 = float(tau2)
        self.r = r
        self.nugget = float(nugget)
        if r is None:
            self.corr = build_covariance(spec, grid)
            if self.nugget:
                self.corr = self.corr + self.nugget * np.eye(grid.m)
        else:
            self.corr = build_banded(spec, grid, r)
            if self.nugget:
                self.corr = self.corr.add_diagonal(self.nugget)
        self._corr_factor: CholeskyFactor | None = None

    @property
    def is_banded(self) -> bool:
        return self.r is not None

    def corr_factor(self) -> CholeskyFactor:
        if self._corr_factor is None:
            self._corr_factor = factor_spd(self.corr)
        return self._corr_factor

    def cov_factor(self) -> CholeskyFactor:
        return _scaled_factor(self.corr_factor(), self.tau2)

    def cov_matrix(self):
        """tau2 * R as BandedSPD or ndarray (fresh object, safe to mutate)."""
        if isinstance(self.corr, BandedSPD):
            return self.corr.scaled(self.tau2)
        return self.tau2 * self.corr

    def cov_matvec(self, v):
        if isinstance(self.corr, BandedSPD):
            return self.tau2 * self.corr.matvec(v)
        return self.tau2 * (self.corr @ v)

    def with_kernel(self, spec: KernelSpec) -> "WorkingCov":
        return WorkingCov(self.grid, spec, self.tau2, self.r, self.nugget)


def _combine_factor(a, b, scale_b: float = 1.0) -> CholeskyFactor:
    """Factor of A + scale_b * B where each operand is BandedSPD or ndarray."""
    return factor_spd(add_spd(a, b, scale_b))


@dataclass
class ChainState:
    """Mutable sampler state; invariants are checked by ``validate``."""

    z: np.ndarray              # (n,) 0-based labels into thetas/counts rows
    thetas: np.ndarray         # (K, m) cluster mean curves
    counts: np.ndarray         # (K,) occupancy, sums to n
    tau_y2: float
    tau_mu2: float
    nu: float
    ell_y: float
    ell_mu: float
    noise: WorkingCov
    mean_cov: WorkingCov
    _marginal: CholeskyFactor | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.counts.size

    def marginal_factor(self) -> CholeskyFactor:
        """Factor of C_y + C_mean, the fresh-cluster marginal covariance."""
        if self._marginal is None:
            self._marginal = _combine_factor(self.noise.cov_matrix(),
                                             self.mean_cov.cov_matrix())
        return self._marginal

    def invalidate(self):
        """Propagate scale draws into the covariance objects and drop caches."""
        self.noise.tau2 = self.tau_y2
        self.mean_cov.tau2 = self.tau_mu2
        self._marginal = None

    def validate(self, n: int):
        assert self.counts.sum() == n
        assert np.all(self.counts >= 1)
        assert self.thetas.shape[0] == self.counts.size
        assert self.z.min() >= 0 and self.z.max() < self.counts.size
        assert np.array_equal(np.bincount(self.z, minlength=self.k), self.counts)


def canonical_labels(z: np.ndarray) -> np.ndarray:
    """Relabel clusters by order of first appearance (0, 1, 2, ...)."""
    z = np.asarray(z)
    _, first, inverse = np.unique(z, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=z.dtype)
    rank[np.argsort(first)] = np.arange(first.size, dtype=z.dtype)
    return rank[inverse]


def _log_density_cols(factor: CholeskyFactor, resid) -> np.ndarray:
    """Gaussian log density of each column of ``resid`` under N(0, A)."""
    const = -0.5 * (factor.m * LOG_2PI + factor.logdet())
    return const - 0.5 * factor.quad_form(resid)


def label_weights(state: ChainState, y: np.ndarray, prior: PartitionPrior) -> np.ndarray:
    """Assignment probabilities for one held-out curve.

    Entry k < K is proportional to (n_k - discount) times the density of y
    at cluster k's mean; the last entry opens a new cluster with mass
    (alpha + discount K) times the zero-mean marginal density.  Counts must
    exclude the curve being reassigned, and empty clusters must already be
    pruned.
    """
    if np.any(state.counts < 1):
        raise ValueError("empty cluster present; prune before computing weights")
    k = state.k
    cf = state.noise.cov_factor()
    logw = np.empty(k + 1)
    logw[:k] = prior.log_existing(state.counts)
    logw[:k] += _log_density_cols(cf, y[:, None] - state.thetas.T)
    logw[k] = prior.log_new(k) + _log_density_cols(state.marginal_factor(), y)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def gibbs_sweep_labels(state: ChainState, data, prior: PartitionPrior,
                       rng: RngStream) -> ChainState:
    """One full sequential sweep of label reassignments (step a).

    Curves are visited in index order.  Removing a curve prunes its cluster
    immediately if emptied.  A draw of the new-cluster option instantiates
    the mean from its conditional posterior given the founding curve,
    N(C_mean W^{-1} y_i, C_mean - C_mean W^{-1} C_mean) with W = C_y +
    C_mean; weighting the option by the marginal density and then drawing
    the mean from the bare prior would leave later reassignments in the
    same sweep conditioned on a mean that ignores y_i, and the resulting
    chain visibly under-merges (it fails a two-curve detailed-balance check
    against exhaustive enumeration by several percent).
    """
    y = data.y
    n, m = y.shape
    yt = np.ascontiguousarray(y.T)
    gen = rng.gen

    cf = state.noise.cov_factor()
    const_e = -0.5 * (m * LOG_2PI + cf.logdet())
    mf = state.marginal_factor()
    # Per-curve log densities: dens[i, k] against cluster k's current mean,
    # dens_new[i] against the fresh-cluster marginal.  Cluster means only
    # change here when a cluster is born, so columns stay valid all sweep.
    dens = np.empty((n, state.k))
    for k in range(state.k):
        dens[:, k] = const_e - 0.5 * cf.quad_form(yt - state.thetas[k][:, None])
    dens_new = _log_density_cols(mf, yt)

    z, thetas, counts = state.z, state.thetas, state.counts
    mean_factor = state.mean_cov.cov_factor()
    log_new_f = prior.log_new

    for i in range(n):
        k_old = z[i]
        counts[k_old] -= 1
        if counts[k_old] == 0:
            thetas = np.delete(thetas, k_old, axis=0)
            counts = np.delete(counts, k_old)
            dens = np.delete(dens, k_old, axis=1)
            z[z > k_old] -= 1
        k = counts.size
        logw = np.empty(k + 1)
        np.log(counts - prior.discount, out=logw[:k])
        logw[:k] += dens[i, :k]
        # With no other cluster left (n = 1) a new one is forced regardless of
        # its weight; 0.0 keeps that certain even when log(alpha) is undefined
        # for a Pitman-Yor prior with alpha <= 0.
        logw[k] = log_new_f(k) + dens_new[i] if k else 0.0
        logw -= logw.max()
        w = np.exp(logw)
        target = gen.random() * w.sum()
        k_new = min(int(np.searchsorted(np.cumsum(w), target, side="right")), k)
        if k_new == k:
            u = mean_factor.matvec(gen.standard_normal(m))
            v = cf.matvec(gen.standard_normal(m))
            sol = mf.solve(np.column_stack([yt[:, i], u + v]))
            theta = (state.mean_cov.cov_matvec(sol[:, 0]) + u
                     - state.mean_cov.cov_matvec(sol[:, 1]))
            thetas = np.vstack([thetas, theta[None, :]])
            counts = np.append(counts, 1)
            dens = np.column_stack(
                [dens, const_e - 0.5 * cf.quad_form(yt - theta[:, None])]
            )
        else:
            counts[k_new] += 1
        z[i] = k_new

    state.z, state.thetas, state.counts = z, thetas, counts
    return state


def update_cluster_means(state: ChainState, data, rng: RngStream) -> ChainState:
    """Conjugate draw of every cluster mean (step b).

    The posterior for cluster k has precision C_mean^{-1} + n_k C_y^{-1};
    with W_k = C_y + n_k C_mean it is evaluated without explicit inverses as
    mean ``C_mean W_k^{-1} y_sum`` and a draw ``mean + u - n_k C_mean W_k^{-1}
    (u + v)`` where u ~ N(0, C_mean) and v ~ N(0, C_y / n_k).
    """
    y = data.y
    m = y.shape[1]
    gen = rng.gen
    cy = state.noise.cov_matrix()
    cmean = state.mean_cov.cov_matrix()
    noise_factor = state.noise.cov_factor()
    mean_factor = state.mean_cov.cov_factor()

    for k in range(state.k):
        n_k = int(state.counts[k])
        y_sum = y[state.z == k].sum(axis=0)
        w_factor = _combine_factor(cy, cmean, scale_b=n_k)
        u = mean_factor.matvec(gen.standard_normal(m))
        v = noise_factor.matvec(gen.standard_normal(m)) / math.sqrt(n_k)
        sol = w_factor.solve(np.column_stack([y_sum, u + v]))
        state.thetas[k] = state.mean_cov.cov_matvec(sol[:, 0]) + u \
            - n_k * state.mean_cov.cov_matvec(sol[:, 1])
    return state


def update_scales(state: ChainState, data, hyper: HyperPrior,
                  rng: RngStream) -> ChainState:
    """Conjugate inverse-gamma draws of the two variance scales (step c).

    Quadratic forms are taken against the unit-scale structure matrices, so
    the updates are exact: tau_y2 ~ IG(a_y + nm/2, b_y + Q_y/2) with
    Q_y = sum_i r_i' R_y^{-1} r_i, and correspondingly for tau_mu2 with
    K m / 2 and the cluster means.
    """
    y = data.y
    n, m = y.shape
    gen = rng.gen

    resid = np.ascontiguousarray((y - state.thetas[state.z]).T)
    q_y = float(np.sum(state.noise.corr_factor().quad_form(resid)))
    shape = hyper.a_y + 0.5 * n * m
    rate = hyper.b_y + 0.5 * q_y
    state.tau_y2 = rate / gen.gamma(shape, 1.0)

    q_mu = float(np.sum(state.mean_cov.corr_factor().quad_form(
        np.ascontiguousarray(state.thetas.T))))
    shape_mu = hyper.a_mu + 0.5 * state.k * m
    rate_mu = hyper.b_mu + 0.5 * q_mu
    state.tau_mu2 = rate_mu / gen.gamma(shape_mu, 1.0)

    state.invalidate()
    return state


def _reflect(x: float, lo: float, hi: float) -> float:
    """Reflect x into [lo, hi]; a symmetric map, so no proposal correction."""
    width = hi - lo
    yy = (x - lo) % (2.0 * width)
    if yy > width:
        yy = 2.0 * width - yy
    return lo + yy


def _loglik_cols(factor: CholeskyFactor, resid) -> float:
    """Sum of Gaussian log densities over the columns of ``resid``."""
    ncol = resid.shape[1]
    return float(ncol * (-0.5 * (factor.m * LOG_2PI + factor.logdet()))
                 - 0.5 * np.sum(factor.quad_form(resid)))


def mh_update_kernel_hyperparams(state: ChainState, data, hyper: HyperPrior,
                                 config: SamplerConfig, rng: RngStream) -> ChainState:
    """Metropolis step on structure hyperparameters (step d).

    No-op for the ``iid`` and ``oracle`` error models.  Otherwise runs
    ``mh_proposals`` accept/reject cycles, each proposing (nu, ell_y)
    jointly -- nu uniform over its support, log ell_y by a reflected
    Gaussian random walk inside the log bounds -- accepted on the
    conditional curve likelihood, followed by the same walk on log ell_mu
    against the cluster-mean likelihood.  Priors are uniform/flat inside the
    bounds and the reflected walk is symmetric, so the acceptance ratio is
    the likelihood ratio alone.  Banded models rebuild the truncated
    structure matrix for every proposal.
    """
    if config.error_kind not in ("dense_gp", "banded_gp"):
        return state
    gen = rng.gen
    lo, hi = math.log(hyper.length_bounds[0]), math.log(hyper.length_bounds[1])
    y = data.y

    for _ in range(config.mh_proposals):
        # Noise kernel block: joint (nu, ell_y) proposal.
        nu_prop = hyper.nu_support[gen.integers(len(hyper.nu_support))]
        ell_prop = math.exp(_reflect(math.log(state.ell_y)
                                     + gen.normal(0.0, config.rw_step), lo, hi))
        prop_cov = state.noise.with_kernel(
            KernelSpec(family_for_smoothness(nu_prop), 1.0, ell_prop))
        resid = np.ascontiguousarray((y - state.thetas[state.z]).T)
        log_a = (_loglik_cols(prop_cov.cov_factor(), resid)
                 - _loglik_cols(state.noise.cov_factor(), resid))
        if math.log(gen.random()) < log_a:
            state.nu, state.ell_y = float(nu_prop), ell_prop
            state.noise = prop_cov
            state.invalidate()

        # Mean kernel block: ell_mu walk, squared-exponential family fixed.
        ell_mu_prop = math.exp(_reflect(math.log(state.ell_mu)
                                        + gen.normal(0.0, config.rw_step),
                                        lo, hi))
        prop_mean = state.mean_cov.with_kernel(
            KernelSpec("se", 1.0, ell_mu_prop))
        th = np.ascontiguousarray(state.thetas.T)
        log_a_mu = (_loglik_cols(prop_mean.cov_factor(), th)
                    - _loglik_cols(state.mean_cov.cov_factor(), th))
        if math.log(gen.random()) < log_a_mu:
            state.ell_mu = ell_mu_prop
            state.mean_cov = prop_mean
            state.invalidate()
    return state


@dataclass
class ChainTrace:
    """Kept draws (post burn-in, unthinned) plus run metadata."""

    z_draws: np.ndarray        # (T, n) canonicalized labels, int16
    k_draws: np.ndarray        # (T,)
    tau_y2: np.ndarray
    tau_mu2: np.ndarray
    nu: np.ndarray
    ell_y: np.ndarray
    ell_mu: np.ndarray
    config: SamplerConfig
    grid: Grid
    burn_in: int
    iterations: int
    wall_seconds: float

    @property
    def kept(self) -> int:
        return self.k_draws.size

    @property
    def seconds_per_sweep(self) -> float:
        return self.wall_seconds / self.iterations


def _initial_state(data, config: SamplerConfig, rng: RngStream) -> ChainState:
    grid = data.grid
    n, m = data.y.shape
    r = None
    if config.error_kind == "banded_gp":
        r = select_bandwidth(m, config.bandwidth_multiplier)

    # All working models start from white noise with a scale drawn well above
    # the marginal data variance; the structured kernel only takes over once
    # the Metropolis step accepts it.  The overdispersed start is load-bearing
    # at large m: at data scale the very first label sweep shatters the
    # single seed cluster into dozens of near-singletons, their fitted means
    # absorb the correlated noise, and the leftover residuals are so close to
    # white that no kernel proposal is ever accepted again.  Wide noise keeps
    # the partition coarse for the first few sweeps, the scale update then
    # drops the scale to the residual level in one draw, and the first
    # Metropolis proposal sees large smooth residuals that favour a kernel.
    v_hat = float(np.var(data.y))
    tau_y2 = ((INIT_SCALE_SHAPE - 1.0) * INIT_SCALE_MULT * v_hat
              / rng.gen.gamma(INIT_SCALE_SHAPE, 1.0))
    if config.error_kind == "oracle":
        spec = config.oracle_spec
        if spec is None:
            spec = data.design.noise_spec()
        noise_spec = spec.with_scale(1.0)
        noise_r = None
        tau_y2 = spec.scale
        nu0 = (smoothness_for_family(spec.family)
               if spec.family in ("matern12", "matern32", "matern52", "se")
               else math.nan)
        ell0 = spec.length
    else:
        noise_spec = KernelSpec("iid", 1.0)
        # carry the target bandwidth from the start: kernel proposals reuse it
        noise_r = 0 if config.error_kind == "iid" else r
        nu0 = config.nu_init
        ell0 = config.noise_length_init
        if ell0 is None:
            ell0 = 0.05 if config.error_kind == "banded_gp" else 0.5

    nugget = config.resolve_nugget()
    noise = WorkingCov(grid, noise_spec, tau_y2, noise_r, nugget)
    mean_r = r if config.use_banded_mean() else None
    mean_cov = WorkingCov(grid, KernelSpec("se", 1.0, config.mean_length_init),
                          1.0, mean_r, nugget)

    theta0 = mean_cov.cov_factor().matvec(rng.gen.standard_normal(m))
    return ChainState(
        z=np.zeros(n, dtype=np.int64),
        thetas=theta0[None, :].copy(),
        counts=np.array([n], dtype=np.int64),
        tau_y2=tau_y2,
        tau_mu2=1.0,
        nu=nu0,
        ell_y=ell0,
        ell_mu=config.mean_length_init,
        noise=noise,
        mean_cov=mean_cov,
    )


def run_chain(data, config: SamplerConfig, rng: RngStream) -> ChainTrace:
    """Run one chain and return its kept draws.

    ``data`` needs ``y`` (n x m) and ``grid``; a full
    :class:`~funclust.simgen.FunctionalDataset` works.  Initialization: one
    cluster holding every curve, its mean drawn from the prior, and an
    overdispersed white-noise working covariance (see ``_initial_state``).
    """
    n, m = data.y.shape
    if data.grid.m != m:
        raise ValueError("grid size does not match data columns")
    state = _initial_state(data, config, rng)
    kept = config.iterations - config.burn_in

    z_draws = np.empty((kept, n), dtype=np.int16)
    k_draws = np.empty(kept, dtype=np.int16)
    tau_y2 = np.empty(kept)
    tau_mu2 = np.empty(kept)
    nu = np.empty(kept)
    ell_y = np.empty(kept)
    ell_mu = np.empty(kept)

    t0 = time.perf_counter()
    row = 0
    for it in range(config.iterations):
        gibbs_sweep_labels(state, data, config.prior, rng)
        update_cluster_means(state, data, rng)
        update_scales(state, data, config.hyper, rng)
        mh_update_kernel_hyperparams(state, data, config.hyper, config, rng)
        if it >= config.burn_in:
            z_draws[row] = canonical_labels(state.z)
            k_draws[row] = state.k
            tau_y2[row] = state.tau_y2
            tau_mu2[row] = state.tau_mu2
            nu[row] = state.nu
            ell_y[row] = state.ell_y
            ell_mu[row] = state.ell_mu
            row += 1
    wall = time.perf_counter() - t0

    return ChainTrace(z_draws=z_draws, k_draws=k_draws, tau_y2=tau_y2,
                      tau_mu2=tau_mu2, nu=nu, ell_y=ell_y, ell_mu=ell_mu,
                      config=config, grid=data.grid, burn_in=config.burn_in,
                      iterations=config.iterations, wall_seconds=wall)
