"""Two-level spherical generative model and its EM estimation.

Each speaker has a latent identity direction z on the unit sphere with a
VMF prior (mean direction mu, "between" concentration b >= 0); every
observation of that speaker is VMF-distributed around z with a shared
"within" concentration w > 0. Products of VMF kernels stay in the family,
so speaker posteriors and marginal likelihoods are closed-form, and EM
needs only zero- and first-order statistics per speaker.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bessel import BesselOrder, log_cnu, rho, rho_inv
from .vmf import VmfParams, fit_ml, unit, unit_rows

__all__ = [
    "PsdaModel",
    "SideStats",
    "em_train",
    "init_params",
    "marginal_loglik",
    "posterior",
]


@dataclass(frozen=True)
class SideStats:
    """Sufficient statistics of a set of observations: count and vector sum.

    Additive: stats of a union of sets is the field-wise sum, which is all
    multi-enrollment needs.
    """

    n: int
    total: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        t = np.array(self.total, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ValueError(f"sum must be 1-D with dimension >= 2, got shape {t.shape}")
        if not np.isfinite(t).all():
            raise ValueError("sum has non-finite entries")
        norm = float(np.linalg.norm(t))
        if norm > n + 1e-6:
            raise ValueError(f"sum norm {norm:.6g} exceeds observation count {n}")
        t.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "total", t)

    @classmethod
    def from_embeddings(cls, X) -> "SideStats":
        rows = unit_rows(X)
        return cls(rows.shape[0], rows.sum(axis=0))

    def __add__(self, other):
        if not isinstance(other, SideStats):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return SideStats(self.n + other.n, self.total + other.total)

    @property
    def dim(self) -> int:
        return self.total.size

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.n


@dataclass(frozen=True)
class PsdaModel:
    """Model parameters: within-speaker w > 0, between-speaker b >= 0, mu."""

    w: float
    b: float
    mu: np.ndarray

    def __post_init__(self):
        w = float(self.w)
        b = float(self.b)
        if not (np.isfinite(w) and w > 0.0):
            raise ValueError(f"w must be finite and > 0, got {self.w!r}")
        if not (np.isfinite(b) and b >= 0.0):
            raise ValueError(f"b must be finite and >= 0, got {self.b!r}")
        mu = unit(self.mu, "mu")
        mu.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "mu", mu)

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def order(self) -> BesselOrder:
        return BesselOrder.from_dim(self.dim)


def _check_dim(model: PsdaModel, stats: SideStats):
    if stats.dim != model.dim:
        raise ValueError(f"dimension mismatch: stats {stats.dim}, model {model.dim}")


def posterior(model: PsdaModel, stats: SideStats) -> VmfParams:
    """Posterior of the identity variable given pooled observations.

    The posterior is VMF with natural parameter ztilde = b*mu + w*sum;
    direction ztilde/|ztilde| and concentration |ztilde|. A zero ztilde
    (possible only at b = 0 with cancelling observations) gives the
    uniform posterior, keeping mu as the canonical direction.
    """
    _check_dim(model, stats)
    zt = model.b * model.mu + model.w * stats.total
    norm = float(np.linalg.norm(zt))
    if norm == 0.0:
        return VmfParams(model.mu, 0.0)
    return VmfParams(zt / norm, norm)


def marginal_loglik(model: PsdaModel, stats: SideStats) -> float:
    """Log marginal likelihood of the pooled set, relative to uniform.

    log P(X) - n*log U = n*[log C(w) - log C(0)] + log C(b) - log C(|ztilde|).
    The uniform-relative convention removes the sphere-area constant while
    keeping every ratio of marginals exact.
    """
    _check_dim(model, stats)
    order = model.order
    zt_norm = float(np.linalg.norm(model.b * model.mu + model.w * stats.total))
    return float(
        stats.n * (log_cnu(order, model.w) - log_cnu(order, 0.0))
        + log_cnu(order, model.b)
        - log_cnu(order, zt_norm)
    )


def _stack_speakers(speakers) -> tuple[np.ndarray, np.ndarray]:
    spk = list(speakers)
    if len(spk) < 2:
        raise ValueError(f"need at least 2 speakers, got {len(spk)}")
    dim = spk[0].dim
    for i, s in enumerate(spk):
        if not isinstance(s, SideStats):
            raise TypeError(f"speaker {i} is not SideStats")
        if s.dim != dim:
            raise ValueError(f"speaker {i} has dimension {s.dim}, expected {dim}")
    sums = np.stack([s.total for s in spk])
    ns = np.array([float(s.n) for s in spk])
    return sums, ns


def _total_loglik(order, w, b, mu, sums, ns) -> float:
    zt = b * mu + w * sums
    q = np.linalg.norm(zt, axis=1)
    terms = (
        ns * (log_cnu(order, w) - log_cnu(order, 0.0))
        + log_cnu(order, b)
        - log_cnu(order, q)
    )
    # fsum: fixed-order compensated reduction, stable across thread counts
    return math.fsum(terms)


def em_train(
    speakers,
    *,
    max_iters: int = 100,
    rel_tol: float = 1e-8,
    init: PsdaModel | None = None,
    b_zero: bool = False,
) -> tuple[PsdaModel, np.ndarray]:
    """Estimate (w, b, mu) from per-speaker sufficient statistics.

    E-step: E[z]_i = rho(|ztilde_i|) * ztilde_i/|ztilde_i| per speaker.
    M-step: mu and b from the resultant of the E[z]_i, w from the scalar
    alignment rbar = (1/N) sum_i sum_i' E[z]_i (both through rho_inv).
    With ``b_zero`` the prior stays uniform: b is frozen at 0 and mu is
    not updated.

    Returns the final model and the log-likelihood trace (total marginal
    log-likelihood relative to uniform, one entry per visited model, the
    initial model included). The trace is non-decreasing up to float
    noise; iteration stops when the relative improvement drops below
    rel_tol or after max_iters updates.
    """
    sums, ns = _stack_speakers(speakers)
    N = float(ns.sum())
    model = init_params(speakers) if init is None else init
    if b_zero and model.b != 0.0:
        model = PsdaModel(model.w, 0.0, model.mu)
    if model.dim != sums.shape[1]:
        raise ValueError(f"init model dimension {model.dim} != data {sums.shape[1]}")
    order = model.order
    trace = [_total_loglik(order, model.w, model.b, model.mu, sums, ns)]
    for _ in range(max_iters):
        model = _em_update(order, model, sums, ns, N, b_zero)
        trace.append(_total_loglik(order, model.w, model.b, model.mu, sums, ns))
        if trace[-1] - trace[-2] <= rel_tol * max(1.0, abs(trace[-2])):
            break
    return model, np.array(trace)


def _em_update(order, model, sums, ns, N, b_zero) -> PsdaModel:
    zt = model.b * model.mu + model.w * sums
    q = np.linalg.norm(zt, axis=1)
    scale = np.zeros_like(q)
    pos = q > 0.0
    scale[pos] = rho(order, q[pos]) / q[pos]
    ez = scale[:, None] * zt  # E[z] per speaker

    rbar = math.fsum(np.einsum("ij,ij->i", sums, ez)) / N
    if rbar < 0.0:
        warnings.warn(
            "anti-aligned within-speaker statistics: rbar clamped to 0",
            RuntimeWarning,
        )
        rbar = 0.0

    mu, b = model.mu, model.b
    if not b_zero:
        zbar = ez.mean(axis=0)
        nz = float(np.linalg.norm(zbar))
        if nz == 0.0:
            b = 0.0
        else:
            mu = zbar / nz
            b = rho_inv(order, nz)
    return PsdaModel(rho_inv(order, rbar), b, mu)


def init_params(speakers) -> PsdaModel:
    """Deterministic EM starting point from the speaker statistics.

    mu0 and b0 come from a VMF fit of the normalized speaker means; w0
    inverts the average per-speaker resultant length, clipped below the
    invertible cap. Degenerate inputs (all speaker means coincident)
    surface the capped-concentration error from the fit.
    """
    sums, ns = _stack_speakers(speakers)
    means = sums / ns[:, None]
    res = np.linalg.norm(means, axis=1)
    if (res == 0.0).any():
        raise ValueError("a speaker has a zero mean embedding; cannot initialize")
    between = fit_ml(means / res[:, None])
    r0 = min(float(res.mean()), 1.0 - 1e-8)
    return PsdaModel(rho_inv(between.order, r0), between.kappa, between.mu)
