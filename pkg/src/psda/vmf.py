"""Von Mises-Fisher distributions on the unit hypersphere.

Densities are expressed relative to the uniform distribution on the
sphere, so the dimension-dependent surface-area constant never appears:
every likelihood ratio downstream is exact with this convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bessel import R_MAX, BesselOrder, log_cnu, rho, rho_inv
from .errors import CappedConcentrationError

__all__ = [
    "NORM_SLACK",
    "UNIT_ATOL",
    "VmfParams",
    "fit_ml",
    "log_density_rel_uniform",
    "mean_vector",
    "sample",
    "unit",
    "unit_rows",
]

#: Inputs whose norm is within this of 1 are accepted and renormalized.
NORM_SLACK = 1e-3
#: Bound on |norm - 1| guaranteed for every vector this module returns.
UNIT_ATOL = 1e-6
# Norms this close to 1 are left alone. Renormalizing a vector moves its
# recomputed norm at most ~d*eps from 1, so this makes normalization
# idempotent: a second pass is bit-identical (x / 1.0 == x exactly),
# which keeps text round trips of unit data stable.
_RENORM_EPS = 1e-9


def unit(x, name: str = "vector") -> np.ndarray:
    """Validate a direction and renormalize it to unit length.

    Accepts any 1-D array-like with dimension >= 2 whose norm is within
    NORM_SLACK of 1; raises ValueError otherwise. The result is a fresh
    float64 array with |norm - 1| <= UNIT_ATOL.
    """
    v = np.array(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"{name} must be 1-D with dimension >= 2, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ValueError(f"{name} has non-finite entries")
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > NORM_SLACK:
        raise ValueError(f"{name} has norm {n:.6g}, outside 1 +/- {NORM_SLACK:g}")
    return v / (n if abs(n - 1.0) > _RENORM_EPS else 1.0)


def unit_rows(X, names=None) -> np.ndarray:
    """Apply the unit() rules to every row of an (n, d) array.

    ``names`` optionally labels rows (e.g. segment ids) for error messages.
    """
    A = np.array(X, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] < 2:
        raise ValueError(f"expected an (n, d) array with d >= 2, got shape {A.shape}")

    def _label(i: int) -> str:
        return str(names[i]) if names is not None else f"row {i}"

    finite = np.isfinite(A).all(axis=1)
    if not finite.all():
        raise ValueError(f"{_label(int(np.argmin(finite)))} has non-finite entries")
    norms = np.linalg.norm(A, axis=1)
    bad = np.abs(norms - 1.0) > NORM_SLACK
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"{_label(i)} has norm {norms[i]:.6g}, outside 1 +/- {NORM_SLACK:g}"
        )
    scale = np.where(np.abs(norms - 1.0) > _RENORM_EPS, norms, 1.0)
    return A / scale[:, None]


@dataclass(frozen=True)
class VmfParams:
    """Von Mises-Fisher parameters: unit mean direction and kappa >= 0.

    kappa = 0 is the uniform distribution (mu is then irrelevant but kept
    for a canonical representation).
    """

    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        mu = unit(self.mu, "mu")
        mu.flags.writeable = False
        k = float(self.kappa)
        if not (np.isfinite(k) and k >= 0.0):
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "kappa", k)

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def order(self) -> BesselOrder:
        return BesselOrder.from_dim(self.dim)


def log_density_rel_uniform(params: VmfParams, x):
    """Log density of x under params, relative to the uniform density.

    Equals [log C_nu(kappa) - log C_nu(0)] + kappa * mu'x, which is 0
    identically at kappa = 0. Accepts one vector (returns float) or a
    stack of rows (returns a 1-D array).
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    rows = unit_rows(X[None, :] if single else X)
    if rows.shape[1] != params.dim:
        raise ValueError(f"dimension mismatch: x has {rows.shape[1]}, params {params.dim}")
    order = params.order
    vals = log_cnu(order, params.kappa) - log_cnu(order, 0.0) + params.kappa * (rows @ params.mu)
    return float(vals[0]) if single else vals


def fit_ml(X) -> VmfParams:
    """Maximum-likelihood fit to unit-norm rows.

    mu is the normalized mean; kappa inverts the mean resultant length.
    Raises CappedConcentrationError when the resultant is at or above
    R_MAX (rows numerically coincident), and returns the uniform
    distribution when the mean vector is exactly zero.
    """
    rows = unit_rows(X)
    xbar = rows.mean(axis=0)
    r = float(np.linalg.norm(xbar))
    if r >= R_MAX:
        raise CappedConcentrationError(r, R_MAX)
    if r == 0.0:
        e1 = np.zeros(rows.shape[1])
        e1[0] = 1.0
        return VmfParams(e1, 0.0)
    kappa = rho_inv(BesselOrder.from_dim(rows.shape[1]), r)
    return VmfParams(xbar / r, kappa)


def mean_vector(params: VmfParams) -> np.ndarray:
    """First moment E[x] = rho(kappa) * mu (zero vector at kappa = 0)."""
    return rho(params.order, params.kappa) * params.mu


def sample(params: VmfParams, n: int, seed) -> np.ndarray:
    """Draw n unit vectors, reproducibly for a given seed.

    Uses the Wood (1994) rejection sampler for the cosine against mu plus
    a uniformly random orthogonal component. kappa = 0 falls back to
    normalized Gaussian draws.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return sample_with_rng(params, int(n), np.random.default_rng(seed))


def sample_with_rng(params: VmfParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """sample() against a caller-managed Generator (for stream control)."""
    d = params.dim
    if params.kappa == 0.0:
        x = rng.standard_normal((n, d))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    w = _sample_cosines(params.kappa, d, n, rng)
    v = rng.standard_normal((n, d))
    v -= np.outer(v @ params.mu, params.mu)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x = w[:, None] * params.mu + np.sqrt(np.maximum(0.0, 1.0 - w * w))[:, None] * v
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _sample_cosines(kappa: float, dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    # Wood's envelope: beta-distributed candidate, log-space accept test.
    dm = dim - 1.0
    b = dm / (np.sqrt(4.0 * kappa * kappa + dm * dm) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dm * np.log(1.0 - x0 * x0)
    out = np.empty(n)
    have = 0
    while have < n:
        m = n - have
        z = rng.beta(dm / 2.0, dm / 2.0, size=m)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        # -Exp(1) is distributed as log(Uniform(0,1))
        log_u = -rng.standard_exponential(m)
        keep = kappa * w + dm * np.log1p(-x0 * w) - c >= log_u
        k = int(keep.sum())
        out[have : have + k] = w[keep]
        have += k
    return out
