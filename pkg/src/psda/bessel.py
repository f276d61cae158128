"""Log-scale modified Bessel kernel for spherical distributions.

Everything downstream (densities, marginal likelihoods, EM updates) reduces
to three quantities built on the modified Bessel function of the first kind:

* ``log_bessel_i``   -- log I_nu(kappa),
* ``log_cnu``        -- log C_nu(kappa) = nu*log(kappa) - log I_nu(kappa),
  the log of the (unnormalized) Von Mises-Fisher normalizer,
* ``rho`` / ``rho_inv`` -- the mean resultant length
  rho(kappa) = I_{nu+1}(kappa) / I_nu(kappa) and its inverse.

These must stay finite and accurate for orders up to a few thousand and
arguments from ~1e-6 up to 1e5 and beyond. ``scipy.special.iv`` overflows
near kappa ~ 700, so three regimes are stitched together:

* kappa < sqrt(nu + 1): the ascending power series, accumulated in log
  space. The series is written "reduced", i.e. for I_nu(kappa)/(kappa/2)^nu,
  so that log_cnu stays exact as kappa -> 0.
* moderate and large kappa: the exponentially scaled ``scipy.special.ive``,
  with log I = log ive(nu, kappa) + kappa.
* large order, where ive itself underflows (I_nu(kappa) < e^kappa * 1e-280
  only happens for nu in the hundreds and beyond): the uniform asymptotic
  expansion of I_nu for large order, with exact rational coefficient
  polynomials generated at import time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import zip_longest

import numpy as np
from numpy.polynomial import polynomial as npp
from scipy.optimize import toms748
from scipy.special import gammaln, ive

from .errors import CappedConcentrationError

__all__ = [
    "R_MAX",
    "BesselOrder",
    "log_bessel_i",
    "log_cnu",
    "rho",
    "rho_inv",
]

#: Largest mean resultant length that rho_inv will attempt to invert.
R_MAX = 1.0 - 1e-10

_LOG2 = math.log(2.0)
_SERIES_MAX_TERMS = 500
_LOG_SERIES_EPS = math.log(1e-17)
_IVE_TINY = 1e-280  # below this, ive is too close to the subnormal range
_ASYM_TERMS = 9


@dataclass(frozen=True)
class BesselOrder:
    """Bessel order ``nu``, tied to a sphere dimension by nu = dim/2 - 1."""

    nu: float

    def __post_init__(self):
        nu = float(self.nu)
        if not math.isfinite(nu) or nu < 0.0:
            raise ValueError(f"order must be finite and >= 0, got {self.nu!r}")
        object.__setattr__(self, "nu", nu)

    @classmethod
    def from_dim(cls, dim: int) -> "BesselOrder":
        """Order for the unit sphere embedded in R^dim (dim >= 2)."""
        d = int(dim)
        if d != dim or d < 2:
            raise ValueError(f"dim must be an integer >= 2, got {dim!r}")
        return cls(d / 2.0 - 1.0)

    @property
    def dim(self) -> float:
        return 2.0 * (self.nu + 1.0)


def _as_nu(order) -> float:
    if isinstance(order, BesselOrder):
        return order.nu
    return BesselOrder(float(order)).nu


def _validate_kappa(kappa) -> tuple[np.ndarray, bool, tuple]:
    arr = np.asarray(kappa, dtype=np.float64)
    flat = np.atleast_1d(arr).ravel()
    if flat.size and (not np.isfinite(flat).all() or (flat < 0.0).any()):
        raise ValueError("kappa must be finite and >= 0")
    return flat, arr.ndim == 0, arr.shape


def _package(flat: np.ndarray, scalar: bool, shape: tuple):
    return float(flat[0]) if scalar else flat.reshape(shape)


def _log_series_reduced(nu: float, logh: np.ndarray) -> np.ndarray:
    """log[ I_nu(kappa) / (kappa/2)^nu ] by the ascending series.

    ``logh`` is log(kappa/2). All terms are positive, so the sum is
    accumulated with logaddexp and stops once the newest term is below
    1e-17 of the running total (for kappa < sqrt(nu+1) the term ratio is
    below 1/4, so this converges in a few dozen terms at most).
    """
    acc = np.full_like(logh, -gammaln(nu + 1.0))
    for i in range(1, _SERIES_MAX_TERMS + 1):
        term = 2.0 * i * logh - gammaln(i + 1.0) - gammaln(i + nu + 1.0)
        acc = np.logaddexp(acc, term)
        if np.all(term - acc < _LOG_SERIES_EPS):
            break
    return acc


def _u_polynomials(count: int) -> list[np.ndarray]:
    """Coefficients (ascending powers) of the Debye polynomials U_0..U_{count-1}.

    Generated exactly over the rationals from the recurrence

        U_{k+1}(p) = p^2 (1 - p^2) U_k'(p) / 2
                     + (1/8) * integral_0^p (1 - 5 t^2) U_k(t) dt,

    then converted to float (U_1 = (3p - 5p^3)/24, etc.).
    """
    polys = [[Fraction(1)]]
    for _ in range(count - 1):
        u = polys[-1]
        du = [i * u[i] for i in range(1, len(u))]
        # p^2 (1 - p^2) u'(p) / 2
        part1 = [Fraction(0)] * 2 + [c / 2 for c in du]
        part1 = [
            a - b
            for a, b in zip_longest(
                part1, [Fraction(0)] * 4 + [c / 2 for c in du], fillvalue=Fraction(0)
            )
        ]
        # (1/8) * integral of (1 - 5 t^2) u(t)
        integrand = [
            a - 5 * b
            for a, b in zip_longest(u, [Fraction(0)] * 2 + u, fillvalue=Fraction(0))
        ]
        part2 = [Fraction(0)] + [c / (8 * (i + 1)) for i, c in enumerate(integrand)]
        polys.append(
            [a + b for a, b in zip_longest(part1, part2, fillvalue=Fraction(0))]
        )
    return [np.array([float(c) for c in p]) for p in polys]


_U_POLYS = _u_polynomials(_ASYM_TERMS)


def _log_i_asym(nu: float, kappa: np.ndarray) -> np.ndarray:
    """log I_nu(kappa) via the uniform large-order asymptotic expansion.

    Only used where ive underflows, which guarantees nu is large (hundreds
    and up), where the expansion is accurate well past float64 precision.
    Formulated in (nu, kappa) directly -- not z = kappa/nu -- to avoid an
    avoidable rounding of the large leading term.
    """
    t = np.hypot(nu, kappa)  # nu * sqrt(1 + z^2)
    p = nu / t
    s = np.zeros_like(kappa)
    for k, coeffs in enumerate(_U_POLYS):
        s += npp.polyval(p, coeffs) / nu**k
    return (
        t
        + nu * (np.log(kappa) - np.log(nu + t))
        - 0.5 * math.log(2.0 * math.pi * nu)
        - 0.5 * (np.log(t) - math.log(nu))
        + np.log(s)
    )


def log_bessel_i(order, kappa):
    """log I_nu(kappa), elementwise over kappa.

    Parameters
    ----------
    order : BesselOrder or float
        Bessel order nu >= 0.
    kappa : float or array_like
        Argument(s), finite and >= 0.

    Returns
    -------
    float or ndarray
        Scalar in, scalar out. At kappa = 0 this is 0 for nu = 0 and
        -inf for nu > 0.
    """
    nu = _as_nu(order)
    k, scalar, shape = _validate_kappa(kappa)
    out = np.empty_like(k)
    zero = k == 0.0
    small = ~zero & (k < math.sqrt(nu + 1.0))
    big = ~zero & ~small
    if zero.any():
        out[zero] = 0.0 if nu == 0.0 else -np.inf
    if small.any():
        logh = np.log(k[small]) - _LOG2
        out[small] = nu * logh + _log_series_reduced(nu, logh)
    if big.any():
        kb = k[big]
        y = ive(nu, kb)
        vals = np.empty_like(kb)
        ok = y >= _IVE_TINY
        vals[ok] = np.log(y[ok]) + kb[ok]
        if not ok.all():
            vals[~ok] = _log_i_asym(nu, kb[~ok])
        out[big] = vals
    return _package(out, scalar, shape)


def log_cnu(order, kappa):
    """log C_nu(kappa) = nu*log(kappa) - log I_nu(kappa), elementwise.

    C_nu is the kappa-dependent part of the Von Mises-Fisher normalizer.
    The kappa -> 0 limit, log(2^nu Gamma(nu+1)), is returned exactly at
    kappa = 0, and the small-kappa branch cancels nu*log(kappa) against
    the series analytically, so there is no precision cliff near zero.
    """
    nu = _as_nu(order)
    k, scalar, shape = _validate_kappa(kappa)
    out = np.empty_like(k)
    zero = k == 0.0
    small = ~zero & (k < math.sqrt(nu + 1.0))
    big = ~zero & ~small
    if zero.any():
        out[zero] = nu * _LOG2 + gammaln(nu + 1.0)
    if small.any():
        logh = np.log(k[small]) - _LOG2
        out[small] = nu * _LOG2 - _log_series_reduced(nu, logh)
    if big.any():
        kb = k[big]
        y = ive(nu, kb)
        vals = np.empty_like(kb)
        ok = y >= _IVE_TINY
        vals[ok] = nu * np.log(kb[ok]) - np.log(y[ok]) - kb[ok]
        if not ok.all():
            vals[~ok] = nu * np.log(kb[~ok]) - _log_i_asym(nu, kb[~ok])
        out[big] = vals
    return _package(out, scalar, shape)


def rho(order, kappa):
    """Mean resultant length rho(kappa) = I_{nu+1}(kappa) / I_nu(kappa).

    Strictly increasing in kappa, with rho(0) = 0 and rho(kappa) < 1.
    Computed as a ratio within a single regime so the large exponential
    factors cancel exactly rather than in floating point.
    """
    nu = _as_nu(order)
    k, scalar, shape = _validate_kappa(kappa)
    out = np.zeros_like(k)
    small = (k > 0.0) & (k < math.sqrt(nu + 1.0))
    big = k >= math.sqrt(nu + 1.0)
    if small.any():
        logh = np.log(k[small]) - _LOG2
        out[small] = np.exp(
            logh + _log_series_reduced(nu + 1.0, logh) - _log_series_reduced(nu, logh)
        )
    if big.any():
        kb = k[big]
        y0 = ive(nu, kb)
        y1 = ive(nu + 1.0, kb)
        vals = np.empty_like(kb)
        ok = y0 >= _IVE_TINY
        vals[ok] = y1[ok] / y0[ok]
        if not ok.all():
            kx = kb[~ok]
            vals[~ok] = np.exp(_log_i_asym(nu + 1.0, kx) - _log_i_asym(nu, kx))
        out[big] = vals
    return _package(out, scalar, shape)


def rho_inv(order, r) -> float:
    """Invert the mean resultant length: the kappa with rho(kappa) = r.

    Parameters
    ----------
    order : BesselOrder or float
    r : float
        Target in [0, R_MAX). Values in [R_MAX, 1) raise
        CappedConcentrationError; anything outside [0, 1) raises
        ValueError.

    Returns
    -------
    float
        Bracketed root of rho(kappa) - r, solved with a derivative-free
        rootfinder to a bracket width below 1e-12 * (1 + kappa).
    """
    nu = _as_nu(order)
    rf = float(r)
    if not (0.0 <= rf < 1.0):  # also rejects NaN
        raise ValueError(f"r must lie in [0, 1), got {r!r}")
    if rf >= R_MAX:
        raise CappedConcentrationError(rf, R_MAX)
    if rf == 0.0:
        return 0.0
    # Banerjee-style initial guess, then expand to a sign-changing bracket.
    d = 2.0 * (nu + 1.0)
    k0 = rf * (d - rf * rf) / (1.0 - rf * rf)
    lo, hi = 0.0, k0
    fhi = rho(nu, hi) - rf
    while fhi < 0.0:
        lo, hi = hi, 2.0 * hi
        fhi = rho(nu, hi) - rf
    if fhi == 0.0:
        return hi
    return float(
        toms748(lambda k: rho(nu, k) - rf, lo, hi, xtol=1e-13, rtol=1e-13)
    )
