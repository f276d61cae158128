"""
The log-Bessel kernel behind everything else
============================================

Every likelihood in this package reduces to evaluations of
``log I_nu(kappa)``, the log of the modified Bessel function of the
first kind. Plain ``scipy.special.iv`` overflows around kappa ~ 700
and underflows for large orders, so ``psda.log_bessel_i`` stitches
together three regimes that each stay in log space.
"""

import numpy as np
from scipy.special import iv

from psda import log_bessel_i, log_cnu, rho, rho_inv

# Where scipy still works, we agree with it to machine precision.
kappa = np.array([0.5, 2.0, 20.0, 200.0])
print("log iv(1, k)  :", np.log(iv(1.0, kappa)))
print("log_bessel_i  :", log_bessel_i(1.0, kappa))

# Where scipy gives inf or 0, the kernel keeps going. An embedding
# dimension of 512 means orders around nu = 255; concentrations in the
# tens of thousands are routine for pooled enrollment sides.
big = np.array([1e3, 1e4, 1e5])
print("\niv(255, k) for k =", big, "->", iv(255.0, big))
print("log_bessel_i(255, k) ->", log_bessel_i(255.0, big))

# The tiny-argument end is just as hostile in linear space: iv
# underflows to 0 even though the log is perfectly representable.
print("\niv(255, 1e-6) =", iv(255.0, 1e-6))
print("log_bessel_i(255, 1e-6) =", log_bessel_i(255.0, 1e-6))

# log_cnu is the log normalizer built on top of the kernel. It is
# finite at kappa = 0 (the uniform distribution) and decreasing.
nu = 31.0  # dimension 64
ks = np.array([0.0, 1.0, 10.0, 100.0, 1000.0])
print("\nlog C_31(kappa):", log_cnu(nu, ks))

# rho maps concentration to mean resultant length; rho_inv inverts it.
# The pair is the workhorse of maximum-likelihood fitting.
for k in (0.1, 5.0, 500.0, 50000.0):
    r = rho(nu, k)
    back = rho_inv(nu, float(r))
    print(f"kappa={k:<8g} rho={float(r):.12f}  rho_inv(rho)={back:.6g}")
