"""
Von Mises-Fisher distributions: sample, evaluate, fit
=====================================================
"""

import numpy as np

from psda import VmfParams, fit_ml, log_density_rel_uniform, sample

rng = np.random.default_rng(7)

# A VMF distribution on the unit sphere in R^16: mean direction mu,
# concentration kappa. kappa = 0 is the uniform distribution.
v = rng.standard_normal(16)
truth = VmfParams(v / np.linalg.norm(v), kappa=35.0)
mu = truth.mu

X = sample(truth, n=5000, seed=7)
print("samples:", X.shape, " row norms all 1:", np.allclose(np.linalg.norm(X, axis=1), 1.0))

# Densities are reported relative to the uniform density, so the
# uniform distribution scores exactly 0 everywhere and positive values
# mean "more likely than chance".
ld = log_density_rel_uniform(truth, X[0])
print("log density rel uniform at a sample:", float(ld))
print("at the mode:", float(log_density_rel_uniform(truth, mu)))
print("under uniform:", float(log_density_rel_uniform(VmfParams(mu, 0.0), X[0])))

# Maximum-likelihood fit: the sufficient statistic is just the mean
# vector, so fitting 5000 points is instant.
fit = fit_ml(X)
print("\nfitted kappa:", fit.kappa, " (truth 35)")
print("mu alignment:", float(fit.mu @ truth.mu))

# The estimate tightens as n grows.
for n in (50, 500, 5000, 50000):
    f = fit_ml(sample(truth, n, seed=8))
    print(f"n={n:<6d} kappa_hat={f.kappa:8.3f}  align={float(f.mu @ truth.mu):.5f}")
