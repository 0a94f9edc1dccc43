"""Naive versus measurement-error corrected slopes on the smooth-loading design.

At a noise proportion of 50% the plain slope b_hat is attenuated towards
zero; the corrected slope removes the part of xi'xi due to predictor noise.
"""

import numpy as np

from gflsr import FitConfig, corrected_estimates, fit_pls
from gflsr.inference import align_signs
from gflsr.simulate import SIM3_B, SIM3_SXI, noise_rate_spec, sim3_params, simulate_pls

P = sim3_params()
naive, corrected = [], []
for rep in range(30):
    rng = np.random.default_rng([0, rep])
    noise = noise_rate_spec(P.W, P.V, SIM3_B, SIM3_SXI, alpha=0.5)
    data, _ = simulate_pls(P, 1000, noise, rng)
    fit = align_signs(fit_pls(data, FitConfig(3)), P.W, P.V)
    ce = corrected_estimates(fit, "B")
    naive.append(fit.b_hat)
    corrected.append(ce.b_corr)

print("true b       ", SIM3_B)
print("mean b_hat   ", np.round(np.mean(naive, axis=0), 3))
print("mean b_corr  ", np.round(np.mean(corrected, axis=0), 3))
print("last run: sigma_x^2 =", f"{ce.sigma_x_sq_corr:.4f}",
      "(true", f"{noise.sigma_x_sq:.4f})", "latent variances", np.round(ce.sigma_xi_sq_corr, 3))
