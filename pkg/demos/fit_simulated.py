"""Draw data from a generative PLS model, fit it and compare with the truth."""

import numpy as np

from gflsr import FitConfig, NoiseSpec, fit_pls, loading_distance, predict
from gflsr.simulate import draw_pls_rows, random_params, simulate_pls

params = random_params(p=10, q=8, H=2, seed=1)
noise = NoiseSpec("B", sigma_x_sq=0.1, sigma_y_sq=0.1, sigma1_sq=0.1)
data, truth = simulate_pls(params, n=2000, noise=noise, seed=2)

fit = fit_pls(data, FitConfig(H=2))
for h in range(2):
    d = loading_distance(fit.U_hat[:, h], params.W[:, h])
    print(f"component {h + 1}: weight distance {d:.2e}, "
          f"b_hat {fit.b_hat[h]:+.3f} (true {params.B[h]:+.3f})")

# fresh rows from the same model; their population mean is zero
X_new, Y_new, _ = draw_pls_rows(params, 200, noise, seed=3)
rmse = np.sqrt(np.mean((predict(fit, X_new) - Y_new) ** 2, axis=0))
print("held-out RMSE per response:", np.round(rmse, 3))
