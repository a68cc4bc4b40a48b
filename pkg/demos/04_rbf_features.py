"""Finite-dimensional RBF features via sketched landmarks.

Landmarks are a sketch of the data (not a row subsample), the kernel among
landmarks is whitened, and new rows embed by their kernel against the
landmarks. Wider landmark sets buy accuracy at linear cost in M_s.
"""

import numpy as np

from sketchfer import (
    fit_rbf_nystrom,
    make_sketch,
    median_bandwidth,
    rbf_kernel_bank,
    rbf_sigma_heuristic,
    transform,
)

rng = np.random.default_rng(3)
n, d = 1500, 12
X = rng.standard_normal((n, d))

sigma_sq = rbf_sigma_heuristic(X)
print(f"bandwidth heuristic sigma^2 = {sigma_sq:.2f} "
      f"(median pair distance^2 = {median_bandwidth(X):.2f})")

d2 = ((X[:200, None, :] - X[None, :200, :]) ** 2).sum(axis=2)
K = np.exp(-d2 / (2 * sigma_sq))

for ms in (32, 64, 128, 512):
    spec = make_sketch(seed=9, n_input=n, n_buckets=ms, n_stacks=4)
    fmap = fit_rbf_nystrom(X, spec, sigma_sq)
    Phi = transform(fmap, X[:200])
    err = np.linalg.norm(Phi @ Phi.T - K) / np.linalg.norm(K)
    print(f"M_s={ms:4d}  kept rank={fmap.kept_rank:3d}  "
          f"kernel error={err:.3f}")

# a bank of doubling bandwidths around the median heuristic
gamma = median_bandwidth(X)
spec = make_sketch(seed=9, n_input=n, n_buckets=64, n_stacks=4)
bank = rbf_kernel_bank(X, gamma, spec)
print(f"bank of {len(bank)} maps, sigma^2 from "
      f"{bank[0].sigma_sq:.3f} to {bank[-1].sigma_sq:.1f}")
