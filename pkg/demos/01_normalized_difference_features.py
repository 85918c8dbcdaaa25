#!/usr/bin/env python3
"""A tour of the pairwise normalized-difference layer.

Every node of the layer computes, for one pair of input channels,

    N = (sa * b_i - sb * b_j) / (sa * b_i + sb * b_j + eps)

with learnable positive weights sa = softplus(alpha), sb = softplus(beta).
This script walks through the properties that make the construction
attractive as a first network layer: the classical-index warm start,
bounded outputs, invariance to common illumination scaling, and learned
asymmetric band weighting.
"""

import numpy as np

from ndnet import NdParams, nd_forward, pair_count, softplus

rng = np.random.default_rng(0)

# ---------------------------------------------------------------------------
# 1. With alpha = beta = 0 the layer IS the classical normalized difference.

nir, red = 0.8, 0.3
params = NdParams.zeros(1)
out, _ = nd_forward([nir, red], params, eps=1e-12)
classical = (nir - red) / (nir + red)
print("classical warm start")
print(f"  layer output            : {out[0]:+.10f}")
print(f"  (nir - red)/(nir + red) : {classical:+.10f}")

# ---------------------------------------------------------------------------
# 2. A full layer emits one bounded value per channel pair.

n_bands = 10
bands = rng.uniform(0.01, 1.0, size=n_bands)
params = NdParams.zeros(pair_count(n_bands))
features, _ = nd_forward(bands, params)
print(f"\n{n_bands} bands -> {features.size} pairwise features "
      f"(n*(n-1)/2 = {pair_count(n_bands)})")
print(f"  min {features.min():+.4f}, max {features.max():+.4f} "
      "(always inside [-1, 1])")

# ---------------------------------------------------------------------------
# 3. Multiplying all bands by a common factor (sun angle, sensor gain)
#    leaves every feature unchanged.

base, _ = nd_forward(bands, params, eps=1e-12)
for gain in (0.5, 2.0, 10.0):
    scaled, _ = nd_forward(gain * bands, params, eps=1e-12)
    drift = np.max(np.abs(scaled - base))
    print(f"  gain x{gain:<4}: max feature drift {drift:.2e}")

# ---------------------------------------------------------------------------
# 4. Learned coefficients rebalance each pair. Pushing alpha up weights
#    the first band more; the output range stays bounded.

params = NdParams(np.array([2.0]), np.array([-2.0]))
sa, sb = float(softplus(2.0)), float(softplus(-2.0))
out, _ = nd_forward([nir, red], params)
print("\nasymmetric weighting (alpha=2, beta=-2)")
print(f"  effective weights sa={sa:.3f}, sb={sb:.3f} (ratio {sa / sb:.1f}:1)")
print(f"  output {out[0]:+.4f} -- still bounded, no longer the 1:1 index")

# ---------------------------------------------------------------------------
# 5. Raw reflectances are NOT illumination invariant; the features are.
#    This is the whole point of feeding a classifier ratios instead.

sample = rng.uniform(0.05, 0.6, size=n_bands)
dim = 0.5 * sample  # same scene, half the light
raw_change = np.max(np.abs(dim - sample) / sample)
feat_a, _ = nd_forward(sample, NdParams.zeros(45), eps=1e-12)
feat_b, _ = nd_forward(dim, NdParams.zeros(45), eps=1e-12)
print("\nhalving the illumination")
print(f"  raw band change     : {100 * raw_change:.0f}%")
print(f"  feature change      : {np.max(np.abs(feat_b - feat_a)):.2e}")
