#!/usr/bin/env python3
"""Multiplicative-noise robustness: normalized-difference vs plain MLP.

Test inputs are perturbed with b + eta*|b|*z (z standard normal), the
kind of proportional noise that sensor calibration drift and atmospheric
residuals produce. Both depth-2 architectures are cross-validated on the
packaged synthetic dataset and then swept over noise levels with PAIRED
realizations: at each eta, both models see the identical perturbed
inputs, so the comparison isolates the architecture.

Takes about half a minute.
"""

import numpy as np

from ndnet import (
    TrainConfig,
    attach_noise_sweep,
    default_synth_spec,
    run_crossval,
    synth_generate,
)

ETAS = [0.0, 0.02, 0.04, 0.06, 0.08, 0.10]

dataset = synth_generate(default_synth_spec())
config = TrainConfig(seed=42)

reports = {}
for arch in ("nd", "mlp"):
    result = run_crossval(arch, 2, dataset, config, n_folds=10)
    reports[arch] = attach_noise_sweep(result, dataset, ETAS, seed=42)
    r = reports[arch]
    print(f"{arch:3s} depth 2: {r.n_params:4d} params, clean accuracy "
          f"{r.mean_accuracy:.4f} +/- {r.std_accuracy:.4f}, "
          f"efficiency {r.efficiency:.2f}")

print("\nmean test accuracy under noise (10-fold, paired realizations)")
print("  eta    " + "  ".join(f"{arch:>7s}" for arch in reports))
for k, eta in enumerate(ETAS):
    row = "  ".join(f"{reports[a].noise_mean_accuracies[k]:7.4f}"
                    for a in reports)
    print(f"  {eta:4.2f}  {row}")

print("\ndegradation from clean to eta = 0.10 (percentage points)")
for arch, r in reports.items():
    print(f"  {arch:3s}: {100 * r.degradation:+.2f}")

nd_deg = [fa[0] - fa[-1] for fa in reports["nd"].noise_fold_accuracies]
mlp_deg = [fa[0] - fa[-1] for fa in reports["mlp"].noise_fold_accuracies]
wins = sum(1 for a, b in zip(nd_deg, mlp_deg) if a <= b)
print(f"\nfold-level comparison: nd degrades no more than mlp in "
      f"{wins}/10 folds")
print("the bounded ratio features damp proportional noise; the raw-input")
print("baseline carries it straight into its first linear layer")
