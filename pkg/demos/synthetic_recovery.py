"""Fit a synthetic network and see how much of it comes back.

Run: python3 demos/synthetic_recovery.py
"""
import numpy as np

from grnbvs import (ChainConfig, Hyperparams, SynthSpec, convergence_report,
                    generate_synthetic, run_chains, summarize)
from grnbvs.synth import edge_recovery_auc

# %% simulate: 200 genes, 5 TFs, priors that point the right way 80% of the time
spec = SynthSpec(N=200, J=5, T=50, sparsity=0.05, prior_fidelity=0.8, seed=0)
ds, truth, params = generate_synthetic(spec)
print(f"true edges: {int(truth.c.sum())} of {truth.c.size}")
print("true beta:", np.round(params.beta, 2))

# %% two chains, half discarded as burn-in
traces = run_chains(ds, Hyperparams(), ChainConfig(n_iterations=2000, burn_in=1000, thin=2,
                                                   n_chains=2, seed=0))
summary = summarize(traces, ds.gene_ids, ds.tf_ids)

# %% recovery
print(f"edge AUC: {edge_recovery_auc(summary.inclusion, truth.c):.4f}")
for j, tf in enumerate(ds.tf_ids):
    lo, hi = summary.beta_interval[j]
    print(f"{tf}: beta {summary.beta_mean[j]:+.2f} [{lo:+.2f}, {hi:+.2f}]  "
          f"targets {len(summary.target_sets[tf])}  median w "
          f"{summary.weight_quantiles[j, summary.weight_levels.index(0.5)]:.2f}")

# %% did the chains agree?
report = convergence_report(traces, tf_ids=ds.tf_ids)
print(f"worst R-hat {report.worst_rhat:.3f} -> {report.verdict}")
