"""Knockout t-statistics and annotation enrichment for inferred target sets.

Everything here is simulated so the script runs anywhere: a knockout that
shifts the true targets, and an annotation in which one category is built
around them.

Run: python3 demos/validation_statistics.py
"""
import numpy as np

from grnbvs import ChainConfig, Hyperparams, SynthSpec, generate_synthetic, run_chains, summarize
from grnbvs.validation import (FunctionalAnnotation, KnockoutExperiment, baseline_chip_targets,
                               enriched_categories, knockout_tstat, target_overlap)

rng = np.random.default_rng(1)
ds, truth, _ = generate_synthetic(SynthSpec(N=150, J=3, T=40, sparsity=0.08, seed=5))
summary = summarize(run_chains(ds, Hyperparams(), ChainConfig(n_iterations=1000, burn_in=500,
                                                              seed=1)),
                    ds.gene_ids, ds.tf_ids)
tf = ds.tf_ids[0]
targets = summary.target_sets[tf]
true_targets = [g for g, on in zip(ds.gene_ids, truth.c[:, 0]) if on]
print(f"{tf}: {len(targets)} inferred targets, overlap with truth "
      f"{target_overlap(targets, true_targets)}")

# %% knockout: true targets move by about 2 units, everything else is noise
response = rng.normal(0, 1, ds.n_genes) + 2.0 * truth.c[:, 0]
ko = KnockoutExperiment(tf, dict(zip(ds.gene_ids, response)))
print(f"Welch t      {knockout_tstat(targets, ko):.2f}")
print(f"one-sample t {knockout_tstat(targets, ko, method='one-sample'):.2f}")

# %% annotation: category A is mostly true targets, B and C are random
cats = {}
for g, on in zip(ds.gene_ids, truth.c[:, 0]):
    cats[g] = {"A"} if on and rng.random() < 0.8 else {str(rng.choice(["B", "C"]))}
result = enriched_categories(targets, FunctionalAnnotation(cats), alpha=0.001)
for cat, k, size, p in result.categories:
    print(f"category {cat}: {k} of {size} genes among targets, p = {p:.2e}")
print(f"share of targets in enriched categories: {result.proportion:.2f}")

# %% the ChIP-only baseline for comparison
chip_only = baseline_chip_targets(1.0 - ds.b[:, 0], cutoff=0.2, gene_ids=ds.gene_ids)
print(f"ChIP-only targets: {len(chip_only)}, Welch t {knockout_tstat(chip_only, ko):.2f}")
