"""How sparse is the network before looking at expression?

The prior alone decides how many targets each TF gets.  Sweep the shared
weight between the ChIP and motif probabilities and count prior-only targets,
then compare the geometric combination with a plain weighted average.

Run: python3 demos/prior_sparsity.py
"""
import numpy as np

from grnbvs import SynthSpec, compare_prior_forms, generate_synthetic, prior_sparsity_study

ds, truth, _ = generate_synthetic(SynthSpec(N=300, J=4, sparsity=0.1, prior_fidelity=0.85,
                                            motif_fidelity=0.6, seed=3))

# %% counts across the weight grid
study = prior_sparsity_study(ds, w_grid=np.linspace(0, 1, 11), n_draws=2000,
                             rng=np.random.default_rng(0))
print("w     " + "  ".join(f"{tf:>5}" for tf in ds.tf_ids))
for w, row in zip(study.w_grid, study.counts):
    print(f"{w:.1f}   " + "  ".join(f"{n:5d}" for n in row))
print("true  " + "  ".join(f"{n:5d}" for n in truth.c.sum(axis=0)))

# %% geometric vs arithmetic combination at an even weight
forms = compare_prior_forms(ds, 0.5)
print("geometric :", forms["geometric"])
print("arithmetic:", forms["arithmetic"])
