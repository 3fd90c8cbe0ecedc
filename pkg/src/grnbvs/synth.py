"""Forward simulation of the model and brute-force reference computations.

Nothing here imports the sampler or likelihood modules: the oracles are
written from the model definition directly so that a bug in the fast path
cannot hide in its own reference.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import InvalidInputError
from .model import DEFAULT_EPS, Dataset, Hyperparams, ModelParams, NetworkState, tf_pairs


@dataclass(frozen=True)
class SynthSpec:
    """Settings for :func:`generate_synthetic`.

    ``prior_fidelity`` is the mean of ``b`` on true edges (and one minus its
    mean on non-edges); ``motif_fidelity`` does the same for ``m`` and
    defaults to ``prior_fidelity``.  ``concentration`` is the Beta
    concentration of both prior sources.
    """

    N: int = 200
    J: int = 5
    T: int = 50
    sparsity: float = 0.05
    beta_scale: float = 2.0
    gamma_scale: float = 0.0
    sigma: float = 1.0
    prior_fidelity: float = 0.8
    motif_fidelity: float | None = None
    alpha_scale: float = 1.0
    concentration: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if min(self.N, self.J, self.T) < 1:
            raise InvalidInputError("sizes must be at least 1")
        if not self.sigma > 0:
            raise InvalidInputError("sigma must be positive")
        for name in ("sparsity", "prior_fidelity"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1]")
        if self.motif_fidelity is not None and not 0.0 <= self.motif_fidelity <= 1.0:
            raise InvalidInputError("motif_fidelity must lie in [0, 1]")


def _prior_source(rng, truth, fidelity, concentration):
    mean = np.where(truth == 1, fidelity, 1.0 - fidelity)
    mean = np.clip(mean, 1e-3, 1 - 1e-3)
    return rng.beta(concentration * mean, concentration * (1.0 - mean))


def generate_synthetic(spec: SynthSpec, eps: float = DEFAULT_EPS):
    """Simulate ``(dataset, true network, true params)`` from the expression model.

    TF expression is iid standard normal; baselines, linear and pair effects
    are zero-mean normals with the spec's scales; ``g`` adds
    ``Normal(0, sigma^2)`` noise.  The true params carry ``w = 0.5``, a
    placeholder since weights have no generative role.
    """
    rng = np.random.default_rng(spec.seed)
    N, J, T = spec.N, spec.J, spec.T
    c = (rng.random((N, J)) < spec.sparsity).astype(np.int8)
    f = rng.standard_normal((J, T))
    alpha = spec.alpha_scale * rng.standard_normal(N)
    beta = spec.beta_scale * rng.standard_normal(J)
    pairs = tf_pairs(J)
    gamma = spec.gamma_scale * rng.standard_normal(len(pairs))
    mean = alpha[:, None] + (c * beta) @ f
    for (j, k), gam in zip(pairs, gamma):
        mean += gam * (c[:, j] * c[:, k])[:, None] * (f[j] * f[k])[None, :]
    g = mean + spec.sigma * rng.standard_normal((N, T))
    motif_fid = spec.prior_fidelity if spec.motif_fidelity is None else spec.motif_fidelity
    b = _prior_source(rng, c, spec.prior_fidelity, spec.concentration)
    m = _prior_source(rng, c, motif_fid, spec.concentration)

    width_g, width_j, width_t = len(str(N)), len(str(J)), len(str(T))
    dataset = Dataset(
        gene_ids=[f"G{i:0{width_g}d}" for i in range(N)],
        tf_ids=[f"TF{j:0{width_j}d}" for j in range(J)],
        experiment_ids=[f"E{t:0{width_t}d}" for t in range(T)],
        g=g, f=f, b=b, m=m,
    ).clamped(eps)
    params = ModelParams(alpha, beta, spec.sigma ** 2, np.full(J, 0.5), gamma, pairs)
    return dataset, NetworkState(c), params


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def _mean_of_cell(alpha_i, beta, gamma, c_row, f_col):
    value = alpha_i
    J = len(beta)
    for j in range(J):
        if c_row[j]:
            value += beta[j] * f_col[j]
    for (j, k), gam in gamma.items():
        if c_row[j] and c_row[k]:
            value += gam * f_col[j] * f_col[k]
    return value


def _cell_prior(b, m, w, c):
    # normalized prior mass of one indicator value, evaluated directly
    on = b ** w * m ** (1.0 - w)
    off = (1.0 - b) ** w * (1.0 - m) ** (1.0 - w)
    return (on if c else off) / (on + off)


def exhaustive_indicator_posterior(dataset: Dataset, params: ModelParams, w, i: int,
                                   include_interactions: bool = True):
    """Exact conditional distribution of row ``i`` of ``C`` by enumeration.

    Returns ``(configs, probs)`` where ``configs`` is ``2^J x J`` (0/1, in
    ``itertools.product`` order) and ``probs`` sums to one.
    """
    J = dataset.n_tfs
    if J > 12:
        raise InvalidInputError("enumeration limited to J <= 12")
    w = np.broadcast_to(np.asarray(w, dtype=float), (J,))
    gamma = params.gamma_dict if include_interactions else {}
    configs = np.array(list(itertools.product((0, 1), repeat=J)), dtype=np.int8).reshape(-1, J)
    logp = np.empty(len(configs))
    for n, row in enumerate(configs):
        sq = 0.0
        for t in range(dataset.n_experiments):
            mu = _mean_of_cell(params.alpha[i], params.beta, gamma, row, dataset.f[:, t])
            sq += (dataset.g[i, t] - mu) ** 2
        lp = -sq / (2.0 * params.sigma2)
        for j in range(J):
            lp += math.log(_cell_prior(dataset.b[i, j], dataset.m[i, j], w[j], row[j]))
        logp[n] = lp
    p = np.exp(logp - logp.max())
    return configs, p / p.sum()


def conjugate_posterior_oracle(kind: str, stats: dict, hyper: Hyperparams | None = None):
    """Analytic conditional parameters from sufficient statistics.

    ``kind="alpha"`` needs ``sum_y``, ``n_obs`` and ``sigma2``;
    ``kind="beta"`` or ``"gamma"`` needs ``t_xx``, ``t_vx`` and ``sigma2``;
    ``kind="sigma2"`` needs ``v_sigma`` and ``n_cells``.  Coefficient kinds
    return ``(mean, variance)``, ``sigma2`` returns ``(df, scale)``.
    """
    hyper = hyper or Hyperparams()
    if kind == "alpha":
        precision = stats["n_obs"] / stats["sigma2"] + 1.0 / hyper.tau_alpha2
        return stats["sum_y"] / stats["sigma2"] / precision, 1.0 / precision
    if kind in ("beta", "gamma"):
        prior_var = hyper.tau_beta2 if kind == "beta" else hyper.tau_gamma2
        precision = stats["t_xx"] / stats["sigma2"] + 1.0 / prior_var
        return stats["t_vx"] / stats["sigma2"] / precision, 1.0 / precision
    if kind == "sigma2":
        df = stats["n_cells"] + hyper.nu
        return df, (stats["v_sigma"] + 1.0) / df
    raise InvalidInputError(f"unknown kind {kind!r}")


def brute_force_stats(dataset: Dataset, network: NetworkState, params: ModelParams,
                      kind: str, index=None) -> dict:
    """Sufficient statistics computed cell by cell from the raw data.

    ``index`` is a gene for ``alpha``, a TF for ``beta`` and a pair
    ``(j, k)`` for ``gamma``.
    """
    N, T = dataset.g.shape
    gamma = params.gamma_dict
    c = network.c

    def resid(i, t, drop=None):
        g_hat = _mean_of_cell(params.alpha[i], params.beta, gamma, c[i], dataset.f[:, t])
        if drop is not None:
            g_hat -= drop(i, t)
        return dataset.g[i, t] - g_hat

    if kind == "alpha":
        i = index
        return {"sum_y": sum(resid(i, t) + params.alpha[i] for t in range(T)),
                "n_obs": T, "sigma2": params.sigma2}
    if kind == "sigma2":
        return {"v_sigma": sum(resid(i, t) ** 2 for i in range(N) for t in range(T)),
                "n_cells": N * T}
    if kind == "beta":
        j = index

        def x(i, t):
            return c[i, j] * dataset.f[j, t]
        coef = params.beta[j]
    elif kind == "gamma":
        j, k = index

        def x(i, t):
            return c[i, j] * c[i, k] * dataset.f[j, t] * dataset.f[k, t]
        coef = gamma[(j, k)]
    else:
        raise InvalidInputError(f"unknown kind {kind!r}")
    t_xx = t_vx = 0.0
    for i in range(N):
        for t in range(T):
            xv = x(i, t)
            v = resid(i, t, drop=lambda a, b: coef * x(a, b))
            t_xx += xv * xv
            t_vx += v * xv
    return {"t_xx": t_xx, "t_vx": t_vx, "sigma2": params.sigma2}


def edge_recovery_auc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Area under the ROC curve of ``scores`` against binary ``truth`` (ties averaged)."""
    scores = np.asarray(scores, dtype=float).ravel()
    truth = np.asarray(truth).ravel().astype(bool)
    n_pos, n_neg = truth.sum(), (~truth).sum()
    if n_pos == 0 or n_neg == 0:
        raise InvalidInputError("AUC needs both positive and negative edges")
    ranks = rankdata(scores)
    return float((ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
