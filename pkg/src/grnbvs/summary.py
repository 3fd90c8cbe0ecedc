"""Posterior summaries: inclusion probabilities, target sets, effects, weights.

Threshold comparisons are inclusive (``>=``) so that Monte Carlo estimates
landing exactly on the threshold behave deterministically.

Coefficient intervals are computed from every retained draw.  The sampler
draws ``beta_j`` even when no gene currently selects TF ``j``, so those
draws mix prior and conditional-on-regulation values; the effect of a TF
should be read as its effect on genes it regulates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .model import as_index

WEIGHT_LEVELS = (0.025, 0.25, 0.5, 0.75, 0.975)


@dataclass
class InteractionPair:
    tf_a: str
    tf_b: str
    mean: float
    lower: float
    upper: float
    shared_targets: int


@dataclass
class PosteriorSummary:
    gene_ids: list
    tf_ids: list
    inclusion: np.ndarray
    n_retained: int
    beta_mean: np.ndarray
    beta_interval: np.ndarray
    pairs: np.ndarray
    gamma_mean: np.ndarray
    gamma_interval: np.ndarray
    weight_levels: tuple
    weight_quantiles: np.ndarray
    weight_mass_above_half: np.ndarray
    threshold: float = 0.5
    level: float = 0.95
    target_sets: dict = field(default_factory=dict)
    significant_pairs: list = field(default_factory=list)


def inclusion_probabilities(traces) -> np.ndarray:
    """Pooled retained-iteration mean of every indicator across chains."""
    traces = list(traces)
    total = sum(t.n_retained for t in traces)
    if not traces or total == 0:
        raise InvalidInputError("no retained iterations")
    return sum(t.inclusion_counts for t in traces) / total


def credible_interval(values, level: float = 0.95):
    """Central interval from empirical quantiles with linear interpolation."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise InvalidInputError("need at least two values for an interval")
    if not 0.0 < level < 1.0:
        raise InvalidInputError("level must lie in (0, 1)")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail], method="linear")
    return float(lo), float(hi)


def _pooled(traces, name):
    return np.concatenate([getattr(t, name) for t in traces], axis=0)


def weight_summary(traces, levels=WEIGHT_LEVELS) -> dict:
    """Per-TF quantiles of the pooled weight draws and mass above 0.5."""
    traces = list(traces)
    w = _pooled(traces, "w") if traces else np.zeros((0, 0))
    if w.shape[0] < 2:
        raise InvalidInputError("need at least two retained iterations")
    q = np.quantile(w, levels, axis=0, method="linear").T
    return {"levels": tuple(levels), "quantiles": q,
            "mass_above_half": (w > 0.5).mean(axis=0)}


def _target_list(inclusion_col, gene_ids, threshold):
    hits = [i for i in range(len(gene_ids)) if inclusion_col[i] >= threshold]
    hits.sort(key=lambda i: (-inclusion_col[i], str(gene_ids[i])))
    return [gene_ids[i] for i in hits]


def summarize(traces, gene_ids, tf_ids, threshold: float = 0.5,
              level: float = 0.95) -> PosteriorSummary:
    """Build a :class:`PosteriorSummary` from one or more chain traces."""
    traces = list(traces)
    inclusion = inclusion_probabilities(traces)
    if inclusion.shape != (len(gene_ids), len(tf_ids)):
        raise InvalidInputError("trace dimensions do not match the identifiers")
    beta = _pooled(traces, "beta")
    gamma = _pooled(traces, "gamma")
    beta_iv = np.array([credible_interval(beta[:, j], level) for j in range(beta.shape[1])]
                       ).reshape(-1, 2)
    gamma_iv = np.array([credible_interval(gamma[:, p], level) for p in range(gamma.shape[1])]
                        ).reshape(-1, 2)
    ws = weight_summary(traces)
    summary = PosteriorSummary(
        gene_ids=list(gene_ids), tf_ids=list(tf_ids), inclusion=inclusion,
        n_retained=sum(t.n_retained for t in traces),
        beta_mean=beta.mean(axis=0), beta_interval=beta_iv,
        pairs=traces[0].pairs.copy(), gamma_mean=gamma.mean(axis=0), gamma_interval=gamma_iv,
        weight_levels=ws["levels"], weight_quantiles=ws["quantiles"],
        weight_mass_above_half=ws["mass_above_half"], threshold=threshold, level=level,
    )
    summary.target_sets = {tf: _target_list(inclusion[:, j], summary.gene_ids, threshold)
                           for j, tf in enumerate(summary.tf_ids)}
    summary.significant_pairs = _significant_pairs(summary)
    return summary


def target_genes(summary: PosteriorSummary, tf, threshold: float | None = None) -> list:
    """Genes with inclusion at least ``threshold``, most probable first."""
    j = as_index(summary.tf_ids, tf)
    threshold = summary.threshold if threshold is None else threshold
    return _target_list(summary.inclusion[:, j], summary.gene_ids, threshold)


def _excludes_zero(interval):
    return interval[0] > 0 or interval[1] < 0


def _significant_pairs(summary):
    out = []
    for p, (j, k) in enumerate(summary.pairs):
        iv = summary.gamma_interval[p]
        if not _excludes_zero(iv):
            continue
        a, b = summary.tf_ids[j], summary.tf_ids[k]
        shared = len(set(summary.target_sets[a]) & set(summary.target_sets[b]))
        out.append(InteractionPair(a, b, float(summary.gamma_mean[p]),
                                   float(iv[0]), float(iv[1]), shared))
    return out


def significant_effects(summary: PosteriorSummary):
    """Activators, repressors and significant pairs by interval sign.

    Returns ``(activators, repressors, pairs)``: TF ids whose linear-effect
    interval lies above zero, TF ids whose interval lies below zero, and the
    :class:`InteractionPair` entries whose interval excludes zero.
    """
    act = [tf for tf, iv in zip(summary.tf_ids, summary.beta_interval) if iv[0] > 0]
    rep = [tf for tf, iv in zip(summary.tf_ids, summary.beta_interval) if iv[1] < 0]
    return act, rep, list(summary.significant_pairs)


def interaction_pairs(summary: PosteriorSummary, min_shared_targets: int = 4) -> list:
    """Significant pairs whose target sets share at least ``min_shared_targets`` genes."""
    return [p for p in summary.significant_pairs if p.shared_targets >= min_shared_targets]
