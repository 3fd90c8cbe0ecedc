"""External-validation statistics and single-source baseline target sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import DegenerateInputError, InvalidInputError
from .model import Dataset, as_index


@dataclass
class KnockoutExperiment:
    """Per-gene expression change between a TF knockout and wild type."""

    tf_id: str
    responses: dict

    def __post_init__(self):
        self.responses = {g: float(v) for g, v in self.responses.items()}
        if not all(math.isfinite(v) for v in self.responses.values()):
            raise InvalidInputError("knockout responses must be finite")


@dataclass
class FunctionalAnnotation:
    """Gene to category-set map over a gene universe.

    The universe defaults to the annotated genes.
    """

    gene_categories: dict
    universe: set = field(default=None)

    def __post_init__(self):
        self.gene_categories = {g: set(cs) for g, cs in self.gene_categories.items()}
        if self.universe is None:
            self.universe = set(self.gene_categories)
        self.universe = set(self.universe)
        stray = set(self.gene_categories) - self.universe
        if stray:
            raise InvalidInputError(f"{len(stray)} annotated genes lie outside the universe")

    @property
    def size(self) -> int:
        return len(self.universe)

    def category_members(self) -> dict:
        members = {}
        for gene, cats in self.gene_categories.items():
            for cat in cats:
                members.setdefault(cat, set()).add(gene)
        return members


def _welch(x, y):
    nx, ny = len(x), len(y)
    vx, vy = np.var(x, ddof=1), np.var(y, ddof=1)
    return (np.mean(x) - np.mean(y)) / math.sqrt(vx / nx + vy / ny)


def knockout_tstat(targets, experiment: KnockoutExperiment, method: str = "welch",
                   absolute: bool = True) -> float:
    """t-statistic of the knockout response of targets against the other genes.

    ``method="welch"`` (default) is the unequal-variance two-sample
    statistic, targets minus background.  ``method="one-sample"`` tests the
    target responses against the background mean using the target standard
    error only.  Responses are taken in absolute value unless
    ``absolute=False``.
    """
    targets = set(targets)
    resp = experiment.responses
    x = np.array([resp[g] for g in resp if g in targets])
    y = np.array([resp[g] for g in resp if g not in targets])
    if absolute:
        x, y = np.abs(x), np.abs(y)
    if len(x) < 2 or len(y) < 2:
        raise DegenerateInputError("need at least two targets and two non-targets with responses")
    if method == "welch":
        if np.var(x) == 0.0 and np.var(y) == 0.0:
            raise DegenerateInputError("both groups have zero variance")
        return float(_welch(x, y))
    if method == "one-sample":
        if np.var(x) == 0.0:
            raise DegenerateInputError("targets have zero variance")
        return float((np.mean(x) - np.mean(y)) / (np.std(x, ddof=1) / math.sqrt(len(x))))
    raise InvalidInputError(f"unknown method {method!r}")


def _log_comb(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def hypergeometric_enrichment(k: int, n: int, K: int, N: int) -> float:
    """Upper-tail probability ``P(X >= k)`` for ``X ~ Hypergeometric(N, K, n)``.

    ``N`` genes in the universe, ``K`` of them in the category, ``n`` drawn
    as targets, ``k`` of the targets in the category.
    """
    k, n, K, N = (int(v) for v in (k, n, K, N))
    if not (0 <= k <= min(n, K) and 0 <= n <= N and 0 <= K <= N):
        raise InvalidInputError(f"inconsistent counts k={k}, n={n}, K={K}, N={N}")
    lo = max(k, n + K - N)
    hi = min(n, K)
    if k <= max(0, n + K - N):
        return 1.0
    terms = [_log_comb(K, i) + _log_comb(N - K, n - i) for i in range(lo, hi + 1)]
    return float(min(1.0, math.exp(logsumexp(terms) - _log_comb(N, n))))


@dataclass
class EnrichmentResult:
    categories: list
    proportion: float
    n_targets: int


def enriched_categories(targets, annotation: FunctionalAnnotation,
                        alpha: float = 0.001) -> EnrichmentResult:
    """Categories over-represented among ``targets`` at p-value below ``alpha``.

    ``categories`` lists ``(category, overlap, category_size, p)`` for the
    enriched categories, most significant first; ``proportion`` is the
    fraction of targets belonging to at least one of them.
    """
    targets = set(targets) & annotation.universe
    if not targets:
        raise InvalidInputError("no targets inside the annotation universe")
    n, N = len(targets), annotation.size
    hits = []
    for cat, members in annotation.category_members().items():
        k = len(members & targets)
        if k == 0:
            continue
        p = hypergeometric_enrichment(k, n, len(members), N)
        if p < alpha:
            hits.append((cat, k, len(members), p))
    hits.sort(key=lambda h: (h[3], str(h[0])))
    enriched = {h[0] for h in hits}
    covered = sum(1 for g in targets if annotation.gene_categories.get(g, set()) & enriched)
    return EnrichmentResult(hits, covered / n, n)


def baseline_chip_targets(pvalues, cutoff: float = 0.001, gene_ids=None, tf_ids=None):
    """Genes whose binding p-value is strictly below ``cutoff``.

    A 1-D input returns one gene list; a genes x TFs matrix returns a dict
    keyed by TF id.
    """
    p = np.asarray(pvalues, dtype=float)
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise InvalidInputError("p-values must lie in [0, 1]")
    gene_ids = list(range(p.shape[0])) if gene_ids is None else list(gene_ids)
    if p.ndim == 1:
        return [gene_ids[i] for i in np.flatnonzero(p < cutoff)]
    tf_ids = list(range(p.shape[1])) if tf_ids is None else list(tf_ids)
    return {tf: [gene_ids[i] for i in np.flatnonzero(p[:, j] < cutoff)]
            for j, tf in enumerate(tf_ids)}


def expression_correlations(dataset: Dataset, tf):
    """Pearson correlation of every gene row with the TF's expression.

    Returns ``(corr, zero_variance_mask)``; zero-variance rows get 0.
    """
    j = as_index(dataset.tf_ids, tf)
    fj = dataset.f[j] - dataset.f[j].mean()
    g = dataset.g - dataset.g.mean(axis=1, keepdims=True)
    gn = np.sqrt((g * g).sum(axis=1))
    fn = math.sqrt(float(fj @ fj))
    flat = gn == 0.0
    if fn == 0.0:
        return np.zeros(dataset.n_genes), np.ones(dataset.n_genes, dtype=bool)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (g @ fj) / (gn * fn)
    corr[flat] = 0.0
    return np.clip(corr, -1.0, 1.0), flat


def baseline_correlation_targets(dataset: Dataset, tf, top_fraction: float = 0.01,
                                 absolute: bool = False, return_flags: bool = False):
    """The ``ceil(top_fraction * N)`` genes most correlated with TF ``tf``.

    Ranking is by signed correlation, descending, ties by gene id; with
    ``absolute=True`` by absolute correlation instead.  With
    ``return_flags=True`` also returns the genes with zero-variance rows.
    """
    if not 0.0 < top_fraction <= 1.0:
        raise InvalidInputError("top_fraction must lie in (0, 1]")
    corr, flat = expression_correlations(dataset, tf)
    score = np.abs(corr) if absolute else corr
    n_top = math.ceil(top_fraction * dataset.n_genes)
    order = sorted(range(dataset.n_genes), key=lambda i: (-score[i], str(dataset.gene_ids[i])))
    chosen = [dataset.gene_ids[i] for i in order[:n_top]]
    if return_flags:
        return chosen, [dataset.gene_ids[i] for i in np.flatnonzero(flat)]
    return chosen


def target_overlap(set_a, set_b):
    """``(|a & b|, Jaccard index)``; two empty sets count as identical."""
    a, b = set(set_a), set(set_b)
    union = a | b
    inter = len(a & b)
    return inter, (inter / len(union) if union else 1.0)
