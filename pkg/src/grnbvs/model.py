"""Domain types and the informed prior over regulation indicators.

The prior for an indicator ``C_ij`` blends a ChIP-binding probability
``b_ij`` and a promoter-motif probability ``m_ij`` through a per-TF weight
``w_j`` as a weighted geometric mean of two Bernoulli likelihoods.  All
arithmetic happens on log scale; products over thousands of genes underflow
otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .exceptions import InvalidInputError

DEFAULT_EPS = 1e-6
SPARSITY_W_GRID = tuple(np.round(np.arange(1, 20) * 0.05, 2))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

def _check_unique(ids, what):
    seen = set()
    for x in ids:
        if x in seen:
            raise InvalidInputError(f"duplicate {what} id {x!r}")
        seen.add(x)


@dataclass
class Dataset:
    """Aligned expression matrix, TF expression and the two prior matrices.

    ``g`` is genes x experiments, ``f`` is TFs x experiments, ``b`` and ``m``
    are genes x TFs.  ``tf_gene_map`` sends a TF index to the row of ``g``
    holding the expression of its encoding gene; TFs without an entry had
    their expression supplied directly.
    """

    gene_ids: list
    tf_ids: list
    experiment_ids: list
    g: np.ndarray
    f: np.ndarray
    b: np.ndarray
    m: np.ndarray
    tf_gene_map: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gene_ids = list(self.gene_ids)
        self.tf_ids = list(self.tf_ids)
        self.experiment_ids = list(self.experiment_ids)
        self.g = np.ascontiguousarray(self.g, dtype=float)
        self.f = np.ascontiguousarray(self.f, dtype=float)
        self.b = np.ascontiguousarray(self.b, dtype=float)
        self.m = np.ascontiguousarray(self.m, dtype=float)
        self.tf_gene_map = {int(k): int(v) for k, v in dict(self.tf_gene_map).items()}
        self.validate()

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    @property
    def n_tfs(self) -> int:
        return len(self.tf_ids)

    @property
    def n_experiments(self) -> int:
        return len(self.experiment_ids)

    def validate(self):
        N, J, T = self.n_genes, self.n_tfs, self.n_experiments
        for name, arr, shape in (
            ("g", self.g, (N, T)),
            ("f", self.f, (J, T)),
            ("b", self.b, (N, J)),
            ("m", self.m, (N, J)),
        ):
            if arr.shape != shape:
                raise InvalidInputError(f"{name} has shape {arr.shape}, expected {shape}")
        for name, arr in (("g", self.g), ("f", self.f)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"non-finite values in {name}")
        for name, arr in (("b", self.b), ("m", self.m)):
            if not np.all((arr >= 0.0) & (arr <= 1.0)):
                raise InvalidInputError(f"{name} entries must lie in [0, 1]")
        _check_unique(self.gene_ids, "gene")
        _check_unique(self.tf_ids, "TF")
        _check_unique(self.experiment_ids, "experiment")
        for j, i in self.tf_gene_map.items():
            if not (0 <= j < J and 0 <= i < N):
                raise InvalidInputError(f"tf_gene_map entry {j}->{i} out of range")

    def clamped(self, eps: float = DEFAULT_EPS, hard: bool = False) -> "Dataset":
        """Copy with ``b`` and ``m`` pushed into ``[eps, 1 - eps]``.

        With ``hard=True`` exact 0 and 1 are kept as hard constraints and only
        interior values are clamped.
        """
        return Dataset(
            self.gene_ids, self.tf_ids, self.experiment_ids, self.g, self.f,
            clamp_probabilities(self.b, eps, hard), clamp_probabilities(self.m, eps, hard),
            self.tf_gene_map,
        )

    def self_regulation_mask(self) -> np.ndarray:
        """Boolean N x J mask of (encoding gene, TF) cells."""
        mask = np.zeros((self.n_genes, self.n_tfs), dtype=bool)
        for j, i in self.tf_gene_map.items():
            mask[i, j] = True
        return mask


@dataclass
class NetworkState:
    """Binary indicator matrix ``c`` (genes x TFs)."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c)
        if c.ndim != 2 or not np.all((c == 0) | (c == 1)):
            raise InvalidInputError("indicator matrix must be 2-D with 0/1 entries")
        self.c = np.ascontiguousarray(c, dtype=np.int8)

    def copy(self) -> "NetworkState":
        return NetworkState(self.c.copy())


def tf_pairs(n_tfs: int) -> np.ndarray:
    """Unordered TF pairs ``(j, k)`` with ``j < k`` in lexicographic order."""
    if n_tfs < 2:
        return np.zeros((0, 2), dtype=np.intp)
    j, k = np.triu_indices(n_tfs, k=1)
    return np.column_stack([j, k]).astype(np.intp)


@dataclass
class ModelParams:
    """Linear-model parameters and prior weights.

    ``gamma`` is indexed by ``pairs`` (rows ``(j, k)``, ``j < k``); both are
    empty when interactions are disabled.
    """

    alpha: np.ndarray
    beta: np.ndarray
    sigma2: float
    w: np.ndarray
    gamma: np.ndarray = None
    pairs: np.ndarray = None

    def __post_init__(self):
        self.alpha = np.array(self.alpha, dtype=float)
        self.beta = np.array(self.beta, dtype=float)
        self.w = np.array(self.w, dtype=float)
        if self.pairs is None:
            self.pairs = np.zeros((0, 2), dtype=np.intp)
        self.pairs = np.array(self.pairs, dtype=np.intp).reshape(-1, 2)
        if self.gamma is None:
            self.gamma = np.zeros(len(self.pairs))
        self.gamma = np.array(self.gamma, dtype=float)
        self.sigma2 = float(self.sigma2)
        if self.gamma.shape != (len(self.pairs),):
            raise InvalidInputError("gamma must have one entry per TF pair")
        if np.any(self.pairs[:, 0] >= self.pairs[:, 1]):
            raise InvalidInputError("gamma pairs must satisfy j < k")
        if not self.sigma2 > 0:
            raise InvalidInputError("sigma2 must be positive")
        if np.any((self.w < 0) | (self.w > 1)):
            raise InvalidInputError("weights must lie in [0, 1]")

    @property
    def gamma_dict(self) -> dict:
        return {(int(j), int(k)): float(v) for (j, k), v in zip(self.pairs, self.gamma)}

    def gamma_matrix(self) -> np.ndarray:
        """Symmetric J x J matrix of pair coefficients, zero diagonal."""
        J = len(self.beta)
        out = np.zeros((J, J))
        if len(self.pairs):
            out[self.pairs[:, 0], self.pairs[:, 1]] = self.gamma
            out[self.pairs[:, 1], self.pairs[:, 0]] = self.gamma
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(self.alpha.copy(), self.beta.copy(), self.sigma2,
                           self.w.copy(), self.gamma.copy(), self.pairs.copy())


@dataclass(frozen=True)
class Hyperparams:
    """Prior variances, sigma^2 degrees of freedom and model switches."""

    tau_alpha2: float = 1e4
    tau_beta2: float = 1e4
    tau_gamma2: float = 1e4
    nu: float = 2.0
    grid_size: int = 101
    include_interactions: bool = True
    allow_self_regulation: bool = True

    def __post_init__(self):
        if min(self.tau_alpha2, self.tau_beta2, self.tau_gamma2) <= 0:
            raise InvalidInputError("prior variances must be positive")
        if self.nu <= 0:
            raise InvalidInputError("nu must be positive")
        if self.grid_size < 2:
            raise InvalidInputError("grid_size must be at least 2")


@dataclass
class SparsityStudyResult:
    """Prior-only target counts per TF over a grid of shared weights.

    ``counts[g, j]`` is the number of genes whose Monte Carlo estimate of
    ``P(C_ij = 1)`` reaches the threshold when every weight equals
    ``w_grid[g]``.  ``estimates`` keeps the per-cell frequencies.
    """

    n_draws: int
    w_grid: np.ndarray
    counts: np.ndarray
    estimates: np.ndarray
    tf_ids: list = field(default_factory=list)

    def table(self) -> list:
        """Rows of ``(tf_id, w, N_j)``."""
        rows = []
        for j, tf in enumerate(self.tf_ids or range(self.counts.shape[1])):
            for gi, w in enumerate(self.w_grid):
                rows.append((tf, float(w), int(self.counts[gi, j])))
        return rows


# ---------------------------------------------------------------------------
# prior mathematics
# ---------------------------------------------------------------------------

def clamp_probabilities(x, eps: float = DEFAULT_EPS, hard: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.clip(x, eps, 1.0 - eps)
    if hard:
        out = np.where((x == 0.0) | (x == 1.0), x, out)
    return out


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("non-finite probability or weight")


def _wmul(w, logx):
    # w * log(x) with the convention 0 * log(0) = 0
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return w * logx if w != 0.0 else np.zeros_like(logx)
    zero = w == 0.0
    if not zero.any():
        return w * logx
    with np.errstate(invalid="ignore"):
        return np.where(zero, 0.0, w * logx)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _log1m(x):
    with np.errstate(divide="ignore"):
        return np.log1p(-np.asarray(x, dtype=float))


def prior_log_terms(b, m, w):
    """Log of the unnormalized prior mass at ``C = 1`` and at ``C = 0``."""
    b, m, w = (np.asarray(v, dtype=float) for v in (b, m, w))
    with np.errstate(divide="ignore"):
        lb, lm, l1b, l1m = np.log(b), np.log(m), np.log1p(-b), np.log1p(-m)
    log1 = _wmul(w, lb) + _wmul(1.0 - w, lm)
    log0 = _wmul(w, l1b) + _wmul(1.0 - w, l1m)
    return log1, log0


def prior_log_odds(b, m, w):
    """``log p(C=1) - log p(C=0)`` under the weighted geometric prior."""
    log1, log0 = prior_log_terms(b, m, w)
    with np.errstate(invalid="ignore"):
        return log1 - log0


def prior_probability(b, m, w):
    """P(C_ij = 1) under the weighted geometric prior.

    Parameters
    ----------
    b, m : float or ndarray
        ChIP and motif probabilities, already clamped.
    w : float or ndarray
        Weight on the ChIP source; broadcast against ``b`` and ``m``.

    Returns
    -------
    float or ndarray
        ``b^w m^(1-w) / (b^w m^(1-w) + (1-b)^w (1-m)^(1-w))``.
    """
    _check_finite(b, m, w)
    p = expit(prior_log_odds(b, m, w))
    return float(p) if np.ndim(p) == 0 else p


def prior_probability_c0(b, m, w):
    _check_finite(b, m, w)
    p = expit(-prior_log_odds(b, m, w))
    return float(p) if np.ndim(p) == 0 else p


def prior_probability_arithmetic(b, m, w):
    """Arithmetic-mean alternative prior, ``w b + (1 - w) m``."""
    _check_finite(b, m, w)
    b, m, w = (np.asarray(v, dtype=float) for v in (b, m, w))
    p = w * b + (1.0 - w) * m
    return float(p) if np.ndim(p) == 0 else p


def weight_normalizing_constant_log(b_col, m_col, w):
    """Log of the per-TF normalizing constant of the weight density.

    ``log A(w) = sum_i log(b_i^w m_i^(1-w) + (1-b_i)^w (1-m_i)^(1-w))``.
    ``w`` may be a scalar or a 1-D grid; the result has the shape of ``w``.
    """
    b_col = np.asarray(b_col, dtype=float)
    m_col = np.asarray(m_col, dtype=float)
    if b_col.shape != m_col.shape or b_col.ndim != 1:
        raise InvalidInputError("b and m columns must be 1-D and of equal length")
    _check_finite(b_col, m_col, w)
    w_arr = np.asarray(w, dtype=float)
    wg = w_arr.reshape(-1, 1)
    log1, log0 = prior_log_terms(b_col[None, :], m_col[None, :], wg)
    out = np.logaddexp(log1, log0).sum(axis=1)
    return float(out[0]) if w_arr.ndim == 0 else out.reshape(w_arr.shape)


def prior_matrix(dataset: Dataset, w, form: str = "geometric") -> np.ndarray:
    """N x J matrix of prior inclusion probabilities for per-TF weights ``w``."""
    w = np.broadcast_to(np.asarray(w, dtype=float), (dataset.n_tfs,))
    if form == "geometric":
        return np.asarray(prior_probability(dataset.b, dataset.m, w[None, :]))
    if form == "arithmetic":
        return np.asarray(prior_probability_arithmetic(dataset.b, dataset.m, w[None, :]))
    raise InvalidInputError(f"unknown prior form {form!r}")


def sample_network_from_prior(dataset: Dataset, w, rng: np.random.Generator) -> NetworkState:
    """Draw every ``C_ij`` independently from its prior inclusion probability."""
    p = prior_matrix(dataset, w)
    return NetworkState((rng.random(p.shape) < p).astype(np.int8))


def prior_sparsity_study(dataset: Dataset, w_grid: Sequence[float] | None = None,
                         n_draws: int = 10000, rng: np.random.Generator | None = None,
                         threshold: float = 0.5) -> SparsityStudyResult:
    """Count prior-only targets per TF across a grid of shared weights.

    For each grid value every TF receives that weight, ``n_draws`` networks
    are generated from the prior, and ``N_j`` counts genes whose empirical
    inclusion frequency is at least ``threshold``.
    """
    if w_grid is None:
        w_grid = SPARSITY_W_GRID
    w_grid = np.asarray(list(w_grid), dtype=float)
    if w_grid.size == 0:
        raise InvalidInputError("w_grid must not be empty")
    if n_draws < 1:
        raise InvalidInputError("n_draws must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    estimates = np.empty((len(w_grid), dataset.n_genes, dataset.n_tfs))
    for gi, w in enumerate(w_grid):
        p = prior_matrix(dataset, w)
        # the number of ones among n_draws independent networks is Binomial(n_draws, p)
        estimates[gi] = rng.binomial(n_draws, p) / n_draws
    counts = (estimates >= threshold).sum(axis=1)
    return SparsityStudyResult(int(n_draws), w_grid, counts, estimates, list(dataset.tf_ids))


def prior_target_counts(dataset: Dataset, w, form: str = "geometric",
                        threshold: float = 0.5) -> np.ndarray:
    """Number of genes per TF whose prior inclusion probability reaches ``threshold``."""
    return (prior_matrix(dataset, w, form) >= threshold).sum(axis=0)


def compare_prior_forms(dataset: Dataset, w, threshold: float = 0.5) -> dict:
    """A priori target counts under the geometric and arithmetic priors.

    Returns a dict with per-TF ``geometric`` and ``arithmetic`` counts and
    their ``difference`` (arithmetic minus geometric).
    """
    geo = prior_target_counts(dataset, w, "geometric", threshold)
    ari = prior_target_counts(dataset, w, "arithmetic", threshold)
    return {"tf_ids": list(dataset.tf_ids), "geometric": geo,
            "arithmetic": ari, "difference": ari - geo}


def as_index(ids: Sequence, key, what: str = "TF") -> int:
    """Resolve ``key`` (an id, or else an integer position) to a position in ``ids``."""
    ids = list(ids)
    if key in ids:
        return ids.index(key)
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool) and 0 <= key < len(ids):
        return int(key)
    raise InvalidInputError(f"unknown {what} {key!r}")


def mapping_to_index(ids: Sequence) -> Mapping:
    return {x: i for i, x in enumerate(ids)}
