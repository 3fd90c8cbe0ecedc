"""Expression model evaluation and the incremental residual workspace."""
from __future__ import annotations

import numpy as np

from .exceptions import InternalConsistencyError, InvalidInputError
from .model import Dataset, ModelParams, NetworkState

LOG_2PI = np.log(2.0 * np.pi)


def predicted_expression(dataset: Dataset, network: NetworkState, params: ModelParams,
                         i: int, t: int) -> float:
    """Model mean of ``g[i, t]`` given indicators and coefficients."""
    N, T = dataset.g.shape
    if not (0 <= i < N and 0 <= t < T):
        raise IndexError(f"cell ({i}, {t}) out of range for {N} x {T}")
    c = network.c[i]
    f = dataset.f[:, t]
    value = params.alpha[i] + float(np.sum(params.beta * c * f))
    for (j, k), gam in zip(params.pairs, params.gamma):
        if c[j] and c[k]:
            value += gam * f[j] * f[k]
    return float(value)


def predicted_matrix(dataset: Dataset, network: NetworkState, params: ModelParams) -> np.ndarray:
    """Model mean for every (gene, experiment) cell."""
    c = network.c.astype(float)
    f = dataset.f
    pred = params.alpha[:, None] + (c * params.beta[None, :]) @ f
    for (j, k), gam in zip(params.pairs, params.gamma):
        both = c[:, j] * c[:, k]
        if gam != 0.0 and both.any():
            pred += (gam * both)[:, None] * (f[j] * f[k])[None, :]
    return pred


def log_likelihood(dataset: Dataset, network: NetworkState, params: ModelParams) -> float:
    """Gaussian log-likelihood of all expression values."""
    if not params.sigma2 > 0:
        raise InvalidInputError("sigma2 must be positive")
    r = dataset.g - predicted_matrix(dataset, network, params)
    return residual_log_likelihood(r, params.sigma2)


def residual_log_likelihood(residual: np.ndarray, sigma2: float) -> float:
    if not sigma2 > 0:
        raise InvalidInputError("sigma2 must be positive")
    n = residual.size
    return float(-0.5 * n * (LOG_2PI + np.log(sigma2)) - np.sum(residual ** 2) / (2.0 * sigma2))


class GibbsWorkspace:
    """Residuals ``g - predicted`` kept in step with the current state.

    The workspace holds a reference to the live indicator matrix of
    ``network``; every sampler step that changes a coefficient or an
    indicator adjusts ``residual`` in place instead of recomputing it.
    """

    def __init__(self, dataset: Dataset, network: NetworkState, params: ModelParams):
        self.network = network
        self.residual = np.empty_like(dataset.g)
        self.n_updates = 0
        refresh_workspace(dataset, network, params, self)

    @property
    def c(self) -> np.ndarray:
        return self.network.c

    def audit(self, dataset: Dataset, params: ModelParams, tol: float = 1e-6,
              replace: bool = True) -> float:
        """Compare against a full recomputation; raise if drift exceeds ``tol``."""
        fresh = dataset.g - predicted_matrix(dataset, self.network, params)
        dev = float(np.max(np.abs(fresh - self.residual))) if fresh.size else 0.0
        if not dev <= tol:
            raise InternalConsistencyError(
                f"residual drift {dev:.3g} exceeds tolerance {tol:.3g}")
        if replace:
            self.residual[...] = fresh
        return dev


def refresh_workspace(dataset: Dataset, network: NetworkState, params: ModelParams,
                      workspace: GibbsWorkspace | None = None) -> GibbsWorkspace:
    """Recompute residuals from scratch, creating a workspace if needed."""
    if workspace is None:
        return GibbsWorkspace(dataset, network, params)
    if network.c.shape != (dataset.n_genes, dataset.n_tfs):
        raise InvalidInputError("indicator matrix does not match the dataset")
    if params.alpha.shape != (dataset.n_genes,) or params.beta.shape != (dataset.n_tfs,):
        raise InvalidInputError("parameter dimensions do not match the dataset")
    workspace.network = network
    if workspace.residual.shape != dataset.g.shape:
        workspace.residual = np.empty_like(dataset.g)
    workspace.residual[...] = dataset.g - predicted_matrix(dataset, network, params)
    return workspace


def toggle_contribution(c: np.ndarray, f: np.ndarray, beta_j: float, gamma_row: np.ndarray,
                        j: int, rows) -> np.ndarray:
    """Change in the predicted rows when ``C_ij`` goes from 0 to 1.

    ``gamma_row`` is row ``j`` of the symmetric pair-coefficient matrix.  The
    interaction part only involves partners ``k`` active in that gene at the
    moment of the toggle.  Each output element is accumulated over partners in
    a fixed order, so results do not depend on how rows are blocked.
    """
    rows = np.asarray(rows)
    h = np.full((len(rows), f.shape[1]), beta_j)
    for k in np.flatnonzero(gamma_row):
        if k == j:
            continue
        active = np.flatnonzero(c[rows, k])
        if active.size:
            h[active] += gamma_row[k] * f[k]
    return h * f[j]


def toggle_delta_rows(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                      j: int, rows, gamma_row: np.ndarray | None = None):
    """Log-likelihood gain of ``C_ij = 1`` over ``C_ij = 0`` for several genes.

    Returns ``(delta, d, r0)``: the per-gene gain, the toggle contribution and
    the residual with the term switched off.
    """
    rows = np.asarray(rows)
    if gamma_row is None:
        gamma_row = params.gamma_matrix()[j]
    c = workspace.c
    d = toggle_contribution(c, dataset.f, params.beta[j], gamma_row, j, rows)
    r0 = workspace.residual[rows] + c[rows, j][:, None] * d
    delta = ((r0 * d).sum(axis=1) - 0.5 * (d * d).sum(axis=1)) / params.sigma2
    return delta, d, r0


def toggle_delta_log_likelihood(workspace: GibbsWorkspace, dataset: Dataset,
                                params: ModelParams, i: int, j: int) -> float:
    """``log L(C_ij = 1) - log L(C_ij = 0)`` in O(T) from cached residuals."""
    delta, _, _ = toggle_delta_rows(workspace, dataset, params, j, [i])
    return float(delta[0])
