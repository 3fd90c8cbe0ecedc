"""Gibbs sampler over coefficients, indicators and prior weights.

One sweep updates, in order: every baseline ``alpha_i``; every linear
coefficient ``beta_j`` and then every pair coefficient ``gamma_jk``;
``sigma^2``; every indicator ``C_ij`` in row-major order; every weight
``w_j``.  Random numbers for a sweep are drawn from the chain generator in a
fixed order before each block is processed, which makes gene-parallel
execution bit-identical to the serial path.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import InvalidInputError, NumericalFailure
from .likelihood import GibbsWorkspace, toggle_delta_rows
from .model import (Dataset, Hyperparams, ModelParams, NetworkState, _wmul,
                    prior_log_odds, prior_matrix, tf_pairs,
                    weight_normalizing_constant_log)

CHECKPOINT_VERSION = 1


@dataclass
class ChainConfig:
    n_iterations: int = 3000
    burn_in: int = 1000
    thin: int = 2
    seed: int = 0
    n_chains: int = 2
    parallel_genes: bool = False
    n_workers: int = 2
    audit_every: int = 50
    audit_tol: float = 1e-6
    random_scan: bool = False
    n_monitor: int = 100
    snapshot_stride: int = 0

    def __post_init__(self):
        if self.n_iterations < 1 or not 0 <= self.burn_in < self.n_iterations:
            raise InvalidInputError("need 0 <= burn_in < n_iterations")
        if self.thin < 1:
            raise InvalidInputError("thin must be at least 1")
        if self.n_chains < 1:
            raise InvalidInputError("n_chains must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInputError("seed must be a non-negative 64-bit integer")
        if self.audit_every < 0 or self.n_workers < 1:
            raise InvalidInputError("audit_every must be >= 0 and n_workers >= 1")

    @property
    def n_retained(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thin


@dataclass
class ChainState:
    network: NetworkState
    params: ModelParams


@dataclass
class ChainTrace:
    """Retained draws of one chain plus running indicator counts.

    Arrays indexed by retained iteration have ``n_retained`` rows.
    ``monitor_values`` holds raw 0/1 traces of the cells in
    ``monitor_cells`` for convergence checks; ``snapshots`` maps an iteration
    number to a full indicator matrix when a snapshot stride is configured.
    """

    chain_index: int
    seed: int
    iterations: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    pairs: np.ndarray
    sigma2: np.ndarray
    w: np.ndarray
    inclusion_counts: np.ndarray
    coactive_counts: np.ndarray
    monitor_cells: np.ndarray
    monitor_values: np.ndarray
    snapshots: dict = field(default_factory=dict)

    @property
    def n_retained(self) -> int:
        return len(self.iterations)

    def inclusion_probabilities(self) -> np.ndarray:
        if self.n_retained == 0:
            raise InvalidInputError("trace has no retained iterations")
        return self.inclusion_counts / self.n_retained


# ---------------------------------------------------------------------------
# conditional distributions
# ---------------------------------------------------------------------------

def alpha_conditional(workspace: GibbsWorkspace, params: ModelParams, hyper: Hyperparams,
                      rows=None):
    """Mean and variance of the normal conditional of ``alpha`` for ``rows``."""
    r = workspace.residual if rows is None else workspace.residual[rows]
    a = params.alpha if rows is None else params.alpha[rows]
    T = r.shape[1]
    sum_y = r.sum(axis=1) + T * a
    var = 1.0 / (T / params.sigma2 + 1.0 / hyper.tau_alpha2)
    return var / params.sigma2 * sum_y, np.full_like(sum_y, var)


def _coefficient_design(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                        coef):
    """Active rows, regressor values, current value and prior variance of ``coef``."""
    c = workspace.c
    f = dataset.f
    if coef[0] == "beta":
        j = coef[1]
        rows = np.flatnonzero(c[:, j])
        return rows, f[j], params.beta[j], None, j
    if coef[0] == "gamma":
        j, k = sorted(coef[1:3])
        idx = np.flatnonzero((params.pairs[:, 0] == j) & (params.pairs[:, 1] == k))
        if idx.size != 1:
            raise InvalidInputError(f"no interaction coefficient for pair {(j, k)}")
        rows = np.flatnonzero(c[:, j] & c[:, k])
        return rows, f[j] * f[k], params.gamma[idx[0]], idx[0], None
    raise InvalidInputError(f"unknown coefficient {coef!r}")


def coefficient_conditional(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                            hyper: Hyperparams, coef):
    """Mean and variance of the normal conditional of one regression coefficient.

    ``coef`` is ``("beta", j)`` or ``("gamma", j, k)``.  The regressor is
    ``C_ij f_jt`` for a linear term and ``C_ij C_ik f_jt f_kt`` for a pair
    term; ``V`` is the residual with the coefficient's own term added back.
    """
    return _conditional_from_design(workspace, params, hyper, coef,
                                    _coefficient_design(workspace, dataset, params, coef))


def _conditional_from_design(workspace, params, hyper, coef, design):
    rows, x, current, _, _ = design
    tau2 = hyper.tau_beta2 if coef[0] == "beta" else hyper.tau_gamma2
    t_xx = rows.size * float(x @ x)
    if rows.size:
        t_vx = float(workspace.residual[rows].sum(axis=0) @ x) + current * t_xx
    else:
        t_vx = 0.0
    var = 1.0 / (t_xx / params.sigma2 + 1.0 / tau2)
    return var / params.sigma2 * t_vx, var


def sigma2_conditional(workspace: GibbsWorkspace, hyper: Hyperparams):
    """Degrees of freedom and scale of the scaled-inverse-chi^2 conditional."""
    v_sigma = float(np.sum(workspace.residual ** 2))
    df = workspace.residual.size + hyper.nu
    return df, (v_sigma + 1.0) / df


def coefficient_ids(params: ModelParams) -> list:
    ids = [("beta", j) for j in range(len(params.beta))]
    ids += [("gamma", int(j), int(k)) for j, k in params.pairs]
    return ids


# ---------------------------------------------------------------------------
# single-site samplers
# ---------------------------------------------------------------------------

def _set_alpha(workspace, params, rows, new):
    workspace.residual[rows] += (params.alpha[rows] - new)[:, None]
    params.alpha[rows] = new


def sample_alpha(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                 hyper: Hyperparams, i: int, rng: np.random.Generator) -> float:
    """Draw ``alpha_i`` from its conditional and update residuals."""
    rows = np.array([i])
    mean, var = alpha_conditional(workspace, params, hyper, rows)
    new = mean + np.sqrt(var) * rng.standard_normal(1)
    _set_alpha(workspace, params, rows, new)
    return float(new[0])


def sample_coefficient(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                       hyper: Hyperparams, coef, rng: np.random.Generator,
                       z: float | None = None) -> float:
    """Draw one ``beta_j`` or ``gamma_jk`` and update residuals.

    When nothing activates the regressor this is a draw from the prior.
    """
    design = _coefficient_design(workspace, dataset, params, coef)
    mean, var = _conditional_from_design(workspace, params, hyper, coef, design)
    if z is None:
        z = rng.standard_normal()
    new = mean + np.sqrt(var) * z
    rows, x, current, gidx, j = design
    if rows.size:
        workspace.residual[rows] += (current - new) * x
    if gidx is None:
        params.beta[j] = new
    else:
        params.gamma[gidx] = new
    return float(new)


def sample_sigma2(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                  hyper: Hyperparams, rng: np.random.Generator) -> float:
    """Draw ``sigma^2 = df * scale / chi2(df)``."""
    df, scale = sigma2_conditional(workspace, hyper)
    params.sigma2 = float(df * scale / rng.chisquare(df))
    return params.sigma2


def indicator_log_odds(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                       j: int, rows, gamma_row=None, prior_lo=None):
    """Conditional log odds of ``C_ij = 1`` for the genes in ``rows``.

    The likelihood ratio comes from the cached residuals; the prior part is
    the weighted log odds of the ChIP and motif probabilities (pass
    ``prior_lo``, the values for ``rows``, to skip recomputing them).
    """
    rows = np.asarray(rows)
    delta, d, r0 = toggle_delta_rows(workspace, dataset, params, j, rows, gamma_row)
    if prior_lo is None:
        prior_lo = prior_log_odds(dataset.b[rows, j], dataset.m[rows, j], params.w[j])
    return delta + prior_lo, d, r0


def _update_indicator_rows(workspace, dataset, params, j, rows, u, gamma_row, fixed_zero,
                           prior_lo=None):
    lo, d, r0 = indicator_log_odds(workspace, dataset, params, j, rows, gamma_row, prior_lo)
    new = (u < expit(lo)).astype(np.int8)
    if fixed_zero is not None:
        new[fixed_zero[rows, j]] = 0
    workspace.c[rows, j] = new
    workspace.residual[rows] = r0 - new[:, None] * d


def sample_indicator(workspace: GibbsWorkspace, dataset: Dataset, params: ModelParams,
                     i: int, j: int, rng: np.random.Generator) -> int:
    """Draw ``C_ij`` from its conditional, updating the network and residuals."""
    rows = np.array([i])
    _update_indicator_rows(workspace, dataset, params, j, rows, rng.random(1),
                           params.gamma_matrix()[j], None)
    return int(workspace.c[i, j])


def weight_grid(grid_size: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, grid_size)


class WeightCache:
    """Prior logs and per-TF log normalizing constants over the weight grid.

    They depend only on ``b``, ``m`` and the grid, so they are computed once
    per chain (the normalizing constants on first use).
    """

    def __init__(self, dataset: Dataset, grid_size: int):
        self.grid = weight_grid(grid_size)
        self._b, self._m = dataset.b, dataset.m
        with np.errstate(divide="ignore"):
            self.log_b = np.log(dataset.b)
            self.log_1mb = np.log1p(-dataset.b)
            self.log_m = np.log(dataset.m)
            self.log_1mm = np.log1p(-dataset.m)
        self._log_a = None

    @property
    def log_a(self) -> np.ndarray:
        if self._log_a is None:
            J = self._b.shape[1]
            self._log_a = np.stack([
                weight_normalizing_constant_log(self._b[:, j], self._m[:, j], self.grid)
                for j in range(J)
            ]) if J else np.zeros((0, len(self.grid)))
        return self._log_a

    def prior_log_odds(self, w: np.ndarray) -> np.ndarray:
        """N x J prior log odds for per-TF weights ``w`` from the cached logs."""
        w = np.asarray(w, dtype=float)[None, :]
        log1 = _wmul(w, self.log_b) + _wmul(1.0 - w, self.log_m)
        log0 = _wmul(w, self.log_1mb) + _wmul(1.0 - w, self.log_1mm)
        with np.errstate(invalid="ignore"):
            return log1 - log0

    def log_density(self, c_col: np.ndarray, j: int) -> np.ndarray:
        on = c_col.astype(bool)
        s_b = self.log_b[on, j].sum() + self.log_1mb[~on, j].sum()
        s_m = self.log_m[on, j].sum() + self.log_1mm[~on, j].sum()
        return -self.log_a[j] + _wmul(self.grid, s_b) + _wmul(1.0 - self.grid, s_m)


def weight_log_density(dataset: Dataset, network: NetworkState, j: int,
                       grid_size: int) -> tuple:
    """Grid points and unnormalized log density of ``w_j`` given ``C``."""
    cache = WeightCache(_column_dataset(dataset, j), grid_size)
    return cache.grid, cache.log_density(network.c[:, j], 0)


def _column_dataset(dataset, j):
    return Dataset(dataset.gene_ids, [dataset.tf_ids[j]], dataset.experiment_ids,
                   dataset.g, dataset.f[j:j + 1], dataset.b[:, j:j + 1],
                   dataset.m[:, j:j + 1])


def _grid_draw(grid, log_density, u):
    p = np.exp(log_density - np.max(log_density))
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return grid[min(idx, len(grid) - 1)]


def sample_weight(dataset: Dataset, network: NetworkState, j: int, grid_size: int,
                  rng: np.random.Generator, cache: WeightCache | None = None) -> float:
    """Grid draw of ``w_j`` with probability proportional to its conditional density."""
    if cache is None:
        grid, ld = weight_log_density(dataset, network, j, grid_size)
    else:
        grid, ld = cache.grid, cache.log_density(network.c[:, j], j)
    return float(_grid_draw(grid, ld, rng.random()))


# ---------------------------------------------------------------------------
# sweeps and chains
# ---------------------------------------------------------------------------

def gibbs_sweep(state: ChainState, workspace: GibbsWorkspace, dataset: Dataset,
                hyper: Hyperparams, rng: np.random.Generator, *,
                update_theta: bool = True, update_indicators: bool = True,
                update_weights: bool = True, random_scan: bool = False,
                fixed_zero: np.ndarray | None = None, pool: ThreadPoolExecutor | None = None,
                n_blocks: int = 1, cache: WeightCache | None = None) -> ChainState:
    """One full scan of the three Gibbs steps, updating ``state`` in place."""
    params, c = state.params, state.network.c
    N, J = c.shape

    if update_theta:
        z_alpha = rng.standard_normal(N)
        coefs = coefficient_ids(params)
        z_coef = rng.standard_normal(len(coefs))
        chi = rng.chisquare(workspace.residual.size + hyper.nu)

        mean, var = alpha_conditional(workspace, params, hyper)
        _set_alpha(workspace, params, slice(None), mean + np.sqrt(var) * z_alpha)
        for coef, z in zip(coefs, z_coef):
            sample_coefficient(workspace, dataset, params, hyper, coef, rng, z=z)
        df, scale = sigma2_conditional(workspace, hyper)
        params.sigma2 = float(df * scale / chi)

    if cache is None:
        cache = WeightCache(dataset, hyper.grid_size)

    if update_indicators and J:
        u = rng.random((N, J))
        order = rng.permutation(J) if random_scan else np.arange(J)
        gmat = params.gamma_matrix()
        # weights stay fixed during this step, so the prior part is computed once
        prior_lo = cache.prior_log_odds(params.w)

        def run_block(rows):
            for j in order:
                _update_indicator_rows(workspace, dataset, params, j, rows, u[rows, j],
                                       gmat[j], fixed_zero, prior_lo[rows, j])

        blocks = [b for b in np.array_split(np.arange(N), max(1, n_blocks)) if b.size]
        if pool is None or len(blocks) == 1:
            for rows in blocks:
                run_block(rows)
        else:
            for fut in [pool.submit(run_block, rows) for rows in blocks]:
                fut.result()

    if update_weights and J:
        u = rng.random(J)
        for j in range(J):
            params.w[j] = _grid_draw(cache.grid, cache.log_density(c[:, j], j), u[j])
    return state


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chain_index])))


def initial_state(dataset: Dataset, hyper: Hyperparams, rng: np.random.Generator,
                  fixed_zero: np.ndarray | None = None) -> ChainState:
    """Prior draw of ``C`` at ``w = 0.5``, row-mean baselines, zero effects."""
    N, J = dataset.n_genes, dataset.n_tfs
    p = prior_matrix(dataset, 0.5)
    c = (rng.random((N, J)) < p).astype(np.int8)
    if fixed_zero is not None:
        c[fixed_zero] = 0
    pairs = tf_pairs(J) if hyper.include_interactions else np.zeros((0, 2), dtype=np.intp)
    centered = dataset.g - dataset.g.mean(axis=1, keepdims=True)
    sigma2 = float(np.mean(centered ** 2)) if dataset.g.size else 1.0
    params = ModelParams(alpha=dataset.g.mean(axis=1), beta=np.zeros(J),
                         sigma2=sigma2 if sigma2 > 0 else 1.0, w=np.full(J, 0.5),
                         gamma=np.zeros(len(pairs)), pairs=pairs)
    return ChainState(NetworkState(c), params)


def _monitor_cells(dataset, config):
    rng = np.random.default_rng([config.seed, 2 ** 32 - 1])
    n_cells = dataset.n_genes * dataset.n_tfs
    k = min(config.n_monitor, n_cells)
    flat = np.sort(rng.choice(n_cells, size=k, replace=False)) if k else np.zeros(0, int)
    return np.column_stack(np.unravel_index(flat, (dataset.n_genes, dataset.n_tfs))).astype(np.intp)


def _empty_trace(dataset, config, chain_index, pairs):
    R, N, J = config.n_retained, dataset.n_genes, dataset.n_tfs
    cells = _monitor_cells(dataset, config)
    return ChainTrace(
        chain_index=chain_index, seed=config.seed,
        iterations=np.zeros(R, dtype=np.int64), alpha=np.zeros((R, N)),
        beta=np.zeros((R, J)), gamma=np.zeros((R, len(pairs))), pairs=pairs.copy(),
        sigma2=np.zeros(R), w=np.zeros((R, J)),
        inclusion_counts=np.zeros((N, J), dtype=np.int64),
        coactive_counts=np.zeros((J, J), dtype=np.int64),
        monitor_cells=cells, monitor_values=np.zeros((R, len(cells)), dtype=np.int8),
    )


def _record(trace, slot, iteration, state):
    p, c = state.params, state.network.c
    trace.iterations[slot] = iteration
    trace.alpha[slot] = p.alpha
    trace.beta[slot] = p.beta
    trace.gamma[slot] = p.gamma
    trace.sigma2[slot] = p.sigma2
    trace.w[slot] = p.w
    trace.inclusion_counts += c
    c64 = c.astype(np.int64)
    trace.coactive_counts += c64.T @ c64
    if len(trace.monitor_cells):
        trace.monitor_values[slot] = c[trace.monitor_cells[:, 0], trace.monitor_cells[:, 1]]


def _check_finite(state, iteration):
    p = state.params
    for name, value in (("sigma2", p.sigma2), ("alpha", p.alpha), ("beta", p.beta),
                        ("gamma", p.gamma), ("w", p.w)):
        bad = ~np.isfinite(np.atleast_1d(value))
        if bad.any():
            where = "" if np.ndim(value) == 0 else f"[{int(np.flatnonzero(bad)[0])}]"
            raise NumericalFailure(name + where, iteration)


def run_chain(dataset: Dataset, hyper: Hyperparams, config: ChainConfig, chain_index: int = 0,
              *, checkpoint_path: str | None = None, checkpoint_every: int = 0,
              resume: bool = False, callback=None) -> ChainTrace:
    """Run one chain; deterministic given ``(config.seed, chain_index)``.

    With ``checkpoint_path`` and ``checkpoint_every > 0`` the full sampler
    state (including the generator state and the partial trace) is written
    every ``checkpoint_every`` sweeps; ``resume=True`` continues from an
    existing checkpoint and produces the same trace as an uninterrupted run.
    """
    fixed_zero = None if hyper.allow_self_regulation else dataset.self_regulation_mask()
    start = 1
    if resume and checkpoint_path and os.path.exists(checkpoint_path):
        state, trace, rng, done = load_checkpoint(checkpoint_path, dataset, config, chain_index)
        residual = _load_residual(checkpoint_path)
        start = done + 1
    else:
        residual = None
        rng = chain_rng(config.seed, chain_index)
        state = initial_state(dataset, hyper, rng, fixed_zero)
        trace = _empty_trace(dataset, config, chain_index, state.params.pairs)

    workspace = GibbsWorkspace(dataset, state.network, state.params)
    if residual is not None:
        # continue from the incrementally maintained residuals, not a fresh recompute
        workspace.residual[...] = residual
    cache = WeightCache(dataset, hyper.grid_size)
    pool = ThreadPoolExecutor(config.n_workers) if config.parallel_genes else None
    n_blocks = config.n_workers if config.parallel_genes else 1
    try:
        for it in range(start, config.n_iterations + 1):
            gibbs_sweep(state, workspace, dataset, hyper, rng, random_scan=config.random_scan,
                        fixed_zero=fixed_zero, pool=pool, n_blocks=n_blocks, cache=cache)
            _check_finite(state, it)
            if config.audit_every and it % config.audit_every == 0:
                workspace.audit(dataset, state.params, config.audit_tol)
            kept = it - config.burn_in
            if kept > 0 and kept % config.thin == 0:
                slot = kept // config.thin - 1
                if slot < len(trace.iterations):
                    _record(trace, slot, it, state)
            if config.snapshot_stride and it % config.snapshot_stride == 0:
                trace.snapshots[it] = state.network.c.copy()
            if checkpoint_path and checkpoint_every and it % checkpoint_every == 0:
                save_checkpoint(checkpoint_path, state, trace, rng, it, config, chain_index,
                                workspace.residual)
            if callback is not None:
                callback(it, state)
    finally:
        if pool is not None:
            pool.shutdown()
    return trace


class ChainRunError(RuntimeError):
    """Some chains failed; ``traces`` holds the completed ones (``None`` for failures)."""

    def __init__(self, failures: dict, traces: list):
        self.failures = failures
        self.traces = traces
        detail = "; ".join(f"chain {k}: {v}" for k, v in sorted(failures.items()))
        super().__init__(f"{len(failures)} chain(s) failed: {detail}")


def _run_chain_job(args):
    dataset, hyper, config, index = args
    return run_chain(dataset, hyper, config, index)


def run_chains(dataset: Dataset, hyper: Hyperparams, config: ChainConfig,
               n_processes: int = 1) -> list:
    """Run ``config.n_chains`` independent chains, in chain-index order.

    Chains use distinct derived seeds.  With ``n_processes > 1`` they run in
    separate processes; the result order does not depend on completion order.
    """
    jobs = [(dataset, hyper, config, k) for k in range(config.n_chains)]
    traces, failures = [None] * config.n_chains, {}
    if n_processes > 1 and config.n_chains > 1:
        with ProcessPoolExecutor(min(n_processes, config.n_chains)) as ex:
            futures = [ex.submit(_run_chain_job, job) for job in jobs]
            for k, fut in enumerate(futures):
                try:
                    traces[k] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported per chain
                    failures[k] = exc
    else:
        for k, job in enumerate(jobs):
            try:
                traces[k] = _run_chain_job(job)
            except Exception as exc:  # noqa: BLE001 - reported per chain
                failures[k] = exc
    if failures:
        raise ChainRunError(failures, traces)
    return traces


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_TRACE_ARRAYS = ("iterations", "alpha", "beta", "gamma", "pairs", "sigma2", "w",
                 "inclusion_counts", "coactive_counts", "monitor_cells", "monitor_values")


def save_checkpoint(path: str, state: ChainState, trace: ChainTrace,
                    rng: np.random.Generator, iteration: int, config: ChainConfig,
                    chain_index: int, residual: np.ndarray | None = None):
    """Write a resumable snapshot (``.npz``) atomically."""
    p = state.params
    meta = {"version": CHECKPOINT_VERSION, "iteration": int(iteration),
            "chain_index": int(chain_index), "seed": int(config.seed),
            "n_iterations": config.n_iterations, "burn_in": config.burn_in,
            "thin": config.thin, "rng_state": rng.bit_generator.state,
            "snapshot_iterations": sorted(int(k) for k in trace.snapshots)}
    arrays = {f"trace_{name}": getattr(trace, name) for name in _TRACE_ARRAYS}
    arrays.update({f"snapshot_{k}": v for k, v in trace.snapshots.items()})
    if residual is not None:
        arrays["residual"] = residual
    tmp = f"{path}.tmp.npz"
    np.savez(tmp, meta=np.array(json.dumps(meta)), c=state.network.c, alpha=p.alpha,
             beta=p.beta, gamma=p.gamma, pairs=p.pairs, sigma2=np.array(p.sigma2),
             w=p.w, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path: str, dataset: Dataset, config: ChainConfig, chain_index: int):
    """Restore ``(state, trace, rng, iteration)`` from :func:`save_checkpoint` output."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise InvalidInputError(
                f"checkpoint version {meta.get('version')} != supported {CHECKPOINT_VERSION}")
        for key in ("seed", "n_iterations", "burn_in", "thin"):
            if meta[key] != getattr(config, key):
                raise InvalidInputError(f"checkpoint {key} does not match the configuration")
        if meta["chain_index"] != chain_index:
            raise InvalidInputError("checkpoint belongs to a different chain")
        params = ModelParams(z["alpha"], z["beta"], float(z["sigma2"]), z["w"],
                             z["gamma"], z["pairs"])
        state = ChainState(NetworkState(z["c"]), params)
        trace = ChainTrace(chain_index=chain_index, seed=config.seed,
                           **{name: z[f"trace_{name}"].copy() for name in _TRACE_ARRAYS})
        for k in meta["snapshot_iterations"]:
            trace.snapshots[k] = z[f"snapshot_{k}"].copy()
    if state.network.c.shape != (dataset.n_genes, dataset.n_tfs):
        raise InvalidInputError("checkpoint does not match the dataset dimensions")
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = meta["rng_state"]
    return state, trace, rng, meta["iteration"]


def _load_residual(path):
    with np.load(path, allow_pickle=False) as z:
        return z["residual"].copy() if "residual" in z.files else None
