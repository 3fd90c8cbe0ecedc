import numpy as np
import pytest
from scipy.special import expit

from grnbvs import (ChainConfig, Hyperparams, InvalidInputError, ModelParams, NetworkState,
                    NumericalFailure, SynthSpec, generate_synthetic, prior_probability,
                    run_chain, run_chains)
from grnbvs.likelihood import GibbsWorkspace, predicted_matrix
from grnbvs.sampler import (ChainState, WeightCache, alpha_conditional, chain_rng,
                            coefficient_conditional, gibbs_sweep, indicator_log_odds,
                            initial_state, sample_alpha, sample_coefficient, sample_indicator,
                            sample_sigma2, sample_weight, sigma2_conditional, weight_log_density)
from grnbvs.synth import brute_force_stats, conjugate_posterior_oracle

from conftest import make_dataset, random_dataset

HYPER = Hyperparams()


def _workspace(ds, c, params):
    return GibbsWorkspace(ds, NetworkState(np.asarray(c)), params)


# --- conjugate conditionals -------------------------------------------------------

def test_alpha_conditional_worked_example():
    ds = make_dataset([[1.0, 3.0]], [[0.0, 0.0]], [[0.5]], [[0.5]])
    params = ModelParams([0.0], [0.0], 1.0, [0.5])
    mean, var = alpha_conditional(_workspace(ds, [[0]], params), params, HYPER)
    assert mean[0] == pytest.approx(2.0, abs=1e-3) and var[0] == pytest.approx(0.5, abs=1e-3)
    assert (mean[0], var[0]) == pytest.approx(
        conjugate_posterior_oracle("alpha", {"sum_y": 4.0, "n_obs": 2, "sigma2": 1.0}),
        rel=1e-12)


def test_alpha_draws_shrink_under_tight_prior():
    ds = make_dataset([[1.0, 3.0]], [[0.0, 0.0]], [[0.5]], [[0.5]])
    params = ModelParams([0.0], [0.0], 1.0, [0.5])
    ws = _workspace(ds, [[0]], params)
    hyper = Hyperparams(tau_alpha2=1e-10)
    rng = np.random.default_rng(0)
    draws = [sample_alpha(ws, ds, params, hyper, 0, rng) for _ in range(200)]
    assert np.max(np.abs(draws)) < 1e-3


def test_alpha_draws_are_reproducible():
    ds = make_dataset([[1.0, 3.0]], [[0.0, 0.0]], [[0.5]], [[0.5]])

    def draws():
        params = ModelParams([0.0], [0.0], 1.0, [0.5])
        ws = _workspace(ds, [[0]], params)
        rng = np.random.default_rng(42)
        return [sample_alpha(ws, ds, params, HYPER, 0, rng) for _ in range(5)]
    assert draws() == draws()


def test_beta_conditional_worked_example():
    # one active gene with regressor (2, 0) and V = (4, 0): T_XX = 4, T_VX = 8
    ds = make_dataset([[4.0, 0.0]], [[2.0, 0.0]], [[0.5]], [[0.5]])
    params = ModelParams([0.0], [0.0], 1.0, [0.5])
    mean, var = coefficient_conditional(_workspace(ds, [[1]], params), ds, params, HYPER,
                                        ("beta", 0))
    assert mean == pytest.approx(2.0, abs=1e-3) and var == pytest.approx(0.25, abs=1e-3)
    assert (mean, var) == pytest.approx(conjugate_posterior_oracle(
        "beta", {"t_xx": 4.0, "t_vx": 8.0, "sigma2": 1.0}), rel=1e-12)


def test_coefficient_without_active_genes_is_prior_draw():
    ds = make_dataset([[4.0, 0.0]], [[2.0, 0.0]], [[0.5]], [[0.5]])
    params = ModelParams([0.0], [3.0], 1.0, [0.5])
    ws = _workspace(ds, [[0]], params)
    mean, var = coefficient_conditional(ws, ds, params, HYPER, ("beta", 0))
    assert mean == 0.0 and var == HYPER.tau_beta2
    sample_coefficient(ws, ds, params, HYPER, ("beta", 0), np.random.default_rng(0))
    ws.audit(ds, params, tol=1e-12)


def test_sigma2_conditional_worked_example():
    ds = make_dataset([[1.0], [1.0]], [[0.0]], [[0.5], [0.5]], [[0.5], [0.5]])
    params = ModelParams([0.0, 2.0], [0.0], 1.0, [0.5])
    df, scale = sigma2_conditional(_workspace(ds, [[0], [0]], params), HYPER)
    assert (df, scale) == (4, 0.75)
    assert df * scale / (df - 2) == pytest.approx(1.5)


def test_sigma2_concentrates_for_perfect_fit():
    ds = make_dataset(np.zeros((50, 20)), np.zeros((1, 20)), np.full((50, 1), 0.5),
                      np.full((50, 1), 0.5))
    params = ModelParams(np.zeros(50), [0.0], 1.0, [0.5])
    ws = _workspace(ds, np.zeros((50, 1), int), params)
    rng = np.random.default_rng(0)
    draws = [sample_sigma2(ws, ds, params, HYPER, rng) for _ in range(100)]
    assert np.mean(draws) == pytest.approx(1.0 / 1000, rel=0.1)


def test_conditionals_match_brute_force_statistics(rng):
    ds = random_dataset(rng, 5, 3, 4)
    params = ModelParams(rng.normal(size=5), rng.normal(size=3), 0.8, np.full(3, 0.5),
                         rng.normal(size=3), np.array([[0, 1], [0, 2], [1, 2]]))
    net = NetworkState(rng.integers(0, 2, (5, 3)))
    ws = GibbsWorkspace(ds, net, params)
    hyper = Hyperparams(tau_alpha2=3.0, tau_beta2=2.0, tau_gamma2=5.0, nu=3.0)
    for i in range(5):
        mean, var = alpha_conditional(ws, params, hyper, np.array([i]))
        ref = conjugate_posterior_oracle("alpha", brute_force_stats(ds, net, params, "alpha", i),
                                         hyper)
        assert (mean[0], var[0]) == pytest.approx(ref, rel=1e-10)
    for j in range(3):
        ref = conjugate_posterior_oracle("beta", brute_force_stats(ds, net, params, "beta", j),
                                         hyper)
        got = coefficient_conditional(ws, ds, params, hyper, ("beta", j))
        assert got == pytest.approx(ref, rel=1e-10)
    for j, k in params.pairs:
        stats = brute_force_stats(ds, net, params, "gamma", (j, k))
        got = coefficient_conditional(ws, ds, params, hyper, ("gamma", j, k))
        assert got == pytest.approx(conjugate_posterior_oracle("gamma", stats, hyper), rel=1e-10)
    assert sigma2_conditional(ws, hyper) == pytest.approx(
        conjugate_posterior_oracle("sigma2", brute_force_stats(ds, net, params, "sigma2"), hyper),
        rel=1e-10)


def test_unknown_coefficient():
    ds = make_dataset([[1.0]], [[1.0]], [[0.5]], [[0.5]])
    params = ModelParams([0.0], [0.0], 1.0, [0.5])
    with pytest.raises(InvalidInputError):
        coefficient_conditional(_workspace(ds, [[0]], params), ds, params, HYPER, ("delta", 0))


# --- indicators ---------------------------------------------------------------------

def test_indicator_probability_worked_example():
    ds = make_dataset([[1.0]], [[1.0]], [[0.5]], [[0.5]])
    params = ModelParams([0.0], [1.0], 1.0, [0.5])
    lo, _, _ = indicator_log_odds(_workspace(ds, [[0]], params), ds, params, 0, [0])
    assert expit(lo[0]) == pytest.approx(0.5 / (0.5 + 0.5 * np.exp(-0.5)), rel=1e-12)
    assert expit(lo[0]) == pytest.approx(0.6225, abs=1e-4)


def test_indicator_flat_likelihood_equals_prior(rng):
    ds = random_dataset(rng, 6, 2, 3)
    params = ModelParams(np.zeros(6), [0.0, 0.7], 1.0, [0.3, 0.8])
    ws = _workspace(ds, np.zeros((6, 2), int), params)
    lo, _, _ = indicator_log_odds(ws, ds, params, 0, np.arange(6))
    np.testing.assert_allclose(expit(lo), prior_probability(ds.b[:, 0], ds.m[:, 0], 0.3),
                               rtol=1e-14)


def test_indicator_forced_by_upper_clamp():
    eps = 1e-6
    ds = make_dataset([[0.0]], [[0.0]], [[1 - eps]], [[0.2]])
    params = ModelParams([0.0], [0.0], 1.0, [1.0])
    lo, _, _ = indicator_log_odds(_workspace(ds, [[0]], params), ds, params, 0, [0])
    assert expit(lo[0]) == pytest.approx(1 - eps, rel=1e-9)


def test_indicator_update_keeps_residuals_exact(rng):
    ds = random_dataset(rng, 5, 3, 4)
    params = ModelParams(rng.normal(size=5), rng.normal(size=3), 1.0, np.full(3, 0.5),
                         rng.normal(size=3), np.array([[0, 1], [0, 2], [1, 2]]))
    ws = GibbsWorkspace(ds, NetworkState(rng.integers(0, 2, (5, 3))), params)
    r = np.random.default_rng(1)
    for _ in range(200):
        sample_indicator(ws, ds, params, int(r.integers(5)), int(r.integers(3)), r)
    fresh = ds.g - predicted_matrix(ds, ws.network, params)
    np.testing.assert_allclose(ws.residual, fresh, atol=1e-12)


# --- weights --------------------------------------------------------------------------

def test_weight_density_endpoint_ratio():
    ds = make_dataset([[0.0]], [[0.0]], [[0.9]], [[0.1]])
    grid, ld = weight_log_density(ds, NetworkState(np.array([[1]])), 0, 101)
    assert np.exp(ld[-1] - ld[0]) == pytest.approx(9.0, rel=1e-12)
    # at w = 1 the normalized density is b, at w = 0 it is m
    assert np.exp(ld[-1]) == pytest.approx(0.9) and np.exp(ld[0]) == pytest.approx(0.1)


def test_weight_density_flat_when_sources_agree(rng):
    b = rng.uniform(0.05, 0.95, (8, 1))
    ds = make_dataset(np.zeros((8, 1)), np.zeros((1, 1)), b, b)
    _, ld = weight_log_density(ds, NetworkState(rng.integers(0, 2, (8, 1))), 0, 51)
    np.testing.assert_allclose(ld, ld[0], atol=1e-12)


def test_weight_cache_matches_direct_density(rng):
    ds = random_dataset(rng, 7, 3, 2)
    net = NetworkState(rng.integers(0, 2, (7, 3)))
    cache = WeightCache(ds, 101)
    for j in range(3):
        _, ld = weight_log_density(ds, net, j, 101)
        np.testing.assert_allclose(cache.log_density(net.c[:, j], j), ld, rtol=1e-12)


def test_weight_draws_lie_on_grid():
    ds = make_dataset([[0.0]], [[0.0]], [[0.9]], [[0.1]])
    rng = np.random.default_rng(0)
    draws = np.array([sample_weight(ds, NetworkState(np.array([[1]])), 0, 11, rng)
                      for _ in range(500)])
    assert np.allclose(draws * 10, np.round(draws * 10))
    assert draws.mean() > 0.5


# --- sweeps and chains ----------------------------------------------------------------

def _small_problem(seed=3):
    ds, truth, params = generate_synthetic(SynthSpec(N=30, J=3, T=12, sparsity=0.2, seed=seed))
    return ds, truth, params


def test_sweep_keeps_residuals_exact():
    ds, _, _ = _small_problem()
    rng = chain_rng(0, 0)
    state = initial_state(ds, HYPER, rng)
    ws = GibbsWorkspace(ds, state.network, state.params)
    for _ in range(30):
        gibbs_sweep(state, ws, ds, HYPER, rng)
    assert ws.audit(ds, state.params, tol=1e-9, replace=False) < 1e-9


def test_sweep_respects_fixed_zero_cells():
    ds, _, _ = _small_problem()
    mask = np.zeros((ds.n_genes, ds.n_tfs), dtype=bool)
    mask[:5, 0] = True
    rng = chain_rng(1, 0)
    state = initial_state(ds, HYPER, rng, mask)
    ws = GibbsWorkspace(ds, state.network, state.params)
    for _ in range(20):
        gibbs_sweep(state, ws, ds, HYPER, rng, fixed_zero=mask)
        assert not state.network.c[mask].any()


def test_chain_is_deterministic_and_seed_sensitive():
    ds, _, _ = _small_problem()
    cfg = ChainConfig(n_iterations=60, burn_in=20, thin=2, seed=7)
    a, b = run_chain(ds, HYPER, cfg, 1), run_chain(ds, HYPER, cfg, 1)
    for name in ("alpha", "beta", "gamma", "sigma2", "w", "inclusion_counts", "monitor_values"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    c = run_chain(ds, HYPER, cfg, 0)
    assert not np.array_equal(a.sigma2, c.sigma2)


def test_retained_count_arithmetic():
    ds, _, _ = _small_problem()
    cfg = ChainConfig(n_iterations=45, burn_in=10, thin=3, seed=0, snapshot_stride=15)
    trace = run_chain(ds, HYPER, cfg)
    assert cfg.n_retained == 11 == trace.n_retained
    np.testing.assert_array_equal(trace.iterations, np.arange(13, 46, 3))
    assert trace.inclusion_counts.max() <= 11
    assert sorted(trace.snapshots) == [15, 30, 45]
    np.testing.assert_array_equal(np.diag(trace.coactive_counts), trace.inclusion_counts.sum(0))


def test_gene_parallel_execution_is_bit_identical():
    ds, _, _ = _small_problem()
    serial = run_chain(ds, HYPER, ChainConfig(n_iterations=40, burn_in=10, thin=1, seed=5))
    par = run_chain(ds, HYPER, ChainConfig(n_iterations=40, burn_in=10, thin=1, seed=5,
                                           parallel_genes=True, n_workers=3))
    for name in ("alpha", "beta", "gamma", "sigma2", "w", "inclusion_counts"):
        np.testing.assert_array_equal(getattr(serial, name), getattr(par, name))


def test_checkpoint_resume_matches_uninterrupted_run(tmp_path):
    ds, _, _ = _small_problem()
    cfg = ChainConfig(n_iterations=50, burn_in=10, thin=2, seed=11, snapshot_stride=20)
    full = run_chain(ds, HYPER, cfg)
    ckpt = str(tmp_path / "ck.npz")

    class Stop(Exception):
        pass

    def interrupt(it, state):
        if it == 33:
            raise Stop

    with pytest.raises(Stop):
        run_chain(ds, HYPER, cfg, checkpoint_path=ckpt, checkpoint_every=10, callback=interrupt)
    resumed = run_chain(ds, HYPER, cfg, checkpoint_path=ckpt, checkpoint_every=10, resume=True)
    for name in ("alpha", "beta", "gamma", "sigma2", "w", "inclusion_counts", "iterations"):
        np.testing.assert_array_equal(getattr(full, name), getattr(resumed, name))
    assert sorted(resumed.snapshots) == sorted(full.snapshots)


def test_checkpoint_rejects_mismatched_config(tmp_path):
    ds, _, _ = _small_problem()
    ckpt = str(tmp_path / "ck.npz")
    run_chain(ds, HYPER, ChainConfig(n_iterations=20, burn_in=5, thin=1, seed=1),
              checkpoint_path=ckpt, checkpoint_every=10)
    with pytest.raises(InvalidInputError):
        run_chain(ds, HYPER, ChainConfig(n_iterations=20, burn_in=5, thin=1, seed=2),
                  checkpoint_path=ckpt, checkpoint_every=10, resume=True)


def test_non_finite_state_names_parameter_and_iteration():
    ds, _, _ = _small_problem()

    def poison(it, state):
        if it == 3:
            state.params.beta[1] = np.nan

    with pytest.raises(NumericalFailure) as info:
        run_chain(ds, HYPER, ChainConfig(n_iterations=10, burn_in=0, thin=1), callback=poison)
    # the poisoned value is caught right after the next sweep
    assert info.value.parameter.startswith(("beta", "alpha", "sigma2", "gamma", "w"))
    assert info.value.iteration == 4


def test_run_chains_orders_by_index():
    ds, _, _ = _small_problem()
    cfg = ChainConfig(n_iterations=20, burn_in=5, thin=1, n_chains=3, seed=2)
    traces = run_chains(ds, HYPER, cfg)
    assert [t.chain_index for t in traces] == [0, 1, 2]
    np.testing.assert_array_equal(traces[2].sigma2, run_chain(ds, HYPER, cfg, 2).sigma2)


def test_chain_config_validation():
    with pytest.raises(InvalidInputError):
        ChainConfig(n_iterations=10, burn_in=10)
    with pytest.raises(InvalidInputError):
        ChainConfig(thin=0)


def test_no_interactions_has_empty_gamma():
    ds, _, _ = _small_problem()
    trace = run_chain(ds, Hyperparams(include_interactions=False),
                      ChainConfig(n_iterations=10, burn_in=2, thin=1))
    assert trace.gamma.shape == (8, 0) and trace.pairs.shape == (0, 2)


def test_initial_state_layout():
    ds, _, _ = _small_problem()
    state = initial_state(ds, HYPER, chain_rng(0, 0))
    assert isinstance(state, ChainState)
    np.testing.assert_allclose(state.params.alpha, ds.g.mean(axis=1))
    assert np.all(state.params.w == 0.5) and np.all(state.params.beta == 0)
