import numpy as np
import pytest

from grnbvs import DegenerateInputError, convergence_report
from grnbvs.diagnostics import batch_means, effective_sample_size, split_rhat
from grnbvs.sampler import ChainTrace


def test_rhat_iid_chains_near_one():
    rng = np.random.default_rng(0)
    assert abs(split_rhat(rng.normal(size=(4, 20_000))) - 1.0) < 0.01


def test_rhat_separated_chains():
    rng = np.random.default_rng(1)
    chains = [rng.normal(0, 1, 1000), rng.normal(10, 1, 1000)]
    assert split_rhat(chains) > 3


def test_rhat_constant_chains_raise():
    with pytest.raises(DegenerateInputError):
        split_rhat([np.ones(10), np.ones(10)])


def test_rhat_affine_invariant_and_lower_bound():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 101)).cumsum(axis=1)
    r = split_rhat(x)
    assert split_rhat(3.0 * x - 7.0) == pytest.approx(r, rel=1e-10)
    n = 101 // 2
    assert r >= np.sqrt((n - 1) / n)


def test_ess_iid():
    rng = np.random.default_rng(3)
    n = 10_000
    assert abs(effective_sample_size([rng.normal(size=n)]) - n) < 0.15 * n


def test_ess_ar1():
    rng = np.random.default_rng(4)
    n, rho = 100_000, 0.9
    x = np.empty(n)
    x[0] = rng.normal()
    e = rng.normal(size=n) * np.sqrt(1 - rho ** 2)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + e[t]
    expected = n * (1 - rho) / (1 + rho)
    assert abs(effective_sample_size([x]) - expected) < 0.25 * expected


def test_ess_antithetic_exceeds_n_but_capped():
    n = 1000
    x = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    ess = effective_sample_size([x])
    assert n < ess <= n * np.log10(n) + 1e-9


def test_batch_means():
    x = np.arange(10.0)
    np.testing.assert_allclose(batch_means(x, 3), [2.0, 5.0, 8.0])
    assert batch_means(x, 50).shape == (10,)


def _trace(rng, shift=0.0, constant=False, R=200):
    s2 = np.ones(R) if constant else rng.normal(1 + shift, 0.1, R)
    w = np.full((R, 1), 0.5) if constant else rng.uniform(0, 1, (R, 1)) + shift
    beta = np.zeros((R, 1)) if constant else rng.normal(shift, 1, (R, 1))
    mon = np.zeros((R, 1), np.int8) if constant else (rng.random((R, 1)) < 0.5).astype(np.int8)
    return ChainTrace(0, 0, np.arange(R), np.zeros((R, 1)), beta, np.zeros((R, 0)),
                      np.zeros((0, 2), int), s2, w, np.zeros((1, 1), int), np.zeros((1, 1), int),
                      np.array([[0, 0]]), mon)


def test_report_passes_for_mixed_chains():
    rng = np.random.default_rng(5)
    rep = convergence_report([_trace(rng), _trace(rng)], tf_ids=["A"])
    assert rep.verdict == "pass" and rep.passed
    assert {p.name for p in rep.params} == {"sigma2", "w[A]", "beta[A]", "inclusion[0,A]"}
    assert rep.to_dict()["verdict"] == "pass"


def test_report_fails_for_separated_chains():
    rng = np.random.default_rng(6)
    rep = convergence_report([_trace(rng), _trace(rng, shift=5.0)])
    assert rep.verdict == "fail" and rep.worst_rhat > 1.1


def test_report_threshold_zero_always_fails():
    rng = np.random.default_rng(7)
    assert convergence_report([_trace(rng), _trace(rng)], threshold=0.0).verdict == "fail"


def test_report_single_chain_flag():
    rep = convergence_report([_trace(np.random.default_rng(8))])
    assert "single-chain" in rep.flags


def test_report_all_constant_is_degenerate():
    rng = np.random.default_rng(9)
    rep = convergence_report([_trace(rng, constant=True), _trace(rng, constant=True)])
    assert rep.verdict == "degenerate" and not rep.passed


def test_report_rejects_empty_selection():
    with pytest.raises(Exception):
        convergence_report([_trace(np.random.default_rng(0))], monitored=())
