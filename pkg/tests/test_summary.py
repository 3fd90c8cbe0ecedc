import numpy as np
import pytest

from grnbvs import InvalidInputError, summarize
from grnbvs.sampler import ChainTrace
from grnbvs.summary import (InteractionPair, credible_interval, inclusion_probabilities,
                            interaction_pairs, significant_effects, target_genes,
                            weight_summary)


def _trace(c_draws, beta=None, w=None, gamma=None, pairs=None):
    """Trace built from an explicit list of indicator matrices."""
    c_draws = np.asarray(c_draws, dtype=np.int64)
    R, N, J = c_draws.shape
    beta = np.zeros((R, J)) if beta is None else np.asarray(beta, float).reshape(R, J)
    w = np.full((R, J), 0.5) if w is None else np.asarray(w, float).reshape(R, J)
    pairs = np.zeros((0, 2), int) if pairs is None else np.asarray(pairs)
    gamma = np.zeros((R, len(pairs))) if gamma is None else np.asarray(gamma, float)
    return ChainTrace(0, 0, np.arange(R), np.zeros((R, N)), beta, gamma, pairs, np.ones(R), w,
                      c_draws.sum(axis=0), np.einsum("rij,rik->jk", c_draws, c_draws),
                      np.zeros((0, 2), int), np.zeros((R, 0), np.int8))


def test_inclusion_all_ones_and_alternating():
    on = _trace(np.ones((4, 2, 1)))
    assert inclusion_probabilities([on])[0, 0] == 1.0
    alt = _trace(np.array([1, 0, 1, 0]).reshape(4, 1, 1))
    assert inclusion_probabilities([alt])[0, 0] == 0.5


def test_inclusion_pools_chains():
    a = _trace(np.ones((3, 1, 1)))
    b = _trace(np.zeros((1, 1, 1)))
    assert inclusion_probabilities([a, b])[0, 0] == 0.75


def test_inclusion_empty():
    with pytest.raises(InvalidInputError):
        inclusion_probabilities([])


def test_credible_interval_linear_quantiles():
    lo, hi = credible_interval(np.arange(1, 101), 0.95)
    assert lo == pytest.approx(3.475) and hi == pytest.approx(97.525)
    assert credible_interval([2.5] * 10) == (2.5, 2.5)
    with pytest.raises(InvalidInputError):
        credible_interval([1.0])


def _summary_with_inclusion(col, threshold=0.5):
    # draw counts reproduce the requested inclusion column exactly over 10 draws
    R = 10
    c = np.zeros((R, len(col), 1))
    for i, p in enumerate(col):
        c[: int(round(p * R)), i, 0] = 1
    return summarize([_trace(c, beta=np.linspace(0.2, 0.8, R))], [f"g{i}" for i in
                                                                    range(len(col))],
                     ["A"], threshold=threshold)


def test_target_genes_boundary_and_order():
    s = _summary_with_inclusion([0.3, 0.5, 0.9])
    assert target_genes(s, "A") == ["g2", "g1"]
    assert target_genes(s, "A", 0.91) == []
    assert target_genes(s, 0, 1e-9) == ["g2", "g1", "g0"]
    assert s.target_sets["A"] == ["g2", "g1"]


def test_significant_effects_by_interval_sign():
    R = 200
    rng = np.random.default_rng(0)
    beta = np.column_stack([rng.uniform(0.2, 0.8, R), rng.uniform(-0.1, 0.3, R),
                            rng.uniform(-0.8, -0.2, R)])
    s = summarize([_trace(np.zeros((R, 2, 3)), beta=beta)], ["g0", "g1"], ["a", "b", "c"])
    act, rep, pairs = significant_effects(s)
    assert act == ["a"] and rep == ["c"] and pairs == []


def _pair_summary(shared, size_a=10, size_b=6, n_genes=20):
    R = 4
    c = np.zeros((R, n_genes, 2))
    c[:, :size_a, 0] = 1
    start = size_a - shared
    c[:, start:start + size_b, 1] = 1
    gamma = np.array([[1.0], [1.2], [1.4], [1.6]])
    return summarize([_trace(c, gamma=gamma, pairs=[[0, 1]])],
                     [f"g{i:02d}" for i in range(n_genes)], ["a", "b"])


def test_interaction_pair_filter():
    s = _pair_summary(shared=4)
    assert len(s.significant_pairs) == 1
    pair = s.significant_pairs[0]
    assert isinstance(pair, InteractionPair) and pair.shared_targets == 4
    assert interaction_pairs(s, 4) == [pair]
    assert interaction_pairs(s, 5) == []
    assert interaction_pairs(s, 0) == s.significant_pairs
    assert interaction_pairs(_pair_summary(shared=0), 1) == []


def test_weight_summary_constant_and_mass():
    t = _trace(np.zeros((5, 1, 2)), w=np.full((5, 2), 0.8))
    ws = weight_summary([t])
    np.testing.assert_allclose(ws["quantiles"], 0.8)
    np.testing.assert_array_equal(ws["mass_above_half"], [1.0, 1.0])


def test_summarize_rejects_mismatched_ids():
    with pytest.raises(InvalidInputError):
        summarize([_trace(np.zeros((3, 2, 1)))], ["g0"], ["a"])
