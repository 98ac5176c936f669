"""Encoder, decoder, loss, gradients, optimizer, and checkpoints."""

import math

import numpy as np
import pytest

from supplykg.errors import CompatibilityError, InputError
from supplykg.graph import KnowledgeGraph, Triplet
from supplykg.model import (backward, encode, forward_batch,
                            init_optimizer, init_params, load_checkpoint, loss,
                            node_embeddings, optimizer_step, predict_prob,
                            save_checkpoint, score, zero_grads)
from supplykg.ontology import EntityType, Relation
from supplykg.sampling import attach_triplets, corrupt, sample_block

from gradcheck import finite_difference_grads, max_relative_error
from test_graph import random_graph


def tiny_graph():
    g = KnowledgeGraph()
    c0 = g.add_entity(EntityType.COMPANY, "c0")
    c1 = g.add_entity(EntityType.COMPANY, "c1")
    g.add_triplet(Triplet(c0, Relation.BUYS_FROM, c1))
    g.freeze()
    return g, c0, c1


def batch_block(graph, rng, n_pos=12, fanout=5, depth=2):
    """Positives + one negative each, with the block seeded at all endpoints."""
    positives = list(graph.triplets())[:n_pos]
    negatives = [corrupt(t, graph, rng) for t in positives]
    seeds = []
    for t in positives + [n.triplet for n in negatives]:
        seeds.extend((t.source, t.dest))
    block = sample_block(graph, seeds, fanout, depth, rng)
    return attach_triplets(block, positives, negatives)


class TestInit:
    def test_deterministic(self):
        g, *_ = tiny_graph()
        a = init_params(g, d=8, depth=2, seed=5)
        b = init_params(g, d=8, depth=2, seed=5)
        for name, t in a.tensors().items():
            assert np.array_equal(t, b.tensors()[name])

    def test_embedding_bound(self):
        rng = np.random.default_rng(0)
        g = random_graph(rng, n_companies=10).freeze()
        params = init_params(g, d=8, depth=1, seed=0)
        bound = math.sqrt(6.0 / 8)
        assert params.embeddings.shape == (g.num_entities, 8)
        assert np.all(np.abs(params.embeddings) <= bound)

    def test_relation_vectors_start_at_ones(self):
        g, c0, c1 = tiny_graph()
        params = init_params(g, d=4, depth=1, seed=1)
        for vec in params.rel_vectors.values():
            assert np.array_equal(vec, np.ones(4))
        # so the initial score reduces to <h_u, h_v>
        h = np.array([1.0, 2.0, 0.5, -1.0])
        h2 = np.array([0.1, 0.2, 0.3, 0.4])
        assert score(h, params.rel_vectors[Relation.BUYS_FROM], h2) == pytest.approx(h @ h2)


class TestEncode:
    def test_hand_computed_single_layer(self):
        g, c0, c1 = tiny_graph()
        params = init_params(g, d=2, depth=1, seed=0)
        params.embeddings[c0] = [1.0, -2.0]
        params.embeddings[c1] = [-3.0, 4.0]
        params.self_weights[0][:] = np.eye(2)
        for key in params.neigh_weights[0]:
            params.neigh_weights[0][key][:] = 0.0
        params.neigh_weights[0][(Relation.BUYS_FROM, "forward")][:] = 2 * np.eye(2)
        block = sample_block(g, [c0], fanout=5, depth=1, rng=np.random.default_rng(0))
        h, _ = encode(block, params)
        # h(c0) = I x0 + 2I mean(x1) = (1,-2) + (-6,8); final layer stays linear
        assert np.allclose(h[0], [-5.0, 6.0])

    def test_isolated_node_uses_only_self_path(self):
        g = KnowledgeGraph()
        nid = g.add_entity(EntityType.COMPANY, "alone")
        other = g.add_entity(EntityType.COMPANY, "other")
        g.freeze()
        params = init_params(g, d=4, depth=2, seed=3)
        block = sample_block(g, [nid], 5, 2, np.random.default_rng(0))
        h, _ = encode(block, params)
        x = params.embeddings[nid]
        expected = params.self_weights[1] @ np.maximum(params.self_weights[0] @ x, 0.0)
        assert np.allclose(h[0], expected)
        params.embeddings[other] += 100.0  # unrelated rows must not matter
        h2, _ = encode(block, params)
        assert np.allclose(h2[0], expected)

    def test_all_zero_params_give_zero(self):
        rng = np.random.default_rng(1)
        g = random_graph(rng).freeze()
        params = init_params(g, d=8, depth=2, seed=0)
        for name, t in params.tensors().items():
            if name != "X":
                t[:] = 0.0
        block = sample_block(g, list(range(10)), 5, 2, np.random.default_rng(2))
        h, _ = encode(block, params)
        assert np.allclose(h, 0.0)

    def test_depth_mismatch_rejected(self):
        g, c0, _ = tiny_graph()
        params = init_params(g, d=2, depth=2, seed=0)
        block = sample_block(g, [c0], 5, 1, np.random.default_rng(0))
        with pytest.raises(InputError):
            encode(block, params)


class TestScoreAndProb:
    def test_hand_arithmetic(self):
        assert score(np.array([1.0, 2.0]), np.array([1.0, 1.0]),
                     np.array([1.0, 1.0])) == pytest.approx(3.0)

    def test_zero_embedding(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            r, h = rng.normal(size=4), rng.normal(size=4)
            assert score(np.zeros(4), r, h) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            hu, r, hv = rng.normal(size=(3, 8))
            assert score(hu, r, hv) == score(hv, r, hu)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            score(np.zeros(3), np.zeros(4), np.zeros(3))

    def test_sigmoid_at_zero(self):
        assert predict_prob(0.0) == 0.5

    def test_sigmoid_saturation(self):
        assert predict_prob(40.0) == pytest.approx(1.0, abs=1e-12)
        assert predict_prob(-40.0) == pytest.approx(0.0, abs=1e-12)

    def test_sigmoid_stable_at_large_scores(self):
        for s in (1e3, -1e3, 700.0, -700.0):
            p = predict_prob(s)
            assert np.isfinite(p) and 0.0 <= p <= 1.0

    def test_sigmoid_monotone(self):
        xs = np.linspace(-20, 20, 2001)
        assert np.all(np.diff(predict_prob(xs)) > 0)


class TestLoss:
    def test_all_half_gives_ln2(self):
        assert loss(np.full(10, 0.5), np.r_[np.ones(5), np.zeros(5)]) == \
            pytest.approx(math.log(2.0), rel=1e-12)

    def test_perfect_predictions_near_zero(self):
        eps = 1e-9
        val = loss(np.array([1 - eps, eps]), np.array([1.0, 0.0]))
        assert 0 <= val < 1e-8

    def test_hand_value(self):
        val = loss(np.array([0.9, 0.2]), np.array([1.0, 0.0]))
        assert val == pytest.approx(-0.5 * (math.log(0.9) + math.log(0.8)), rel=1e-12)
        assert val == pytest.approx(0.1643, abs=5e-5)

    def test_nonnegative(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            p = rng.uniform(1e-6, 1 - 1e-6, size=20)
            y = rng.integers(0, 2, size=20).astype(float)
            assert loss(p, y) >= 0.0


class TestBackward:
    def test_score_gradient_analytic_form(self):
        """d score / d h_u = r ⊙ h_v via a 1-triplet, depth-1 block."""
        g, c0, c1 = tiny_graph()
        params = init_params(g, d=2, depth=1, seed=0)
        params.self_weights[0][:] = np.eye(2)
        for key in params.neigh_weights[0]:
            params.neigh_weights[0][key][:] = 0.0
        params.embeddings[c0] = [0.0, 0.0]
        params.embeddings[c1] = [2.0, 3.0]
        params.rel_vectors[Relation.BUYS_FROM][:] = [1.0, 1.0]
        block = sample_block(g, [c0, c1], 1, 1, np.random.default_rng(0))
        attach_triplets(block, [Triplet(c0, Relation.BUYS_FROM, c1)], [])
        _, trace = forward_batch(block, params)
        grads = backward(trace, params)
        # loss = -log sigmoid(s); dL/ds = p - 1 = -0.5 at s = 0; X[c0] feeds h_u
        # only through the identity self path, so dL/dX[c0] = -0.5 * (r ⊙ h_v)
        assert np.allclose(grads["X"][c0], -0.5 * np.array([2.0, 3.0]))

    def test_unreachable_parameters_get_zero_gradient(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, n_edges=60).freeze()
        params = init_params(g, d=4, depth=2, seed=1)
        block = batch_block(g, np.random.default_rng(6), n_pos=3, fanout=2)
        _, trace = forward_batch(block, params)
        grads = backward(trace, params)
        touched = set(block.frontiers[0])
        untouched = [i for i in range(g.num_entities) if i not in touched]
        assert untouched, "test graph too small to leave untouched rows"
        assert np.all(grads["X"][untouched] == 0.0)

    def test_finite_difference_small_instance(self):
        """Every coordinate of every tensor vs central differences."""
        rng = np.random.default_rng(7)
        g = random_graph(rng, n_companies=8, n_products=6, n_caps=3, n_certs=2,
                         n_countries=2, n_edges=60).freeze()
        params = init_params(g, d=3, depth=2, seed=2)
        block = batch_block(g, np.random.default_rng(8), n_pos=6, fanout=3)
        labels = block.labels()
        _, trace = forward_batch(block, params)
        analytic = backward(trace, params)
        fd = finite_difference_grads(
            lambda: forward_batch(block, params, labels)[0], params.tensors())
        worst, name = max_relative_error(analytic, fd)
        assert worst < 1e-4, f"worst relative error {worst:.2e} in {name}"

    def test_finite_difference_with_unit_norm(self):
        rng = np.random.default_rng(9)
        g = random_graph(rng, n_companies=6, n_products=5, n_caps=2, n_certs=2,
                         n_countries=2, n_edges=40).freeze()
        params = init_params(g, d=3, depth=1, seed=3, unit_norm=True)
        block = batch_block(g, np.random.default_rng(10), n_pos=4, fanout=3, depth=1)
        labels = block.labels()
        _, trace = forward_batch(block, params)
        analytic = backward(trace, params)
        fd = finite_difference_grads(
            lambda: forward_batch(block, params, labels)[0], params.tensors())
        worst, name = max_relative_error(analytic, fd)
        assert worst < 1e-4, f"worst relative error {worst:.2e} in {name}"


class TestOptimizer:
    def one_param_setup(self):
        g = KnowledgeGraph()
        g.add_entity(EntityType.COMPANY, "c")
        g.freeze()
        params = init_params(g, d=1, depth=1, seed=0)
        state = init_optimizer(params, learning_rate=1e-3)
        return params, state

    def test_zero_gradients_leave_params_unchanged(self):
        params, state = self.one_param_setup()
        before = {n: t.copy() for n, t in params.tensors().items()}
        optimizer_step(params, zero_grads(params), state)
        for name, t in params.tensors().items():
            assert np.array_equal(t, before[name])

    def test_first_step_magnitude_is_learning_rate(self):
        params, state = self.one_param_setup()
        grads = zero_grads(params)
        grads["X"][0, 0] = 1.0
        x0 = params.embeddings[0, 0]
        optimizer_step(params, grads, state)
        assert abs(params.embeddings[0, 0] - x0) == pytest.approx(1e-3, rel=1e-6)

    def test_nonfinite_gradient_skips_step(self, caplog):
        params, state = self.one_param_setup()
        grads = zero_grads(params)
        grads["X"][0, 0] = np.nan
        before = params.embeddings.copy()
        with caplog.at_level("WARNING"):
            assert optimizer_step(params, grads, state) is False
        assert np.array_equal(params.embeddings, before)
        assert state.step == 0
        assert "non-finite" in caplog.text

    def test_two_runs_identical_trajectories(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng, n_edges=80).freeze()
        trajectories = []
        for _ in range(2):
            params = init_params(g, d=4, depth=2, seed=4)
            state = init_optimizer(params, learning_rate=1e-2)
            for step_seed in range(5):
                block = batch_block(g, np.random.default_rng(step_seed), n_pos=5,
                                    fanout=3)
                _, trace = forward_batch(block, params)
                optimizer_step(params, backward(trace, params), state)
            trajectories.append({n: t.copy() for n, t in params.tensors().items()})
        for name in trajectories[0]:
            assert np.array_equal(trajectories[0][name], trajectories[1][name])


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        g = random_graph(rng).freeze()
        params = init_params(g, d=6, depth=2, seed=5)
        state = init_optimizer(params)
        state.step = 17
        path = tmp_path / "model.ckpt"
        save_checkpoint(params, state, path)
        loaded, lstate = load_checkpoint(path, graph=g, expect_d=6, expect_depth=2)
        for name, t in params.tensors().items():
            assert np.array_equal(t, loaded.tensors()[name])
        assert lstate.step == 17
        for name in state.first_moment:
            assert np.array_equal(state.first_moment[name], lstate.first_moment[name])

    def test_d_mismatch(self, tmp_path):
        g, *_ = tiny_graph()
        save_checkpoint(init_params(g, d=16, depth=1, seed=0), None, tmp_path / "c.ckpt")
        with pytest.raises(CompatibilityError, match="d=16"):
            load_checkpoint(tmp_path / "c.ckpt", expect_d=32)

    def test_entity_count_mismatch(self, tmp_path):
        g, *_ = tiny_graph()
        save_checkpoint(init_params(g, d=4, depth=1, seed=0), None, tmp_path / "c.ckpt")
        bigger = KnowledgeGraph()
        for i in range(5):
            bigger.add_entity(EntityType.COMPANY, f"x{i}")
        with pytest.raises(CompatibilityError, match="entities"):
            load_checkpoint(tmp_path / "c.ckpt", graph=bigger)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x00\x01binary junk")
        with pytest.raises(CompatibilityError):
            load_checkpoint(path)


class TestNodeEmbeddings:
    def test_covers_all_nodes_deterministically(self):
        rng = np.random.default_rng(13)
        g = random_graph(rng, n_edges=200).freeze()
        params = init_params(g, d=4, depth=2, seed=6)
        a = node_embeddings(g, params, fanout=4, rng=np.random.default_rng(14))
        b = node_embeddings(g, params, fanout=4, rng=np.random.default_rng(14))
        assert a.shape == (g.num_entities, 4)
        assert np.array_equal(a, b)
        assert np.all(np.isfinite(a))

    def test_entity_count_guard(self):
        g, *_ = tiny_graph()
        params = init_params(g, d=4, depth=1, seed=0)
        other = KnowledgeGraph()
        other.add_entity(EntityType.COMPANY, "solo")
        other.freeze()
        with pytest.raises(CompatibilityError):
            node_embeddings(other, params, fanout=2, rng=np.random.default_rng(0))
