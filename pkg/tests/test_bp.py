import numpy as np
import pytest

from spinglass import bp
from spinglass.ensembles import Seed, sample_potentials, sample_tree
from spinglass.errors import InvalidInputError, ResourceLimitError


def random_tree_model(seed_label: str, n: int, q: int) -> bp.GraphicalModel:
    seed = Seed(99, seed_label)
    edges = sample_tree(n, seed.child("edges"))
    pots = sample_potentials(edges, q, seed.child("pots"))
    return bp.GraphicalModel(num_vertices=n, alphabet=q, potentials=pots)


def test_uniform_potentials_stay_uniform():
    model = bp.GraphicalModel(3, 2, {(0, 1): np.ones((2, 2)), (1, 2): np.ones((2, 2))})
    out = bp.bp_step(model, bp.uniform_messages(model))
    assert np.allclose(out.values, 0.5)
    beliefs = bp.bp_marginals(model, out)
    assert np.allclose(beliefs, 0.5)


def test_isolated_edge_messages_uniform():
    model = bp.GraphicalModel(2, 3, {(0, 1): np.ones((3, 3)) + np.diag([1.0, 0.5, 0.2])})
    out = bp.bp_step(model, bp.uniform_messages(model))
    # the neighborhood minus the target is empty on both directions
    assert np.allclose(out.values, 1 / 3)


def test_star_graph_one_sweep_hand_oracle():
    # star with center 0 and leaves 1..3: after one sweep from uniform,
    # the leaf-to-center message stays uniform and center-to-leaf k is
    # the product of psi-weighted uniform sums over the other leaves
    q = 2
    rng = Seed(1, "star").rng()
    pots = {(0, k): np.exp(rng.normal(size=(q, q))) for k in (1, 2, 3)}
    model = bp.GraphicalModel(4, q, pots)
    out = bp.bp_step(model, bp.uniform_messages(model))
    for leaf in (1, 2, 3):
        msg = out.values[model.dir_index[(leaf, 0)]]
        assert np.allclose(msg, 0.5)
        expected = np.ones(q)
        for other in (1, 2, 3):
            if other != leaf:
                expected *= model.table(0, other) @ np.full(q, 0.5)
        expected /= expected.sum()
        assert np.allclose(out.values[model.dir_index[(0, leaf)]], expected)


def test_tree_converges_within_diameter():
    model = random_tree_model("diam", 12, 3)
    d = bp.tree_diameter(model)
    msgs, converged, iters = bp.run_bp(model, max_iters=d + 1, tol=1e-13)
    assert converged and iters <= d + 1


def test_tree_exactness_sample():
    for trial in range(10):
        seed = Seed(123, f"ex/{trial}")
        n = int(seed.child("n").rng().integers(2, 13))
        q = int(seed.child("q").rng().integers(2, 4))
        model = random_tree_model(f"ex/{trial}/m{n}", n, q)
        msgs, _, _ = bp.run_bp(model, max_iters=50, tol=1e-14)
        beliefs = bp.bp_marginals(model, msgs)
        exact = bp.exact_marginals(model)
        assert np.max(np.abs(beliefs - exact)) <= 1e-10


def test_chain_transfer_matrix():
    rng = Seed(5, "chain").rng()
    t1 = np.exp(rng.normal(size=(2, 2)))
    t2 = np.exp(rng.normal(size=(2, 2)))
    model = bp.GraphicalModel(3, 2, {(0, 1): t1, (1, 2): t2})
    msgs, _, _ = bp.run_bp(model, max_iters=10, tol=1e-14)
    beliefs = bp.bp_marginals(model, msgs)
    w0 = t1 @ (t2 @ np.ones(2))
    assert np.allclose(beliefs[0], w0 / w0.sum(), atol=1e-12)
    w1 = (t1.T @ np.ones(2)) * (t2 @ np.ones(2))
    assert np.allclose(beliefs[1], w1 / w1.sum(), atol=1e-12)


def test_four_cycle_with_damping():
    rng = Seed(3, "cyc").rng()
    pots = {e: np.exp(0.3 * rng.normal(size=(2, 2))) for e in [(0, 1), (1, 2), (2, 3), (0, 3)]}
    model = bp.GraphicalModel(4, 2, pots)
    msgs, converged, _ = bp.run_bp(model, max_iters=500, tol=1e-12, damping=0.5)
    assert converged
    assert msgs.max_normalization_error() < 1e-12


def test_tol_infinite_returns_after_one_sweep():
    model = random_tree_model("one", 6, 2)
    _, converged, iters = bp.run_bp(model, max_iters=50, tol=np.inf)
    assert converged and iters == 1


def test_normalization_preserved():
    model = random_tree_model("norm", 10, 3)
    msgs = bp.uniform_messages(model)
    for _ in range(5):
        msgs = bp.bp_step(model, msgs)
        assert msgs.max_normalization_error() <= 1e-12


def test_permutation_equivariance():
    model = random_tree_model("perm", 8, 3)
    msgs, _, _ = bp.run_bp(model, max_iters=40, tol=1e-14)
    beliefs = bp.bp_marginals(model, msgs)

    perm = list(Seed(7, "perm/pi").rng().permutation(8))
    pots2 = {}
    for (i, j), t in model.potentials.items():
        a, b = perm[i], perm[j]
        pots2[(a, b)] = t if a < b else None
        if a > b:
            pots2.pop((a, b))
            pots2[(b, a)] = t.T
        elif a < b:
            pots2[(a, b)] = t
    model2 = bp.GraphicalModel(8, 3, pots2)
    msgs2, _, _ = bp.run_bp(model2, max_iters=40, tol=1e-14)
    beliefs2 = bp.bp_marginals(model2, msgs2)
    for v in range(8):
        assert np.allclose(beliefs[v], beliefs2[perm[v]], atol=1e-12)


def test_exact_marginals_small_cases():
    single = bp.GraphicalModel(1, 3, {})
    assert np.allclose(bp.exact_marginals(single), 1 / 3)
    sym = bp.GraphicalModel(2, 2, {(0, 1): np.array([[2.0, 1.0], [1.0, 2.0]])})
    assert np.allclose(bp.exact_marginals(sym), 0.5)
    with pytest.raises(ResourceLimitError):
        bp.exact_marginals(random_tree_model("big", 9, 10))


def test_empty_graph_uniform_beliefs():
    model = bp.GraphicalModel(4, 3, {})
    msgs, converged, _ = bp.run_bp(model, max_iters=5, tol=1e-12)
    beliefs = bp.bp_marginals(model, msgs)
    assert np.allclose(beliefs, 1 / 3)


def test_model_file_roundtrip():
    model = random_tree_model("io", 7, 3)
    text = bp.write_model(model)
    back = bp.read_model(text)
    assert back.num_vertices == 7 and back.alphabet == 3
    assert back.edges == model.edges
    for e in model.edges:
        assert np.allclose(back.potentials[e], model.potentials[e])
    with pytest.raises(InvalidInputError):
        bp.read_model("")
    with pytest.raises(InvalidInputError):
        bp.read_model("2 2\n0 1 1.0 2.0")  # wrong field count


def test_model_validation():
    with pytest.raises(InvalidInputError):
        bp.GraphicalModel(2, 2, {(0, 0): np.ones((2, 2))})
    with pytest.raises(InvalidInputError):
        bp.GraphicalModel(2, 2, {(0, 1): np.zeros((2, 2))})
    with pytest.raises(InvalidInputError):
        bp.GraphicalModel(2, 2, {(0, 3): np.ones((2, 2))})
    # orientation bookkeeping: a (j, i) table is the transpose of (i, j)
    t = np.array([[1.0, 2.0], [3.0, 4.0]])
    m = bp.GraphicalModel(2, 2, {(1, 0): t})
    assert np.allclose(m.potentials[(0, 1)], t.T)
    assert np.allclose(m.table(1, 0), t)
