import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_model
from gradcheck import check_gradient, random_active_instance
from oracles import central_differences, naive_correlation, naive_score
from scene_kge.models import (
    Algorithm,
    ModelConfig,
    circular_correlation,
    circular_correlation_naive,
    loss_and_grad,
    score,
)
from scene_kge.train import init_model
from scene_kge.kg import parse_triples


def test_transe_exact_translation():
    m = make_model("transe", [[0, 0], [1, 1]], [[1, 1]])
    assert score(m, (0, 0, 1)) == 0.0


def test_transe_l2_hand_value():
    m = make_model("transe", [[1, 0], [0, 0]], [[0, 1]])
    assert score(m, (0, 0, 1)) == pytest.approx(-math.sqrt(2), abs=1e-15)


def test_transe_l1():
    m = make_model("transe", [[1, 0], [0, 0]], [[0, 1]], transe_norm="L1")
    assert score(m, (0, 0, 1)) == -2.0


def test_rescal_identity_form():
    m = make_model("rescal", [[1, 0]], [np.eye(2)])
    assert score(m, (0, 0, 0)) == 1.0


def test_rescal_picks_off_diagonal():
    m = make_model("rescal", [[1, 0], [0, 1]], [[[0, 1], [0, 0]]])
    assert score(m, (0, 0, 1)) == 1.0


def test_hole_delta_head_is_identity():
    rng = np.random.default_rng(1)
    t, r = rng.normal(size=5), rng.normal(size=5)
    m = make_model("hole", [np.eye(5)[0], t], [r])
    assert score(m, (0, 0, 1)) == pytest.approx(float(r @ t), abs=1e-12)


def test_score_id_out_of_range():
    m = make_model("transe", [[0, 0]], [[1, 1]])
    with pytest.raises(IndexError):
        score(m, (0, 0, 1))
    with pytest.raises(IndexError):
        score(m, (0, 1, 0))


def test_correlation_hand_values():
    np.testing.assert_allclose(circular_correlation([1, 0], [3.5, -2]), [3.5, -2], atol=1e-15)
    np.testing.assert_allclose(circular_correlation([1, 2], [3, 4]), [11, 10], atol=1e-12)
    np.testing.assert_allclose(circular_correlation_naive([1, 2], [3, 4]), [11, 10])


def test_correlation_length_mismatch():
    with pytest.raises(ValueError):
        circular_correlation([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        circular_correlation_naive([1, 2], [1, 2, 3])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 16).flatmap(lambda d: st.tuples(
    arrays(np.float64, d, elements=st.floats(-10, 10)),
    arrays(np.float64, d, elements=st.floats(-10, 10)),
)))
def test_fast_correlation_matches_definition(pair):
    a, b = pair
    np.testing.assert_allclose(circular_correlation(a, b), naive_correlation(a, b), atol=1e-9, rtol=0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-3, 3)), st.floats(0.1, 5))
def test_transe_monotone_in_residual(vecs, shrink):
    h, r, t = vecs
    m = make_model("transe", [h, t], [r])
    # moving t toward h + r never lowers the score
    closer = make_model("transe", [h, t + (h + r - t) * min(shrink, 1.0)], [r])
    assert score(closer, (0, 0, 1)) >= score(m, (0, 0, 1)) - 1e-12
    assert score(m, (0, 0, 1)) <= 0.0


def test_hinge_inactive_gives_zero_gradient():
    m = make_model("transe", [[0, 0], [1, 1], [5, 5]], [[1, 1]])
    loss, grad = loss_and_grad(m, (0, 0, 1), (0, 0, 2), margin=1.0)
    assert loss == 0.0
    assert grad.is_zero()
    assert set(grad.entity_rows) == {0, 1, 2}
    assert set(grad.relation_rows) == {0}


def test_margin_must_be_positive():
    m = make_model("transe", [[0, 0], [1, 1]], [[1, 1]])
    with pytest.raises(ValueError):
        loss_and_grad(m, (0, 0, 1), (1, 0, 1), margin=0.0)


@pytest.mark.parametrize("algo", ["TransE", "RESCAL", "HolE"])
def test_gradient_matches_finite_differences(algo):
    rng = np.random.default_rng(7)
    errs = [check_gradient(algo, rng) for _ in range(20)]
    assert max(errs) < 1e-4


@pytest.mark.parametrize("algo", ["TransE", "RESCAL", "HolE"])
def test_logistic_loss_gradient(algo):
    rng = np.random.default_rng(3)
    from scene_kge.models import _softplus

    for _ in range(5):
        E, R, pos, neg = random_active_instance(algo, rng)
        model = make_model(algo, E, R)
        loss, grad = loss_and_grad(model, pos, neg, 1.0, loss="logistic")

        def fn(Ep, Rp):
            return float(_softplus(-naive_score(algo, Ep, Rp, pos)) + _softplus(naive_score(algo, Ep, Rp, neg)))

        assert loss == pytest.approx(fn(E, R), rel=1e-10)
        fd_e, fd_r = central_differences(fn, E, R, sorted(grad.entity_rows), sorted(grad.relation_rows))
        for k in fd_e:
            np.testing.assert_allclose(grad.entity_rows[k], fd_e[k], atol=1e-6)
        for k in fd_r:
            np.testing.assert_allclose(grad.relation_rows[k], fd_r[k], atol=1e-6)


def test_gradient_touches_only_involved_rows():
    rng = np.random.default_rng(0)
    E, R, pos, neg = random_active_instance("HolE", rng, n=10, m=4)
    _, grad = loss_and_grad(make_model("HolE", E, R), pos, neg, 1.0)
    assert set(grad.entity_rows) == {pos[0], pos[2], neg[0], neg[2]}
    assert set(grad.relation_rows) == {pos[1]}


@pytest.mark.parametrize("d", [2, 4, 8])
def test_parameter_counts_follow_complexity(d):
    kg = parse_triples("a\tr\tb\nb\ts\tc\n")
    n, m = 3, 2
    counts = {algo: init_model(ModelConfig(algo, d), kg).parameter_count() for algo in Algorithm}
    assert counts[Algorithm.TRANSE] == n * d + m * d
    assert counts[Algorithm.HOLE] == n * d + m * d
    assert counts[Algorithm.RESCAL] == n * d + m * d * d


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig("transe", 0)
    with pytest.raises(ValueError):
        ModelConfig("distmult", 4)
    with pytest.raises(ValueError):
        ModelConfig("transe", 4, transe_norm="L3")
    assert ModelConfig("HOLE", 4).algorithm is Algorithm.HOLE
