import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reluconstruct.metrics import empirical_lipschitz
from reluconstruct.net_core import (
    NetworkShapeError,
    NormBudget,
    ReluNetwork,
    clip_output,
    compose,
    concatenate,
    dense_layers,
    evaluate,
    from_json,
    linear_combine,
    lipschitz_upper,
    norm_kappa,
    relu_identity,
    rescale,
    to_json,
)
from reluconstruct.polynet import square_net_norm

from oracles import straight_line_eval


def random_net(rng, dims, bias_out=True, scale=1.0):
    layers = []
    for i in range(len(dims) - 1):
        A = rng.normal(0, scale, (dims[i + 1], dims[i]))
        b = rng.normal(0, scale, dims[i + 1])
        if i == len(dims) - 2 and not bias_out:
            b = np.zeros(dims[i + 1])
        layers.append((A, b))
    return ReluNetwork(layers)


def test_scalar_relu_examples():
    net = ReluNetwork([(np.eye(1), np.zeros(1)), (np.eye(1), np.zeros(1))])
    assert evaluate(net, [-2.0])[0] == 0.0
    assert evaluate(net, [3.0])[0] == 3.0


def test_evaluate_matches_straight_line_oracle():
    rng = np.random.default_rng(7)
    net = random_net(rng, [3, 5, 4, 2])
    x = rng.normal(size=3)
    np.testing.assert_allclose(evaluate(net, x), straight_line_eval(net.layers, x), atol=1e-12)


def test_dimension_mismatch_rejected():
    net = random_net(np.random.default_rng(0), [3, 4, 1])
    with pytest.raises(NetworkShapeError):
        evaluate(net, np.zeros(2))
    with pytest.raises(NetworkShapeError):
        ReluNetwork([(np.zeros((2, 3)), np.zeros(2)), (np.zeros((1, 3)), np.zeros(1))])
    with pytest.raises(NetworkShapeError):
        ReluNetwork([(np.array([[np.inf]]), np.zeros(1))])


def test_width_depth():
    net = random_net(np.random.default_rng(0), [2, 7, 3, 1])
    assert net.depth == 2 and net.width == 7


def test_kappa_examples():
    net = ReluNetwork([(np.array([[2.0, -1.0]]), np.array([0.5])), (np.array([[1.0]]), np.zeros(1))])
    assert norm_kappa(net) == pytest.approx(3.5)
    zero = ReluNetwork([(np.zeros((3, 2)), np.zeros(3)), (np.zeros((1, 3)), np.zeros(1))])
    assert norm_kappa(zero) == 0.0
    for k in (1, 2, 4, 8, 16, 32, 64):
        assert norm_kappa(square_net_norm(k)) <= 3.0 + 1e-12


def test_norm_budget_cap():
    NormBudget(2.0, 3.0)
    with pytest.raises(ValueError):
        NormBudget(4.0, 3.0)


def test_rescale_examples():
    net = ReluNetwork([(np.array([[2.0, -1.0]]), np.array([0.5])), (np.array([[1.0]]), np.zeros(1))])
    out = rescale(net)
    for A, b in dense_layers(out)[:-1]:
        assert np.max(np.sum(np.abs(np.column_stack([A, b])), axis=1)) <= 1 + 1e-12
    x = np.random.default_rng(0).uniform(-3, 3, (1000, 2))
    np.testing.assert_allclose(evaluate(out, x), evaluate(net, x), atol=1e-9)

    normalized = ReluNetwork([(np.array([[0.5, -0.25]]), np.array([0.1])), (np.array([[2.0]]), np.zeros(1))])
    again = rescale(normalized)
    assert norm_kappa(again) == norm_kappa(normalized)
    np.testing.assert_allclose(evaluate(again, x), evaluate(normalized, x), atol=1e-12)

    rng = np.random.default_rng(3)
    base = random_net(rng, [2, 4, 1], bias_out=False)
    (A0, b0), (A1, b1) = dense_layers(base)
    scaled = ReluNetwork([(10 * A0, 10 * b0), (A1 / 10, b1)])
    np.testing.assert_allclose(evaluate(rescale(scaled), x), evaluate(base, x), atol=1e-9)
    assert norm_kappa(rescale(scaled)) == pytest.approx(norm_kappa(rescale(base)), rel=1e-12)


def test_rescale_kappa_can_change_with_output_bias():
    # Regression for a documented deviation: with b_L ≠ 0, κ = (|A_L| + |b_L|)·Π k_l
    # before rescaling but |A_L|·Π k_l + |b_L| after, so equality fails.
    net = ReluNetwork([(np.array([[2.0]]), np.zeros(1)), (np.array([[1.0]]), np.array([1.0]))])
    assert norm_kappa(net) == pytest.approx(4.0)
    assert norm_kappa(rescale(net)) == pytest.approx(3.0)
    x = np.linspace(-2, 2, 101)
    np.testing.assert_allclose(evaluate(rescale(net), x), evaluate(net, x), atol=1e-12)


def test_compose_examples():
    ident = relu_identity(1)
    assert evaluate(compose(ident, ident), [-1.0])[0] == 0.0
    rng = np.random.default_rng(11)
    inner = random_net(rng, [2, 5, 3])
    outer = random_net(rng, [3, 4, 1])
    x = rng.uniform(-2, 2, (1000, 2))
    np.testing.assert_allclose(evaluate(compose(outer, inner), x), evaluate(outer, evaluate(inner, x)), atol=1e-9)


def test_concatenate_examples():
    rng = np.random.default_rng(5)
    net = random_net(rng, [2, 3, 1])
    both = concatenate(net, net)
    x = rng.uniform(-1, 1, (100, 2))
    out = evaluate(both, x)
    np.testing.assert_allclose(out[:, 0], out[:, 1], atol=1e-12)
    deep = random_net(rng, [2, 3, 3, 3, 3, 3, 1])
    shallow = random_net(rng, [2, 4, 4, 1])
    cat = concatenate(shallow, deep)
    assert cat.depth == 5
    np.testing.assert_allclose(evaluate(cat, x)[:, 0], evaluate(shallow, x).ravel(), rtol=1e-9, atol=1e-12)


def test_linear_combine_examples():
    rng = np.random.default_rng(9)
    a = random_net(rng, [2, 4, 1])
    b = random_net(rng, [2, 3, 3, 1])
    x = rng.uniform(-1, 1, (1000, 2))
    assert np.max(np.abs(evaluate(linear_combine(1, a, -1, a), x))) <= 1e-12
    np.testing.assert_allclose(evaluate(linear_combine(2, a, 3, b), x),
                               2 * evaluate(a, x) + 3 * evaluate(b, x), atol=1e-12)


def test_clip_output_examples():
    const = ReluNetwork([(np.zeros((1, 1)), np.zeros(1)), (np.zeros((1, 1)), np.array([5.0]))])
    assert evaluate(clip_output(const, 1.0), [0.3])[0] == pytest.approx(1.0)
    ident = ReluNetwork([(np.array([[1.0], [-1.0]]), np.zeros(2)), (np.array([[1.0, -1.0]]), np.zeros(1))])
    assert evaluate(clip_output(ident, 2.0), [-3.0])[0] == pytest.approx(-2.0)
    rng = np.random.default_rng(2)
    net = random_net(rng, [3, 6, 2], scale=2.0)
    x = rng.uniform(-2, 2, (10_000, 3))
    raw = evaluate(net, x)
    clipped = evaluate(clip_output(net, 1.0), x)
    assert np.max(np.abs(clipped)) <= 1.0 + 1e-12
    inside = np.abs(raw) <= 1
    np.testing.assert_allclose(clipped[inside], raw[inside], atol=1e-12)


def test_lipschitz_upper_examples():
    ident = relu_identity(1)
    assert lipschitz_upper(ident) == 1.0
    assert lipschitz_upper(ReluNetwork([(np.array([[3.0, -4.0]]), np.zeros(1))])) == 7.0
    rng = np.random.default_rng(1)
    for _ in range(100):
        net = random_net(rng, [2, 5, 3, 1])
        assert empirical_lipschitz(net, ([-1, -1], [1, 1]), 1000, 0) <= lipschitz_upper(net) * (1 + 1e-9)


def test_json_round_trip_bit_exact():
    rng = np.random.default_rng(4)
    net = random_net(rng, [3, 7, 2])
    back = from_json(to_json(net))
    for (A, b), (A2, b2) in zip(dense_layers(net), dense_layers(back)):
        assert np.array_equal(A, A2) and np.array_equal(b, b2)
    data = json.loads(to_json(net))
    assert set(data) == {"input_dim", "output_dim", "layers"}


# ---------------------------------------------------------------- properties

dims_strategy = st.lists(st.integers(1, 5), min_size=2, max_size=4)


@given(st.integers(0, 2 ** 31), dims_strategy)
def test_rescale_preserves_function(seed, dims):
    rng = np.random.default_rng(seed)
    net = random_net(rng, [2] + dims + [1], scale=3.0)
    x = rng.uniform(-2, 2, (50, 2))
    ref = evaluate(net, x)
    np.testing.assert_allclose(evaluate(rescale(net), x), ref, rtol=1e-9, atol=1e-9 * max(1.0, np.max(np.abs(ref))))


@given(st.integers(0, 2 ** 31), dims_strategy)
def test_rescale_keeps_kappa_without_output_bias(seed, dims):
    rng = np.random.default_rng(seed)
    net = random_net(rng, [2] + dims + [1], bias_out=False, scale=3.0)
    assert norm_kappa(rescale(net)) == pytest.approx(norm_kappa(net), rel=1e-12)


@given(st.integers(0, 2 ** 31))
def test_compose_accounting(seed):
    rng = np.random.default_rng(seed)
    inner = random_net(rng, [2, int(rng.integers(1, 6)), 3])
    outer = random_net(rng, [3, int(rng.integers(1, 6)), int(rng.integers(1, 6)), 1])
    net = compose(outer, inner)
    assert net.depth == inner.depth + outer.depth
    assert net.width <= max(inner.width, outer.width)
    assert norm_kappa(net) <= norm_kappa(outer) * max(norm_kappa(inner), 1.0) * (1 + 1e-12)


@given(st.integers(0, 2 ** 31))
def test_concatenate_accounting(seed):
    rng = np.random.default_rng(seed)
    a = random_net(rng, [2] + [int(rng.integers(1, 5))] * int(rng.integers(1, 4)) + [1])
    b = random_net(rng, [2] + [int(rng.integers(1, 5))] * int(rng.integers(1, 4)) + [2])
    net = concatenate(a, b)
    x = rng.uniform(-1, 1, (30, 2))
    out = evaluate(net, x)
    np.testing.assert_allclose(out[:, :1], evaluate(a, x), rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(out[:, 1:], evaluate(b, x), rtol=1e-9, atol=1e-10)
    assert net.width <= 2 * a.width + 2 * b.width  # identity padding uses 2 neurons per channel
    assert norm_kappa(net) <= max(norm_kappa(a), norm_kappa(b)) * (1 + 1e-12)


@given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_combine_kappa(seed, c1, c2):
    rng = np.random.default_rng(seed)
    a = random_net(rng, [2, 3, 1])
    b = random_net(rng, [2, 4, 4, 1])
    net = linear_combine(c1, a, c2, b)
    assert norm_kappa(net) <= (abs(c1) * norm_kappa(a) + abs(c2) * norm_kappa(b)) * (1 + 1e-12) + 1e-12


@given(st.integers(0, 2 ** 31), st.floats(0.01, 100))
def test_positive_homogeneity(seed, c):
    rng = np.random.default_rng(seed)
    A0 = rng.normal(size=(4, 2))
    A1 = rng.normal(size=(1, 4))
    net = ReluNetwork([(A0, np.zeros(4)), (A1, np.zeros(1))])
    scaled = ReluNetwork([(c * A0, np.zeros(4)), (A1 / c, np.zeros(1))])
    x = rng.normal(size=(20, 2))
    np.testing.assert_allclose(evaluate(scaled, x), evaluate(net, x), rtol=1e-9, atol=1e-12)


def test_concatenate_kappa_equals_max_after_rescale():
    rng = np.random.default_rng(21)
    for _ in range(100):
        a = rescale(random_net(rng, [2, 3, 1], bias_out=False))
        b = rescale(random_net(rng, [2, 4, 4, 1], bias_out=False))
        expected = max(norm_kappa(a), norm_kappa(b))
        assert norm_kappa(concatenate(a, b)) == pytest.approx(expected, rel=1e-12)
