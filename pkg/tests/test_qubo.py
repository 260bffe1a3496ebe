import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import direct_residual, random_response, small_instance
from unfoldqubo import (
    BoundsVector,
    CapacityError,
    QuboModel,
    ResponseMatrix,
    UnfoldingError,
    build_objective,
    decode,
    encode,
    estimate_bounds,
    objective_value,
    select_lambda,
)
from unfoldqubo.qubo import bit_length, resolve_lambda


def test_objective_hand_example():
    obj = build_objective(ResponseMatrix.identity(2), [3.0, 4.0], lam=0.0)
    np.testing.assert_array_equal(obj.a, [-6.0, -8.0])
    np.testing.assert_array_equal(obj.B, np.eye(2))
    assert obj.offset == 25.0


def test_objective_without_regularization_is_gram_matrix():
    rng = np.random.default_rng(0)
    R = random_response(rng, 5)
    obj = build_objective(R, rng.uniform(0, 10, 5), lam=0.0)
    np.testing.assert_array_equal(obj.B, 0.5 * ((R.entries.T @ R.entries) + (R.entries.T @ R.entries).T))


def test_perfect_fit_zero_residual():
    n = np.array([3.0, 4.0])
    obj = build_objective(ResponseMatrix.identity(2), n, lam=0.0)
    assert obj.a @ n + n @ n + obj.offset == 0.0
    assert objective_value(obj, n) == -25.0
    assert objective_value(obj, n, include_offset=True) == 0.0
    assert objective_value(obj, [0, 0]) == 0.0


def test_objective_is_positive_semidefinite():
    rng = np.random.default_rng(1)
    for _ in range(20):
        m = int(rng.integers(3, 12))
        obj = build_objective(random_response(rng, m), rng.uniform(0, 100, m), lam=float(rng.uniform(0, 2)))
        w = np.linalg.eigvalsh(obj.B)
        assert w.min() >= -1e-9 * w.max()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.1, 1.0]))
def test_residual_matches_direct_evaluation(seed, lam):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(3, 8))
    R = random_response(rng, m)
    n = rng.poisson(50, m).astype(float)
    obj = build_objective(R, n, lam=lam)
    z = rng.integers(0, 100, m).astype(float)
    ref = direct_residual(R.entries, n, lam, z)
    assert obj.residual(z) == pytest.approx(ref, rel=1e-12, abs=1e-9)
    assert objective_value(obj, z, include_offset=True) == pytest.approx(ref, rel=1e-12, abs=1e-9)


def test_background_is_subtracted():
    obj = build_objective(ResponseMatrix.identity(2), [5.0, 4.0], beta=[2.0, 0.0], lam=0.0)
    np.testing.assert_array_equal(obj.a, [-6.0, -8.0])


def test_objective_validation():
    with pytest.raises(UnfoldingError):
        build_objective(ResponseMatrix.identity(3), [1.0, 2.0, 3.0], lam=-1.0)
    with pytest.raises(UnfoldingError):
        build_objective(ResponseMatrix.identity(3), [1.0, 2.0], lam=0.0)


def test_bounds_examples():
    assert estimate_bounds([100.0], [0.5], 2.0).z_max.tolist() == [400]
    assert estimate_bounds([0.0], [0.5], 2.0).z_max.tolist() == [16]
    n = np.array([3.0, 16.0, 17.0, 250.0])
    np.testing.assert_array_equal(estimate_bounds(n, np.ones(4), 1.0).z_max, np.maximum(16, n))


def test_bounds_validation():
    with pytest.raises(UnfoldingError):
        estimate_bounds([1.0], [0.0])
    with pytest.raises(UnfoldingError):
        estimate_bounds([1.0], [1.0], headroom=0.5)
    with pytest.raises(UnfoldingError):
        BoundsVector(np.array([0]))


@pytest.mark.parametrize("z_max,length", [(1, 1), (2, 2), (3, 2), (4, 3), (5, 3), (7, 3), (8, 4), (1023, 10), (1024, 11)])
def test_bit_length(z_max, length):
    assert bit_length(z_max) == length == max(1, math.ceil(math.log2(z_max + 1)))


def test_encode_precision_vectors():
    obj = build_objective(ResponseMatrix.identity(3), [1.0, 1.0, 1.0], lam=0.0)
    model = encode(obj, BoundsVector(np.array([5, 1, 8])))
    assert [p.tolist() for p in model.precision] == [[1, 2, 4], [1], [1, 2, 4, 8]]
    assert model.bit_offsets.tolist() == [0, 3, 4]
    assert model.nbits == 8


def test_encode_exhaustive_two_bins():
    rng = np.random.default_rng(5)
    R = random_response(rng, 2)
    n = np.array([2.0, 3.0])
    obj = build_objective(R, n, lam=0.0)
    model = encode(obj, BoundsVector(np.array([3, 3])))
    assert model.nbits == 4
    for z in itertools.product(range(4), repeat=2):
        x = model.encode_point(z)
        assert model.energy(x) + model.offset == pytest.approx(direct_residual(R.entries, n, 0.0, np.array(z, float)), rel=1e-12)


def test_encode_capacity():
    obj = build_objective(ResponseMatrix.identity(3), [1.0, 1.0, 1.0], lam=0.0)
    with pytest.raises(CapacityError):
        encode(obj, BoundsVector(np.array([1000, 1000, 1000])), max_bits=20)


def test_q_matrix_convention():
    rng = np.random.default_rng(6)
    R, n = small_instance(rng, 3, [7, 7, 7])
    model = encode(build_objective(R, n, lam=0.1), BoundsVector(np.array([7, 7, 7])))
    np.testing.assert_allclose(model.Q, model.Q.T)
    for _ in range(20):
        x = rng.integers(0, 2, model.nbits)
        assert x @ model.Q @ x == pytest.approx(model.energy(x), rel=1e-12, abs=1e-9)


def test_decode_examples():
    obj = build_objective(ResponseMatrix.identity(2), [1.0, 1.0], lam=0.0)
    model = encode(obj, BoundsVector(np.array([5, 5])))
    assert decode(model, np.zeros(6, dtype=int)).tolist() == [0, 0]
    assert decode(model, [1, 0, 1, 0, 0, 0]).tolist() == [5, 0]
    with pytest.raises(UnfoldingError):
        decode(model, [1, 0])


def test_decode_round_trip_and_clamp():
    obj = build_objective(ResponseMatrix.identity(2), [1.0, 1.0], lam=0.0)
    model = encode(obj, BoundsVector(np.array([5, 2])))
    for z in itertools.product(range(6), range(3)):
        assert decode(model, model.encode_point(z)).tolist() == list(z)
    diag = {}
    assert decode(model, [1, 1, 1, 1, 1], diag).tolist() == [5, 2]
    assert diag["clamped_bins"] == [0, 1]


def test_model_json_round_trip():
    rng = np.random.default_rng(7)
    R, n = small_instance(rng, 3, [3, 7, 1])
    model = encode(build_objective(R, n, lam=1.0), BoundsVector(np.array([3, 7, 1])))
    back = QuboModel.from_dict(model.to_dict())
    for _ in range(20):
        x = rng.integers(0, 2, model.nbits)
        assert back.energy(x) == pytest.approx(model.energy(x), rel=1e-12, abs=1e-12)
    assert back.offset == model.offset


@pytest.mark.parametrize("m", [6, 12, 24, 48])
def test_bit_count_bound(m):
    z_max = np.arange(1, m + 1) * 37
    obj = build_objective(ResponseMatrix.identity(m), np.zeros(m), lam=0.0)
    model = encode(obj, BoundsVector(z_max))
    assert model.nbits <= m * (1 + math.log2(1 + z_max.max()))


def test_select_lambda_respects_budget():
    rng = np.random.default_rng(8)
    R = random_response(rng, 12)
    z = 1000 * np.exp(-0.5 * ((np.arange(12) - 6) / 2.0) ** 2) + 20
    n = rng.poisson(R.entries @ z).astype(float)
    lam = select_lambda(R, n, tau=0.7)
    obj = build_objective(R, n, lam=lam)
    zc = np.linalg.solve(obj.B, -0.5 * obj.a)
    assert obj.residual(zc) - lam * float(np.sum((np.diff(zc, 2)) ** 2)) <= 0.7 * n.sum() * (1 + 1e-9)
    assert select_lambda(R, n, tau=2.0) >= lam


def test_resolve_lambda():
    R = ResponseMatrix.identity(4)
    assert resolve_lambda(0.3, R, [1.0] * 4) == 0.3
    assert resolve_lambda("auto", ResponseMatrix.identity(2), [1.0, 2.0]) == 0.0
    with pytest.raises(UnfoldingError):
        resolve_lambda("big", R, [1.0] * 4)
