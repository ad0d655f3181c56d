import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curveflow.flow_models import FlowModel, eval_b, eval_phi

MODELS = [
    FlowModel.surface_diffusion(),
    FlowModel.willmore(),
    FlowModel.odd_polynomial(0.3, -1.2, 0.05),
    FlowModel.odd_polynomial(-2.0, 0.0, 1.0),
]
models = st.sampled_from(MODELS)
reals = st.floats(min_value=-50, max_value=50, allow_nan=False)
coeffs = st.floats(min_value=-5, max_value=5, allow_nan=False)


def test_surface_diffusion_b_vanishes():
    assert eval_b(FlowModel.surface_diffusion(), 3.7) == 0.0


@pytest.mark.parametrize("k, expected", [(1.0, -0.5), (2.0, -4.0)])
def test_willmore_b(k, expected):
    assert eval_b(FlowModel.willmore(), k) == expected


def test_willmore_phi_at_zero_is_exactly_zero():
    assert eval_phi(FlowModel.willmore(), 0.0) == 0.0


def test_willmore_phi_at_two():
    # 4 - (-8/2)/2
    assert eval_phi(FlowModel.willmore(), 2.0) == 6.0


@pytest.mark.parametrize("k", [-1.0, 0.0, 5.0])
def test_surface_diffusion_phi_is_k_squared(k):
    assert eval_phi(FlowModel.surface_diffusion(), k) == k * k


def test_odd_polynomial_phi_closed_form():
    m = FlowModel.odd_polynomial(1.5, -0.25, 2.0)
    k = 0.7
    assert eval_phi(m, k) == pytest.approx(k**2 - 1.5 + 0.25 * k**2 - 2.0 * k**4, rel=1e-15)
    assert eval_phi(m, 0.0) == -1.5


def test_vectorized_evaluation_matches_scalar():
    k = np.linspace(-3, 3, 13)
    m = FlowModel.willmore()
    assert np.array_equal(m.b(k), np.array([m.b(v) for v in k]))
    assert isinstance(m.phi(1.0), float)


@given(models, reals)
def test_b_is_odd(model, k):
    assert eval_b(model, -k) == -eval_b(model, k)


@given(models, reals)
def test_phi_is_even(model, k):
    assert eval_phi(model, -k) == eval_phi(model, k)


@given(coeffs, coeffs, coeffs)
def test_b_vanishes_at_zero(c1, c3, c5):
    assert eval_b(FlowModel.odd_polynomial(c1, c3, c5), 0.0) == 0.0


@given(coeffs, coeffs, coeffs,
       st.floats(min_value=1e-6, max_value=20).flatmap(lambda a: st.sampled_from([a, -a])))
def test_phi_matches_literal_quotient_away_from_zero(c1, c3, c5, k):
    m = FlowModel.odd_polynomial(c1, c3, c5)
    literal = k * k - eval_b(m, k) / k
    assert abs(eval_phi(m, k) - literal) <= 1e-12 * (1 + k**4)


@pytest.mark.parametrize("model", MODELS)
def test_config_round_trip(model):
    assert FlowModel.from_config(model.to_config()) == model


@pytest.mark.parametrize("bad", ["mean_curvature", {"odd_polynomial": [1, 2]}, {"x": 1}, 3])
def test_from_config_rejects(bad):
    with pytest.raises(ValueError):
        FlowModel.from_config(bad)


def test_config_spellings():
    assert FlowModel.from_config("willmore").c3 == -0.5
    assert FlowModel.from_config({"odd_polynomial": [1, 0, 0]}).b(2.0) == 2.0
    assert math.isclose(FlowModel.from_config("surface_diffusion").phi(3.0), 9.0)
