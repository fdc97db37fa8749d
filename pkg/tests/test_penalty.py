import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parampen.errors import InvalidInputError
from parampen.penalty import (
    ParameterSpace,
    ParametricPenalty,
    barrier_penalty,
    barrier_transform,
    classical_penalty,
    eval_F,
    in_omega_delta,
    l1_term,
    linf_term,
)
from parampen.problemfile import parse_problem_file


@pytest.fixture
def mixed():
    # a = x1 - 1, b1 = x2, b2 = -x1 - 3
    return parse_problem_file("d = 2; box = [-5, 5]; f = x1*x2; eq = [x1 - 1]; ineq = [x2, -x1 - 3]")


def test_l1_and_linf_terms(mixed):
    x = np.array([3.0, 0.5])  # a = 2, b1 = 0.5, b2 = -6
    assert l1_term(mixed, x) == 2.5
    assert linf_term(mixed, x) == 2.0
    assert l1_term(mixed, [1.0, -1.0]) == 0.0
    assert linf_term(mixed, [1.0, -1.0]) == 0.0


class TestExtendedReal:
    def test_lambda_zero_gives_objective_even_where_phi_is_infinite(self, lz_singular):
        # p = 0 at an infeasible point: phi = +inf
        assert lz_singular.phi([0.5], 0.0) == math.inf
        assert eval_F(lz_singular, [0.5], 0.0, 0.0) == 0.5

    def test_infinite_phi_absorbs(self, lz_singular):
        assert eval_F(lz_singular, [0.5], 0.0, 2.0) == math.inf

    def test_finite_value(self, lz_singular):
        # phi = d^2 / p + p with d = 0.5, p = 0.25
        assert eval_F(lz_singular, [0.5], 0.25, 2.0) == pytest.approx(0.5 + 2.0 * (1.0 + 0.25))

    def test_negative_inputs(self, lz_singular):
        with pytest.raises(InvalidInputError):
            lz_singular.F([0.5], 0.1, -1.0)
        with pytest.raises(InvalidInputError):
            lz_singular.phi([0.5], -0.1)

    def test_penalty_value_total(self, lz_singular):
        v = lz_singular.value([1.0], 0.0)
        assert (v.f_part, v.phi_part, v.total(3.0)) == (1.0, 0.0, 1.0)


def test_one_point_space_ignores_p(lianzhang):
    pen = classical_penalty(lianzhang, "l1")
    assert not pen.parametric
    assert pen.phi([0.25], 7.0) == pen.phi([0.25], 0.0) == 0.75
    v, p = pen.inf_phi(np.array([[0.25], [1.5]]))
    assert v.tolist() == [0.75, 0.5] and p.tolist() == [0.0, 0.0]


@pytest.mark.parametrize("kind, expected", [("l1", 0.5), ("linf", 0.5), ("distance", 0.5), ("quadratic", 0.25)])
def test_classical_kinds(lianzhang, kind, expected):
    assert float(classical_penalty(lianzhang, kind).phi([1.5])) == expected


def test_unknown_classical(lianzhang):
    with pytest.raises(InvalidInputError):
        classical_penalty(lianzhang, "cubic")


def test_numerical_inf_fallback(lianzhang):
    # phi(x, p) = (x - 1)^2 / p + p without a closed-form inf: numerical search gives 2|x - 1|
    pen = ParametricPenalty(lianzhang, lambda X, P: np.where(P > 0, (X[..., 0] - 1) ** 2 / np.where(P > 0, P, 1) + P,
                                                             np.where(X[..., 0] == 1, 0.0, np.inf)))
    v, p = pen.inf_phi(np.array([[0.0], [0.5], [1.0]]))
    assert np.allclose(v, [2.0, 1.0, 0.0], rtol=1e-9, atol=1e-12)
    assert np.allclose(p, [1.0, 0.5, 0.0], rtol=1e-4)


class TestOmegaDelta:
    def test_membership(self, lz_singular):
        assert in_omega_delta(lz_singular, [1.0], 0.0, 0.1)
        assert not in_omega_delta(lz_singular, [0.0], 1.0, 0.1)

    def test_delta_positive(self, lz_singular):
        with pytest.raises(InvalidInputError):
            in_omega_delta(lz_singular, [1.0], 0.0, 0.0)


class TestBarrier:
    def test_values(self):
        assert barrier_transform(0.0, 1.0) == 0.0
        assert barrier_transform(0.5, 1.0) == 1.0
        assert barrier_transform(1.0, 1.0) == math.inf

    def test_rejects_negative(self):
        with pytest.raises(InvalidInputError):
            barrier_transform(-0.1, 1.0)
        with pytest.raises(InvalidInputError):
            barrier_transform(0.1, 0.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 10), st.floats(0, 10), st.floats(0.01, 5))
    def test_monotone(self, s, t, delta):
        a, b = sorted((s, t))
        assert barrier_transform(a, delta) <= barrier_transform(b, delta)

    def test_penalty_wrapper(self, lz_singular):
        pen = barrier_penalty(lz_singular, 0.5)
        assert float(pen.phi([1.0], 0.0)) == 0.0
        assert float(pen.phi([0.0], 1.0)) == math.inf
        phi = float(lz_singular.phi([0.9], 0.1))
        assert float(pen.phi([0.9], 0.1)) == pytest.approx(phi / (0.5 - phi))


def test_parameter_space_flags(lz_singular, lianzhang):
    assert lz_singular.parameter_space is ParameterSpace.HALF_LINE
    assert classical_penalty(lianzhang).parameter_space is ParameterSpace.POINT
