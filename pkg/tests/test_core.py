import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fistalab import (
    CompositeProblem,
    CountedProblem,
    linearize_f,
    make_convex_qp,
    make_nonconvex_qp,
    objective_value,
    sample_feasible,
)
from fistalab.core import add, as_vector, axpy, dot, norm2, scale


def finite_vec(n, lo=-1e3, hi=1e3):
    return arrays(np.float64, (n,), elements=st.floats(lo, hi, allow_nan=False))


def quad_problem(dim, f, grad, L, h_value=None, h_prox=None):
    """Tiny problem wrapper with a [-1, 1]^dim box default for h."""
    if h_value is None:
        h_value = lambda y: 0.0 if np.all(np.abs(y) <= 1.0 + 1e-12) else math.inf
    if h_prox is None:
        h_prox = lambda z, t: np.clip(z, -1.0, 1.0)
    return CompositeProblem(dim=dim, smooth_value=f, smooth_grad=grad,
                            h_value=h_value, h_prox=h_prox,
                            lipschitz_L=L, domain_bound_C=float(math.sqrt(dim)))


# --- vector helpers -----------------------------------------------------

def test_vec_op_values():
    assert dot(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0
    assert norm2(np.array([3.0, 4.0])) == 5.0
    np.testing.assert_array_equal(scale(2.0, np.array([1.0, -1.0])), [2.0, -2.0])
    np.testing.assert_array_equal(add(np.array([1.0, 2.0]), np.array([3.0, 4.0])), [4.0, 6.0])
    np.testing.assert_array_equal(axpy(2.0, np.array([1.0, 0.0]), np.array([0.0, 1.0])), [2.0, 1.0])


def test_vec_op_dimension_mismatch():
    with pytest.raises(ValueError):
        dot(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        add(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        axpy(1.0, np.zeros(2), np.zeros(3))


def test_as_vector_rejects_bad_input():
    with pytest.raises(ValueError):
        as_vector(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        as_vector(np.array([1.0, np.inf]))
    with pytest.raises(ValueError):
        as_vector(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        as_vector(np.zeros(3), dim=2)
    assert as_vector(1.5).shape == (1,)


@given(a=finite_vec(5), b=finite_vec(5), c=finite_vec(5))
@settings(max_examples=200, deadline=None)
def test_triangle_identity(a, b, c):
    # ||a-b||^2 - 2<a-b, a-c> + ||a-c||^2 == ||b-c||^2, up to rounding on the
    # largest intermediate term
    lhs = norm2(a - b) ** 2 - 2.0 * dot(a - b, a - c) + norm2(a - c) ** 2
    rhs = norm2(b - c) ** 2
    scale_ = max(norm2(a - b) ** 2, norm2(a - c) ** 2, rhs, 1.0)
    assert abs(lhs - rhs) <= 1e-12 * scale_


# --- linearization and objective ---------------------------------------

def half_sq_norm(dim):
    return quad_problem(dim, lambda y: 0.5 * float(y @ y), lambda y: y.copy(), 1.0)


def test_linearize_examples():
    p = half_sq_norm(2)
    u = np.array([1.0, 0.0])
    assert linearize_f(p, u, u) == 0.5  # linearization at the base point is f itself

    p1 = half_sq_norm(1)
    assert linearize_f(p1, np.array([2.0]), np.array([1.0])) == 1.5

    neg = quad_problem(1, lambda y: -0.5 * float(y @ y), lambda y: -y, 1.0)
    # f(0) = 0 lies below this value 0.5: the linearization is not a lower
    # bound, which is exactly what nonconvexity means
    assert linearize_f(neg, np.array([0.0]), np.array([1.0])) == 0.5


def test_linearize_dimension_mismatch():
    p = half_sq_norm(2)
    with pytest.raises(ValueError):
        linearize_f(p, np.zeros(3), np.zeros(2))


@given(u=finite_vec(4, -10, 10))
@settings(max_examples=100, deadline=None)
def test_linearize_at_same_point_is_exact(u):
    p = half_sq_norm(4)
    assert linearize_f(p, u, u) == p.smooth_value(u)


@pytest.mark.parametrize("maker,kwargs", [
    (make_convex_qp, {}),
    (make_nonconvex_qp, {"negfrac": 0.3}),
])
def test_lipschitz_envelope_on_instances(maker, kwargs, rng):
    p, inst = maker(6, 42, **kwargs)
    pts = sample_feasible(inst, rng, 60)
    for i in range(0, 60, 2):
        u1, u2 = pts[i], pts[i + 1]
        gap = abs(p.smooth_value(u1) - linearize_f(p, u1, u2))
        assert gap <= 0.5 * p.lipschitz_L * norm2(u1 - u2) ** 2 + 1e-9


def test_objective_value_examples():
    p = half_sq_norm(1)
    assert objective_value(p, np.array([0.5])) == 0.125
    assert objective_value(p, np.array([2.0])) == math.inf

    neg = quad_problem(1, lambda y: -0.5 * float(y @ y), lambda y: -y, 1.0)
    assert objective_value(neg, np.array([1.0])) == -0.5


def test_problem_validation():
    f = lambda y: 0.0
    g = lambda y: np.zeros(2)
    h = lambda y: 0.0
    pr = lambda z, t: z
    with pytest.raises(ValueError):
        CompositeProblem(2, f, g, h, pr, lipschitz_L=0.0, domain_bound_C=1.0)
    with pytest.raises(ValueError):
        CompositeProblem(2, f, g, h, pr, lipschitz_L=1.0, domain_bound_C=0.0)
    with pytest.raises(ValueError):
        CompositeProblem(2, f, g, h, pr, lipschitz_L=1.0, domain_bound_C=1.0, known_m=2.0)
    with pytest.raises(ValueError):
        CompositeProblem(0, f, g, h, pr, lipschitz_L=1.0, domain_bound_C=1.0)


def test_counted_problem_counts_and_validates():
    p = half_sq_norm(2)
    cp = CountedProblem(p)
    y = np.array([0.25, 0.0])
    cp.f(y)
    cp.grad(y)
    cp.prox(np.array([2.0, 0.0]), 0.5)
    assert cp.counters.f_evals == 1
    assert cp.counters.grad_evals == 1
    assert cp.counters.prox_evals == 1
    # identity projection is free: no oracle, no count
    out = cp.project(y)
    assert out is y
    assert cp.counters.proj_evals == 0

    snap = cp.counters.snapshot()
    cp.grad(y)
    assert cp.counters.grad_evals == snap.grad_evals + 1

    with pytest.raises(ValueError):
        cp.prox(y, 0.0)


def test_counted_problem_flags_bad_oracles():
    from fistalab import OracleError

    bad = quad_problem(1, lambda y: float("nan"), lambda y: np.array([np.inf]), 1.0)
    cp = CountedProblem(bad)
    with pytest.raises(OracleError):
        cp.f(np.zeros(1))
    with pytest.raises(OracleError):
        cp.grad(np.zeros(1))


def test_counted_projection_idempotent_and_counted():
    box_proj = lambda x: np.clip(x, -1.0, 1.0)
    p = quad_problem(2, lambda y: 0.0, lambda y: np.zeros(2), 1.0)
    p = CompositeProblem(**{**p.__dict__, "omega_project": box_proj})
    cp = CountedProblem(p)
    x = np.array([3.0, 0.2])
    px = cp.project(x)
    np.testing.assert_array_equal(px, [1.0, 0.2])
    np.testing.assert_array_equal(cp.project(px), px)
    assert cp.counters.proj_evals == 2
