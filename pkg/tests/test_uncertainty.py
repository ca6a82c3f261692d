import numpy as np
import pytest

from robustfo.errors import DegenerateInputError, InvalidArgumentError
from robustfo.problems import nominal_objective
from robustfo.uncertainty import (UncertaintySet, compact_form, delta_h_from_delta_m,
                                  perturb_dirichlet, perturb_uniform, sample_uncertainty,
                                  structured_worst_case_value, worst_case_maximizer,
                                  worst_case_value)

from conftest import random_spd


def _instance(rng, m=2, p=3, lam=2.0):
    R = random_spd(rng, m)
    Q = random_spd(rng, p)
    H = rng.standard_normal((p, m))
    d, r = rng.standard_normal(p), rng.standard_normal(p)
    return R, Q, lam, H, d, r


def test_compact_form_reproduces_objective(rng):
    R, Q, lam, H, d, r = _instance(rng)
    cf = compact_form(R, Q, lam, H, d, r)
    u = rng.standard_normal(2)
    assert np.linalg.norm(cf.residual(u)) ** 2 == pytest.approx(
        nominal_objective(u, H, d, r, R, Q, lam), rel=1e-12)


def test_structured_perturbation_is_sensitivity_error(rng):
    R, Q, lam, H, d, r = _instance(rng)
    dm = sample_uncertainty(UncertaintySet.gen(0.5), 2, 3, seed=1)
    dh = delta_h_from_delta_m(dm, Q, lam, 2)
    cf = compact_form(R, Q, lam, H, d, r)
    u = rng.standard_normal(2)
    lhs = np.linalg.norm((cf.M + dm) @ u + cf.eps) ** 2
    assert lhs == pytest.approx(nominal_objective(u, H + dh, d, r, R, Q, lam), rel=1e-10)


@pytest.mark.parametrize("kind,rho", [("gen", 0.7), ("col", [0.3, 1.1])])
def test_worst_case_dominates_samples_and_is_attained(rng, kind, rho):
    R, Q, lam, H, d, r = _instance(rng)
    cf = compact_form(R, Q, lam, H, d, r)
    uset = UncertaintySet(kind, rho)
    u = rng.standard_normal(2)
    value = worst_case_value(cf, u, uset)
    draws = sample_uncertainty(uset, 2, 3, boundary=True, seed=3, structured=False, size=5000)
    sampled = np.linalg.norm(np.einsum("kij,j->ki", cf.M + draws, u) + cf.eps, axis=1)
    assert sampled.max() <= value + 1e-12
    dm = worst_case_maximizer(cf, u, uset)
    assert uset.contains(dm)
    assert np.linalg.norm((cf.M + dm) @ u + cf.eps) == pytest.approx(value, abs=1e-9)


def test_structured_supremum_is_strictly_smaller(rng):
    R, Q, lam, H, d, r = _instance(rng)
    cf = compact_form(R, Q, lam, H, d, r)
    uset = UncertaintySet.gen(0.5)
    u = rng.standard_normal(2)
    full = worst_case_value(cf, u, uset)
    structured = structured_worst_case_value(cf, u, uset)
    assert structured < full - 1e-6
    dm = worst_case_maximizer(cf, u, uset, structured=True)
    assert np.allclose(dm[:2], 0)
    assert np.linalg.norm((cf.M + dm) @ u + cf.eps) == pytest.approx(structured, abs=1e-10)
    draws = sample_uncertainty(uset, 2, 3, boundary=True, seed=4, size=5000)
    sampled = np.linalg.norm(np.einsum("kij,j->ki", cf.M + draws, u) + cf.eps, axis=1)
    assert sampled.max() <= structured + 1e-12


def test_structured_equals_full_when_r_part_vanishes(rng):
    _, Q, lam, H, d, r = _instance(rng)
    cf = compact_form(np.zeros((2, 2)), Q, lam, H, d, r)
    u = rng.standard_normal(2)
    uset = UncertaintySet.col([0.2, 0.4])
    assert structured_worst_case_value(cf, u, uset) == pytest.approx(worst_case_value(cf, u, uset))


def test_maximizer_needs_nonzero_u_for_frobenius(rng):
    cf = compact_form(np.eye(2), np.eye(2), 1.0, np.eye(2), [1.0, 0.0], [0.0, 0.0])
    with pytest.raises(DegenerateInputError):
        worst_case_maximizer(cf, np.zeros(2), UncertaintySet.gen(1.0))
    # zero residual: any unit direction works
    cf0 = compact_form(np.eye(1), np.eye(1), 1.0, [[1.0]], [0.0], [0.0])
    dm = worst_case_maximizer(cf0, [0.0], UncertaintySet.col([0.5]))
    assert np.linalg.norm(dm) == pytest.approx(0.0)


def test_samples_inside_and_on_boundary():
    gen = UncertaintySet.gen(2.0)
    inner = sample_uncertainty(gen, 2, 3, seed=0, size=200)
    assert np.all(np.linalg.norm(inner.reshape(200, -1), axis=1) <= 2.0 + 1e-12)
    edge = sample_uncertainty(gen, 2, 3, boundary=True, seed=0, size=200)
    np.testing.assert_allclose(np.linalg.norm(edge.reshape(200, -1), axis=1), 2.0)
    col = UncertaintySet.col([0.5, 1.5])
    edge = sample_uncertainty(col, 2, 3, boundary=True, seed=0, size=50)
    np.testing.assert_allclose(np.linalg.norm(edge, axis=1), np.tile([0.5, 1.5], (50, 1)))
    assert np.all(edge[:, :2] == 0)


def test_set_validation():
    with pytest.raises(InvalidArgumentError):
        UncertaintySet.gen(-1.0)
    with pytest.raises(InvalidArgumentError):
        UncertaintySet.col([0.1, -0.1])
    with pytest.raises(InvalidArgumentError):
        UncertaintySet("box", 1.0)
    with pytest.raises(InvalidArgumentError):
        sample_uncertainty(UncertaintySet.col([1.0]), 2, 2)


def test_perturbations(rng):
    H = rng.standard_normal((3, 3))
    Hu = perturb_uniform(H, 0.5, 7)
    assert np.max(np.abs(Hu - H)) <= 0.5
    np.testing.assert_array_equal(Hu, perturb_uniform(H, 0.5, 7))
    np.testing.assert_array_equal(perturb_uniform(H, 0.0, 7), H)
    Hd = perturb_dirichlet(H, 7)
    assert np.linalg.norm(Hd - H) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        perturb_uniform(H, -0.1, 0)
    with pytest.raises(InvalidArgumentError):
        perturb_dirichlet(np.ones((2, 3)), 0)
