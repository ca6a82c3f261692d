import numpy as np
import pytest

from robustfo.analysis import max_step_size
from robustfo.closed_loop import (CONTROLLER, NOMINAL, ROBUST, Scenario, optimal_trajectory, run,
                                  tail_mean, write_log_csv)
from robustfo.controllers import ROBUST_L1, ROBUST_L2, STANDARD, make_config
from robustfo.errors import InvalidArgumentError
from robustfo.plant import (LtiPlant, SignalSchedule, StaticPlant, aggregate_disturbance,
                            plant_with_sensitivity)
from robustfo.problems import (L1, Regularizer, RobustProblem, robust_objective, solve_l1,
                               solve_l2)
from robustfo.uncertainty import UncertaintySet


def _lti_case(rng, variant=STANDARD, rho=None, K=300, eta=None):
    H = rng.standard_normal((2, 2))
    plant = plant_with_sensitivity(H, 0.2 * np.eye(2))
    cfg = make_config(variant, 1.0, np.eye(2), np.eye(2), 1.0, H, rho=rho)
    cfg = cfg.with_eta(0.5 * max_step_size(plant, cfg) if eta is None else eta)
    sig = SignalSchedule.constant(K, rng.standard_normal(2), rng.standard_normal(2), np.zeros(2))
    return plant, sig, cfg


def test_timing_convention():
    plant = LtiPlant([[0.0]], [[1.0]], [[1.0]])
    cfg = make_config(STANDARD, 0.1, [[1.0]], [[1.0]], 1.0, [[1.0]])
    sig = SignalSchedule.constant(3, [0.0], [0.0], [0.0])
    log = run(Scenario(plant, sig, cfg, x0=[1.0], u0=[0.5]))
    # y_0 = C x_0, x_1 = A x_0 + B u_0
    assert log.y[0, 0] == 1.0
    assert log.x[1, 0] == 0.5
    assert log.u[1, 0] == pytest.approx(0.5 - 0.2 * (0.5 + 1.0))


@pytest.mark.parametrize("variant,rho", [(STANDARD, None), (ROBUST_L2, 0.3), (ROBUST_L1, 0.2)])
def test_exact_model_converges_to_optimum(rng, variant, rho):
    plant, sig, cfg = _lti_case(rng, variant, rho, K=1500)
    log = run(Scenario(plant, sig, cfg))
    d = aggregate_disturbance(plant, sig.d_x[0], sig.d_y[0])
    pb = cfg.problem()
    if variant == ROBUST_L1:
        ref = solve_l1(pb, d, np.zeros(2), cfg.reg.rho)
    else:
        ref = solve_l2(pb, d, np.zeros(2), cfg.rho_gen)
    assert np.linalg.norm(log.u[-1] - ref) < 1e-6
    assert log.err_u[-1] < 1e-6
    assert abs(log.gap[-1]) < 1e-10


def test_static_plant_run(rng):
    H = rng.standard_normal((2, 2))
    cfg = make_config(STANDARD, 0.05, np.eye(2), np.eye(2), 1.0, H)
    sig = SignalSchedule(np.zeros((400, 0)), np.tile([1.0, -1.0], (400, 1)), np.zeros((400, 2)))
    log = run(Scenario(StaticPlant(H), sig, cfg, target=NOMINAL))
    np.testing.assert_allclose(log.y, log.u @ H.T + sig.d_y, atol=1e-14)
    assert log.err_x is None
    assert log.err_u[-1] < 1e-8


def test_divergence_flag(rng):
    plant, sig, cfg = _lti_case(rng, eta=50.0)
    log = run(Scenario(plant, sig, cfg))
    assert log.diverged
    assert log.phi is None
    assert len(log) < sig.horizon


def test_box_from_schedule(rng):
    H = np.eye(2)
    cfg = make_config(STANDARD, 0.2, np.eye(2), np.eye(2), 1.0, H)
    K = 50
    sig = SignalSchedule(np.zeros((K, 0)), np.tile([5.0, -5.0], (K, 1)), np.zeros((K, 2)),
                         lo=-np.ones((K, 2)), hi=np.ones((K, 2)))
    log = run(Scenario(StaticPlant(H), sig, cfg))
    assert np.all(np.abs(log.u) <= 1.0)
    np.testing.assert_allclose(log.u[-1], [-1.0, 1.0])


def test_scenario_validation(rng):
    plant, sig, cfg = _lti_case(rng)
    with pytest.raises(InvalidArgumentError):
        Scenario(plant, sig, cfg, u0=np.zeros(3))
    bad = make_config(STANDARD, 0.1, np.eye(3), np.eye(2), 1.0, np.ones((2, 3)))
    with pytest.raises(InvalidArgumentError):
        Scenario(plant, sig, bad)


def test_optimal_trajectory_modes(rng):
    pb = RobustProblem(np.eye(2), np.eye(2), 1.0, rng.standard_normal((2, 2)),
                       UncertaintySet.gen(0.1))
    D = np.tile(rng.standard_normal(2), (3, 1))
    Rr = np.zeros((3, 2))
    U, vals = optimal_trajectory(pb, D, Rr, ROBUST)
    assert np.all(np.isfinite(vals))
    assert np.allclose(U[0], U[2])
    with pytest.raises(InvalidArgumentError):
        optimal_trajectory(pb, D, Rr, "regularized_l1")
    with pytest.raises(InvalidArgumentError):
        optimal_trajectory(pb, D, Rr, "bogus")


def test_robust_trajectory_against_grid(rng):
    # min-max optimum along a sinusoidal disturbance, m = 2, checked per step on a grid
    pb = RobustProblem(np.eye(2), np.eye(2), 1.0, [[1.0, 0.4], [-0.3, 0.8]],
                       UncertaintySet.col([0.2, 0.3]))
    k = np.arange(4)[:, None]
    D = np.hstack([1.0 + 0.5 * np.sin(0.7 * k), -0.8 + 0.3 * np.cos(0.5 * k)])
    U, _ = optimal_trajectory(pb, D, np.zeros_like(D), ROBUST)
    def objective(pts, cf):
        # closed-form inner max, vectorized over grid points
        return np.linalg.norm(pts @ cf.M.T + cf.eps, axis=1) + np.abs(pts) @ pb.uset.rho

    g = np.arange(-2.0, 2.0, 0.01)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    fine = np.stack(np.meshgrid(*[np.arange(-0.01, 0.01, 0.0005)] * 2, indexing="ij"),
                    -1).reshape(-1, 2)
    for d, u in zip(D, U):
        cf = pb.compact(d, np.zeros(2))
        best = pts[np.argmin(objective(pts, cf))]
        cand = best + fine
        best = cand[np.argmin(objective(cand, cf))]
        assert np.linalg.norm(best - u) < 2e-3
        assert objective(best[None], cf)[0] ** 2 == pytest.approx(
            robust_objective(best, pb, d, np.zeros(2)))


def test_controller_target_uses_regularizer(rng):
    plant, sig, cfg = _lti_case(rng, ROBUST_L1, 0.5)
    log = run(Scenario(plant, sig, cfg, target=CONTROLLER))
    d = aggregate_disturbance(plant, sig.d_x[0], sig.d_y[0])
    np.testing.assert_allclose(log.u_star[0], solve_l1(cfg.problem(), d, np.zeros(2),
                                                       Regularizer(L1, [0.5, 0.5]).rho))


def test_csv_and_tail(tmp_path, rng):
    plant, sig, cfg = _lti_case(rng, K=20)
    log = run(Scenario(plant, sig, cfg))
    path = tmp_path / "log.csv"
    write_log_csv(log, path, "abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# scenario abc status completed"
    assert lines[1] == "k,u0,u1,y0,y1,gap,err_u,err_x_P"
    assert len(lines) == 22
    assert tail_mean(np.arange(10.0)) == 9.0
