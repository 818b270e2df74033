"""End-to-end acceptance gate.

Each test prints one PASS/FAIL line (visible with -s or in captured output).
The expensive trained problems are shared per module via fixtures; the
reproducibility check re-trains from scratch with the same seeds.
"""

import time

import numpy as np
import pytest

from cvqoc import cli, cvqnn, fock, lindblad, optimize, pmp
from cvqoc.tfc import BoundaryConstraint, ConstrainedExpression, TimeMorph, omega, omega_prime


def report(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"acceptance {name}: {tag}{' (' + detail + ')' if detail else ''}")
    return ok


def train_preset(preset):
    cfg = cli.load_config(cli.preset_path(preset))
    problem, schedule, system = cli.build_problem(cfg)
    start = time.perf_counter()
    rep = optimize.train(problem, schedule)
    return problem, rep, time.perf_counter() - start


@pytest.fixture(scope="module")
def bench():
    return train_preset("linear_ode_benchmark")


@pytest.fixture(scope="module")
def qoc():
    return train_preset("two_level_ground_to_excited")


@pytest.fixture(scope="module")
def qutrit():
    return train_preset("three_level_pop_inversion")


def test_01_gate_algebra():
    start = time.perf_counter()
    ok = True
    for kappa in (0.1, 1.0):
        diag = np.diag(fock.gate_matrix(fock.Kerr(kappa), 20).entries)
        ok &= np.max(np.abs(diag - np.exp(1j * kappa * np.arange(20) ** 2))) < 1e-12
    rng = np.random.default_rng(0)
    for _ in range(5):
        alpha = complex(*rng.uniform(-0.7, 0.7, 2))
        u1 = fock.gate_matrix(fock.Displacement(alpha), 20).entries
        u2 = fock.gate_matrix(fock.Displacement(-alpha), 20).entries
        ok &= np.max(np.abs((u1 @ u2 - np.eye(20))[:10, :10])) < 1e-6
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1.0
    assert report("01 gate-algebra", ok, f"{elapsed:.2f}s")


def test_02_quadrature_convention():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    x_op = fock.quadrature_x(30)
    worst = 0.0
    for _ in range(20):
        alpha = complex(*rng.uniform(-0.7, 0.7, 2))
        state = fock.apply(fock.gate_matrix(fock.Displacement(alpha), 30),
                           fock.vacuum(30))
        worst = max(worst, abs(fock.expectation(x_op, state)
                               - np.sqrt(2) * alpha.real))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 5.0
    assert report("02 quadrature-convention", ok, f"max err {worst:.2e}")


def test_03_boundary_exactness():
    start = time.perf_counter()
    morph = TimeMorph(0.0, -0.8, 0.8, 1.6)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        coeffs = rng.normal(size=4)
        deriv = np.polyder(coeffs)

        def free(tau):
            return (np.atleast_1d(np.polyval(coeffs, tau)),
                    np.atleast_1d(np.polyval(deriv, tau)))

        y0, yf = rng.normal(size=2)
        expr = ConstrainedExpression(free,
                                     [BoundaryConstraint("initial", [y0]),
                                      BoundaryConstraint("final", [yf])], morph)
        worst = max(worst, abs(expr.eval(morph.tau0)[0][0] - y0),
                    abs(expr.eval(morph.tauf)[0][0] - yf))
    taus = np.linspace(-0.8, 0.8, 33)
    omega_ok = (np.max(np.abs(omega(1, taus, morph) + omega(2, taus, morph) - 1.0)) < 1e-14
                and abs(omega(1, -0.8, morph) - 1.0) < 1e-14
                and abs(omega(2, 0.8, morph) - 1.0) < 1e-14
                and abs(omega_prime(1, -0.8, morph)) < 1e-14
                and abs(omega_prime(2, 0.8, morph)) < 1e-14)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and omega_ok and elapsed < 1.0
    assert report("03 boundary-exactness", ok, f"max boundary err {worst:.2e}")


def test_04_superoperator_fidelity():
    p = lindblad.TwoLevelParams(0.1, 0.3, 1.0, 2.0)
    worst = 0.0
    for u in (-2.0, 0.0, 2.0):
        direct = lindblad.two_level_generator(p, u)
        generic = lindblad.lindblad_vectorize(lindblad.two_level_hamiltonian(p, u),
                                              lindblad.two_level_jumps(p))
        worst = max(worst, float(np.max(np.abs(direct - generic))))
    rows_zero = np.max(np.abs(lindblad.two_level_generator(p, 1.0)[0]
                              + lindblad.two_level_generator(p, 1.0)[1])) == 0.0
    ok = worst < 1e-12 and rows_zero
    assert report("04 superoperator-fidelity", ok, f"max diff {worst:.2e}")


def test_05_relaxation_oracle():
    start = time.perf_counter()
    p = lindblad.TwoLevelParams(0.1, 0.3, 0.0, 0.0)
    model = lindblad.two_level_model(p)
    _, xs = lindblad.propagate_rk4(model, np.array([0.0, 1.0, 0.0, 0.0]),
                                   lambda t: np.zeros(1), 0.0, 60.0, 3000)
    err = max(abs(xs[-1, 0] - 0.75), abs(xs[-1, 1] - 0.25))
    elapsed = time.perf_counter() - start
    ok = err < 1e-4 and elapsed < 1.0
    assert report("05 relaxation-oracle", ok, f"err {err:.2e}")


def test_06_linear_ode_benchmark(bench):
    problem, rep, elapsed = bench
    grid = np.linspace(0.0, 1.0, 200)
    err = float(np.max(np.abs(problem.solution(grid) - np.exp(-2.0 * grid))))
    ok = err < 1e-2 and rep.converged and elapsed < 300.0
    assert report("06 linear-ode-benchmark", ok,
                  f"max err {err:.2e}, converged={rep.converged}, {elapsed:.1f}s")


def test_07a_qoc_final_loss(qoc):
    """Structurally unreachable: pinning the costate to zero at the final
    time forces the costate (hence the control) toward zero, while the
    terminal row demands a strictly negative Hamiltonian.  The residual
    floor sits near the time weight; recorded here as stated."""
    problem, rep, elapsed = qoc
    ok = rep.final_loss < 1e-2 and elapsed < 1800.0
    assert report("07a qoc-final-loss", ok, f"L2 {rep.final_loss:.3e}")


def test_07b_qoc_rk4_terminal(qoc):
    problem, _, _ = qoc
    _, xs, gap = problem.verify_rk4(steps=2000)
    assert report("07b qoc-rk4-terminal", gap < 5e-2, f"gap {gap:.3e}")


def test_07c_qoc_trace_drift(qoc):
    problem, _, _ = qoc
    _, xs, _ = problem.verify_rk4(steps=2000)
    drift = float(np.max(np.abs(xs[:, 0] + xs[:, 1] - 1.0)))
    assert report("07c qoc-trace-drift", drift < 1e-9, f"drift {drift:.2e}")


def test_07d_qoc_control_bounds(qoc):
    problem, _, _ = qoc
    grid = np.linspace(0.0, problem.final_time(), 201)
    us = problem.control_trajectory(grid)
    ok = bool(np.all(us >= -2.0) and np.all(us <= 2.0))
    assert report("07d qoc-control-bounds", ok,
                  f"u in [{us.min():.3f}, {us.max():.3f}]")


def test_07e_qoc_terminal_hamiltonian(qoc):
    """Same structural obstruction as 07a: with the costate zero at the
    final time the Hamiltonian there is a sum of squares, so it cannot
    equal minus the time weight."""
    problem, _, _ = qoc
    terminal = problem.residual_vector(problem.decision.values).terminal
    assert report("07e qoc-terminal-hamiltonian", abs(terminal) < 5e-2,
                  f"|H(tf)+Gamma| {abs(terminal):.3e}")


def test_08_optimality_consistency(qoc):
    problem, _, _ = qoc
    cfg, model = problem.cfg, problem.model
    rng = np.random.default_rng(3)
    problem._sync(problem.decision.values)
    h = 1e-5
    worst = 0.0
    for tau in rng.choice(problem.nodes, size=10, replace=False):
        x, _ = problem.unknowns.expr_state.eval(tau)
        lam, _ = problem.unknowns.expr_costate.eval(tau)
        u, _ = problem.unknowns.expr_control.eval(tau)
        nu, _ = problem.unknowns.expr_sat_input.eval(tau)
        beta, _ = problem.unknowns.expr_multiplier.eval(tau)
        xi_u = lam @ (model.generator_du[0] @ x) + 2 * cfg.energy_weight * u[0] + beta[0]
        fd_u = (pmp.hamiltonian(x, lam, u + h, nu, beta, cfg, model)
                - pmp.hamiltonian(x, lam, u - h, nu, beta, cfg, model)) / (2 * h)
        xi_nu = 2 * cfg.reg_weight * nu[0] - beta[0] * pmp.saturation_dnu(nu, cfg)[0]
        fd_nu = (pmp.hamiltonian(x, lam, u, nu + h, beta, cfg, model)
                 - pmp.hamiltonian(x, lam, u, nu - h, beta, cfg, model)) / (2 * h)
        worst = max(worst, abs(xi_u - fd_u), abs(xi_nu - fd_nu))
    assert report("08 optimality-consistency", worst < 1e-6, f"max diff {worst:.2e}")


def test_09_optimizer_unit_oracles():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(9, 5))
    b = rng.normal(size=9)
    z_star, *_ = np.linalg.lstsq(a, b, rcond=None)
    z, rep = optimize.gauss_newton(lambda z: a @ z - b, np.zeros(5),
                                   tol=1e-12, damping=0.0)
    gn_ok = (np.max(np.abs(z - z_star)) < 1e-10
             and rep.loss_history[1] == pytest.approx(
                 float(np.linalg.norm(a @ z_star - b)), abs=1e-10))
    target = rng.normal(size=3)
    z2, rep2 = optimize.adam(lambda z: float(np.sum((z - target) ** 2)),
                             np.zeros(3), lr=0.05, max_epochs=2000, tol=1e-10)
    adam_ok = np.max(np.abs(z2 - target)) < 1e-3 and rep2.iterations <= 2000
    assert report("09 optimizer-unit-oracles", gn_ok and adam_ok,
                  f"gn={gn_ok}, adam={adam_ok}")


def test_10_three_level_smoke(qutrit):
    problem, rep, _ = qutrit
    _, xs, _ = problem.verify_rk4(steps=2000)
    drift = float(np.max(np.abs(xs[:, :3].sum(axis=1) - 1.0)))
    boundary = problem.terminal_state_error()
    ok = drift < 1e-9 and boundary < 1e-10
    assert report("10 three-level-smoke", ok,
                  f"drift {drift:.2e}, boundary {boundary:.2e}, "
                  f"final loss {rep.final_loss:.3e} (not gated)")


def test_11_reproducibility(bench, qoc):
    _, rep_bench, _ = bench
    _, rep_qoc, _ = qoc
    _, rep_bench2, _ = train_preset("linear_ode_benchmark")
    _, rep_qoc2, _ = train_preset("two_level_ground_to_excited")
    ok = (rep_bench.loss_history == rep_bench2.loss_history
          and rep_qoc.loss_history == rep_qoc2.loss_history)
    assert report("11 reproducibility", ok,
                  f"bench ids {rep_bench.loss_history == rep_bench2.loss_history}, "
                  f"qoc ids {rep_qoc.loss_history == rep_qoc2.loss_history}")
