import numpy as np
import pytest

from conftest import random_strategy
from oracles import exp_q as exp_q_scalar
from oracles import transformed_value_exact
from tsallis_robust.bsde import (
    Direction,
    apply_transform,
    invert_transform,
    solve_derivative_bsde,
    solve_transformed,
    solve_untransformed,
    step_factors,
    transformed_for_strategy,
)
from tsallis_robust.errors import DomainError, ParameterError
from tsallis_robust.instances import random_instance
from tsallis_robust.lattice import AdaptedProcess, build_lattice, cond_mean
from tsallis_robust.qcalc import QParams, exp_q, ln_q
from tsallis_robust.utility import UtilitySpec

SCHEMES = ("implicit", "exact")


@pytest.mark.parametrize("scheme", SCHEMES)
def test_zero_generator_gives_conditional_expectations(rng, scheme):
    m = build_lattice(1, 4, 0.2, 0.0)
    terminal = rng.uniform(0.1, 1.0, 16)
    sol = solve_transformed(m, terminal, AdaptedProcess.constant(4, 0.0, integrand=True),
                            QParams(2.0, 1.0), scheme)
    for k in range(4):
        assert np.allclose(sol.Y[k], cond_mean(sol.Y[k + 1]), atol=1e-15)
        up, down = sol.Y[k + 1][0::2], sol.Y[k + 1][1::2]
        assert np.allclose(up - sol.Y[k], sol.Z[k] * m.sqrt_dt, atol=1e-15)
        assert np.allclose(down - sol.Y[k], -sol.Z[k] * m.sqrt_dt, atol=1e-15)


@pytest.mark.parametrize("q,gamma", [(1.5, 1.0), (2.0, 0.5), (3.0, 2.0)])
def test_deterministic_data_first_order(q, gamma):
    p = QParams(q, gamma)
    zeta0, u0 = 0.7, 0.4
    target = exp_q(-gamma * (zeta0 + u0), p)
    errs = []
    for N in (2, 4, 8, 16):
        m = build_lattice(1, N, 0.2, 0.0)
        U = AdaptedProcess.constant(N, u0, integrand=True)
        g = np.full(m.n_leaves, exp_q(-gamma * zeta0, p))
        errs.append(abs(solve_transformed(m, g, U, p, "implicit").Y0 - target))
        # the exact step integrates constant data without error
        assert solve_transformed(m, g, U, p, "exact").Y0 == pytest.approx(target, abs=1e-14)
    assert all(e * N <= 0.5 for e, N in zip(errs, (2, 4, 8, 16)))
    assert all(0.4 <= b / a <= 0.6 for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("scheme", SCHEMES)
def test_transformed_value_in_unit_interval(rng, scheme):
    m = build_lattice(1, 5, 0.2, 0.05)
    p = QParams(2.0, 1.0)
    zeta = rng.uniform(0, 2, 32)
    U = AdaptedProcess([rng.uniform(0, 1, 2**k) for k in range(5)])
    sol = solve_transformed(m, exp_q(-zeta, p), U, p, scheme)
    assert 0 < sol.Y0 < 1


def test_exact_scheme_matches_prefix_oracle(rng):
    m = build_lattice(1, 4, 0.2, 0.0)
    p = QParams(2.5, 0.8)
    g = rng.uniform(0.2, 1.0, 16)
    U = AdaptedProcess([rng.uniform(0, 1, 2**k) for k in range(4)])

    def idx(path):
        return sum((1 if mv == -1 else 0) << (len(path) - 1 - j) for j, mv in enumerate(path))

    ref = transformed_value_exact(lambda pa: g[idx(pa)], lambda pa: U[len(pa)][idx(pa)],
                                  p.q, p.gamma, m.dt, m.N)
    assert solve_transformed(m, g, U, p, "exact").Y0 == pytest.approx(ref, abs=1e-14)


def test_implicit_step_solves_its_equation(rng):
    m = build_lattice(1, 5, 0.2, 0.0)
    p = QParams(3.0, 2.0)
    U = AdaptedProcess([rng.uniform(0, 3, 2**k) for k in range(5)])
    sol = solve_transformed(m, rng.uniform(0.01, 1, 32), U, p, "implicit")
    for k in range(5):
        m_k = cond_mean(sol.Y[k + 1])
        y = sol.Y[k]
        assert np.max(np.abs(y + p.gamma * y**p.q * U[k] * m.dt - m_k)) <= 1e-12


def test_input_validation():
    m = build_lattice(1, 2, 0.2, 0.0)
    p = QParams(2.0, 1.0)
    U = AdaptedProcess.constant(2, 0.0, integrand=True)
    with pytest.raises(DomainError):
        solve_transformed(m, np.array([0.5, 0.5, 0.0, 0.5]), U, p)
    with pytest.raises(DomainError):
        solve_transformed(m, np.full(4, 1.5), U, p)
    with pytest.raises(ParameterError):
        solve_transformed(m, np.full(3, 0.5), U, p)
    with pytest.raises(ParameterError):
        solve_transformed(m, np.full(4, 0.5), U, p, "rk4")


def test_untransformed_deterministic():
    m = build_lattice(1, 4, 0.2, 0.0)
    p = QParams(2.0, 1.0)
    sol = solve_untransformed(m, np.full(16, 1.3), AdaptedProcess.constant(4, 0.0, integrand=True), p)
    assert all(np.allclose(y, 1.3, atol=1e-15) for y in sol.Y)
    assert sol.Z.max_abs() == 0.0


def test_untransformed_matches_transformed_and_converges():
    inst = random_instance(np.random.default_rng(11))
    p = QParams(2.0, 1.0)
    gaps = []
    for N in (3, 6, 12):
        m = build_lattice(1, N, 0.2, 0.0)
        zeta, U = inst.zeta(m), inst.U(m)
        direct = solve_untransformed(m, zeta, U, p).Y0
        via = invert_transform(solve_transformed(m, exp_q(-zeta, p), U, p), p).Y0
        gaps.append(abs(direct - via))
    assert gaps[1] <= 5e-3
    assert gaps[2] < gaps[1] < gaps[0]


def test_large_leaf_stress():
    m = build_lattice(1, 4, 0.2, 0.0)
    p = QParams(2.0, 1.0)
    zeta = np.full(16, 0.5)
    zeta[3] = 50.0
    U = AdaptedProcess.constant(4, 0.1, integrand=True)
    sol = solve_transformed(m, exp_q(-zeta, p), U, p)
    assert all(np.all(y > 0) for y in sol.Y)
    # the direct scheme either resolves this data or reports the violated domain
    try:
        direct = solve_untransformed(m, zeta, U, p)
    except DomainError:
        return
    assert np.isfinite(direct.Y0)


def test_transform_round_trip(rng):
    m = build_lattice(1, 4, 0.2, 0.0)
    p = QParams(1.7, 1.3)
    sol = solve_transformed(m, rng.uniform(0.1, 1, 16), AdaptedProcess([rng.uniform(0, 1, 2**k) for k in range(4)]), p)
    back = apply_transform(invert_transform(sol, p), p)
    for k in range(5):
        assert np.allclose(back.Y[k], sol.Y[k], atol=1e-10)
    for k in range(4):
        assert np.allclose(back.Z[k], sol.Z[k], atol=1e-10)
    with pytest.raises(ParameterError):
        apply_transform(sol, p)


def test_invert_unit_value():
    m = build_lattice(1, 3, 0.2, 0.0)
    p = QParams(2.0, 1.0)
    sol = solve_transformed(m, np.ones(8), AdaptedProcess.constant(3, 0.0, integrand=True), p)
    inv = invert_transform(sol, p)
    assert all(np.all(y == 0) for y in inv.Y) and inv.Z.max_abs() == 0.0


@pytest.mark.parametrize("N", [1, 5])
@pytest.mark.parametrize("scheme", SCHEMES)
def test_no_running_cost_one_shot_formula(rng, N, scheme):
    m = build_lattice(1, N, 0.2, 0.0)
    p = QParams(2.0, 0.8)
    zeta = rng.uniform(0, 2, 2**N)
    sol = solve_transformed(m, exp_q(-p.gamma * zeta, p), AdaptedProcess.constant(N, 0.0, integrand=True), p, scheme)
    formula = -ln_q(np.mean(exp_q(-p.gamma * zeta, p)), p) / p.gamma
    assert invert_transform(sol, p).Y0 == pytest.approx(formula, abs=1e-13)
    # scalar oracle for the same formula
    ref = -(np.mean([exp_q_scalar(-0.8 * z, 2.0) for z in zeta]) ** (-1.0) - 1.0) / (-1.0) / 0.8
    assert formula == pytest.approx(ref, abs=1e-13)


def test_step_factor_forms(rng):
    p = QParams(2.0, 1.0)
    y, U = rng.uniform(0.2, 1, 10), rng.uniform(0, 1, 10)
    rho_e, kap_e = step_factors(y, U, p, 0.01, "exact")
    rho_i, kap_i = step_factors(y, U, p, 0.01, "implicit")
    rho_x, _ = step_factors(y, U, p, 0.01, "exp")
    assert np.all(kap_e == 1) and np.allclose(kap_i, rho_i)
    # all three agree to first order in dt
    assert np.max(np.abs(rho_e - rho_x)) < 1e-3 and np.max(np.abs(rho_i - rho_x)) < 1e-3
    with pytest.raises(ParameterError):
        step_factors(y, U, p, 0.01, "bogus")


def _fd_errors(m, p, uspec, base, other, scheme):
    direction = Direction.between(base, other)
    base_sol = transformed_for_strategy(m, p, uspec, base, scheme)
    d = solve_derivative_bsde(m, p, uspec, base, direction, base_sol).Y0
    errs = []
    for a in (1e-2, 1e-3, 1e-4):
        moved = transformed_for_strategy(m, p, uspec, direction.step(base, a), scheme).Y0
        errs.append(abs((moved - base_sol.Y0) / a - d))
    return errs


def test_zero_direction_has_zero_derivative(rng):
    m = build_lattice(1, 3, 0.2, 0.05)
    p, uspec = QParams(2.0, 1.0), UtilitySpec(0.5)
    base = random_strategy(rng, 3)
    sol = transformed_for_strategy(m, p, uspec, base)
    d = solve_derivative_bsde(m, p, uspec, base, Direction.between(base, base), sol)
    assert all(np.all(y == 0) for y in d.Y)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_derivative_first_order_difference_quotients(rng, scheme):
    m = build_lattice(1, 5, 0.2, 0.05)
    p, uspec = QParams(2.0, 1.0), UtilitySpec(0.5)
    errs = _fd_errors(m, p, uspec, random_strategy(rng, 5), random_strategy(rng, 5), scheme)
    for a, b in zip(errs, errs[1:]):
        assert 5 <= a / b <= 20


def test_derivative_requires_transformed_solution(rng):
    m = build_lattice(1, 2, 0.2, 0.0)
    p, uspec = QParams(2.0, 1.0), UtilitySpec(0.5)
    base = random_strategy(rng, 2)
    raw = invert_transform(transformed_for_strategy(m, p, uspec, base), p)
    with pytest.raises(ParameterError):
        solve_derivative_bsde(m, p, uspec, base, Direction.between(base, base), raw)
