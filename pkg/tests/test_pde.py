import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axonesim.params import rates_from_atp, baseline_params, omega_B
from axonesim.pde import (CFLViolation, Grid, GridState, Recorder, N_ROW,
                          ONE_ROW, TWO_ROW, equilibrium_density,
                          equilibrium_state, motor_force, random_shift_state,
                          run, step_n_row, step_one_row, step_two_row)


@pytest.fixture(scope="module")
def setup():
    params = baseline_params(delta=0.1)
    rates = rates_from_atp(params)
    grid = Grid.for_cells(params.ell, 128, 2e-5)
    return params, rates, grid


def perturbed_two_row(grid, params, rates, x0=0.01):
    return equilibrium_state(TWO_ROW, grid, params, rates, x0=x0)


class TestGrid:
    def test_rejects_small_J(self):
        with pytest.raises(ValueError):
            Grid.for_cells(10.0, 4, 1e-5)

    def test_spacing(self):
        grid = Grid.for_cells(10.0, 50, 1e-5)
        assert grid.dx == pytest.approx(0.2)
        assert grid.ell == pytest.approx(10.0)


class TestMotorForce:
    def test_identical_densities_give_zero(self, setup):
        params, rates, grid = setup
        peq = equilibrium_density(grid, rates)
        assert motor_force(peq, peq, grid, params) == 0.0

    def test_sine_density_analytic(self):
        # int sin(2 pi xi/l)/l * dW' dxi = -pi U / l
        params = baseline_params()
        grid = Grid.for_cells(params.ell, 256, 1e-5)
        xi = grid.cell_positions()
        p = np.sin(2 * math.pi * xi / params.ell) / params.ell
        q = np.zeros_like(p)
        expected = -math.pi * params.U / params.ell
        assert motor_force(p, q, grid, params) == pytest.approx(expected,
                                                                rel=1e-3)

    def test_cosine_density_orthogonal(self):
        params = baseline_params()
        grid = Grid.for_cells(params.ell, 256, 1e-5)
        xi = grid.cell_positions()
        p = np.cos(2 * math.pi * xi / params.ell) / params.ell
        assert motor_force(p, np.zeros_like(p), grid, params) == \
            pytest.approx(0.0, abs=1e-15)

    def test_matches_brute_force_resummation(self):
        from axonesim.params import potential_gradient
        params = baseline_params()
        grid = Grid.for_cells(params.ell, 8, 1e-5)
        rng = np.random.default_rng(42)
        p = rng.uniform(0, 0.1, 8)
        q = rng.uniform(0, 0.1, 8)
        dw = potential_gradient(grid.cell_positions(), params)
        exact = grid.dx * math.fsum((p[j] - q[j]) * dw[j] for j in range(8))
        assert motor_force(p, q, grid, params) == pytest.approx(exact,
                                                                rel=1e-13)

    def test_length_mismatch(self, setup):
        params, rates, grid = setup
        with pytest.raises(ValueError):
            motor_force(np.zeros(5), np.zeros(grid.J), grid, params)


class TestTwoRowStep:
    def test_equilibrium_is_fixed_point(self, setup):
        params, rates, grid = setup
        state = equilibrium_state(TWO_ROW, grid, params, rates)
        out = state
        for k in range(100):
            out = step_two_row(out, grid, params, rates)
        np.testing.assert_allclose(out.rows, state.rows, rtol=0,
                                   atol=1e-12 / params.ell)
        assert abs(out.shifts[0]) < 1e-12
        assert abs(out.velocities[0]) < 1e-12

    def test_constant_density_relaxes_cellwise(self, setup):
        # advection of a constant vanishes for either stencil; one step is
        # pure relaxation toward omega_B/(a0 ell)
        params, rates, grid = setup
        const = np.full(grid.J, 0.06)
        state = GridState(TWO_ROW, np.stack([const, const]),
                          [0.0], [50.0])
        out = step_two_row(state, grid, params, rates)
        src = omega_B(grid.cell_positions(), rates) / params.ell
        expected = const + grid.dt * (src - rates.a0 * const)
        np.testing.assert_allclose(out.rows[0], expected, rtol=1e-14)

    def test_cfl_violation_raises(self, setup):
        params, rates, grid = setup
        state = perturbed_two_row(grid, params, rates)
        state.velocities[0] = 2.0 * grid.dx / grid.dt
        with pytest.raises(CFLViolation) as err:
            step_two_row(state, grid, params, rates)
        assert err.value.cfl == pytest.approx(2.0)

    def test_symmetry_lock(self, setup):
        # identical rows and x = 0 stay locked exactly
        params, rates, grid = setup
        peq = equilibrium_density(grid, rates)
        bump = 0.02 * np.sin(2 * math.pi * grid.cell_positions() / params.ell)
        row = peq + bump / params.ell
        state = GridState(TWO_ROW, np.stack([row, row.copy()]), [0.0], [0.0])
        for _ in range(2000):
            state = step_two_row(state, grid, params, rates)
        assert state.shifts[0] == 0.0
        assert np.array_equal(state.rows[0], state.rows[1])

    def test_density_bounds_preserved(self, setup):
        params, rates, grid = setup
        state = perturbed_two_row(grid, params, rates, x0=0.05)
        top = 1.0 / params.ell
        for _ in range(3000):
            state = step_two_row(state, grid, params, rates)
            assert state.rows.min() >= 0.0
            assert state.rows.max() <= top * (1 + 1e-13)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**31), v0=st.floats(-400, 400))
    def test_bounds_property_random_states(self, seed, v0):
        params = baseline_params(delta=0.1)
        rates = rates_from_atp(params)
        grid = Grid.for_cells(params.ell, 64, 1e-5)
        rng = np.random.default_rng(seed)
        rows = rng.uniform(0.0, 1.0 / params.ell, (2, grid.J))
        state = GridState(TWO_ROW, rows, [rng.uniform(-0.5, 0.5)], [v0])
        for _ in range(100):
            state = step_two_row(state, grid, params, rates)
        assert state.rows.min() >= 0.0
        assert state.rows.max() <= (1.0 / params.ell) * (1 + 1e-13)


class TestOneRow:
    def test_fixed_point_with_offset_equilibrium(self, setup):
        params, rates, grid = setup
        state = equilibrium_state(ONE_ROW, grid, params, rates)
        x_eq = state.shifts[0]
        assert x_eq != 0.0
        out = state
        for _ in range(200):
            out = step_one_row(out, grid, params, rates)
        assert out.shifts[0] == pytest.approx(x_eq, abs=1e-12)

    def test_below_onset_converges_to_equilibrium(self):
        params = baseline_params(delta=-0.1)
        rates = rates_from_atp(params)
        grid = Grid.for_cells(params.ell, 64, 1e-4)
        eq = equilibrium_state(ONE_ROW, grid, params, rates)
        state = eq.copy()
        state.shifts[0] += 0.02
        for _ in range(9000):
            state = step_one_row(state, grid, params, rates)
        assert state.shifts[0] == pytest.approx(eq.shifts[0], abs=1e-5)

    def test_above_onset_oscillates_about_offset_equilibrium(self):
        # the single-row cycle is centered near the nonzero resting
        # displacement instead of zero
        from axonesim.measure import measure_amplitude, suggest_dt
        params = baseline_params(delta=0.1)
        base = baseline_params()
        rates = rates_from_atp(params)
        dt = suggest_dt(base, 0.1, 100)
        grid = Grid.for_cells(params.ell, 100, dt)
        state = equilibrium_state(ONE_ROW, grid, params, rates, x0=0.01)
        x_eq = state.shifts[0] - 0.01
        assert abs(x_eq) > 1.0
        series = run(state, grid, params, rates,
                     steps=int(round(1.2 / dt)), recorder=Recorder(stride=10))
        est = measure_amplitude(series, transient=int(0.6 * len(series)))
        assert est.amplitude > 0.3
        assert est.frequency == pytest.approx(78.0, rel=0.08)
        tail = series.displacement()[int(0.6 * len(series)):]
        assert abs(tail.mean() - x_eq) < 0.3 * est.amplitude


class TestNRow:
    def test_two_row_equivalence(self, setup):
        params, rates, grid = setup
        x0 = 0.01
        two = perturbed_two_row(grid, params, rates, x0=x0)
        peq = equilibrium_density(grid, rates)
        nstate = GridState(N_ROW, np.stack([peq, peq]),
                           [x0, -x0], [0.0, 0.0])
        for _ in range(300):
            two = step_two_row(two, grid, params, rates)
            nstate = step_n_row(nstate, grid, params, rates)
            assert abs(two.shifts[0] - nstate.shifts[0]) < 1e-10

    def test_equilibrium_fixed_point(self, setup):
        params, rates, grid = setup
        state = equilibrium_state(N_ROW, grid, params, rates, n_rows=5)
        out = state
        for _ in range(100):
            out = step_n_row(out, grid, params, rates)
        np.testing.assert_allclose(out.shifts, 0.0, atol=1e-14)
        np.testing.assert_allclose(out.rows, state.rows,
                                   rtol=0, atol=1e-12 / params.ell)

    def test_below_onset_decay(self):
        params = baseline_params(delta=-0.1)
        rates = rates_from_atp(params)
        grid = Grid.for_cells(params.ell, 64, 1e-4)
        state = random_shift_state(grid, params, rates, 8, seed=7, xbar=0.01)
        for _ in range(7000):
            state = step_n_row(state, grid, params, rates)
        assert np.abs(state.shifts).max() < 1e-4

    def test_zero_sum_preserved(self, setup):
        params, rates, grid = setup
        state = random_shift_state(grid, params, rates, 8, seed=3, xbar=0.01)
        for _ in range(5000):
            state = step_n_row(state, grid, params, rates)
        scale = max(np.abs(state.shifts).max(), 1.0)
        assert abs(state.shifts.sum()) < 1e-9 * 8 * scale


class TestRun:
    def test_rejects_zero_steps(self, setup):
        params, rates, grid = setup
        state = perturbed_two_row(grid, params, rates)
        with pytest.raises(ValueError):
            run(state, grid, params, rates, steps=0)

    def test_stride_one_sample_count(self, setup):
        params, rates, grid = setup
        state = perturbed_two_row(grid, params, rates)
        series = run(state, grid, params, rates, steps=50,
                     recorder=Recorder(stride=1))
        assert len(series) == 51
        assert series.t[0] == 0.0
        assert series.t[-1] == pytest.approx(50 * grid.dt)

    def test_determinism_bit_identical(self, setup):
        params, rates, grid = setup
        state = perturbed_two_row(grid, params, rates)
        a = run(state.copy(), grid, params, rates, steps=400,
                recorder=Recorder(stride=5))
        b = run(state.copy(), grid, params, rates, steps=400,
                recorder=Recorder(stride=5))
        assert a.to_csv() == b.to_csv()

    def test_cfl_abort_carries_partial_series(self):
        params = baseline_params(delta=0.1)
        rates = rates_from_atp(params)
        grid = Grid.for_cells(params.ell, 64, 5e-4)  # long dt: CFL trips
        state = equilibrium_state(TWO_ROW, grid, params, rates, x0=0.4)
        state.velocities[0] = 250.0
        with pytest.raises(CFLViolation) as err:
            run(state, grid, params, rates, steps=2000)
        partial = err.value.partial
        assert partial is not None
        assert partial.meta["truncated"] is True
        assert len(partial) >= 1

    def test_mean_relaxation_rate(self, setup):
        # spatial mean of P relaxes to 1/(2 ell) at rate a0 within 5%
        params, rates, grid = setup
        state = perturbed_two_row(grid, params, rates)
        state.rows[0] = state.rows[0] + 0.04
        series = run(state, grid, params, rates, steps=2500,
                     recorder=Recorder(stride=5, fourier_modes=(0,)))
        target = 1.0 / (2.0 * params.ell)
        dev = np.abs(series.column("p0") - target)
        keep = dev > dev[0] / 10.0  # fit over one decade of decay
        t = series.t[keep]
        rate, _ = np.polyfit(t, np.log(dev[keep]), 1)
        assert -rate == pytest.approx(rates.a0, rel=0.05)

    def test_even_mode_projection_decays(self):
        params = baseline_params(delta=0.1)
        rates = rates_from_atp(params)
        grid = Grid.for_cells(params.ell, 128, 2e-5)
        state = equilibrium_state(TWO_ROW, grid, params, rates)
        xi = grid.cell_positions()
        state.rows[0] = state.rows[0] + 0.02 * np.cos(4 * math.pi * xi / params.ell)
        series = run(state, grid, params, rates, steps=3000,
                     recorder=Recorder(stride=50, fourier_modes=(2,)))
        p2c = series.column("p2c")
        assert abs(p2c[0]) == pytest.approx(0.02, rel=1e-6)
        assert abs(p2c[-1]) < 1e-6 * abs(p2c[0])

    def test_first_order_convergence_in_J(self):
        # error of x(t) against a fine-grid reference drops by >= 1.7 per
        # doubling of J with dt proportional to dx
        params = baseline_params(delta=0.1)
        rates = rates_from_atp(params)
        t_end = 0.02
        x_at = {}
        for J in (32, 64, 512):
            dt = 6.4e-5 * 32 / J
            grid = Grid.for_cells(params.ell, J, dt)
            state = equilibrium_state(TWO_ROW, grid, params, rates, x0=0.01)
            steps = int(round(t_end / dt))
            series = run(state, grid, params, rates, steps,
                         recorder=Recorder(stride=steps))
            x_at[J] = series.column("x")[-1]
        err32 = abs(x_at[32] - x_at[512])
        err64 = abs(x_at[64] - x_at[512])
        assert err32 / err64 >= 1.7
