"""Upwind time stepping of the one-row, two-row and N-row transport systems.

The densities obey dQ/dt + v dQ/dxi = -a0 Q + omega_B/ell on a periodic
cell, coupled to explicit force-balance velocity updates.  The advection
uses the standard consistent first-order upwind stencil

    Q_j <- (1 - |c|) Q_j + |c| Q_{j -/+ 1} + dt (omega_B_j/ell - a0 Q_j)

with c = v dt/dx and the donor cell chosen by the sign of each row's own
advection velocity.  Stability requires |c| < 1 at every step (checked,
never adapted) and dt a0 <= 1; with both margins the update is a convex
combination, so densities stay inside [0, 1/ell].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams, TransitionRates, omega_B, potential_gradient
from .timeseries import TimeSeries

ONE_ROW = "one_row"
TWO_ROW = "two_row"
N_ROW = "n_row"


class CFLViolation(RuntimeError):
    """|v| dt / dx reached 1; the run must abort (no adaptive stepping)."""

    def __init__(self, cfl: float, step: int, partial: TimeSeries | None = None):
        super().__init__(f"CFL violated at step {step}: |v| dt/dx = {cfl:.6g} >= 1")
        self.cfl = cfl
        self.step = step
        self.partial = partial


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ell = J dx and explicit time step dt."""

    J: int
    dx: float
    dt: float

    def __post_init__(self) -> None:
        if self.J < 8:
            raise ValueError("J must be at least 8")
        if self.dx <= 0 or self.dt <= 0:
            raise ValueError("dx and dt must be positive")

    @classmethod
    def for_cells(cls, ell: float, J: int, dt: float) -> "Grid":
        return cls(J=J, dx=ell / J, dt=dt)

    @property
    def ell(self) -> float:
        return self.J * self.dx

    def cell_positions(self) -> np.ndarray:
        return np.arange(self.J) * self.dx


@dataclass
class GridState:
    """Densities, displacements and velocities at one time step.

    ``rows`` has shape (N, J).  For the one- and two-row models ``shifts``
    and ``velocities`` hold the single displacement x and speed v; for the
    N-row model they hold all N relative displacements Delta_i (which sum
    to zero) and the N sliding speeds v_i.
    """

    kind: str
    rows: np.ndarray
    shifts: np.ndarray
    velocities: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        self.shifts = np.atleast_1d(np.asarray(self.shifts, dtype=float))
        self.velocities = np.atleast_1d(np.asarray(self.velocities, dtype=float))
        if self.kind not in (ONE_ROW, TWO_ROW, N_ROW):
            raise ValueError(f"unknown model kind {self.kind!r}")
        n = self.rows.shape[0]
        if self.kind == ONE_ROW and n != 1:
            raise ValueError("one_row state needs exactly one density row")
        if self.kind == TWO_ROW and n != 2:
            raise ValueError("two_row state needs exactly two density rows")
        if self.kind == N_ROW:
            if n < 2:
                raise ValueError("n_row state needs N >= 2")
            if len(self.shifts) != n or len(self.velocities) != n:
                raise ValueError("n_row state needs N shifts and N velocities")

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def copy(self) -> "GridState":
        return GridState(self.kind, self.rows.copy(), self.shifts.copy(),
                         self.velocities.copy(), self.t)


def motor_force(state_p: np.ndarray, state_q: np.ndarray,
                grid: Grid, params: PhysicalParams) -> float:
    """Active force dx sum_j (P_j - Q_j) dW'(j dx), in kg nm/s^2.

    Rectangle-rule quadrature at the cell positions; for periodic smooth
    integrands this is the natural discrete pairing with the upwind sum.
    """
    state_p = np.asarray(state_p, dtype=float)
    state_q = np.asarray(state_q, dtype=float)
    if state_p.shape != (grid.J,) or state_q.shape != (grid.J,):
        raise ValueError("density arrays must have length J")
    dw = potential_gradient(grid.cell_positions(), params)
    return grid.dx * float((state_p - state_q) @ dw)


class _Workspace:
    """Per-run cache of grid-sampled coefficient arrays."""

    def __init__(self, grid: Grid, params: PhysicalParams, rates: TransitionRates):
        if abs(grid.ell - params.ell) > 1e-9 * params.ell:
            raise ValueError("grid length J dx does not match params.ell")
        xi = grid.cell_positions()
        self.a0 = rates.a0
        self.src = omega_B(xi, rates) / params.ell
        self.dw = potential_gradient(xi, params)
        self.dt_a0 = grid.dt * rates.a0
        if self.dt_a0 > 1.0:
            raise ValueError(f"dt a0 = {self.dt_a0:.3g} > 1 (source stability)")


def _advect(row: np.ndarray, c: float) -> np.ndarray:
    # upwind donor cell by velocity sign; c == 0 skips advection entirely
    if c > 0.0:
        return (1.0 - c) * row + c * np.roll(row, 1)
    if c < 0.0:
        return (1.0 + c) * row - c * np.roll(row, -1)
    return row.copy()


def _check_cfl(vmax: float, grid: Grid, step: int) -> float:
    cfl = abs(vmax) * grid.dt / grid.dx
    if cfl >= 1.0:
        raise CFLViolation(cfl, step)
    return cfl


def step_one_row(state: GridState, grid: Grid, params: PhysicalParams,
                 rates: TransitionRates, _ws: _Workspace | None = None,
                 _step: int = 0) -> GridState:
    """One upwind step of the single-row system (eta and k not doubled)."""
    ws = _ws if _ws is not None else _Workspace(grid, params, rates)
    v = state.velocities[0]
    x = state.shifts[0]
    c = v * grid.dt / grid.dx
    _check_cfl(v, grid, _step)
    P = state.rows[0]
    Pn = _advect(P, c) + grid.dt * (ws.src - ws.a0 * P)
    fm = grid.dx * (Pn @ ws.dw)
    v_new = (fm - params.k_spring * x) / params.eta
    x_new = x + v_new * grid.dt
    return GridState(ONE_ROW, Pn[None, :], np.array([x_new]),
                     np.array([v_new]), state.t + grid.dt)


def step_two_row(state: GridState, grid: Grid, params: PhysicalParams,
                 rates: TransitionRates, _ws: _Workspace | None = None,
                 _step: int = 0) -> GridState:
    """One upwind step of the two-row system.

    P advects with +v, Q with -v; the new velocity solves the doubled
    force balance 2 eta v = f_mot(P, Q) - 2 k x with the fresh densities
    and the previous displacement, then x is advanced explicitly.
    """
    ws = _ws if _ws is not None else _Workspace(grid, params, rates)
    v = state.velocities[0]
    x = state.shifts[0]
    c = v * grid.dt / grid.dx
    _check_cfl(v, grid, _step)
    P, Q = state.rows
    Pn = _advect(P, c) + grid.dt * (ws.src - ws.a0 * P)
    Qn = _advect(Q, -c) + grid.dt * (ws.src - ws.a0 * Q)
    fm = grid.dx * ((Pn - Qn) @ ws.dw)
    v_new = (fm - 2.0 * params.k_spring * x) / (2.0 * params.eta)
    x_new = x + v_new * grid.dt
    return GridState(TWO_ROW, np.stack([Pn, Qn]), np.array([x_new]),
                     np.array([v_new]), state.t + grid.dt)


def step_n_row(state: GridState, grid: Grid, params: PhysicalParams,
               rates: TransitionRates, _ws: _Workspace | None = None,
               _step: int = 0) -> GridState:
    """One upwind step of the N-row system.

    Each row advects with its own speed; the N-1 pairwise force balances
    eta (v_i - v_{i+1}) = int (Q_i - Q_{i+1}) dW' - k (Delta_i - Delta_{i+1})
    are solved in closed form by telescoping, with the additive constant
    fixed by sum v_i = 0.
    """
    ws = _ws if _ws is not None else _Workspace(grid, params, rates)
    N = state.n_rows
    vs = state.velocities
    deltas = state.shifts
    _check_cfl(np.abs(vs).max(), grid, _step)
    cc = vs * (grid.dt / grid.dx)
    absc = np.abs(cc)[:, None]
    cpos = np.maximum(cc, 0.0)[:, None]
    cneg = np.maximum(-cc, 0.0)[:, None]
    rows = state.rows
    rows_new = ((1.0 - absc) * rows
                + cpos * np.roll(rows, 1, axis=1)
                + cneg * np.roll(rows, -1, axis=1)
                + grid.dt * (ws.src[None, :] - ws.a0 * rows))
    fint = grid.dx * (rows_new @ ws.dw)
    bal = (fint[:-1] - fint[1:]) - params.k_spring * (deltas[:-1] - deltas[1:])
    tail = np.concatenate((np.cumsum(bal[::-1])[::-1], [0.0]))
    v_last = -float(np.arange(1, N) @ bal) / (N * params.eta)
    v_new = v_last + tail / params.eta
    deltas_new = deltas + grid.dt * v_new
    return GridState(N_ROW, rows_new, deltas_new, v_new, state.t + grid.dt)


_STEPPERS = {ONE_ROW: step_one_row, TWO_ROW: step_two_row, N_ROW: step_n_row}


def equilibrium_density(grid: Grid, rates: TransitionRates) -> np.ndarray:
    """Stationary density omega_B / (a0 ell) sampled at the cell positions."""
    return omega_B(grid.cell_positions(), rates) / (rates.a0 * grid.ell)


def equilibrium_state(kind: str, grid: Grid, params: PhysicalParams,
                      rates: TransitionRates, n_rows: int = 2,
                      x0: float = 0.0) -> GridState:
    """State at the model's fixed point, optionally displaced by x0.

    For the one-row model the resting displacement is the discrete
    x_eq = f_mot(P_eq)/k rather than zero, and x0 is added on top of it.
    """
    peq = equilibrium_density(grid, rates)
    if kind == ONE_ROW:
        dw = potential_gradient(grid.cell_positions(), params)
        x_eq = grid.dx * float(peq @ dw) / params.k_spring
        return GridState(ONE_ROW, peq[None, :], np.array([x_eq + x0]),
                         np.array([0.0]))
    if kind == TWO_ROW:
        return GridState(TWO_ROW, np.stack([peq, peq]), np.array([x0]),
                         np.array([0.0]))
    if kind == N_ROW:
        rows = np.tile(peq, (n_rows, 1))
        return GridState(N_ROW, rows, np.zeros(n_rows), np.zeros(n_rows))
    raise ValueError(f"unknown model kind {kind!r}")


def random_shift_state(grid: Grid, params: PhysicalParams, rates: TransitionRates,
                       n_rows: int, seed: int, xbar: float = 0.01) -> GridState:
    """Equilibrium densities with the absolute shifts x_1..x_{N-1} drawn
    uniformly from [-xbar, xbar]; Delta_i = x_i - x_{i-1} with x_0 = x_N = 0,
    so the Delta sum vanishes by construction."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-xbar, xbar, n_rows - 1)
    deltas = np.diff(np.concatenate(([0.0], xs, [0.0])))
    state = equilibrium_state(N_ROW, grid, params, rates, n_rows=n_rows)
    state.shifts = deltas
    return state


@dataclass
class Recorder:
    """Sampling policy for :func:`run`.

    With stride s the series holds the initial state plus every s-th step,
    so stride 1 yields steps+1 samples.  ``fourier_modes`` adds projection
    columns p{n}c / p{n}s of density row 1 (n = 0 adds the spatial mean
    column p0).
    """

    stride: int = 1
    fourier_modes: tuple[int, ...] = ()
    include_velocities: bool = True

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


class _Collector:
    def __init__(self, recorder: Recorder, grid: Grid, state: GridState):
        self.rec = recorder
        self.grid = grid
        self.kind = state.kind
        self.n = state.n_rows
        self.ts: list[float] = []
        self.samples: list[list[float]] = []
        self.names = self._column_names(state)
        xi = grid.cell_positions()
        self._trig = {}
        for mode in recorder.fourier_modes:
            if mode == 0:
                continue
            ang = 2.0 * np.pi * mode * xi / grid.ell
            self._trig[mode] = (np.cos(ang), np.sin(ang))

    def _column_names(self, state: GridState) -> list[str]:
        if self.kind == N_ROW:
            names = [f"delta_{i}" for i in range(1, self.n)]
            if self.rec.include_velocities:
                names += [f"v_{i}" for i in range(1, self.n + 1)]
        else:
            names = ["x"]
            if self.rec.include_velocities:
                names += ["v"]
        for mode in self.rec.fourier_modes:
            if mode == 0:
                names.append("p0")
            else:
                names += [f"p{mode}c", f"p{mode}s"]
        return names

    def add(self, state: GridState) -> None:
        row: list[float] = []
        if self.kind == N_ROW:
            row += list(state.shifts[:-1])
            if self.rec.include_velocities:
                row += list(state.velocities)
        else:
            row.append(state.shifts[0])
            if self.rec.include_velocities:
                row.append(state.velocities[0])
        if self.rec.fourier_modes:
            P = state.rows[0]
            scale = 2.0 * self.grid.dx / self.grid.ell
            for mode in self.rec.fourier_modes:
                if mode == 0:
                    row.append(float(P.mean()))
                else:
                    cosv, sinv = self._trig[mode]
                    row.append(scale * float(P @ cosv))
                    row.append(scale * float(P @ sinv))
        self.ts.append(state.t)
        self.samples.append(row)

    def series(self, meta: dict) -> TimeSeries:
        data = np.array(self.samples, dtype=float).reshape(len(self.ts), len(self.names))
        cols = {name: data[:, i] for i, name in enumerate(self.names)}
        return TimeSeries(t=np.array(self.ts), columns=cols, meta=meta)


def run(initial: GridState, grid: Grid, params: PhysicalParams,
        rates: TransitionRates, steps: int,
        recorder: Recorder | None = None) -> TimeSeries:
    """Iterate the model's stepper and collect samples.

    Raises :class:`CFLViolation` on a stability violation; the exception
    carries the samples recorded so far with meta['truncated'] = True so
    callers can persist flagged partial output.  Runs are deterministic:
    identical inputs give bit-identical series.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    recorder = recorder or Recorder()
    ws = _Workspace(grid, params, rates)
    stepper = _STEPPERS[initial.kind]
    collector = _Collector(recorder, grid, initial)
    collector.add(initial)
    meta = {
        "engine": "pde",
        "model": initial.kind,
        "n_rows": initial.n_rows,
        "J": grid.J,
        "dt": grid.dt,
        "steps": steps,
        "stride": recorder.stride,
        "truncated": False,
    }
    state = initial
    for n in range(1, steps + 1):
        try:
            state = stepper(state, grid, params, rates, _ws=ws, _step=n)
        except CFLViolation as exc:
            meta["truncated"] = True
            meta["completed_steps"] = n - 1
            raise CFLViolation(exc.cfl, exc.step, collector.series(meta)) from None
        if n % recorder.stride == 0:
            collector.add(state)
    return collector.series(meta)
