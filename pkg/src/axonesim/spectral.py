"""Fourier-reduced ODE hierarchy of the two-row model.

Expanding both densities in harmonics of the cell, P(xi) = p0 +
sum_n p_n^c cos(2 n pi xi/ell) + p_n^s sin(...), the dynamics splits into
the decoupled means (n = 0), a five-dimensional nonlinear block
(p1c, p1s, q1c, q1s, x) that owns the oscillation, and for every n >= 2 a
linear quadruple driven only by dx/dt.  This module integrates the whole
truncated hierarchy with fixed-step RK4 and is the independent solution
path used to cross-validate the upwind PDE code.

p0 here is the spatial mean of P (the constant Fourier coefficient), so
its fixed point is 1/(2 ell).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams, TransitionRates
from .timeseries import TimeSeries

TWO_PI = 2.0 * math.pi


class NonFinite(RuntimeError):
    """State stopped being finite (blow-up or invalid parameters)."""


@dataclass
class FourierState:
    """Truncated Fourier coefficients plus displacement.

    ``modes`` has shape (n_max, 4) holding (p_n^c, p_n^s, q_n^c, q_n^s)
    for n = 1..n_max; densities are 1/nm, x is nm.
    """

    p0: float
    q0: float
    modes: np.ndarray
    x: float
    t: float = 0.0

    def __post_init__(self) -> None:
        self.modes = np.atleast_2d(np.asarray(self.modes, dtype=float))
        if self.modes.shape[1] != 4 or self.modes.shape[0] < 1:
            raise ValueError("modes must have shape (n_max >= 1, 4)")

    @property
    def n_max(self) -> int:
        return self.modes.shape[0]

    @classmethod
    def equilibrium(cls, params: PhysicalParams, rates: TransitionRates,
                    n_max: int = 5, x0: float = 0.0) -> "FourierState":
        """Fixed point p_n^c = a_n/(a0 ell), p_n^s = b_n/(a0 ell), x = x0."""
        modes = np.zeros((n_max, 4))
        for n in range(1, n_max + 1):
            an, bn = rates.coefficient(n)
            pc = an / (rates.a0 * params.ell)
            ps = bn / (rates.a0 * params.ell)
            modes[n - 1] = (pc, ps, pc, ps)
        half = 1.0 / (2.0 * params.ell)
        return cls(p0=half, q0=half, modes=modes, x=x0)

    def reconstruct_p(self, xi, params: PhysicalParams) -> np.ndarray:
        """P(xi) rebuilt from the retained coefficients."""
        xi = np.asarray(xi, dtype=float)
        val = np.full_like(xi, self.p0)
        for n in range(1, self.n_max + 1):
            ang = TWO_PI * n * xi / params.ell
            pc, ps, _, _ = self.modes[n - 1]
            val += pc * np.cos(ang) + ps * np.sin(ang)
        return val


def rhs_zero(p0: float, q0: float,
             rates: TransitionRates) -> tuple[float, float]:
    """Mean relaxation dp0/dt = -a0 p0 + a0/(2 ell); same for q0."""
    a0 = rates.a0
    ell = rates.ell
    return (-a0 * p0 + a0 / (2.0 * ell), -a0 * q0 + a0 / (2.0 * ell))


def coupling_factor(state5, params: PhysicalParams) -> float:
    """g = zeta x + (lambda/2)(p1s - q1s); dx/dt = -(ell/2 pi) g."""
    _, p1s, _, q1s, x = state5
    return params.zeta * x + 0.5 * params.lam * (p1s - q1s)


def rhs_first(state5, params: PhysicalParams, rates: TransitionRates) -> np.ndarray:
    """Right-hand side of the five-dimensional first-harmonic block."""
    p1c, p1s, q1c, q1s, x = state5
    a1, b1 = rates.coefficient(1)
    a0 = rates.a0
    ell = params.ell
    g = coupling_factor(state5, params)
    return np.array([
        -a0 * p1c + g * p1s + a1 / ell,
        -a0 * p1s - g * p1c + b1 / ell,
        -a0 * q1c - g * q1s + a1 / ell,
        -a0 * q1s + g * q1c + b1 / ell,
        -(ell / TWO_PI) * g,
    ])


def rhs_higher(n: int, quadruple, xdot: float,
               rates: TransitionRates) -> np.ndarray:
    """Driven linear quadruple for harmonic n >= 2.

    The drive enters only through the instantaneous dx/dt supplied by the
    first-harmonic block.
    """
    if n < 2:
        raise ValueError("rhs_higher applies to n >= 2")
    pnc, pns, qnc, qns = quadruple
    an, bn = rates.coefficient(n)
    a0 = rates.a0
    ell = rates.ell
    w = TWO_PI * n * xdot / ell
    return np.array([
        -a0 * pnc - w * pns + an / ell,
        -a0 * pns + w * pnc + bn / ell,
        -a0 * qnc + w * qns + an / ell,
        -a0 * qns - w * qnc + bn / ell,
    ])


def _full_rhs(y: np.ndarray, params: PhysicalParams, rates: TransitionRates,
              n_max: int) -> np.ndarray:
    ell = params.ell
    a0 = rates.a0
    out = np.empty_like(y)
    out[0] = -a0 * y[0] + a0 / (2.0 * ell)
    out[1] = -a0 * y[1] + a0 / (2.0 * ell)
    first = y[2:7]
    out[2:7] = rhs_first(first, params, rates)
    if n_max > 1:
        # layout: y[2:6] is n=1, y[6] is x, higher quadruples follow x
        xdot = out[6]
        blocks = y[7:7 + 4 * (n_max - 1)].reshape(n_max - 1, 4)
        ns = np.arange(2, n_max + 1, dtype=float)
        w = TWO_PI * ns * xdot / ell
        an = np.array([rates.coefficient(int(n))[0] for n in ns])
        bn = np.array([rates.coefficient(int(n))[1] for n in ns])
        d = np.empty_like(blocks)
        d[:, 0] = -a0 * blocks[:, 0] - w * blocks[:, 1] + an / ell
        d[:, 1] = -a0 * blocks[:, 1] + w * blocks[:, 0] + bn / ell
        d[:, 2] = -a0 * blocks[:, 2] + w * blocks[:, 3] + an / ell
        d[:, 3] = -a0 * blocks[:, 3] - w * blocks[:, 2] + bn / ell
        out[7:7 + 4 * (n_max - 1)] = d.ravel()
    return out


def _pack_for_integration(state: FourierState) -> np.ndarray:
    # layout: [p0, q0, p1c, p1s, q1c, q1s, x, (pnc, pns, qnc, qns) n>=2]
    head = [state.p0, state.q0, *state.modes[0], state.x]
    if state.n_max > 1:
        return np.concatenate((head, state.modes[1:].ravel()))
    return np.array(head)


def rk4_step(f, y: np.ndarray, dt: float) -> np.ndarray:
    """Classic fixed-step fourth-order Runge-Kutta update."""
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(state: FourierState, params: PhysicalParams,
              rates: TransitionRates, t_end: float, dt: float,
              record_stride: int = 1,
              error_estimate: bool = False) -> TimeSeries:
    """Integrate the truncated hierarchy with fixed-step RK4.

    Every RK4 stage evaluates the fully coupled right-hand side, so the
    higher harmonics see the same-step dx/dt.  With ``error_estimate`` the
    run is repeated at dt/2 and the largest state deviation at the shared
    sample times is reported in meta['error_estimate'] (step-halving
    estimate; the fine run is discarded).

    Raises :class:`NonFinite` if the state leaves the floating range.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    if abs(rates.ell - params.ell) > 1e-9 * params.ell:
        raise ValueError("rates.ell does not match params.ell")
    n_max = state.n_max
    steps = int(round(t_end / dt))
    if steps < 1:
        raise ValueError("t_end shorter than one step")

    def f(y: np.ndarray) -> np.ndarray:
        return _full_rhs(y, params, rates, n_max)

    def sweep(step_dt: float, n_steps: int, stride: int):
        y = _pack_for_integration(state)
        ts = [state.t]
        ys = [y.copy()]
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(1, n_steps + 1):
                y = rk4_step(f, y, step_dt)
                if n % stride == 0:
                    if not np.all(np.isfinite(y)):
                        raise NonFinite(
                            f"state non-finite at t={state.t + n * step_dt:.6g}")
                    ts.append(state.t + n * step_dt)
                    ys.append(y.copy())
        if not np.all(np.isfinite(y)):
            raise NonFinite("state non-finite at end of run")
        return np.array(ts), np.array(ys)

    ts, ys = sweep(dt, steps, record_stride)
    meta = {
        "engine": "ode",
        "model": "two_row",
        "dt": dt,
        "n_max": n_max,
        "steps": steps,
        "stride": record_stride,
        "truncated": False,
    }
    if error_estimate:
        _, ys_half = sweep(dt / 2.0, 2 * steps, 2 * record_stride)
        m = min(len(ys), len(ys_half))
        meta["error_estimate"] = float(np.max(np.abs(ys[:m] - ys_half[:m])))

    g = params.zeta * ys[:, 6] + 0.5 * params.lam * (ys[:, 3] - ys[:, 5])
    columns: dict[str, np.ndarray] = {"x": ys[:, 6]}
    columns["v"] = -(params.ell / TWO_PI) * g
    columns["p0"] = ys[:, 0]
    columns["q0"] = ys[:, 1]
    columns["p1c"] = ys[:, 2]
    columns["p1s"] = ys[:, 3]
    columns["q1c"] = ys[:, 4]
    columns["q1s"] = ys[:, 5]
    for n in range(2, n_max + 1):
        base = 7 + 4 * (n - 2)
        for k, suffix in enumerate(("c", "s")):
            columns[f"p{n}{suffix}"] = ys[:, base + k]
        for k, suffix in enumerate(("c", "s")):
            columns[f"q{n}{suffix}"] = ys[:, base + 2 + k]
    return TimeSeries(t=ts, columns=columns, meta=meta)
