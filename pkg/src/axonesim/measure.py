"""Time-series post-processing and experiment orchestration.

Amplitude is half the max-min spread of the displacement after the
transient; frequency comes from the mean spacing of zero upcrossings of
the centered trace (an FFT is deliberately not the primary estimator:
zero crossings stay robust on short windows).  On top of the estimators
sit the delta sweeps, the +/-5% parameter scans and the
theory/ODE/PDE error tables, all deterministic for a given seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import hopf
from .params import PhysicalParams, rates_from_atp
from .pde import (Grid, N_ROW, Recorder, TWO_ROW, equilibrium_state,
                  random_shift_state, run)
from .spectral import FourierState, integrate
from .timeseries import TimeSeries

TWO_PI = 2.0 * math.pi


class TooShort(ValueError):
    """Series does not extend past the transient by a usable margin."""


class NoOscillation(RuntimeError):
    """No periodic signal found where one is required."""


@dataclass(frozen=True)
class AmplitudeEstimate:
    """Amplitude/frequency of one displacement trace.

    ``frequency`` is None when fewer than three upcrossings exist in the
    retained window (decayed signals).
    """

    amplitude: float
    frequency: float | None
    transient_samples: int
    window: tuple[float, float]


def _upcrossing_times(t: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Linearly interpolated times where w crosses zero upward."""
    idx = np.where((w[:-1] <= 0.0) & (w[1:] > 0.0))[0]
    if len(idx) == 0:
        return np.empty(0)
    frac = -w[idx] / (w[idx + 1] - w[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def measure_amplitude(series: TimeSeries, transient: int,
                      min_amplitude: float = 1e-4) -> AmplitudeEstimate:
    """Estimate amplitude and frequency of the primary displacement.

    Drops the first ``transient`` samples, takes (max - min)/2 of the rest
    and derives the frequency from zero upcrossings of the centered trace.
    Signals whose amplitude stays below ``min_amplitude`` (decayed runs)
    report no frequency: their crossings are residual ripple, not a limit
    cycle.  Raises :class:`TooShort` when fewer than 10 samples remain or
    when a measured frequency implies the window covers less than 5
    periods.
    """
    if len(series) <= transient + 10:
        raise TooShort(f"need more than {transient + 10} samples, "
                       f"got {len(series)}")
    t = series.t[transient:]
    x = series.displacement()[transient:]
    amplitude = 0.5 * float(x.max() - x.min())
    window = (float(t[0]), float(t[-1]))
    frequency = None
    if amplitude >= min_amplitude:
        crossings = _upcrossing_times(t, x - x.mean())
        if len(crossings) >= 3:
            frequency = 1.0 / float(np.mean(np.diff(crossings)))
            if (window[1] - window[0]) * frequency < 5.0:
                raise TooShort("window covers fewer than 5 estimated periods")
    return AmplitudeEstimate(amplitude=amplitude, frequency=frequency,
                             transient_samples=transient, window=window)


# ---------------------------------------------------------------------------
# engines


def growth_rate(params: PhysicalParams, delta: float) -> float:
    """tau at Omega0 (1 + delta): linear growth (or decay) rate of x."""
    p = params.at_delta(delta)
    return hopf.tau(p, rates_from_atp(p))


def expected_amplitude(params: PhysicalParams, delta: float) -> float:
    """Theory radius for delta > 0, else 0."""
    if delta <= 0.0:
        return 0.0
    p = params.at_delta(delta)
    at0 = rates_from_atp(p, p.Omega0)
    return hopf.amplitude_theory(delta, p, at0).rho


def default_transient(params: PhysicalParams, delta: float, dt: float) -> float:
    """Transient to discard before measuring: at least 1000 steps, longer
    near the onset where the limit cycle is entered slowly."""
    at0 = rates_from_atp(params, params.Omega0)
    om0 = hopf.onset_frequency(params, at0)
    floor = 1000.0 * dt
    if delta == 0.0:
        return floor
    return max(floor, 10.0 / (abs(delta) * om0))


def settle_time(params: PhysicalParams, delta: float) -> float:
    """Run length needed to land on the attractor, about 16 e-folds."""
    rate = abs(growth_rate(params, delta))
    if rate == 0.0:
        raise ValueError("delta = 0 sits on the bifurcation point")
    return 16.0 / rate


def measurement_window(params: PhysicalParams) -> float:
    at0 = rates_from_atp(params, params.Omega0)
    om0 = hopf.onset_frequency(params, at0)
    return max(30.0 * TWO_PI / om0, 0.25)


def suggest_dt(params: PhysicalParams, delta: float, J: int,
               cfl_fraction: float = 0.25, x0: float = 0.01) -> float:
    """Time step for the upwind engine, dt proportional to dx.

    Budgets the peak sliding speed at 1.5x the theory amplitude times the
    onset frequency (or the perturbation scale below onset) and keeps
    |v| dt/dx at the requested fraction; capped so the oscillation period
    stays resolved and dt a0 stays small.  The explicit coupling update is
    anti-dissipative by about om0^2 dt / 2 on the oscillatory pair, so dt
    is also held below 0.4 |tau| / om0^2, keeping at least 80% of the
    physical decay (or growth) rate.
    """
    at0 = rates_from_atp(params, params.Omega0)
    om0 = hopf.onset_frequency(params, at0)
    scale = max(expected_amplitude(params, delta), abs(x0), 1e-3)
    v_budget = 1.5 * om0 * scale
    dx = params.ell / J
    period = TWO_PI / om0
    dt = min(cfl_fraction * dx / v_budget, period / 64.0, 0.1 / at0.a0)
    if delta != 0.0:
        dt = min(dt, 0.4 * abs(growth_rate(params, delta)) / om0 ** 2)
    return dt


@dataclass(frozen=True)
class OdeEngine:
    """Fourier-reduced path: fixed-step RK4 on the truncated hierarchy."""

    dt: float = 1e-4
    n_max: int = 5
    record_stride: int = 1

    kind = "ode"

    def simulate(self, params: PhysicalParams, delta: float, t_end: float,
                 x0: float = 0.01, seed: int = 0) -> TimeSeries:
        p = params.at_delta(delta)
        rates = rates_from_atp(p)
        state = FourierState.equilibrium(p, rates, n_max=self.n_max, x0=x0)
        return integrate(state, p, rates, t_end, self.dt,
                         record_stride=self.record_stride)


@dataclass(frozen=True)
class PdeEngine:
    """Upwind path; dt defaults to the CFL-fraction policy of suggest_dt."""

    J: int = 200
    dt: float | None = None
    cfl_fraction: float = 0.25
    model: str = TWO_ROW
    record_stride: int = 10

    kind = "pde"

    def resolve_dt(self, params: PhysicalParams, delta: float,
                   x0: float = 0.01) -> float:
        if self.dt is not None:
            return self.dt
        return suggest_dt(params, delta, self.J, self.cfl_fraction, x0)

    def simulate(self, params: PhysicalParams, delta: float, t_end: float,
                 x0: float = 0.01, seed: int = 0) -> TimeSeries:
        p = params.at_delta(delta)
        rates = rates_from_atp(p)
        dt = self.resolve_dt(params, delta, x0)
        grid = Grid.for_cells(p.ell, self.J, dt)
        if self.model == N_ROW:
            raise ValueError("use simulate_n_row for the N-row model")
        state = equilibrium_state(self.model, grid, p, rates, x0=x0)
        steps = max(1, int(round(t_end / dt)))
        return run(state, grid, p, rates, steps,
                   Recorder(stride=self.record_stride))

    def simulate_n_row(self, params: PhysicalParams, delta: float,
                       n_rows: int, t_end: float, seed: int = 0,
                       xbar: float = 0.01) -> TimeSeries:
        p = params.at_delta(delta)
        rates = rates_from_atp(p)
        dt = self.resolve_dt(params, delta, xbar)
        grid = Grid.for_cells(p.ell, self.J, dt)
        state = random_shift_state(grid, p, rates, n_rows, seed, xbar=xbar)
        steps = max(1, int(round(t_end / dt)))
        return run(state, grid, p, rates, steps,
                   Recorder(stride=self.record_stride))


def measure_run(engine, params: PhysicalParams, delta: float,
                seed: int = 0, x0: float = 0.01) -> AmplitudeEstimate:
    """Run an engine to its attractor and measure the displacement."""
    t_settle = settle_time(params, delta)
    t_meas = measurement_window(params)
    t_end = t_settle + t_meas
    series = engine.simulate(params, delta, t_end, x0=x0, seed=seed)
    dt_rec = float(series.t[1] - series.t[0])
    transient = min(len(series) - 11,
                    int(max(t_settle, default_transient(params, delta, dt_rec)) / dt_rec))
    return measure_amplitude(series, transient)


# ---------------------------------------------------------------------------
# experiment tables


@dataclass(frozen=True)
class SweepRow:
    delta: float
    amplitude: float | None
    frequency: float | None
    status: str  # "ok" or the error class name


def sweep_delta(deltas, engine, params: PhysicalParams,
                seed: int = 0) -> list[SweepRow]:
    """Amplitude/frequency per delta; failing rows are flagged, not fatal.

    Rows are computed on worker threads and returned in input order.
    """
    deltas = list(deltas)

    def one(delta: float) -> SweepRow:
        try:
            est = measure_run(engine, params, delta, seed=seed)
            return SweepRow(delta, est.amplitude, est.frequency, "ok")
        except Exception as exc:  # noqa: BLE001 - row-level flagging by contract
            return SweepRow(delta, None, None, type(exc).__name__)

    if not deltas:
        return []
    with ThreadPoolExecutor(max_workers=min(4, len(deltas))) as pool:
        return list(pool.map(one, deltas))


_SCAN_FIELDS = {"k": "k_spring", "eta": "eta", "ell": "ell"}


@dataclass(frozen=True)
class SensitivityRow:
    value: float
    amplitude: float | None
    frequency: float | None
    status: str


def sensitivity_scan(param_name: str, params: PhysicalParams,
                     rel_range: float = 0.05, points: int = 11,
                     delta: float = 0.05, engine=None,
                     seed: int = 0) -> list[SensitivityRow]:
    """Scan one physical parameter over +/- rel_range around its base value.

    The coefficient slope d is re-derived for every scanned parameter set
    (the onset is pinned at the configured Omega0), then amplitude and
    frequency are measured at Omega = Omega0 (1 + delta).
    """
    if param_name not in _SCAN_FIELDS:
        raise ValueError(f"param must be one of {sorted(_SCAN_FIELDS)}")
    if points < 2:
        raise ValueError("points must be >= 2")
    engine = engine or OdeEngine()
    field_name = _SCAN_FIELDS[param_name]
    base = getattr(params, field_name)
    values = base * np.linspace(1.0 - rel_range, 1.0 + rel_range, points)

    def one(value: float) -> SensitivityRow:
        scanned = replace(params, **{field_name: float(value)})
        try:
            est = measure_run(engine, scanned, delta, seed=seed)
            return SensitivityRow(float(value), est.amplitude, est.frequency, "ok")
        except Exception as exc:  # noqa: BLE001
            return SensitivityRow(float(value), None, None, type(exc).__name__)

    with ThreadPoolExecutor(max_workers=4) as pool:
        return list(pool.map(one, values))


@dataclass(frozen=True)
class ErrorRow:
    delta: float
    rho_theory: float
    rho_ode: float | None
    rho_pde: float | None
    relerr_theory_pde: float | None
    relerr_ode_pde: float | None
    status: str


def error_table(deltas, params: PhysicalParams, ode_engine: OdeEngine | None = None,
                pde_engine: PdeEngine | None = None, seed: int = 0) -> list[ErrorRow]:
    """Theory vs ODE vs PDE amplitudes with relative errors against the PDE."""
    ode_engine = ode_engine or OdeEngine()
    pde_engine = pde_engine or PdeEngine()
    rows = []
    for delta in deltas:
        rho_th = expected_amplitude(params, delta)
        try:
            rho_ode = measure_run(ode_engine, params, delta, seed=seed).amplitude
            rho_pde = measure_run(pde_engine, params, delta, seed=seed).amplitude
            rows.append(ErrorRow(
                delta, rho_th, rho_ode, rho_pde,
                abs(rho_th - rho_pde) / rho_pde,
                abs(rho_ode - rho_pde) / rho_pde, "ok"))
        except Exception as exc:  # noqa: BLE001
            rows.append(ErrorRow(delta, rho_th, None, None, None, None,
                                 type(exc).__name__))
    return rows


# ---------------------------------------------------------------------------
# cluster detection


@dataclass(frozen=True)
class ClusterResult:
    """Antiphase grouping of the N relative displacements."""

    clusters: tuple[tuple[int, ...], ...]
    phases: tuple[float, ...]          # per pair, relative to pair 1
    amplitudes: tuple[float, ...]
    frequency: float
    amplitude_spread: float            # max/min - 1 across pairs
    frequency_spread: float
    antiphase: bool                    # exactly two clusters, pi apart

    @property
    def uniform(self) -> bool:
        return self.amplitude_spread <= 0.02 and self.frequency_spread <= 0.02

    def partition(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(c) for c in self.clusters)


def _xcorr_phase(a: np.ndarray, b: np.ndarray, dt: float, period: float) -> float:
    """Phase of b relative to a from the cross-correlation peak lag."""
    n = len(a)
    corr = np.correlate(a, b, mode="full")
    lags = np.arange(-n + 1, n)
    max_lag = int(0.6 * period / dt)
    keep = np.abs(lags) <= max_lag
    corr = corr[keep]
    lags = lags[keep]
    i = int(np.argmax(corr))
    lag = float(lags[i])
    if 0 < i < len(corr) - 1:
        denom = corr[i - 1] - 2.0 * corr[i] + corr[i + 1]
        if denom != 0.0:
            lag += 0.5 * (corr[i - 1] - corr[i + 1]) / denom
    phase = TWO_PI * lag * dt / period
    return (phase + math.pi) % TWO_PI - math.pi


def detect_clusters(series: TimeSeries, transient: int = 0,
                    min_amplitude: float = 1e-4) -> ClusterResult:
    """Group the N-row displacements into synchronized clusters.

    Pairwise phase differences come from cross-correlation lags over the
    steady window; clusters are connected components of the graph joining
    pairs with |phase| < pi/8.  The N-th displacement is rebuilt from the
    zero-sum constraint when the series carries only N-1 columns.

    Raises :class:`NoOscillation` when the largest displacement stays
    below ``min_amplitude`` or shows fewer than three upcrossings.
    """
    names = [n for n in series.names if n.startswith("delta_")]
    if not names:
        raise ValueError("series has no delta_* columns")
    names.sort(key=lambda s: int(s.split("_")[1]))
    cols = [series.column(n) for n in names]
    n_rows = series.meta.get("n_rows", len(names) + 1)
    if len(names) == n_rows - 1:
        cols.append(-np.sum(cols, axis=0))
    signals = np.stack(cols)[:, transient:]
    t = series.t[transient:]
    if signals.shape[1] < 16:
        raise TooShort("too few samples after transient")
    dt = float(t[1] - t[0])
    centered = signals - signals.mean(axis=1, keepdims=True)
    amplitudes = 0.5 * (signals.max(axis=1) - signals.min(axis=1))
    ref = int(np.argmax(amplitudes))
    if amplitudes[ref] < min_amplitude:
        raise NoOscillation(f"max amplitude {amplitudes[ref]:.3g} nm below "
                            f"{min_amplitude:.3g} nm")
    freqs = []
    for sig in centered:
        crossings = _upcrossing_times(t, sig)
        if len(crossings) < 3:
            raise NoOscillation("a displacement has fewer than 3 upcrossings")
        freqs.append(1.0 / float(np.mean(np.diff(crossings))))
    freqs = np.array(freqs)
    period = 1.0 / freqs[ref]

    n = len(centered)
    phase_ref = np.array([_xcorr_phase(centered[ref], sig, dt, period)
                          for sig in centered])
    phases = phase_ref - phase_ref[0]
    phases = (phases + math.pi) % TWO_PI - math.pi

    # connected components under |pairwise phase| < pi/8
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            diff = _xcorr_phase(centered[i], centered[j], dt, period)
            adj[i, j] = adj[j, i] = abs(diff) < math.pi / 8.0
    unseen = set(range(n))
    clusters = []
    while unseen:
        stack = [min(unseen)]
        comp = set()
        while stack:
            k = stack.pop()
            if k in comp:
                continue
            comp.add(k)
            stack.extend(m for m in unseen if adj[k, m] and m not in comp)
        unseen -= comp
        clusters.append(tuple(sorted(i + 1 for i in comp)))
    clusters.sort(key=lambda c: c[0])

    antiphase = False
    if len(clusters) == 2:
        cross = [abs(_xcorr_phase(centered[i - 1], centered[j - 1], dt, period))
                 for i in clusters[0] for j in clusters[1]]
        antiphase = all(abs(p - math.pi) < math.pi / 8.0 for p in cross)
    return ClusterResult(
        clusters=tuple(clusters),
        phases=tuple(float(p) for p in phases),
        amplitudes=tuple(float(a) for a in amplitudes),
        frequency=float(freqs[ref]),
        amplitude_spread=float(amplitudes.max() / amplitudes.min() - 1.0),
        frequency_spread=float(freqs.max() / freqs.min() - 1.0),
        antiphase=antiphase,
    )
