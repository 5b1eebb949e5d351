"""Closed-form bifurcation quantities of the reduced two-row system.

The linearization of the five-dimensional first-harmonic block has three
eigenvalues at -a0 and a conjugate pair tau(Omega) +/- i omega(Omega) with

    tau   = -(1/4) (2 a0 + zeta ell / pi + 2 lambda a1 / (a0 ell)),
    omega = sqrt(zeta ell a0 / (2 pi) - tau^2).

At the root Omega0 of tau the pair crosses the imaginary axis and a stable
limit cycle of radius sqrt(-(Omega - Omega0) tau'(Omega0) / tau_tilde)
appears.  The quadratic center-manifold coefficients and the cubic normal
form are carried here as well, together with validity checks for the
onset hypotheses (a1(Omega0) < 0 and tau'(Omega0) > 0) and the block
spectrum of the N-row generalization.  The manifold coefficients follow
from the order-two matching system of the invariance equation and are
validated against it directly by :func:`cm_residual`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .params import PhysicalParams, TransitionRates, rates_from_atp

TWO_PI = 2.0 * math.pi


class ComplexCollapse(RuntimeError):
    """The oscillatory radicand is non-positive: eigenvalues are real."""


class NoSignChange(RuntimeError):
    """tau does not change sign on the bracket; no onset to locate."""


class DegenerateRates(ValueError):
    """a1 or b1 vanish; the manifold coefficients are undefined."""


# ---------------------------------------------------------------------------
# linear quantities


def tau(params: PhysicalParams, rates: TransitionRates) -> float:
    """Real part of the critical eigenvalue pair (1/s)."""
    a0 = rates.a0
    return -0.25 * (2.0 * a0 + params.zeta * params.ell / math.pi
                    + 2.0 * params.lam * rates.a1 / (a0 * params.ell))


def omega_im(params: PhysicalParams, rates: TransitionRates) -> float:
    """Imaginary part of the pair, sqrt(zeta ell a0/(2 pi) - tau^2) (rad/s).

    Raises :class:`ComplexCollapse` when the radicand is non-positive.
    """
    radicand = params.zeta * params.ell * rates.a0 / TWO_PI - tau(params, rates) ** 2
    if radicand <= 0.0:
        raise ComplexCollapse(f"radicand {radicand:.6g} <= 0: real eigenvalues")
    return math.sqrt(radicand)


def onset_frequency(params: PhysicalParams, rates_at_omega0: TransitionRates) -> float:
    """omega0 = sqrt(zeta ell a0(Omega0) / (2 pi)) (rad/s)."""
    return math.sqrt(params.zeta * params.ell * rates_at_omega0.a0 / TWO_PI)


def a1_at_onset(params: PhysicalParams, rates_at_omega0: TransitionRates) -> float:
    """Value a1 must take at the onset: -(ell/2 lambda)(2 a0^2 + zeta ell a0/pi)."""
    a0 = rates_at_omega0.a0
    return -(params.ell / (2.0 * params.lam)) * (
        2.0 * a0 ** 2 + params.zeta * params.ell * a0 / math.pi)


def two_row_block(params: PhysicalParams, rates: TransitionRates) -> np.ndarray:
    """2x2 linear block of the transformed (y, x) variables."""
    a0 = rates.a0
    r = rates.a1 / a0
    ell = params.ell
    return np.array([
        [-a0 - params.lam * r / ell, -params.zeta * r / ell],
        [-params.lam * ell / TWO_PI, -params.zeta * ell / TWO_PI],
    ])


def eigenvalues_two_row(params: PhysicalParams, rates: TransitionRates) -> np.ndarray:
    """Five closed-form eigenvalues {-a0 (x3), tau +/- sqrt(tau^2 - det)}."""
    a0 = rates.a0
    t = tau(params, rates)
    det = params.zeta * params.ell * a0 / TWO_PI
    root = cmath.sqrt(complex(t * t - det, 0.0))
    return np.array([-a0, -a0, -a0, t + root, t - root], dtype=complex)


def tau_prime_sqrt_family(params: PhysicalParams) -> float:
    """tau'(Omega0) = zeta ell / (8 pi Omega0) for the sqrt/linear family."""
    return params.zeta * params.ell / (8.0 * math.pi * params.Omega0)


@dataclass(frozen=True)
class OnsetResult:
    """Located onset: the root of tau and its slope there."""

    omega0: float
    tau_prime: float          # central differences at the root
    tau_at_root: float
    bracket: tuple[float, float]


def find_omega0(params: PhysicalParams, rate_family=None,
                bracket: tuple[float, float] | None = None) -> OnsetResult:
    """Root of tau(Omega) on a bracketing interval.

    ``rate_family`` maps an ATP level to :class:`TransitionRates` and
    defaults to the sqrt/linear family of :func:`rates_from_atp`.  Uses a
    bracketing bisection/secant hybrid to 1e-12 relative; raises
    :class:`NoSignChange` if tau has equal signs at the bracket ends.
    """
    family = rate_family or (lambda om: rates_from_atp(params, om))

    def f(om: float) -> float:
        return tau(params, family(om))

    if bracket is None:
        bracket = (0.05 * params.Omega0, 5.0 * params.Omega0)
    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        root = lo
    elif fhi == 0.0:
        root = hi
    elif flo * fhi > 0.0:
        raise NoSignChange(
            f"tau({lo:.6g}) = {flo:.6g} and tau({hi:.6g}) = {fhi:.6g} "
            "have the same sign")
    else:
        root = brentq(f, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=200)
    h = 1e-6 * root
    tau_prime = (f(root + h) - f(root - h)) / (2.0 * h)
    return OnsetResult(omega0=root, tau_prime=tau_prime,
                       tau_at_root=f(root), bracket=(lo, hi))


# ---------------------------------------------------------------------------
# N-row spectrum


def displacement_coupling_matrix(n_rows: int) -> np.ndarray:
    """Tridiagonal (2, -1) map from absolute shifts x_k to the block variables."""
    if n_rows < 2:
        raise ValueError("n_rows must be >= 2")
    m = n_rows - 1
    mat = 2.0 * np.eye(m)
    idx = np.arange(m - 1)
    mat[idx, idx + 1] = -1.0
    mat[idx + 1, idx] = -1.0
    return mat


def n_row_block(params: PhysicalParams, rates: TransitionRates) -> np.ndarray:
    """2x2 block repeated N-1 times in the N-row linearization."""
    p_e = rates.a1 / (rates.a0 * params.ell)
    ell, eta, k = params.ell, params.eta, params.k_spring
    U = params.U
    return np.array([
        [-2.0 * math.pi ** 2 * U * p_e / (ell * eta) - rates.a0,
         -TWO_PI * k * p_e / (ell * eta)],
        [-math.pi * U / eta, -k / eta],
    ])


@dataclass(frozen=True)
class NRowSpectrum:
    """Spectrum of the (3N-1)-dimensional N-row linearization."""

    n_rows: int
    eigenvalues: np.ndarray   # N+1 copies of -a0 then N-1 conjugate pairs
    block: np.ndarray         # the repeated 2x2 block
    coupling: np.ndarray      # tridiagonal (2, -1) displacement map

    @property
    def pair(self) -> complex:
        return complex(self.eigenvalues[self.n_rows + 1])


def eigenvalues_n_row(params: PhysicalParams, rates: TransitionRates,
                      n_rows: int) -> NRowSpectrum:
    """{-a0 x (N+1)} plus N-1 identical pairs tau +/- i omega."""
    if n_rows < 2:
        raise ValueError("n_rows must be >= 2")
    a0 = rates.a0
    t = tau(params, rates)
    det = params.zeta * params.ell * a0 / TWO_PI
    root = cmath.sqrt(complex(t * t - det, 0.0))
    eigs = [-a0 + 0.0j] * (n_rows + 1)
    for _ in range(n_rows - 1):
        eigs += [t + root, t - root]
    return NRowSpectrum(n_rows=n_rows, eigenvalues=np.array(eigs),
                        block=n_row_block(params, rates),
                        coupling=displacement_coupling_matrix(n_rows))


def n_row_first_order_rhs(y: np.ndarray, params: PhysicalParams,
                          rates: TransitionRates, n_rows: int) -> np.ndarray:
    """First-harmonic reduction of the N-row system (dimension 3N-1).

    Layout: y = [q_1^c..q_N^c, q_1^s..q_N^s, x_1..x_{N-1}] with absolute
    shifts x_k (x_0 = x_N = 0).  Used as the numerical oracle for the
    N-row spectrum.
    """
    N = n_rows
    qc = y[:N]
    qs = y[N:2 * N]
    xs = y[2 * N:]
    a1, b1 = rates.coefficient(1)
    a0 = rates.a0
    ell, eta, k = params.ell, params.eta, params.k_spring
    deltas = np.diff(np.concatenate(([0.0], xs, [0.0])))
    fint = -math.pi * params.U * qs
    bal = (fint[:-1] - fint[1:]) - k * (deltas[:-1] - deltas[1:])
    tail = np.concatenate((np.cumsum(bal[::-1])[::-1], [0.0]))
    v_last = -float(np.arange(1, N) @ bal) / (N * eta)
    v = v_last + tail / eta
    w = TWO_PI * v / ell
    dqc = -a0 * qc - w * qs + a1 / ell
    dqs = -a0 * qs + w * qc + b1 / ell
    dxs = np.cumsum(v)[:-1]
    return np.concatenate((dqc, dqs, dxs))


def numerical_jacobian(f, y0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with per-component step h * scale."""
    y0 = np.asarray(y0, dtype=float)
    n = len(y0)
    jac = np.empty((n, n))
    for j in range(n):
        step = h * max(1.0, abs(y0[j]))
        yp = y0.copy()
        ym = y0.copy()
        yp[j] += step
        ym[j] -= step
        jac[:, j] = (f(yp) - f(ym)) / (2.0 * step)
    return jac


# ---------------------------------------------------------------------------
# normal form and amplitude


def tau_tilde(params: PhysicalParams, rates_at_omega0: TransitionRates) -> float:
    """Cubic radial coefficient of the normal form (1/(s nm^2)); negative."""
    a0 = rates_at_omega0.a0
    z = params.zeta
    ell = params.ell
    return -(3.0 * math.pi * z / (4.0 * ell)) * (
        (math.pi * a0 + ell * z) / (math.pi * a0 + 2.0 * ell * z))


@dataclass(frozen=True)
class AmplitudeTheory:
    """Limit-cycle radius from the normal form, both algebraic routes."""

    rho: float
    rho_general: float       # sqrt(-(Omega - Omega0) tau' / tau_tilde)
    rho_simplified: float    # sqrt/linear-family closed form


def amplitude_theory(delta: float, params: PhysicalParams,
                     rates_at_omega0: TransitionRates,
                     tau_prime: float | None = None) -> AmplitudeTheory:
    """Oscillation radius at Omega = Omega0 (1 + delta), delta >= 0.

    ``tau_prime`` defaults to the sqrt/linear-family slope
    zeta ell/(8 pi Omega0); pass the measured slope for other families.
    The simplified form is specific to that family and coincides with the
    general one under it.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    tt = tau_tilde(params, rates_at_omega0)
    if tt >= 0:
        raise ValueError(f"tau_tilde = {tt:.6g} >= 0 contradicts supercriticality")
    tp = tau_prime_sqrt_family(params) if tau_prime is None else tau_prime
    rho_general = math.sqrt(-(delta * params.Omega0) * tp / tt)
    pa0 = math.pi * rates_at_omega0.a0
    lz = params.ell * params.zeta
    rho_simplified = math.sqrt(delta * (params.ell ** 2 / (6.0 * math.pi ** 2))
                               * (pa0 + 2.0 * lz) / (pa0 + lz))
    return AmplitudeTheory(rho=rho_general, rho_general=rho_general,
                           rho_simplified=rho_simplified)


# ---------------------------------------------------------------------------
# center manifold


def center_manifold_coeffs(params: PhysicalParams,
                           rates_at_omega0: TransitionRates) -> np.ndarray:
    """Quadratic manifold coefficients a_ij, shape (3, 6).

    Columns order the monomials (y^2, y x, y dOmega, x^2, x dOmega,
    dOmega^2); the dOmega columns vanish identically.  Rows i = 1, 2 share
    one coefficient set carrying (a1^2 + b1^2); row 3 carries b1^2 of it.
    """
    a1, b1 = rates_at_omega0.a1, rates_at_omega0.b1
    if a1 == 0.0 or b1 == 0.0:
        raise DegenerateRates("center manifold needs a1 != 0 and b1 != 0")
    a0 = rates_at_omega0.a0
    z, lam, ell = params.zeta, params.lam, params.ell
    pa0 = math.pi * a0
    den = ell * (pa0 + 2.0 * ell * z)
    f12 = (a1 ** 2 + b1 ** 2) / b1            # rows 1, 2
    f3 = b1                                    # row 3
    coeffs = np.zeros((3, 6))
    for i, f in ((0, f12), (1, f12), (2, f3)):
        coeffs[i, 0] = -math.pi * lam ** 2 / den * f / a0 ** 2
        coeffs[i, 1] = z * (ell * z - pa0) / (pa0 + 2.0 * ell * z) * f / (a0 * a1)
        coeffs[i, 3] = -math.pi * z ** 2 / den * f / a0 ** 2
    return coeffs


def solve_cm_coeffs(params: PhysicalParams,
                    rates_at_omega0: TransitionRates) -> np.ndarray:
    """Manifold coefficients from the order-two matching system directly.

    Independent route used to validate :func:`center_manifold_coeffs`:
    solves the 3x3 linear system obtained by matching y^2, y x and x^2 in
    the invariance equation.
    """
    a1, b1 = rates_at_omega0.a1, rates_at_omega0.b1
    if a1 == 0.0 or b1 == 0.0:
        raise DegenerateRates("center manifold needs a1 != 0 and b1 != 0")
    a0 = rates_at_omega0.a0
    z, lam = params.zeta, params.lam
    A = two_row_block(params, rates_at_omega0)
    M = np.array([
        [2.0 * A[0, 0] + a0, A[1, 0], 0.0],
        [2.0 * A[0, 1], A[0, 0] + A[1, 1] + a0, 2.0 * A[1, 0]],
        [0.0, A[0, 1], 2.0 * A[1, 1] + a0],
    ])
    coeffs = np.zeros((3, 6))
    for i, K in ((0, (a1 ** 2 + b1 ** 2) / (a1 * b1)),
                 (1, (a1 ** 2 + b1 ** 2) / (a1 * b1)),
                 (2, b1 / a1)):
        sol = np.linalg.solve(M, np.array([lam * K, z * K, 0.0]))
        coeffs[i, 0], coeffs[i, 1], coeffs[i, 3] = sol
    return coeffs


def _family_derivatives(params: PhysicalParams,
                        rates_at_omega0: TransitionRates) -> tuple[float, float]:
    """(a0', (a1/a0)') of the sqrt/linear family at the located onset."""
    om0 = (rates_at_omega0.a0 / params.c) ** 2
    a0p = params.c / (2.0 * math.sqrt(om0))
    a1 = rates_at_omega0.a1
    a1p = a1 / om0                     # a1 = d Omega
    a0 = rates_at_omega0.a0
    return a0p, (a1p * a0 - a1 * a0p) / a0 ** 2


def cm_residual(coeffs: np.ndarray, params: PhysicalParams,
                rates_at_omega0: TransitionRates,
                probe: tuple[float, float, float]) -> float:
    """Invariance-equation residual of the quadratic manifold at a probe.

    ``probe`` is (y, x, dOmega).  With correct coefficients the residual
    is cubic in the probe size; a corrupted table leaves a quadratic
    remainder.  The dOmega direction uses the first-order Taylor expansion
    of the coefficients of the sqrt/linear family.
    """
    y, x, dom = probe
    a1, b1 = rates_at_omega0.a1, rates_at_omega0.b1
    if a1 == 0.0 or b1 == 0.0:
        raise DegenerateRates("residual needs a1 != 0 and b1 != 0")
    a0 = rates_at_omega0.a0
    z, lam, ell = params.zeta, params.lam, params.ell
    A = two_row_block(params, rates_at_omega0)
    a0p, ratio_p = _family_derivatives(params, rates_at_omega0)

    mono = np.array([y * y, y * x, y * dom, x * x, x * dom, dom * dom])
    dmono_dy = np.array([2.0 * y, x, dom, 0.0, 0.0, 0.0])
    dmono_dx = np.array([0.0, y, 0.0, 2.0 * x, dom, 0.0])
    h = coeffs @ mono
    h_y = coeffs @ dmono_dy
    h_x = coeffs @ dmono_dx

    g_fac = z * x + lam * y
    # y-component of the slow field: linear block, Omega expansion, cubic part
    f1 = (-(a0p + lam * ratio_p / ell) * dom * y
          - z * ratio_p / ell * dom * x
          - (b1 / a1) * 0.5 * (h[0] + h[1] - 2.0 * h[2]) * g_fac)
    ydot = A[0, 0] * y + A[0, 1] * x + f1
    xdot = A[1, 0] * y + A[1, 1] * x

    G = g_fac * np.array([
        (a1 / b1) * (y + h[2]) + (b1 / a1) * (-h[0] + y + h[2]),
        (a1 / b1) * (y - h[2]) + (b1 / a1) * (h[1] + y - h[2]),
        -(b1 / a1) * 0.5 * (h[0] - h[1] - 2.0 * y),
    ])
    g_rhs = -a0p * dom * h + G
    residual = h_y * ydot + h_x * xdot + a0 * h - g_rhs
    return float(np.max(np.abs(residual)))


def cm_scaling_exponent(coeffs: np.ndarray, params: PhysicalParams,
                        rates_at_omega0: TransitionRates,
                        probe: tuple[float, float, float] = (0.1, 1.0, 1.0),
                        scales: tuple[float, ...] = (1e-2, 1e-3, 1e-4)) -> float:
    """Log-log slope of the residual against probe scale.

    The base probe is scaled into the manifold's validity region (dOmega
    is measured in units of Omega0); a correct table gives slope 3.
    """
    y0, x0, w0 = probe
    res = []
    for s in scales:
        r = cm_residual(coeffs, params, rates_at_omega0,
                        (s * y0 / params.ell, s * x0, s * w0 * params.Omega0))
        res.append(r)
    logs = np.log(np.array(res))
    logx = np.log(np.array(scales))
    slope, _ = np.polyfit(logx, logs, 1)
    return float(slope)


def jordan_transform(params: PhysicalParams,
                     rates_at_omega0: TransitionRates) -> np.ndarray:
    """Matrix P with P^-1 A P in rotation form at the onset.

    Validates that the radicand of the off-diagonal entry is positive
    before taking the root.
    """
    a0 = rates_at_omega0.a0
    a1 = rates_at_omega0.a1
    z, lam, ell = params.zeta, params.lam, params.ell
    p11 = (math.pi / (lam * ell)) * (lam * a1 / (ell * a0) + a0) - z / (2.0 * lam)
    radicand = (-4.0 * math.pi * lam * ell * a0 * a1 * (TWO_PI * a0 + z * ell)
                - ell ** 2 * a0 ** 2 * (z * ell - TWO_PI * a0) ** 2
                - 4.0 * math.pi ** 2 * lam ** 2 * a1 ** 2)
    if radicand <= 0.0:
        raise ComplexCollapse("Jordan transform radicand non-positive")
    p12 = math.sqrt(radicand) / (2.0 * lam * ell ** 2 * a0)
    return np.array([[p11, p12], [1.0, 0.0]])


def tau_tilde_from_normal_form(params: PhysicalParams,
                               rates_at_omega0: TransitionRates) -> float:
    """Cubic coefficient recomputed through the normal-form route.

    Restricts the flow to the quadratic manifold, transforms with
    :func:`jordan_transform` and applies the standard cubic-coefficient
    formula; the mixed second-derivative term vanishes because the
    restricted field is an odd cubic.  Serves as the independent oracle
    for :func:`tau_tilde`.
    """
    a1, b1 = rates_at_omega0.a1, rates_at_omega0.b1
    coeffs = center_manifold_coeffs(params, rates_at_omega0)
    z, lam = params.zeta, params.lam
    d1 = coeffs[0, 0] - coeffs[2, 0]
    d2 = coeffs[0, 1] - coeffs[2, 1]
    d4 = coeffs[0, 3] - coeffs[2, 3]
    s = -(b1 / a1)
    # cubic coefficients of the restricted y-field in (y, x)
    c_y3 = s * lam * d1
    c_y2x = s * (z * d1 + lam * d2)
    c_yx2 = s * (z * d2 + lam * d4)
    P = jordan_transform(params, rates_at_omega0)
    p11, p12 = P[0]
    # compose with y = p11 u + p12 w, x = u; collect u^2 w and w^3
    c21 = c_y3 * 3.0 * p11 ** 2 * p12 + c_y2x * 2.0 * p11 * p12 + c_yx2 * p12
    c03 = c_y3 * p12 ** 3
    return (2.0 * c21 + 6.0 * c03) / (16.0 * p12)


# ---------------------------------------------------------------------------
# report


@dataclass
class BifurcationReport:
    """Bundle of onset quantities for serialization.

    ``tau_prime`` comes from central differences at the located root;
    ``tau_prime_analytic`` carries the sqrt/linear-family closed form
    zeta ell/(8 pi Omega0) and is None for custom rate families.
    """

    omega0_param: float
    tau_prime: float
    omega0_freq: float
    tau_tilde: float
    amplitude_curve: list[tuple[float, float]]
    eigenvalues: list[complex]
    validity: dict[str, bool] = field(default_factory=dict)
    tau_prime_analytic: float | None = None

    @property
    def valid(self) -> bool:
        return all(self.validity.values())

    def to_dict(self) -> dict:
        return {
            "omega0_param": self.omega0_param,
            "tau_prime": self.tau_prime,
            "tau_prime_analytic": self.tau_prime_analytic,
            "omega0_freq": self.omega0_freq,
            "tau_tilde": self.tau_tilde,
            "amplitude_curve": [[d, r] for d, r in self.amplitude_curve],
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
            "validity": dict(self.validity),
        }


def bifurcation_report(params: PhysicalParams, rate_family=None,
                       n_rows: int | None = None,
                       deltas: tuple[float, ...] = (0.0125, 0.025, 0.05, 0.1, 0.2, 0.3),
                       bracket: tuple[float, float] | None = None) -> BifurcationReport:
    """Locate the onset and assemble every closed-form quantity.

    Eigenvalues are reported at the current params.Omega (two-row), or the
    full N-row spectrum when ``n_rows`` is given.  Raises
    :class:`NoSignChange` if the family never crosses the onset; callers
    wanting a structured failure report should catch it.
    """
    analytic = None
    if rate_family is None:
        rate_family = lambda om: rates_from_atp(params, om)
        analytic = tau_prime_sqrt_family(params)
    family = rate_family
    onset = find_omega0(params, family, bracket=bracket)
    at0 = family(onset.omega0)
    freq = onset_frequency(params, at0)
    tt = tau_tilde(params, at0)
    curve = []
    for dlt in deltas:
        amp = amplitude_theory(dlt, params, at0, tau_prime=onset.tau_prime)
        curve.append((dlt, amp.rho_general))
    rates_now = family(params.Omega)
    if n_rows is None:
        eigs = list(eigenvalues_two_row(params, rates_now))
    else:
        eigs = list(eigenvalues_n_row(params, rates_now, n_rows).eigenvalues)
    pair_im = omega_im(params, at0)
    pair_re = tau(params, at0)
    validity = {
        "a1_at_onset_negative": at0.a1 < 0.0,
        "tau_prime_positive": onset.tau_prime > 0.0,
        "pair_on_axis": abs(pair_re) < 1e-9 * pair_im,
    }
    return BifurcationReport(
        omega0_param=onset.omega0,
        tau_prime=onset.tau_prime,
        omega0_freq=freq,
        tau_tilde=tt,
        amplitude_curve=curve,
        eigenvalues=eigs,
        validity=validity,
        tau_prime_analytic=analytic,
    )
