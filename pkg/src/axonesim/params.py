"""Physical parameters, transition rates and derived closed-form constants.

Unit system: lengths in nm, times in s, masses in kg, so energies come out
in kg nm^2/s^2 (numerically equal to nN nm).  ATP levels Omega/Omega0 are
carried in these energy units as multiples of kBT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Grid used to validate that a coefficient set yields physical rates.
_RATE_CHECK_POINTS = 2048


@dataclass(frozen=True)
class PhysicalParams:
    """All physical constants plus the ATP control level.

    Attributes
    ----------
    ell : float
        Structural period along the filament (nm).
    eta : float
        Viscous drag coefficient (kg/s).
    k_spring : float
        Elastic restoring stiffness (kg/s^2).
    U : float
        Amplitude of the potential difference (kg nm^2/s^2).
    kBT : float
        Thermal energy (kg nm^2/s^2).
    c : float
        Rate prefactor of the base transition rate, a0 = c sqrt(Omega) (1/s).
    Omega0 : float
        ATP level at oscillation onset (energy units).
    Omega : float
        Current ATP level (energy units).
    """

    ell: float
    eta: float
    k_spring: float
    U: float
    kBT: float
    c: float
    Omega0: float
    Omega: float

    def __post_init__(self) -> None:
        if not (self.ell > 0 and self.eta > 0 and self.k_spring > 0):
            raise ValueError("ell, eta and k_spring must be positive")
        if not (self.U > 0 and self.kBT > 0 and self.c > 0):
            raise ValueError("U, kBT and c must be positive")
        if not self.Omega0 > 0:
            raise ValueError("Omega0 must be positive")
        if self.Omega < 0:
            raise ValueError("Omega must be non-negative")

    @property
    def zeta(self) -> float:
        """2 pi k / (eta ell), in 1/(s nm)."""
        return TWO_PI * self.k_spring / (self.eta * self.ell)

    @property
    def lam(self) -> float:
        """2 pi^2 U / (eta ell), in nm/s."""
        return TWO_PI * math.pi * self.U / (self.eta * self.ell)

    def with_omega(self, omega_atp: float) -> "PhysicalParams":
        """Copy of these parameters at a different ATP level."""
        return PhysicalParams(self.ell, self.eta, self.k_spring, self.U,
                              self.kBT, self.c, self.Omega0, omega_atp)

    def at_delta(self, delta: float) -> "PhysicalParams":
        """Copy with Omega = Omega0 (1 + delta)."""
        return self.with_omega(self.Omega0 * (1.0 + delta))


@dataclass(frozen=True)
class DerivedConstants:
    """Closed-form constants derived from :class:`PhysicalParams`."""

    zeta: float   # 1/(s nm)
    lam: float    # nm/s
    d: float      # 1/(s energy)


def derived_constants(params: PhysicalParams) -> DerivedConstants:
    return DerivedConstants(zeta=params.zeta, lam=params.lam,
                            d=d_of_omega0(params))


def baseline_params(delta: float = 0.0) -> PhysicalParams:
    """Baseline parameter set used throughout the simulations.

    ell = 10 nm, kBT = 4.2668e-3 nN nm (36 C), eta = 1e-7 kg/s,
    k = 9.5e-5 kg/s^2, U = 10 kBT, c = 1e3 1/s, Omega0 = 15 kBT,
    and Omega = Omega0 (1 + delta).
    """
    kBT = 4.2668e-3
    omega0 = 15.0 * kBT
    return PhysicalParams(
        ell=10.0,
        eta=1.0e-7,
        k_spring=9.5e-5,
        U=10.0 * kBT,
        kBT=kBT,
        c=1.0e3,
        Omega0=omega0,
        Omega=omega0 * (1.0 + delta),
    )


@dataclass(frozen=True)
class TransitionRates:
    """Fourier representation of the binding rate omega_B.

    omega_B(xi) = a0/2 + sum over odd n of
        a_n cos(2 n pi xi / ell) + b_n sin(2 n pi xi / ell).

    Only odd harmonics may be present: the two motor heads are identical,
    which kills every even coefficient.  Construction validates that the
    evaluated rate stays inside [0, a0] on a fine grid, since omega_A and
    omega_B are probability rates.
    """

    ell: float
    a0: float
    odd_cos: dict[int, float] = field(default_factory=dict)
    odd_sin: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.a0 <= 0:
            raise ValueError("a0 must be positive")
        if self.ell <= 0:
            raise ValueError("ell must be positive")
        for coeffs in (self.odd_cos, self.odd_sin):
            for n in coeffs:
                if n < 1 or n % 2 == 0:
                    raise ValueError(f"only odd harmonics allowed, got n={n}")
        ns = sorted(set(self.odd_cos) | set(self.odd_sin))
        object.__setattr__(self, "_ns", np.array(ns, dtype=float))
        object.__setattr__(self, "_an",
                           np.array([self.odd_cos.get(n, 0.0) for n in ns]))
        object.__setattr__(self, "_bn",
                           np.array([self.odd_sin.get(n, 0.0) for n in ns]))
        xi = np.linspace(0.0, self.ell, _RATE_CHECK_POINTS, endpoint=False)
        wb = omega_B(xi, self)
        tol = 1e-9 * self.a0
        if wb.min() < -tol or wb.max() > self.a0 + tol:
            raise ValueError(
                "coefficients give omega_B outside [0, a0]: "
                f"range [{wb.min():.6g}, {wb.max():.6g}] vs a0={self.a0:.6g}")

    @property
    def a1(self) -> float:
        return self.odd_cos.get(1, 0.0)

    @property
    def b1(self) -> float:
        return self.odd_sin.get(1, 0.0)

    @property
    def max_mode(self) -> int:
        ns = getattr(self, "_ns")
        return int(ns[-1]) if len(ns) else 0

    def coefficient(self, n: int) -> tuple[float, float]:
        """(a_n, b_n) for any n >= 1; zero for absent or even modes."""
        return self.odd_cos.get(n, 0.0), self.odd_sin.get(n, 0.0)


def omega_B(xi, rates: TransitionRates):
    """Binding rate at position(s) xi (1/s); ell-periodic in xi."""
    xi = np.asarray(xi, dtype=float)
    ns = getattr(rates, "_ns")
    if len(ns) == 0:
        return np.broadcast_to(rates.a0 / 2.0, xi.shape).copy() if xi.ndim \
            else rates.a0 / 2.0
    phase = (TWO_PI / rates.ell) * np.multiply.outer(xi, ns)
    an = getattr(rates, "_an")
    bn = getattr(rates, "_bn")
    val = rates.a0 / 2.0 + np.cos(phase) @ an + np.sin(phase) @ bn
    return val if val.ndim else float(val)


def omega_A(xi, rates: TransitionRates):
    """Unbinding rate a0 - omega_B(xi) (1/s)."""
    return rates.a0 - omega_B(xi, rates)


def potential_gradient(xi, params: PhysicalParams):
    """d/dxi of the potential difference U cos(2 pi xi / ell).

    Returns -U (2 pi / ell) sin(2 pi xi / ell), in energy/nm.
    """
    xi = np.asarray(xi, dtype=float)
    val = -params.U * (TWO_PI / params.ell) * np.sin(TWO_PI * xi / params.ell)
    return val if val.ndim else float(val)


def d_of_omega0(params: PhysicalParams) -> float:
    """Slope of a1(Omega) = d Omega that places the onset at Omega0.

    d = -(c ell / 2 pi lambda) (2 pi c + zeta ell / sqrt(Omega0)); with the
    baseline constants this evaluates to -56.4588 per energy unit.
    """
    if params.Omega0 <= 0:
        raise ValueError("Omega0 must be positive")
    return -(params.c * params.ell / (TWO_PI * params.lam)) * (
        TWO_PI * params.c + params.zeta * params.ell / math.sqrt(params.Omega0))


def rates_from_atp(params: PhysicalParams, omega_atp: float | None = None) -> TransitionRates:
    """Transition rates of the square-root/linear coefficient family.

    a0 = c sqrt(Omega), a1 = b1 = d Omega with d from :func:`d_of_omega0`;
    every other harmonic is zero.  Omega defaults to params.Omega.
    """
    om = params.Omega if omega_atp is None else omega_atp
    if om <= 0:
        raise ValueError("Omega must be positive to build rates (a0 > 0)")
    a0 = params.c * math.sqrt(om)
    a1 = d_of_omega0(params) * om
    return TransitionRates(ell=params.ell, a0=a0,
                           odd_cos={1: a1}, odd_sin={1: a1})
