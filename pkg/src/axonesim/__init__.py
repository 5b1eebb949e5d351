"""Simulator and analysis toolkit for rows of molecular motors sliding
rigid filaments: upwind PDE stepping, the Fourier-reduced ODE hierarchy,
and closed-form oscillation-onset analysis."""

from .config import VERSION as __version__
from .params import (DerivedConstants, PhysicalParams, TransitionRates,
                     d_of_omega0, derived_constants, omega_A, omega_B,
                     potential_gradient, rates_from_atp, baseline_params)
from .pde import (CFLViolation, Grid, GridState, Recorder, equilibrium_state,
                  motor_force, random_shift_state, run, step_n_row,
                  step_one_row, step_two_row)
from .spectral import (FourierState, NonFinite, integrate, rhs_first,
                       rhs_higher, rhs_zero)
from .hopf import (AmplitudeTheory, BifurcationReport, ComplexCollapse,
                   DegenerateRates, NoSignChange, OnsetResult,
                   amplitude_theory, bifurcation_report, center_manifold_coeffs,
                   cm_residual, eigenvalues_n_row, eigenvalues_two_row,
                   find_omega0, omega_im, onset_frequency, tau, tau_tilde)
from .measure import (AmplitudeEstimate, ClusterResult, NoOscillation,
                      OdeEngine, PdeEngine, TooShort, detect_clusters,
                      error_table, measure_amplitude, measure_run,
                      sensitivity_scan, sweep_delta)
from .timeseries import TimeSeries

__all__ = [name for name in dir() if not name.startswith("_")]
