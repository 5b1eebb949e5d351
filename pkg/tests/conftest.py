import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from axonesim import params as prm


@pytest.fixture(scope="session")
def base_params():
    return prm.baseline_params()


@pytest.fixture(scope="session")
def rates_at_onset(base_params):
    return prm.rates_from_atp(base_params, base_params.Omega0)


def assert_spectra_close(a, b, rtol):
    """Match two eigenvalue multisets by optimal assignment and compare."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    assert len(a) == len(b)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    scale = np.abs(b).max()
    assert cost[rows, cols].max() <= rtol * scale, \
        f"worst eigenvalue mismatch {cost[rows, cols].max():.3e} " \
        f"exceeds {rtol * scale:.3e}"
