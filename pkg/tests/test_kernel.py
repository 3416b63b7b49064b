import json

import numpy as np
import pytest

from dgbo import kernel as kn

# frozen: mpmath quadrature (25 digits, 120 subintervals) of the defining integral
I_K3_ALPHA_HALF = complex(0.3312186448373860309773568, 0.2463337006831093046522936)  # x=-60, t=1.3


@pytest.mark.parametrize("k", [1, 3, 5])
def test_origin_value_is_bump_mass(k):
    assert kn.kernel_integral(0.0, 0.0, k, 0.5) == pytest.approx(0.75 * 2**k, rel=1e-13)
    assert kn.majorant(0.0, k, 0.5) == 2.0**k


def test_stationary_phase_oracle():
    assert abs(kn.kernel_integral(-60.0, 1.3, 3, 0.5) - I_K3_ALPHA_HALF) < 1e-12


def test_time_restriction():
    with pytest.raises(ValueError):
        kn.kernel_integral(1.0, 2.5, 3, 0.5)


def test_conjugate_symmetry():
    a = kn.kernel_integral(7.0, 0.9, 4, 0.25)
    b = kn.kernel_integral(-7.0, -0.9, 4, 0.25)
    assert abs(a - b.conjugate()) < 1e-12


def test_majorant_regimes():
    k, alpha = 4, 0.5
    cut = kn.default_c(alpha) * 2 ** (k * (alpha + 1))
    assert kn.majorant(0.5, k, alpha) == 16.0
    assert kn.majorant(4.0, k, alpha) == pytest.approx(2.0**2 / 2.0)
    assert kn.majorant(2 * cut, k, alpha) == pytest.approx(1 / (1 + 4 * cut * cut))


def test_lattice_sum_against_direct_summation():
    k, alpha = 3, 0.5
    l = np.arange(-200000, 200001, dtype=float)
    direct = float(np.sum(kn.majorant(l, k, alpha)))
    # truncation of the (1 + l^2)^{-1} tail beyond 2e5 is below 1e-5
    assert kn.lattice_sum(k, alpha) == pytest.approx(direct, abs=2e-5)


def test_lattice_ratio_grows_like_half_power():
    out = kn.lattice_sum_check(alpha=0.5)
    assert out["log2_growth_per_k"] == pytest.approx(0.5, abs=0.05)


def test_fitted_constants_report():
    rep = kn.oscillatory_kernel_check(ks=(3,), alpha=0.5, count=8, seed=1)
    doc = json.loads(rep.to_json())
    assert set(doc) == {"alpha", "c", "fitted_C", "spread", "stable_within_2"}
    assert rep.constants[3] > 0
    again = kn.oscillatory_kernel_check(ks=(3,), alpha=0.5, count=8, seed=1)
    assert again.constants == rep.constants
