import json
from fractions import Fraction

import numpy as np
import pytest
import sympy

from dgbo import commutators as cm
from dgbo.cutoffs import build_family
from dgbo.spectral import bessel_potential, make_grid


def product_formula(a, n):
    """Independent exact evaluation of c_{2j+1} with sympy rationals."""
    a = sympy.nsimplify(a)
    out = []
    for j in range(n + 1):
        num = sympy.Integer(1)
        for k in range(j):
            num *= a**2 - (2 * k + 1) ** 2
        out.append(num / sympy.factorial(2 * j + 1))
    return [float(c) for c in out]


@pytest.fixture(scope="module")
def grid():
    return make_grid(30.0, 1024)


@pytest.fixture(scope="module")
def family():
    return build_family(1.0, 5.0)


def test_coefficients_closed_form():
    assert cm.coefficients(3, 2) == pytest.approx([1.0, 4 / 3, 0.0], abs=1e-14)
    assert cm.coefficients(2.5, 2) == pytest.approx([1.0, 0.875, float(Fraction(-77, 640))], abs=1e-15)


@pytest.mark.parametrize("a,n", [(2.5, 3), (3.0, 4), (1.75, 2), (4.2, 5)])
def test_coefficients_against_product_formula(a, n):
    assert cm.coefficients(a, n) == pytest.approx(product_formula(a, n), rel=1e-14, abs=1e-15)


def test_coefficients_reject_negative_order():
    with pytest.raises(ValueError):
        cm.coefficients(2.5, -1)


def test_expansion_validation(grid):
    h = grid.sample(lambda x: np.exp(-x * x))
    with pytest.raises(ValueError):
        cm.expansion_from_field(h, 1.0, 0)


def test_constant_localizer_commutes(grid):
    f = cm.random_band_limited(grid, np.random.default_rng(0))
    exp = cm.expansion_from_field(grid.sample(lambda x: 0 * x + 2.0), 2.5, 0)
    assert cm.commutator(exp, f).norm() == 0.0
    assert cm.apply_Rn(exp, f).norm() == 0.0


def test_remainder_is_linear(grid, family):
    exp = cm.expansion_from_cutoff(family, grid, 2.5, 0)
    rng = np.random.default_rng(1)
    f, g = cm.random_band_limited(grid, rng), cm.random_band_limited(grid, rng)
    lhs = cm.apply_Rn(exp, 2.0 * f - g)
    rhs = 2.0 * cm.apply_Rn(exp, f) - cm.apply_Rn(exp, g)
    # R is a difference of O(100) terms, so roundoff scales with the commutator
    scale = cm.commutator(exp, 2.0 * f - g).norm()
    assert (lhs - rhs).norm() < 1e-13 * scale


def test_random_fields_are_unit_and_band_limited(grid):
    f = cm.random_band_limited(grid, np.random.default_rng(5), window=False)
    assert f.norm() == pytest.approx(1.0, rel=1e-12)
    assert np.max(np.abs(f.spectrum[grid.n // 4 + 1:])) < 1e-12 * np.max(np.abs(f.spectrum))
    w = cm.random_band_limited(grid, np.random.default_rng(5))
    assert w.norm() == pytest.approx(1.0, rel=1e-12)
    assert np.max(np.abs(w.samples[:8])) < 1e-12


def test_bound_report_small_sample(grid, family):
    exp = cm.expansion_from_cutoff(family, grid, 2.5, 0)
    rep = cm.bound_check_Rn(exp, 0.0, trials=5, seed=7)
    assert rep.c_equals_one and rep.passed
    doc = json.loads(rep.to_json())
    assert doc["trials"] == 5 and doc["pass"] is True
    again = cm.bound_check_Rn(exp, 0.0, trials=5, seed=7)
    assert again.ratios == rep.ratios


def test_bound_window_enforced(grid, family):
    exp = cm.expansion_from_cutoff(family, grid, 2.5, 0)
    with pytest.raises(ValueError):
        cm.bound_check_Rn(exp, 2.0, trials=1)


def test_localization_identity_small(grid, family):
    f = grid.sample(lambda x: np.exp(-x * x))
    res = cm.localization_identity_residual(f, family, 0.5)
    assert res <= 1e-8 * bessel_potential(f, 2).norm() ** 2


def test_localization_terms_nontrivial(grid, family):
    f = grid.sample(lambda x: np.exp(-((x - 2.5) ** 2)))
    t = cm.localization_identity_terms(f, family, 0.5)
    assert abs(t["lhs"]) > 1e-3
    assert t["smoothing"] > 0
    assert abs(t["lhs"] + t["smoothing"] + t["remainder"]) < 1e-12 * abs(t["lhs"])


def test_separated_support(grid):
    bump_at = lambda c: grid.sample(lambda x: np.where(np.abs(x - c) < 1, np.exp(-1 / np.maximum(1 - (x - c) ** 2, 1e-300)), 0.0))
    f, g = bump_at(-5.0), bump_at(5.0)
    out = cm.separated_support_check(f, g, 1, 0.5, 2.0)
    assert np.isfinite(out["ratio"]) and out["ratio"] < 1.0
    with pytest.raises(ValueError):
        cm.separated_support_check(f, bump_at(-4.0), 1, 0.5, 2.0)
