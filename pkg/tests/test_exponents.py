"""Exponent calculus: window arithmetic, norm orders, internal identities,
and regime classification.  Expected values below were computed by hand from
the defining formulas (all rational arithmetic)."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracsys.exponents import (DeltaOutsideWindow, REGIME_NO_GUARANTEE,
                               REGIME_SELF_SIMILAR, REGIME_SMALL_DATA,
                               REGIME_SMALL_DATA_BOUNDED, SystemParams,
                               check_admissibility, classify, compute_k_hat,
                               compute_window, derive_norm_exponents,
                               eta_theta_residuals, theorem3_check)

CLASSICAL_D3 = SystemParams((2, 2), (2, 2), (1, 1), (0, 0), 3)
CLASSICAL_D2 = SystemParams((2, 2), (2, 2), (1, 1), (0, 0), 2)
QUARTIC_D1 = SystemParams((2, 2), (4, 4), (1, 1), (0, 0), 1)
ASYMMETRIC = SystemParams((2, 1), (2, 2), (1, 2), (0, 0), 2)


def _random_params(rng) -> SystemParams:
    return SystemParams(
        alpha=tuple(rng.uniform(0.3, 2.0, 2)),
        beta=tuple(rng.uniform(1.05, 6.0, 2)),
        rho=tuple(rng.uniform(0.2, 3.0, 2)),
        sigma=tuple(rng.uniform(-0.9, 2.0, 2)),
        dim=int(rng.integers(1, 7)),
    )


def _admissible_draws(count, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        params = _random_params(rng)
        report = classify(params)
        if report.delta is not None:
            out.append((params, report))
    return out


# ---------------------------------------------------------------------------
# windows

def test_window_classical_d3():
    info = compute_window(CLASSICAL_D3)
    assert info.x_tilde == (0.5, 0.5)
    assert info.rho_tilde == (1.0, 1.0)
    assert info.k_tilde == (0.75, 0.75)
    assert (info.window.lo, info.window.hi) == (0.5, 0.75)


def test_window_classical_d2_empty():
    info = compute_window(CLASSICAL_D2)
    assert info.k_tilde == (0.5, 0.5)
    assert info.window.empty


def test_window_asymmetric():
    info = compute_window(ASYMMETRIC)
    assert info.x_tilde == (0.5, 0.5)
    assert info.rho_tilde == (1.0, 2.0)
    assert info.k_tilde[0] == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert info.k_tilde[1] == pytest.approx(1.0, abs=1e-15)
    assert (info.window.lo, info.window.hi) == (0.5, 1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        SystemParams((2, 2), (1.0, 2), (1, 1), (0, 0), 1)     # beta must exceed 1
    with pytest.raises(ValueError):
        SystemParams((2, 2), (2, 2), (1, 1), (-1.0, 0), 1)    # sigma > -1
    with pytest.raises(ValueError):
        SystemParams((2, 3), (2, 2), (1, 1), (0, 0), 1)       # alpha <= 2
    with pytest.raises(ValueError):
        SystemParams((2, 2), (2, 2), (0, 1), (0, 0), 1)       # rho > 0


def test_a_index_tiebreak():
    assert SystemParams((2, 2), (2, 2), (1, 1), (0, 0), 1).a_index == 1
    assert SystemParams((2, 1), (2, 2), (1, 1), (0, 0), 1).a_index == 2
    assert SystemParams((1, 2), (2, 2), (1, 1), (0, 0), 1).a_index == 1


# ---------------------------------------------------------------------------
# norm orders

def test_norm_exponents_classical_d3():
    ne = derive_norm_exponents(CLASSICAL_D3, 0.6)
    assert ne.r == (1.5, 1.5)
    assert ne.s == (2.5, 2.5)
    assert ne.xi == (0.4, 0.4)
    assert ne.delta_small == (0.6, 0.6)


def test_norm_exponents_quartic_d1():
    ne = derive_norm_exponents(QUARTIC_D1, 0.3)
    assert ne.r == (1.5, 1.5)
    assert ne.s == (5.0, 5.0)
    assert ne.xi[0] == pytest.approx(7.0 / 30.0, abs=1e-16)
    assert ne.delta_small == (0.3, 0.3)


def test_norm_exponents_asymmetric():
    ne = derive_norm_exponents(ASYMMETRIC, 0.75)
    assert ne.r[0] == pytest.approx(1.6, abs=1e-15)
    assert ne.s[0] == pytest.approx(8.0 / 3.0, abs=1e-15)
    assert ne.xi[0] == pytest.approx(0.25, abs=1e-15)


def test_delta_outside_window_rejected():
    with pytest.raises(DeltaOutsideWindow):
        derive_norm_exponents(CLASSICAL_D3, 0.75)
    with pytest.raises(DeltaOutsideWindow):
        derive_norm_exponents(CLASSICAL_D3, 0.5)
    with pytest.raises(DeltaOutsideWindow):
        derive_norm_exponents(CLASSICAL_D2, 0.5)


def test_admissibility_quartic():
    ne = derive_norm_exponents(QUARTIC_D1, 0.3)
    checks = check_admissibility(QUARTIC_D1, ne.r, ne.s)
    role1 = [c for c in checks if c.role_i == 1]
    assert all(c.satisfied for c in role1)
    by_name = {c.name: c for c in role1}
    assert by_name["s_1 >= r_1"].margin == pytest.approx(3.5)
    assert by_name["s_2 >= beta_1"].margin == pytest.approx(1.0)
    assert by_name["s_1*beta_1 >= s_2"].margin == pytest.approx(15.0)


def test_admissibility_classical_d3():
    ne = derive_norm_exponents(CLASSICAL_D3, 0.6)
    checks = check_admissibility(CLASSICAL_D3, ne.r, ne.s)
    assert all(c.satisfied for c in checks if c.role_i == 1)


# ---------------------------------------------------------------------------
# k_hat and the bounded window

def test_k_hat_equals_k_tilde_when_alpha_is_dim():
    params = SystemParams((2, 1.5), (3, 2), (1, 0.7), (0, 0), 2)
    k_hat, _ = compute_k_hat(params)
    info = compute_window(params)
    assert k_hat[0] == pytest.approx(info.k_tilde[0], abs=1e-15)  # alpha_1 = d = 2


def test_k_hat_quartic():
    k_hat, bounded = compute_k_hat(QUARTIC_D1)
    info = compute_window(QUARTIC_D1)
    assert info.k_tilde == (0.375, 0.375)
    assert k_hat == (0.75, 0.75)
    assert (bounded.lo, bounded.hi) == (0.25, 0.375)


def test_k_hat_classical_d3_bounded_window_empty():
    k_hat, bounded = compute_k_hat(CLASSICAL_D3)
    assert k_hat == (0.5, 0.5)
    assert bounded.empty
    assert not compute_window(CLASSICAL_D3).window.empty


# ---------------------------------------------------------------------------
# self-similar envelope hypothesis

def test_theorem3_quartic():
    ok, theta = theorem3_check(QUARTIC_D1)
    assert ok
    assert theta[0] == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_theorem3_classical_d1_fails():
    ok, theta = theorem3_check(SystemParams((2, 2), (2, 2), (1, 1), (0, 0), 1))
    assert not ok
    assert theta == (1.0, 1.0)


def test_theorem3_gates():
    assert not theorem3_check(ASYMMETRIC)[0]                     # alpha_1 != alpha_2
    assert not theorem3_check(SystemParams((2, 2), (4, 4), (1, 2), (0, 0), 1))[0]
    assert not theorem3_check(SystemParams((2, 2), (4, 4), (1.5, 1.5), (0, 0), 9))[0]  # rho > 1


# ---------------------------------------------------------------------------
# classification

def test_classify_classical_d3():
    rep = classify(CLASSICAL_D3)
    assert rep.regime == REGIME_SMALL_DATA
    assert rep.delta == pytest.approx(0.625)          # window midpoint
    assert rep.role_i is not None


def test_classify_quartic_bounded_and_theorem3():
    rep = classify(QUARTIC_D1)
    assert rep.regime == REGIME_SMALL_DATA_BOUNDED
    assert rep.theorem3_applicable
    assert rep.delta == pytest.approx(0.3125)          # bounded-window midpoint


def test_classify_no_guarantee():
    rep = classify(SystemParams((2, 2), (2, 2), (1, 1), (0, 0), 1))
    assert rep.regime == REGIME_NO_GUARANTEE
    assert rep.delta is None and rep.r is None


def test_classify_theorem3_only_corner():
    # empty window (sigma too large for rho_tilde) but envelope hypothesis holds
    rep = classify(SystemParams((1, 1), (3, 3), (1, 1), (3, 3), 3))
    assert rep.window.empty
    assert rep.theorem3_applicable
    assert rep.regime == REGIME_SELF_SIMILAR


def test_classify_rejects_delta_outside():
    with pytest.raises(DeltaOutsideWindow) as err:
        classify(CLASSICAL_D3, delta=0.9)
    assert "0.75" in str(err.value)


def test_classify_user_delta_kept():
    rep = classify(QUARTIC_D1, delta=0.3)
    assert rep.delta == 0.3
    assert rep.s == (5.0, 5.0)


# ---------------------------------------------------------------------------
# identity properties on random admissible draws

def test_identity_suite_random_draws():
    draws = _admissible_draws(200)
    for params, rep in draws:
        delta = rep.delta
        for i in (0, 1):
            j = 1 - i
            bi, bj = params.beta[i], params.beta[j]
            # printed xi equals (1 - Delta)(1 + beta_i)/(beta_i beta_j - 1)
            xi_closed = (1.0 - delta) * (1.0 + bi) / (bi * bj - 1.0)
            assert abs(rep.xi[i] - xi_closed) <= 1e-12 * max(1.0, abs(xi_closed))
            # rho_i delta_i - sigma_i = Delta
            acde = params.rho[i] * rep.delta_small[i] - params.sigma[i]
            assert abs(acde - delta) <= 1e-12
            # xi_i = (d rho_i / alpha_i)(1/r_i - 1/s_i)
            xi_rs = (params.dim * params.rho[i] / params.alpha[i]) \
                * (1.0 / rep.r[i] - 1.0 / rep.s[i])
            assert abs(rep.xi[i] - xi_rs) <= 1e-12 * max(1.0, abs(rep.xi[i]))
        eta, theta = eta_theta_residuals(params, delta, rep.xi, rep.delta_small)
        assert max(abs(v) for v in eta + theta) <= 1e-12


def test_norm_orders_at_least_one_in_regime():
    for params, rep in _admissible_draws(300, seed=5):
        assert min(rep.r) >= 1.0
        assert min(rep.s) >= 1.0
        assert rep.role_i is not None


def test_uda_delta_independence():
    rng = np.random.default_rng(3)
    found = 0
    while found < 50:
        params = _random_params(rng)
        # enforce alpha_j rho_i = alpha_i rho_j so the Delta term cancels
        rho2 = params.rho[0] * params.alpha[1] / params.alpha[0]
        params = SystemParams(params.alpha, params.beta, (params.rho[0], rho2),
                              params.sigma, params.dim)
        info = compute_window(params)
        if info.window.empty:
            continue
        lo, hi = info.window.lo, info.window.hi
        d1, d2 = lo + (hi - lo) / 3, lo + 2 * (hi - lo) / 3
        try:
            r_a = derive_norm_exponents(params, d1).r
            r_b = derive_norm_exponents(params, d2).r
        except ValueError:
            continue
        for i in (0, 1):
            assert abs(r_a[i] - r_b[i]) <= 1e-14 * abs(r_a[i])
        found += 1


def test_remark_k_tilde_le_k_hat_when_alpha_ge_dim():
    rng = np.random.default_rng(9)
    for _ in range(300):
        params = SystemParams(
            alpha=tuple(rng.uniform(0.3, 2.0, 2)),
            beta=tuple(rng.uniform(1.05, 6.0, 2)),
            rho=tuple(rng.uniform(0.2, 3.0, 2)),
            sigma=tuple(rng.uniform(-0.9, 2.0, 2)),
            dim=1,
        )
        info = compute_window(params)
        k_hat, _ = compute_k_hat(params)
        for i in (0, 1):
            if params.alpha[i] >= params.dim:
                assert info.k_tilde[i] <= k_hat[i]


def test_role_symmetry():
    for params, rep in _admissible_draws(60, seed=21):
        swapped = classify(params.swapped())
        assert swapped.regime == rep.regime
        assert swapped.x_tilde == rep.x_tilde[::-1]
        assert swapped.k_tilde == rep.k_tilde[::-1]
        assert swapped.k_hat == rep.k_hat[::-1]
        assert (swapped.window.lo, swapped.window.hi) == (rep.window.lo, rep.window.hi)
        assert swapped.delta == rep.delta
        assert swapped.r == rep.r[::-1]
        assert swapped.s == rep.s[::-1]
        assert swapped.xi == rep.xi[::-1]


@given(beta1=st.floats(1.05, 6.0), beta2=st.floats(1.05, 6.0),
       delta_frac=st.floats(0.05, 0.95))
@settings(max_examples=80, deadline=None)
def test_xi_closed_form_property(beta1, beta2, delta_frac):
    params = SystemParams((2, 2), (beta1, beta2), (1, 1), (0, 0), 3)
    info = compute_window(params)
    if info.window.empty:
        return
    delta = info.window.lo + delta_frac * (info.window.hi - info.window.lo)
    try:
        ne = derive_norm_exponents(params, delta)
    except DeltaOutsideWindow:
        return
    for i in (0, 1):
        j = 1 - i
        closed = (1 - delta) * (1 + params.beta[i]) / (params.beta[i] * params.beta[j] - 1)
        assert ne.xi[i] == pytest.approx(closed, abs=1e-12)


def test_report_serialization_roundtrip_values():
    rep = classify(QUARTIC_D1, delta=0.3)
    items = dict(rep.flat_items())
    assert items["regime"] == REGIME_SMALL_DATA_BOUNDED
    assert float(items["delta"]) == 0.3
    assert float(items["s_1"]) == 5.0
    assert items["theorem3_applicable"] == "true"
