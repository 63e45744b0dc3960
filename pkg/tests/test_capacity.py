import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from oimac.capacity import (FIGURES, CapacityError, ChannelConfig, ConditionViolated,
                            InfeasibleConstraints, InfeasibleWindow, NonPositiveParameter,
                            PeakNotReciprocal, admissibility, alpha_grid, asymptotes, audit,
                            bound_names, check_asymptotes, check_ordering, fn_f, fn_g, fn_h,
                            fn_R, gap_condition, mac_average_bounds, mac_average_lower_epi,
                            mac_average_upper, mac_pa_gap, mac_pa_lower_discrete,
                            mac_pa_lower_general, mac_pa_lower_reciprocal,
                            mac_pa_lower_special, mac_pa_lower_truncexp, mac_pa_upper,
                            mac_peak_bounds, mac_peak_lower_discrete, mac_peak_lower_epi,
                            mac_peak_upper, normalize_config, pa_asymptote, snr_to_sigma,
                            su_eta, su_lb_average, su_lb_peak, su_lb_peak_average, surrogate,
                            sweep)
from oimac.dists import TruncGeomSpaced


def _epi(h, sigma):
    return 0.5 * math.log1p(math.exp(2 * h) / (2 * math.pi * math.e * sigma ** 2))


# ---------------------------------------------------------------- configuration

def test_normalize_identity():
    c = normalize_config(1, 1, A1=0.3, A2=0.7)
    assert (c.A1, c.A2, c.sigma) == (0.3, 0.7, 1.0)


def test_normalize_swaps_and_scales():
    c = normalize_config(2, 1, A1=1, A2=1, sigma=3)
    assert c.A1 == pytest.approx(1 / 3) and c.A2 == pytest.approx(2 / 3)
    assert c.sigma == pytest.approx(1.0)


def test_normalize_peak_average_keeps_ratios():
    c = normalize_config(4, 1, A1=1, A2=1, E1=0.4, E2=0.1)
    assert c.A1 == pytest.approx(0.2)
    # user 2 became user 1
    assert c.alpha1 == pytest.approx(0.1) and c.alpha2 == pytest.approx(0.4)


def test_normalize_average_family():
    c = normalize_config(1, 1, E1=3, E2=1, sigma=2)
    assert (c.E1, c.E2, c.sigma) == (0.25, 0.75, 0.5)


@pytest.mark.parametrize("kw", [dict(A1=0, A2=1), dict(A1=1, A2=1, sigma=0), dict()])
def test_normalize_rejects(kw):
    with pytest.raises(CapacityError):
        normalize_config(1, 1, **kw)


def test_config_invariants():
    with pytest.raises(CapacityError):
        ChannelConfig.peak(0.6)
    with pytest.raises(CapacityError):
        ChannelConfig.peak_average(0.3, 0.6)
    with pytest.raises(NonPositiveParameter):
        ChannelConfig.peak(0.3, sigma=0)
    c = ChannelConfig.peak_average(0.3, 0.1, 0.4)
    assert c.alpha_w == pytest.approx(0.03 + 0.28) and not c.equal_ratio


def test_snr_conventions():
    assert snr_to_sigma(20.0) == pytest.approx(0.01)
    assert snr_to_sigma(20.0, 20) == pytest.approx(0.1)
    with pytest.raises(CapacityError):
        snr_to_sigma(1.0, 3)


# ---------------------------------------------------------------- building blocks

def test_f_g_h_limits():
    assert fn_f(1, 1e-12) == pytest.approx(0.5, abs=1e-9)
    assert fn_g(0.5, 0.3, 1) == 0.0
    assert fn_h(1, 1e-12) == pytest.approx(0.0, abs=1e-9)


def test_R_values():
    assert fn_R(1.0) == pytest.approx(oracles.R_1, rel=1e-12)
    assert fn_R(0.5) == pytest.approx(oracles.R_HALF, rel=1e-12)
    assert fn_R(1e-3) == 0.0


@given(st.floats(0.01, 50))
def test_R_matches_high_precision(u):
    assert fn_R(u) == pytest.approx(float(oracles.mp_R(u)), rel=1e-10, abs=1e-300)


def test_R_monotone():
    u = np.geomspace(1e-3, 1e3, 500)
    assert np.all(np.diff(fn_R(u)) >= 0)


# ---------------------------------------------------------------- single user

@pytest.mark.parametrize("K,sigma", [(2, 0.3), (15, 0.01), (63, 1e-3)])
def test_su_lb_peak_direct(K, sigma):
    assert su_lb_peak(K, sigma) == pytest.approx(oracles.direct_su_lb_peak(K, sigma), abs=1e-12)


def test_su_lb_peak_high_snr_and_small_K():
    assert su_lb_peak(7, 1e-6) == pytest.approx(math.log(8), abs=1e-12)
    with pytest.raises(CapacityError):
        su_lb_peak(1, 0.1)


def test_su_lb_average_beats_probes():
    K, alpha, sigma = 31, 0.5, 0.05
    best = su_lb_average(K, alpha, sigma).value
    rng = np.random.default_rng(1)
    t = 1 - np.exp(-10 ** rng.uniform(-5, 1.5, 1000))
    assert best >= max(oracles.tg_objective_direct(x, K, alpha, sigma) for x in t) - 1e-9


def test_su_lb_average_grows_like_minus_log_sigma():
    a = su_lb_average(math.inf, 1.0, 1e-4).value
    b = su_lb_average(math.inf, 1.0, 1e-5).value
    assert b - a == pytest.approx(math.log(10), abs=0.05)


@pytest.mark.parametrize("K,alpha", [(3, 0.2), (8, 0.1), (31, 0.45)])
def test_su_eta_against_fixed_point(K, alpha):
    assert su_eta(K, alpha) == pytest.approx(oracles.tg_eta_fixed_point(K, alpha), abs=1e-9)


def test_su_peak_average_half_is_peak_bound():
    assert su_lb_peak_average(9, 0.5, 0.02).value == su_lb_peak(9, 0.02)


def test_su_peak_average_high_snr_is_entropy():
    bv = su_lb_peak_average(3, 0.2, 1e-9)
    d = TruncGeomSpaced(bv.params["t"], 2 * bv.params["l"], 4)
    assert bv.value == pytest.approx(d.entropy(), abs=1e-9)
    assert bv.params["t"] < bv.params["eta"]
    # the peak constraint holds for the chosen spacing
    assert 3 * 2 * bv.params["l"] <= 1 + 1e-12


# ---------------------------------------------------------------- peak family

def test_peak_epi_at_unit_sigma():
    assert mac_peak_lower_epi(0.3, 1.0).value == pytest.approx(oracles.PEAK_EPI_SIGMA1, abs=1e-15)


@pytest.mark.parametrize("sigma", [1.0, 0.1, 1e-3])
def test_peak_upper_direct(sigma):
    assert mac_peak_upper(sigma) == pytest.approx(oracles.direct_peak_upper(sigma), rel=1e-14)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_floorceil_collapses_for_reciprocal_peak(k):
    b = mac_peak_bounds(1 / k, 0.05)
    assert b["lower_floorceil"].value == pytest.approx(b["lower_epi"].value, abs=1e-14)


def test_peak_discrete_best_over_n():
    best = mac_peak_lower_discrete(0.3, 0.01)
    for n in (2, 5, 17, 100):
        assert best.value >= mac_peak_lower_discrete(0.3, 0.01, n).value
    with pytest.raises(CapacityError):
        mac_peak_lower_discrete(0.3, 0.01, 1)


def test_peak_bounds_close_at_high_snr():
    b = mac_peak_bounds(0.3, 1e-4)
    assert b["upper"] - b["lower_epi"].value <= 0.01


# ---------------------------------------------------------------- average family

@pytest.mark.parametrize("sigma", [1.0, 0.1, 1e-3])
def test_average_upper_direct(sigma):
    assert mac_average_upper(sigma) == pytest.approx(oracles.direct_average_upper(sigma),
                                                     rel=1e-14)


def test_average_ordering():
    b = mac_average_bounds(0.44, 0.1)
    for name in ("lower_epi", "lower_geometric", "lower_truncgeom"):
        assert b[name].value <= b["upper"]


def test_average_epi_independent_of_split():
    assert mac_average_lower_epi(0.1, 0.2).value == mac_average_lower_epi(0.5, 0.2).value


# ---------------------------------------------------------------- peak and average

def test_pa_upper_beats_eta_probes():
    bv = mac_pa_upper(0.4, 0.01)
    rng = np.random.default_rng(2)
    probes = 10 ** rng.uniform(-4, 2, 1000)
    assert bv.value <= min(oracles.direct_pa_upper_at(e, 0.4, 0.01) for e in probes) + 1e-9


def test_pa_upper_eta_zero_recovery():
    sigma = 0.3
    at_zero = math.log1p(1 / (math.sqrt(2 * math.pi * math.e) * sigma))
    assert oracles.direct_pa_upper_at(0.0, 0.5, sigma) == pytest.approx(at_zero)
    bv = mac_pa_upper(0.5, sigma)
    assert bv.value <= at_zero
    assert bv.params["eta_prime"] == 0.0


def test_pa_asymptote_at_half_is_peak():
    assert pa_asymptote(0.5) == pytest.approx(asymptotes().peak, abs=1e-15)
    assert pa_asymptote(0.4) < asymptotes().peak


def test_pa_upper_depends_on_alpha_w_only():
    a = ChannelConfig.peak_average(0.3, 0.4, sigma=0.05)
    b = ChannelConfig.peak_average(0.2, 0.4, sigma=0.05)
    (ua,) = sweep(a, [0.05], ["upper"])
    (ub,) = sweep(b, [0.05], ["upper"])
    assert ua.values[0] == ub.values[0]


def test_truncexp_case_one_when_average_is_loose():
    c = ChannelConfig.peak_average(0.3, 0.5, sigma=1e-3)
    bv = mac_pa_lower_truncexp(c, 4)
    assert bv.params["case"] == 1
    l = 1 / 4 + 1 - math.ceil(0.3 * 4) / 4
    assert bv.value == pytest.approx(_epi(math.log(l), 1e-3), abs=1e-12)


def test_truncexp_best_over_k():
    c = ChannelConfig.peak_average(0.3, 0.4, sigma=0.01)
    best = mac_pa_lower_truncexp(c)
    for k in (4, 5, 8, 20):
        assert best.value >= mac_pa_lower_truncexp(c, k).value
    with pytest.raises(InfeasibleConstraints):
        mac_pa_lower_truncexp(c, 3)


@pytest.mark.parametrize("alpha,k", [(0.4, 4), (0.4, 9), (0.1, 5), (0.1, 30)])
def test_truncexp_construction_meets_constraints(alpha, k):
    c = ChannelConfig.peak_average(0.3, alpha, sigma=0.01)
    bv = mac_pa_lower_truncexp(c, k)
    assert bv.params["case"] == 2
    checks = admissibility(bv.pair, c)
    assert all(ch.satisfied for ch in checks)
    # the active mean constraint is met to within the root tolerance
    means = [ch.margin for ch in checks if ch.name.startswith("E[")]
    assert min(means) <= 1e-9


def test_truncexp_exact_form_dominates_printed():
    c = ChannelConfig.peak_average(0.3, 0.4, sigma=1e-3)
    for k in (4, 6, 12):
        assert (mac_pa_lower_truncexp(c, k, form="exact").value
                >= mac_pa_lower_truncexp(c, k).value)


def test_gap_certificate_values():
    c = ChannelConfig.peak_average(0.3, 0.4, sigma=1e-4)
    assert mac_pa_gap(c, 4) == pytest.approx(math.log(4 / 3), abs=1e-15)
    for k in range(4, 30):
        if gap_condition(c, k)[0]:
            assert mac_pa_gap(c, k) < math.log(2)
    # A1 = 1/k leaves the full unit interval to the lattice: l = 1, gap 0
    assert mac_pa_lower_truncexp(ChannelConfig.peak_average(0.25, 0.4), 4).params["l"] == 1.0


def test_gap_condition_violated():
    with pytest.raises(ConditionViolated):
        mac_pa_gap(FIGURES["fig6"], 5)
    with pytest.raises(InfeasibleConstraints):
        mac_pa_gap(FIGURES["fig5"], 3)


def test_gap_invariant_on_exact_form():
    # where the condition holds, the entropy of the constructed sum is within -log l of the
    # upper bound at high SNR
    sigma = 1e-4
    c = ChannelConfig.peak_average(0.3, 0.4, sigma=sigma)
    up = mac_pa_upper(c.alpha_w, sigma).value
    checked = 0
    for k in range(4, 30):
        if not gap_condition(c, k)[0]:
            continue
        low = mac_pa_lower_truncexp(c, k, form="exact").value
        assert up - low <= mac_pa_gap(c, k) + 0.02
        checked += 1
    assert checked > 10


def test_reciprocal_bounds():
    c = ChannelConfig.peak_average(0.5, 0.4, sigma=1e-3)
    r = mac_pa_lower_reciprocal(c, 2, 5)
    assert r["bound1"].params["residual"] < 1e-10
    assert r["bound2"].params["residual"] < 1e-10
    up = mac_pa_upper(c.alpha_w, 1e-3).value
    assert r["bound1"].value <= up and r["bound2"].value <= up
    for b in r.values():
        assert all(ch.satisfied for ch in admissibility(b.pair, c))


def test_reciprocal_uniform_limit():
    c = ChannelConfig.peak_average(0.5, 0.5, sigma=1e-3)
    r = mac_pa_lower_reciprocal(c, 2, 5)
    assert r["bound2"].value == pytest.approx(mac_peak_lower_epi(0.5, 1e-3).value, abs=1e-14)


def test_reciprocal_rejects():
    with pytest.raises(PeakNotReciprocal):
        mac_pa_lower_reciprocal(ChannelConfig.peak_average(0.3, 0.4), 3, 5)
    with pytest.raises(CapacityError):
        mac_pa_lower_reciprocal(ChannelConfig.peak_average(0.5, 0.4), 2, 4)


def test_pa_discrete():
    c = ChannelConfig.peak_average(0.3, 0.4, sigma=0.01)
    with pytest.raises(InfeasibleWindow):
        mac_pa_lower_discrete(c, 2)
    bv = mac_pa_lower_discrete(c, 8)
    assert bv.value <= mac_pa_upper(0.4, 0.01).value
    assert all(ch.satisfied for ch in admissibility(bv.pair, c))
    assert mac_pa_lower_discrete(c.with_sigma(10.0)).value <= 0


def test_special_split():
    s = mac_pa_lower_special(0.3, 1e-7, 1e-3)
    assert s["alpha1"] == pytest.approx(0.5, abs=1e-6)
    assert s["alpha2"] == pytest.approx(0.5, abs=1e-6)
    assert s["bound"].value == pytest.approx(mac_peak_lower_epi(0.3, 1e-3).value, abs=1e-6)
    s = mac_pa_lower_special(0.3, oracles.ETA_PRIME_040, 1e-5)
    assert s["bound"].value + math.log(1e-5) == pytest.approx(pa_asymptote(0.4), abs=1e-6)
    assert len(mac_pa_lower_special(0.5, 1.0, 1e-3)["bound"].pair.x1.terms) == 1


def test_general_reduces_to_equal_ratio():
    c = ChannelConfig.peak_average(0.3, 0.4, sigma=0.01)
    assert mac_pa_lower_general(c).value == mac_pa_lower_truncexp(c).value


def test_general_grid_refinement_is_monotone():
    c = FIGURES["fig7"].with_sigma(0.01)
    coarse = mac_pa_lower_general(c, points=9).value
    fine = mac_pa_lower_general(c, points=33).value
    assert fine >= coarse
    assert set(alpha_grid(0.1, 0.4, 9)) <= set(alpha_grid(0.1, 0.4, 33))
    assert fine <= mac_pa_upper(c.alpha_w, 0.01).value


def test_surrogate_is_dominated():
    c = FIGURES["fig7"]
    for a in alpha_grid(0.1, 0.4, 5):
        sub, S, _ = surrogate(c, a)
        assert S <= 1 + 1e-12
        assert sub.alpha1 == pytest.approx(a)


# ---------------------------------------------------------------- curves and checks

def test_asymptote_constants():
    a = asymptotes()
    assert a.peak == pytest.approx(oracles.PEAK_ASYMPTOTE, abs=1e-15)
    assert a.average == pytest.approx(oracles.AVERAGE_ASYMPTOTE, abs=1e-15)
    assert all(r.passed for r in check_asymptotes())


def test_sweep_sorted_clamped_and_deterministic():
    sig = [0.01, 1.0, 0.1]
    a = sweep(FIGURES["fig3"], sig)
    b = sweep(FIGURES["fig3"], sig[::-1])
    assert [c.to_dict() for c in a] == [c.to_dict() for c in b]
    assert list(a[0].sigmas) == [1.0, 0.1, 0.01]
    for c in a:
        if c.kind == "lower":
            assert np.all(c.values >= 0)
            assert all(p["raw"] <= v for p, v in zip(c.params, c.values))
    assert [c.name for c in a] == bound_names("peak")


def test_sweep_unknown_bound():
    with pytest.raises(CapacityError):
        sweep(FIGURES["fig3"], [0.1], ["nope"])


def test_ordering_and_audit_small_grid():
    sig = snr_to_sigma(np.linspace(0, 40, 9))
    for name, cfg in FIGURES.items():
        rep = check_ordering(cfg, sig, name)
        assert rep.passed, rep.to_dict()
        assert rep.audit_min_margin >= -1e-12


def test_audit_flags_missing_pair():
    curves = sweep(FIGURES["fig3"], [0.1])
    curves[1].pairs[0] = None
    assert not all(r.passed for r in audit(curves, FIGURES["fig3"]))
