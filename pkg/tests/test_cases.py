"""Fluctuation-case rates: distribution averages, equivalent-source
reductions, tagging with cutoff optimization, and data partitioning."""

import numpy as np
import pytest

from cvkeyrate import (
    CaseTag,
    ChannelPoint,
    DomainError,
    FluctuationModel,
    SystemParams,
    equivalent_source_2a,
    equivalent_source_2b,
    key_rate_case1,
    key_rate_case1_refined,
    key_rate_case2a,
    key_rate_case2b,
    key_rate_r0,
    optimize_dmax,
    overall_channel_2a,
    partition_sets,
    tagged_rate_terms,
)
from cvkeyrate.core import _rate_arrays

TABLE = SystemParams()
U_NARROW = FluctuationModel.uniform(0.9, 1.1)
U_WIDE = FluctuationModel.uniform(0.8, 1.2)
POINT = FluctuationModel.point_mass()


def ch_at(distance_km, params=TABLE):
    return ChannelPoint.from_distance(distance_km, params)


class TestCase1:
    def test_point_mass_recovers_ideal(self):
        for L in (5.0, 40.0, 80.0):
            got = key_rate_case1(TABLE, POINT, ch_at(L))
            want = key_rate_r0(TABLE, ch_at(L))
            assert got.rate == pytest.approx(want.rate, abs=1e-12)
            assert got.case_tag is CaseTag.CASE1

    def test_narrow_uniform_close_to_ideal(self):
        ch = ch_at(50.0)
        r1 = key_rate_case1(TABLE, U_NARROW, ch).rate
        r0 = key_rate_r0(TABLE, ch).rate
        assert abs(r1 - r0) / r0 < 0.02

    def test_against_dense_reference_quadrature(self):
        # Oracle 1: 20001-point trapezoid over the same integrand.
        # Oracle 2: frozen 50-digit adaptive quadrature of the closed form.
        ch = ch_at(25.0)
        d = np.linspace(0.8, 1.2, 20001)
        rate, _, _, _ = _rate_arrays(ch.t, ch.eps, d * TABLE.v_a, TABLE.eta, TABLE.v_el, TABLE.beta)
        reference = np.trapezoid(rate / 0.4, d)
        got = key_rate_case1(TABLE, U_WIDE, ch).rate
        assert got == pytest.approx(reference, abs=1e-7)
        assert got == pytest.approx(0.08837425072048046, abs=1e-9)

    def test_rate_decomposition(self):
        res = key_rate_case1(TABLE, U_WIDE, ch_at(30.0))
        assert res.rate == pytest.approx(TABLE.beta * res.i_ab - res.chi_be, abs=1e-12)


class TestCase1Refined:
    def test_dominates_case1(self):
        for model in (U_NARROW, U_WIDE):
            for L in (10.0, 80.0, 120.0, 160.0):
                plain = key_rate_case1(TABLE, model, ch_at(L)).rate
                refined = key_rate_case1_refined(TABLE, model, ch_at(L)).rate
                assert refined >= plain

    def test_coincide_when_integrand_positive(self):
        # At short distance every d in the support yields a positive rate.
        ch = ch_at(10.0)
        plain = key_rate_case1(TABLE, U_WIDE, ch).rate
        refined = key_rate_case1_refined(TABLE, U_WIDE, ch).rate
        assert refined == pytest.approx(plain, abs=1e-14)

    def test_positive_beyond_baseline_cutoff(self):
        # Keeping only the profitable d-sets extends the reach.
        assert key_rate_case1_refined(TABLE, U_NARROW, ch_at(110.0)).rate > 0.0
        assert key_rate_case1(TABLE, U_NARROW, ch_at(110.0)).rate < 0.0


class TestPartitionSets:
    def test_symmetric_uniform_median_split(self):
        samples = [(0.95, "low"), (1.05, "high"), (0.99, "low2"), (1.01, "high2")]
        lowers, uppers = partition_sets(samples, 2, U_NARROW)
        assert set(lowers) == {"low", "low2"}
        assert set(uppers) == {"high", "high2"}

    def test_single_set_keeps_all(self):
        samples = [(d, i) for i, d in enumerate(U_NARROW.sample(3, 100))]
        groups = partition_sets(samples, 1, U_NARROW)
        assert len(groups) == 1 and len(groups[0]) == 100

    def test_empty_input(self):
        groups = partition_sets([], 3, U_NARROW)
        assert groups == [[], [], []]

    def test_gaussian_equal_occupancy(self):
        model = FluctuationModel.gaussian(1.0, 1e-2)
        n = 10**5
        draws = model.sample(99, n)
        groups = partition_sets(zip(draws, draws), 4, model)
        bound = 4.0 * np.sqrt(n * 0.25 * 0.75)
        for group in groups:
            assert abs(len(group) - n / 4) < bound

    def test_rejects_zero_sets(self):
        with pytest.raises(DomainError):
            partition_sets([], 0, U_NARROW)


class TestEquivalentSource2A:
    def test_no_fluctuation_is_identity(self):
        src = equivalent_source_2a(18.0, 0.0)
        assert (src.t_s, src.eps_s) == (1.0, 0.0)

    def test_direct_substitution_values(self):
        src = equivalent_source_2a(18.0, 0.003333)
        assert src.t_s == pytest.approx(0.9991669235763906, abs=1e-12)
        assert src.eps_s == pytest.approx(0.0149985, abs=1e-12)
        src = equivalent_source_2a(18.0, 0.01)
        assert src.t_s == pytest.approx(0.9975015625, abs=1e-12)
        assert src.eps_s == pytest.approx(0.045, abs=1e-12)

    def test_taylor_regime_guard(self):
        with pytest.raises(DomainError):
            equivalent_source_2a(18.0, 8.0)
        with pytest.raises(DomainError):
            equivalent_source_2a(18.0, -0.1)

    def test_matches_sqrt_expectation_within_second_order(self):
        for model in (U_NARROW, U_WIDE, FluctuationModel.gaussian(1.0, 1e-2), POINT):
            v_d = model.variance()
            t_s = equivalent_source_2a(TABLE.v_a, v_d).t_s
            exact = model.expect(np.sqrt) ** 2
            assert abs(t_s - exact) <= 5.0 * v_d**2 + 1e-15


class TestOverallChannel2A:
    def test_identity_source(self):
        ch = ChannelPoint(t=0.37, eps=0.055)
        out = overall_channel_2a(equivalent_source_2a(18.0, 0.0), ch)
        assert (out.t, out.eps) == (ch.t, ch.eps)

    def test_direct_substitution(self):
        from cvkeyrate import EquivalentSource

        out = overall_channel_2a(
            EquivalentSource(t_s=0.999167, eps_s=0.015), ChannelPoint(t=0.1, eps=0.02)
        )
        assert out.t == pytest.approx(0.0999167, abs=1e-9)
        assert out.eps == pytest.approx(0.02 / 0.999167 + 0.015, abs=1e-12)
        assert out.eps == pytest.approx(0.0350167, abs=1e-6)

    def test_pure_source_noise(self):
        from cvkeyrate import EquivalentSource

        out = overall_channel_2a(
            EquivalentSource(t_s=0.9975, eps_s=0.045), ChannelPoint(t=1.0, eps=0.0)
        )
        assert out.t == pytest.approx(0.9975, abs=1e-12)
        assert out.eps == pytest.approx(0.045, abs=1e-12)


class TestCase2A:
    def test_zero_variance_recovers_ideal(self):
        for L in (0.0, 30.0, 70.0):
            got = key_rate_case2a(TABLE, POINT, ch_at(L)).rate
            assert got == pytest.approx(key_rate_r0(TABLE, ch_at(L)).rate, abs=1e-12)

    def test_costs_rate(self):
        ch = ch_at(30.0)
        assert key_rate_case2a(TABLE, U_NARROW, ch).rate < key_rate_r0(TABLE, ch).rate

    def test_diagnostics_carry_source(self):
        res = key_rate_case2a(TABLE, U_NARROW, ch_at(30.0))
        v_d = U_NARROW.variance()
        assert res.diagnostics["t_s"] == pytest.approx((1.0 - v_d / 8.0) ** 2, abs=1e-12)
        assert res.diagnostics["eps_s"] == pytest.approx(TABLE.v_a * v_d / 4.0, abs=1e-12)


class TestEquivalentSource2B:
    def test_unit_cutoff_no_fluctuation(self):
        src = equivalent_source_2b(18.0, 0.0, 1.0)
        assert (src.t_s, src.eps_s, src.d_max) == (1.0, 0.0, 1.0)

    def test_direct_substitution_values(self):
        src = equivalent_source_2b(18.0, 0.003333, 1.05)
        assert src.t_s == pytest.approx(0.9515875462632292, abs=1e-12)
        assert src.eps_s == pytest.approx(0.015748425, abs=1e-12)
        src = equivalent_source_2b(18.0, 0.01, 1.1)
        assert src.t_s == pytest.approx(0.907, abs=1e-3)
        assert src.eps_s == pytest.approx(0.0495, abs=1e-12)

    def test_rejects_bad_cutoff(self):
        with pytest.raises(DomainError):
            equivalent_source_2b(18.0, 0.01, 0.0)
        with pytest.raises(DomainError):
            equivalent_source_2b(18.0, 0.01, -1.0)


class TestCase2B:
    def test_degenerate_model_recovers_ideal(self):
        for L in (5.0, 45.0):
            got = key_rate_case2b(TABLE, POINT, ch_at(L), d_max=1.0, direction="reverse")
            assert got.rate == pytest.approx(key_rate_r0(TABLE, ch_at(L)).rate, abs=1e-12)
            assert got.case_tag is CaseTag.CASE2B_REVERSE
            assert got.diagnostics["untagged_fraction"] == 1.0

    def test_frozen_reverse_value(self):
        # 50-digit oracle of the tagged-rate composition at d_max = support
        # max (untagged fraction exactly 1).
        got = key_rate_case2b(TABLE, U_NARROW, ch_at(10.0), d_max=1.1, direction="reverse")
        assert got.rate == pytest.approx(0.21729309575055825, abs=1e-10)
        assert got.diagnostics["t_s"] == pytest.approx(0.9083334911616162, abs=1e-12)

    def test_full_untagged_fraction_reduces_to_holevo_penalty(self):
        # At the support maximum the raw-entropy leak vanishes and the rate
        # must equal beta*I - chi at the remapped frame, algebraically.
        ch = ch_at(20.0)
        terms = tagged_rate_terms(TABLE, U_NARROW, ch, 1.1, "reverse")
        assert terms.untagged_fraction == 1.0
        got = key_rate_case2b(TABLE, U_NARROW, ch, 1.1, "reverse")
        assert got.rate == pytest.approx(
            TABLE.beta * terms.i_ab_prime - terms.chi_tagged_bound, abs=1e-14
        )

    def test_small_fraction_goes_negative_not_error(self):
        # Cutoff below the support floor: everything is tagged, the raw
        # entropy of the reference data is pure loss.
        got = key_rate_case2b(TABLE, U_NARROW, ch_at(10.0), d_max=0.9, direction="reverse")
        assert got.diagnostics["untagged_fraction"] == 0.0
        assert got.rate < -1.0

    def test_direct_mode_sane(self):
        ch = ChannelPoint(t=0.9, eps=0.005)
        got = key_rate_case2b(TABLE, U_NARROW, ch, 1.1, "direct")
        assert got.case_tag is CaseTag.CASE2B_DIRECT
        assert got.rate <= TABLE.beta * got.i_ab
        # Eve's bound on Alice's data vanishes on an identity channel.
        clean = key_rate_case2b(TABLE, POINT, ChannelPoint(t=1.0, eps=0.0), 1.0, "direct")
        assert clean.chi_be == pytest.approx(0.0, abs=1e-9)

    def test_rejects_unknown_direction(self):
        with pytest.raises(DomainError):
            key_rate_case2b(TABLE, U_NARROW, ch_at(10.0), 1.1, "sideways")


class TestOptimizeDmax:
    def test_uniform_optimum_is_support_max(self):
        for L in (5.0, 25.0, 50.0):
            d_opt, res = optimize_dmax(TABLE, U_NARROW, ch_at(L))
            assert d_opt == 1.1
            assert res.rate > 0.0

    def test_point_mass_optimum_is_one(self):
        d_opt, res = optimize_dmax(TABLE, POINT, ch_at(30.0))
        assert d_opt == 1.0
        assert res.rate == pytest.approx(key_rate_r0(TABLE, ch_at(30.0)).rate, abs=1e-12)

    def test_gaussian_interior_optimum(self):
        model = FluctuationModel.gaussian(1.0, 1e-2)
        d_opt, res = optimize_dmax(TABLE, model, ch_at(10.0))
        assert model.lo < d_opt < model.hi
        assert res.rate > 0.0
        # Moving the cutoff by a bit must not beat the optimum.
        for shift in (-0.02, 0.02):
            neighbor = key_rate_case2b(TABLE, model, ch_at(10.0), d_opt + shift).rate
            assert neighbor <= res.rate + 1e-9

    def test_all_negative_flags(self):
        d_opt, res = optimize_dmax(TABLE, U_NARROW, ch_at(150.0))
        assert res.rate < 0.0
        assert res.diagnostics["no_positive_rate"] == 1.0


class TestOrdering:
    def test_conservatism_ordering(self):
        for L in (10.0, 30.0, 50.0):
            ch = ch_at(L)
            r0 = key_rate_r0(TABLE, ch).rate
            r1 = key_rate_case1(TABLE, U_NARROW, ch).rate
            r1r = key_rate_case1_refined(TABLE, U_NARROW, ch).rate
            r2a = key_rate_case2a(TABLE, U_NARROW, ch).rate
            _, res2b = optimize_dmax(TABLE, U_NARROW, ch)
            assert res2b.rate <= r2a <= r0
            assert r1 <= r1r
