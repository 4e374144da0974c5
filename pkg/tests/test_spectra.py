import math
from fractions import Fraction

import numpy as np
import pytest

from heisenclone import (
    ResourceError,
    ValidationError,
    anchor_shift,
    enumerate_partitions,
    multinomial_weight,
    n_copy_distribution,
    normalize_spectrum,
    partition_energy,
    spectrum_from_dict,
)
from heisenclone.spectra import _convolved_log_weights

from conftest import random_spectrum, spectrum_fractions
from oracles import frac_distribution, frac_multinomial, qubit_binom


class TestNormalizeSpectrum:
    def test_equatorial_qubit(self, qubit):
        assert qubit.int_energies == (0, 1)
        assert qubit.grid_unit == 1
        np.testing.assert_allclose(qubit.probs, [0.5, 0.5])
        assert qubit.k == 2

    def test_half_integer_grid(self):
        s = normalize_spectrum([("-1/2", 0.25), ("1/2", 0.75)])
        assert s.grid_unit == Fraction(1, 2)
        assert s.int_energies == (-1, 1)

    def test_zero_probability_levels_dropped(self):
        s = normalize_spectrum([(0, 0.5), (1, 0.0), (2, 0.5)])
        assert s.int_energies == (0, 2)
        assert s.k == 2

    def test_duplicate_energies_merged(self):
        s = normalize_spectrum([(0, 0.3), ("0", 0.2), (1, 0.5)])
        assert s.k == 2
        np.testing.assert_allclose(s.probs, [0.5, 0.5])

    def test_renormalization_is_exact(self):
        s = normalize_spectrum([(0, 0.3 + 2e-10), (1, 0.7)])
        assert abs(sum(p for _, p in s.levels) - 1.0) < 1e-15

    def test_degenerate_spectrum_rejected(self):
        with pytest.raises(ValidationError, match="degenerate"):
            normalize_spectrum([(1, 1.0)])
        with pytest.raises(ValidationError, match="degenerate"):
            normalize_spectrum([(0, 1.0), (1, 0.0)])

    def test_negative_probability_rejected(self):
        with pytest.raises(ValidationError):
            normalize_spectrum([(0, -0.1), (1, 1.1)])

    def test_unparseable_energy_rejected(self):
        with pytest.raises(ValidationError, match="parse"):
            normalize_spectrum([("pi/2", 0.5), (1, 0.5)])

    def test_bad_probability_sum_rejected(self):
        with pytest.raises(ValidationError, match="sum"):
            normalize_spectrum([(0, 0.5), (1, 0.6)])

    def test_json_round_trip(self, qubit):
        again = spectrum_from_dict(qubit.to_dict())
        assert again.int_energies == qubit.int_energies
        assert again.grid_unit == qubit.grid_unit

    def test_json_schema_violations(self):
        with pytest.raises(ValidationError):
            spectrum_from_dict({"nope": []})
        with pytest.raises(ValidationError):
            spectrum_from_dict({"levels": [{"energy": "1"}]})


class TestNCopyDistribution:
    def test_two_copies_binomial(self, qubit):
        d = n_copy_distribution(qubit, 2)
        np.testing.assert_allclose(
            np.exp(d.log_weights), [0.25, 0.5, 0.25], atol=1e-15
        )
        assert d.offset == 0 and d.support_size == 3

    def test_central_value_against_big_integer_oracle(self, qubit):
        d = n_copy_distribution(qubit, 100)
        exact = float(qubit_binom(100, 50))  # 0.07958923738717877
        assert abs(d.prob(50) - exact) < 1e-14
        assert abs(exact - 0.0795892373871787) < 1e-15

    def test_three_level_matches_partition_enumeration(self, three_level):
        d = n_copy_distribution(three_level, 3)
        probs = spectrum_fractions(three_level)
        oracle = frac_distribution(three_level.int_energies, probs, 3)
        assert len(oracle) == d.support_size
        for energy, weight in oracle.items():
            assert abs(d.prob(energy) - float(weight)) < 1e-12

    def test_zero_copies_rejected(self, qubit):
        with pytest.raises(ValidationError):
            n_copy_distribution(qubit, 0)

    def test_support_cap(self, qubit):
        with pytest.raises(ResourceError):
            n_copy_distribution(qubit, 10**9, support_cap=10**6)

    def test_generic_convolution_agrees_with_binomial_path(self):
        s = normalize_spectrum([(0, 0.3), (2, 0.7)])
        d = n_copy_distribution(s, 40)
        generic = _convolved_log_weights(s.int_energies, s.log_probs, 40)
        finite = np.isfinite(d.log_weights)
        np.testing.assert_array_equal(finite, np.isfinite(generic))
        np.testing.assert_allclose(
            np.exp(d.log_weights[finite]), np.exp(generic[finite]), atol=1e-12
        )

    def test_normalization_and_support_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            s = random_spectrum(rng)
            n = int(rng.integers(1, 30))
            d = n_copy_distribution(s, n)
            total = np.exp(d.log_weights[np.isfinite(d.log_weights)]).sum()
            assert abs(total - 1.0) < 1e-12
            span = s.int_energies[-1] - s.int_energies[0]
            assert d.support_size <= n * span + 1
            assert d.n_copies == n


class TestEnumeratePartitions:
    def test_two_into_two(self):
        assert enumerate_partitions(2, 2) == [(0, 2), (1, 1), (2, 0)]

    def test_count_five_into_three(self):
        parts = enumerate_partitions(5, 3)
        assert len(parts) == 21 == math.comb(7, 2)

    def test_empty_case(self):
        assert enumerate_partitions(0, 4) == [(0, 0, 0, 0)]

    @pytest.mark.parametrize("n", [0, 1, 7, 23, 50])
    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_counts_match_binomial(self, n, k):
        parts = enumerate_partitions(n, k)
        assert len(parts) == math.comb(n + k - 1, k - 1)
        assert len(set(parts)) == len(parts)
        assert all(sum(p) == n and len(p) == k for p in parts)
        assert parts == sorted(parts)

    def test_cap_reports_count(self):
        with pytest.raises(ResourceError) as err:
            enumerate_partitions(1000, 5, cap=1000)
        assert err.value.details["count"] == math.comb(1004, 4)

    def test_bad_arguments(self):
        with pytest.raises(ValidationError):
            enumerate_partitions(-1, 2)
        with pytest.raises(ValidationError):
            enumerate_partitions(3, 0)


class TestMultinomialWeight:
    def test_qubit_values(self, qubit):
        assert abs(multinomial_weight(qubit, (1, 1)) - math.log(0.5)) < 1e-15
        assert abs(multinomial_weight(qubit, (0, 2)) - math.log(0.25)) < 1e-15

    def test_three_level_value(self, three_level):
        expected = math.log(3.0 / 16.0)  # 6 * (1/4)(1/2)(1/4)
        assert abs(multinomial_weight(three_level, (1, 1, 1)) - expected) < 1e-14

    def test_against_exact_rational_evaluation(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            s = random_spectrum(rng)
            n = int(rng.integers(1, 31))
            counts = tuple(
                int(c) for c in rng.multinomial(n, np.full(s.k, 1.0 / s.k))
            )
            exact = frac_multinomial(spectrum_fractions(s), counts)
            got = multinomial_weight(s, counts)
            assert abs(got - math.log(exact)) < 1e-12 * max(1.0, abs(got))

    def test_wrong_length_rejected(self, qubit):
        with pytest.raises(ValidationError):
            multinomial_weight(qubit, (1, 1, 1))


class TestAnchorShift:
    def test_exact_halves(self, qubit):
        a = anchor_shift(qubit, 100, 1000)
        assert a.n0 == (50, 50) and a.m0 == (500, 500)
        assert a.delta_e0 == 450

    def test_quarter_scale(self, qubit):
        assert anchor_shift(qubit, 20, 80).delta_e0 == 30

    def test_rounding_rule_by_hand(self):
        s = normalize_spectrum([(0, 0.3), (1, 0.7)])
        a = anchor_shift(s, 10, 100)
        assert a.n0 == (3, 7) and a.m0 == (30, 70)
        assert a.delta_e0 == 63
        assert abs(63 - 90 * 0.7) <= 2 * 2 * 1  # 2 K ||H||_inf

    def test_order_violation_rejected(self, qubit):
        with pytest.raises(ValidationError):
            anchor_shift(qubit, 10, 5)

    def test_anchor_bound_and_embedding_random(self):
        rng = np.random.default_rng(23)
        for _ in range(500):
            s = random_spectrum(rng)
            n = int(rng.integers(1, 40))
            m = n + int(rng.integers(0, 120))
            a = anchor_shift(s, n, m)
            assert sum(a.n0) == n and sum(a.m0) == m
            probs = s.probs
            assert np.all(np.abs(np.array(a.n0) - n * probs) <= 1.0 + 1e-9)
            assert np.all(np.abs(np.array(a.m0) - m * probs) <= 1.0 + 1e-9)
            # The shift tracks (M - N) <H> within 2 K ||H||_inf, physically.
            unit = float(s.grid_unit)
            drift = abs(a.delta_e0 * unit - (m - n) * s.mean_energy)
            assert drift <= 2 * s.k * s.h_norm + 1e-9
            # Every shifted N-copy support energy stays in the M-copy range.
            lo_n = n * s.int_energies[0] + a.delta_e0
            hi_n = n * s.int_energies[-1] + a.delta_e0
            assert lo_n >= m * s.int_energies[0]
            assert hi_n <= m * s.int_energies[-1]

    def test_partition_energy(self, three_level):
        assert partition_energy(three_level, (1, 0, 2)) == 4
