import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_hw_counts, lfsr_draw_states, nearest_on_grid
from statrobust.approx_hw import (
    MAXIMAL_TAPS,
    TAPS_19,
    ApproxConfig,
    FixedPointFormat,
    Lfsr,
    boltzmann_weights,
    effective_hw_counts,
    effective_hw_pmf,
    fresh_word_steps,
    lfsr_next,
    lfsr_period,
    quantize_weights,
    sample_approx,
)
from statrobust.distributions import js_divergence, pmf_from_energies
from statrobust.errors import DegenerateDistribution, InvalidInput, InvalidState


def cfg(total, frac, threshold=0.0, **kw):
    return ApproxConfig(FixedPointFormat(total, frac), threshold, **kw)


class TestFormat:
    def test_defaults_represent_one(self):
        f = FixedPointFormat()
        assert f.scale == 256 and f.max_code == 511

    @pytest.mark.parametrize("total,frac", [(1, 0), (33, 8), (8, 9), (8, -1)])
    def test_rejects(self, total, frac):
        with pytest.raises(InvalidInput):
            FixedPointFormat(total, frac)

    def test_threshold_must_be_representable(self):
        with pytest.raises(InvalidInput):
            cfg(4, 2, threshold=2.0**-8)

    def test_steps_must_be_coprime_to_period(self):
        # 2**6 - 1 = 63 = 3 * 3 * 7
        with pytest.raises(InvalidInput):
            ApproxConfig(lfsr_width=6, lfsr_taps=MAXIMAL_TAPS[6], steps_per_draw=6)

    def test_dict_round_trip(self):
        c = cfg(12, 10, 2.0**-6, lfsr_width=12, lfsr_taps=MAXIMAL_TAPS[12], lfsr_seed=5)
        assert ApproxConfig.from_dict(c.to_dict()) == c

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(InvalidInput):
            ApproxConfig.from_dict({"fractionbits": 8})


class TestQuantize:
    def test_example(self):
        assert quantize_weights([1.0, 0.5], cfg(8, 7)).tolist() == [128, 64]

    def test_zero_weight_stays_zero(self):
        assert quantize_weights([1.0, 0.0, 0.3], cfg(9, 8)).tolist() == [256, 0, 77]

    def test_truncation(self):
        c = cfg(9, 8, 2.0**-8)
        assert quantize_weights([1.0, 2.0**-12], c).tolist() == [256, 0]

    def test_below_threshold_zeroed(self):
        c = cfg(9, 8, 2.0**-4)
        assert quantize_weights([1.0, 0.06, 0.0625], c).tolist() == [256, 0, 16]

    def test_saturates(self):
        assert quantize_weights([1.0, 0.25], cfg(2, 2)).tolist() == [3, 1]

    def test_rescales_by_max(self):
        assert quantize_weights([4.0, 2.0], cfg(8, 7)).tolist() == [128, 64]

    def test_degenerate(self):
        with pytest.raises(DegenerateDistribution):
            quantize_weights([0.0, 0.0], cfg(9, 8))

    def test_ties_to_even(self):
        # 3/512 sits halfway between codes 1 and 2 of an 8-fraction-bit grid
        assert quantize_weights([1.0, 3 / 512, 5 / 512], cfg(9, 8)).tolist() == [256, 2, 2]

    @given(
        st.lists(st.floats(0, 1), min_size=1, max_size=8),
        st.integers(1, 12),
    )
    def test_matches_grid_search(self, ws, frac):
        w = np.array([1.0] + ws)
        got = quantize_weights(w, cfg(frac + 1, frac))
        assert got.tolist() == [nearest_on_grid(x, frac, frac + 1) for x in w]

    @given(
        st.lists(st.floats(0, 1e3), min_size=1, max_size=10).filter(lambda v: max(v) > 0),
        st.integers(1, 16),
        st.integers(0, 6),
    )
    def test_monotone(self, ws, frac, thr_bits):
        threshold = 2.0 ** -min(thr_bits, frac) if thr_bits else 0.0
        w = np.sort(ws)
        codes = quantize_weights(w, cfg(frac + 1, frac, threshold))
        assert np.all(np.diff(codes) >= 0)

    @given(st.floats(0, 1), st.integers(1, 15))
    def test_finer_grid_never_worse(self, w, frac):
        # nested grids: one more fraction bit cannot increase the per-weight error
        coarse = quantize_weights([1.0, w], cfg(frac + 1, frac))[1] / 2**frac
        fine = quantize_weights([1.0, w], cfg(frac + 2, frac + 1))[1] / 2 ** (frac + 1)
        assert abs(fine - w) <= abs(coarse - w)


class TestBoltzmann:
    def test_max_weight_is_one(self):
        w = boltzmann_weights([5.0, 3.0, 9.0], 2.0)
        assert w[1] == 1.0
        assert w[0] == pytest.approx(math.exp(-1.0))

    def test_rejects_bad_temperature(self):
        with pytest.raises(InvalidInput):
            boltzmann_weights([0.0], 0.0)


class TestLfsr:
    def test_width3_period_and_coverage(self):
        lfsr = Lfsr(3, (3, 2), 1)
        seen = []
        for _ in range(7):
            lfsr, u = lfsr_next(lfsr)
            seen.append(lfsr.state)
            assert u == lfsr.state / 8
        assert sorted(seen) == list(range(1, 8))
        assert lfsr.state == 1

    def test_width3_sequence(self):
        lfsr, states = Lfsr(3, (3, 2), 1), []
        for _ in range(7):
            lfsr, _ = lfsr_next(lfsr)
            states.append(lfsr.state)
        # shift right, bit0 ^ bit1 enters the top bit
        assert states == [4, 2, 5, 6, 7, 3, 1]

    @pytest.mark.parametrize("width", sorted(MAXIMAL_TAPS))
    def test_default_taps_maximal(self, width):
        assert lfsr_period(Lfsr(width, MAXIMAL_TAPS[width], 1)) == 2**width - 1

    def test_19_bit_period(self):
        assert lfsr_period(Lfsr(19, TAPS_19, 1)) == 2**19 - 1

    def test_zero_state(self):
        with pytest.raises(InvalidState):
            lfsr_next(Lfsr(5, MAXIMAL_TAPS[5], 0))

    @settings(max_examples=200)
    @given(st.integers(1, 2**19 - 1), st.integers(1, 50))
    def test_output_in_open_interval(self, start, n):
        lfsr = Lfsr(19, TAPS_19, start)
        for _ in range(n):
            lfsr, u = lfsr_next(lfsr)
            assert 0 < u < 1

    def test_fresh_word_steps(self):
        assert fresh_word_steps(19) == 19
        assert [fresh_word_steps(w) for w in (6, 12, 18, 20)] == [8, 16, 20, 23]

    def test_streams_differ(self):
        c = ApproxConfig()
        assert len({c.lfsr(stream=s).state for s in range(20)}) == 20


class TestSampleApprox:
    def test_single_support(self):
        idx, _ = sample_approx([3.0], 1.0, ApproxConfig(), Lfsr(19, TAPS_19, 77))
        assert idx == 0

    def test_truncated_never_drawn(self):
        c = cfg(9, 8, 2.0**-4, lfsr_width=8, lfsr_taps=MAXIMAL_TAPS[8])
        lfsr, seen = c.lfsr(), set()
        for _ in range(255):
            idx, lfsr = sample_approx([0.0, 10.0, 0.5], 1.0, c, lfsr)
            seen.add(idx)
        assert seen == {0, 2}

    def test_uniform_over_full_period(self):
        c = cfg(5, 4, lfsr_width=8, lfsr_taps=MAXIMAL_TAPS[8])
        lfsr, hits = c.lfsr(), np.zeros(4, dtype=int)
        for _ in range(255):
            idx, lfsr = sample_approx([1.0] * 4, 1.0, c, lfsr)
            hits[idx] += 1
        # interval i holds states s with 64*i < s <= 64*(i+1), capped at 255
        assert hits.tolist() == [64, 64, 64, 63]

    def test_degenerate_raises(self):
        # a threshold above 1.0 zeroes even the largest weight
        c = cfg(4, 2, 2.0, lfsr_width=5, lfsr_taps=MAXIMAL_TAPS[5])
        with pytest.raises(DegenerateDistribution):
            sample_approx([0.0, 1.0], 1.0, c, c.lfsr())


class TestEffectivePmf:
    def test_small_example(self):
        # codes (3, 1): interval bounds 3/4 and 1 of the 19-bit state range
        c = cfg(2, 2)
        counts = effective_hw_counts([0.0, math.log(4)], 1.0, c)
        assert counts.tolist() == [393216, 131071]

    @pytest.mark.parametrize("steps", [1, 19])
    def test_matches_enumeration(self, steps):
        c = cfg(2, 2, steps_per_draw=steps)
        states = lfsr_draw_states(19, TAPS_19, 1, steps)
        codes = quantize_weights(boltzmann_weights([0.0, math.log(4)], 1.0), c)
        assert enumerate_hw_counts(codes, states, 19).tolist() == [393216, 131071]

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(0, 6), min_size=1, max_size=6),
        st.integers(1, 10),
        st.sampled_from([6, 8, 10]),
    )
    def test_enumeration_exact(self, energies, frac, width):
        c = cfg(frac + 1, frac, lfsr_width=width, lfsr_taps=MAXIMAL_TAPS[width])
        states = lfsr_draw_states(width, MAXIMAL_TAPS[width], 1, c.steps_per_draw)
        codes = quantize_weights(boltzmann_weights(energies, 1.0), c)
        expected = enumerate_hw_counts(codes, states, width)
        assert effective_hw_counts(energies, 1.0, c).tolist() == expected.tolist()

    def test_sampler_frequencies_match_counts(self):
        c = cfg(7, 6, 2.0**-4, lfsr_width=10, lfsr_taps=MAXIMAL_TAPS[10])
        e = [0.0, 0.7, 2.0, 3.5]
        lfsr, hits = c.lfsr(), np.zeros(4, dtype=int)
        for _ in range(2**10 - 1):
            idx, lfsr = sample_approx(e, 1.0, c, lfsr)
            hits[idx] += 1
        assert hits.tolist() == effective_hw_counts(e, 1.0, c).tolist()

    def test_truncated_index_exactly_zero(self):
        p = effective_hw_pmf([0.0, 8.0, 1.0], 1.0, ApproxConfig())
        assert p.probs[1] == 0.0

    def test_fine_precision_close_to_ideal(self):
        e = [0.0, 0.3, 1.7, 2.2]
        p = effective_hw_pmf(e, 1.0, cfg(25, 24))
        np.testing.assert_allclose(p.probs, pmf_from_energies(e).probs, rtol=0, atol=2.0**-18)

    def test_sums_to_one(self):
        assert math.fsum(effective_hw_pmf([0.0, 1.0, 2.0], 1.0, ApproxConfig()).probs) == 1.0


# JSD(uniform over 4, point mass) in closed form (mpmath, 30 digits)
JSD_UNIFORM4_VS_POINT = 0.380395665848577885


class TestPrecisionSweep:
    def test_truncating_all_but_max_approaches_point_mass(self):
        # threshold 1.0 keeps only the largest weight, so the hardware emits a point mass
        c = cfg(9, 8, 1.0)
        gaps = []
        for delta in (0.1, 0.03, 0.01, 0.004):
            e = [0.0, delta, delta, delta]
            q = effective_hw_pmf(e, 1.0, c)
            assert q.probs.tolist() == [1.0, 0.0, 0.0, 0.0]
            gaps.append(JSD_UNIFORM4_VS_POINT - js_divergence(pmf_from_energies(e), q))
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert 0 < gaps[-1] < 1e-3

    def test_jsd_can_rise_with_one_more_fraction_bit(self):
        # per-weight errors shrink or stay put (codes 16,10,1 -> 32,19,2) but
        # they stop cancelling after normalization, so JSD grows
        e = [0.0, 0.5, 3.0]
        ideal = pmf_from_energies(e)
        j4 = js_divergence(ideal, effective_hw_pmf(e, 1.0, cfg(5, 4)))
        j5 = js_divergence(ideal, effective_hw_pmf(e, 1.0, cfg(6, 5)))
        assert j5 > j4 * 1.1

    def test_worst_case_jsd_non_increasing(self):
        rng = np.random.default_rng(0)
        vectors = rng.uniform(0, 8, size=(2000, 4))
        worst = []
        for frac in (4, 6, 8, 12, 16):
            c = cfg(frac + 1, frac)
            worst.append(max(
                js_divergence(pmf_from_energies(v), effective_hw_pmf(v, 1.0, c))
                for v in vectors
            ))
        assert all(b <= a for a, b in zip(worst, worst[1:]))
