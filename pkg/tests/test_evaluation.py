import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import det_vector, lcs_bitset

from kgrag.evaluation import (
    AggregationError,
    EvalScore,
    aggregate,
    bertscore,
    format_delta,
    lcs_length,
    rouge_l,
)

JP_ALPHABET = "薬病熱療検査血圧症状診断"  # 12 distinct characters


class TestLcsLength:
    def test_classic_dp_example(self):
        # hand-checked DP table for the textbook pair
        assert lcs_length("AGGTAB", "GXTXAYB") == 4

    def test_identity(self):
        assert lcs_length("abcdef", "abcdef") == 6

    def test_disjoint_alphabets(self):
        assert lcs_length("abc", "xyz") == 0

    def test_empty_sides(self):
        assert lcs_length("", "abc") == 0
        assert lcs_length("", "") == 0

    def test_bitset_oracle_sanity(self):
        assert lcs_bitset("AGGTAB", "GXTXAYB") == 4
        assert lcs_bitset("abc", "xyz") == 0
        assert lcs_bitset("abcdef", "abcdef") == 6


class TestRougeL:
    def test_identity_is_100(self):
        assert rouge_l("同じ文です", "同じ文です") == 100.0

    def test_worked_example_75(self):
        # oracle: LCS("ace","abcde") = 3, R = 3/5, P = 3/3, F1 = 0.75
        assert rouge_l("ace", "abcde") == 75.0

    def test_no_shared_characters_is_zero(self):
        assert rouge_l("abc", "xyz") == 0.0

    def test_empty_empty_is_100_single_empty_is_0(self):
        assert rouge_l("", "") == 100.0
        assert rouge_l("abc", "") == 0.0
        assert rouge_l("", "abc") == 0.0

    def test_oracle_equivalence_500_random_pairs(self):
        rng = random.Random(20250823)
        for _ in range(500):
            a = "".join(rng.choice(JP_ALPHABET) for _ in range(rng.randint(0, 60)))
            b = "".join(rng.choice(JP_ALPHABET) for _ in range(rng.randint(0, 60)))
            lcs = lcs_bitset(list(a.strip()), list(b.strip()))
            if not a.strip() and not b.strip():
                expected = 100.0
            elif not a.strip() or not b.strip() or lcs == 0:
                expected = 0.0
            else:
                p = lcs / len(a.strip())
                r = lcs / len(b.strip())
                expected = 100.0 * (2 * p * r) / (p + r)
            assert rouge_l(a, b) == expected

    @settings(max_examples=200, deadline=None)
    @given(
        st.text(alphabet=JP_ALPHABET, max_size=40),
        st.text(alphabet=JP_ALPHABET, max_size=40),
    )
    def test_symmetry_preserves_f1(self, a, b):
        assert rouge_l(a, b) == pytest.approx(rouge_l(b, a), abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(
        st.text(alphabet=JP_ALPHABET, min_size=1, max_size=30),
        st.text(alphabet=JP_ALPHABET, min_size=1, max_size=30),
        st.text(alphabet=JP_ALPHABET, min_size=1, max_size=10),
    )
    def test_monotone_under_shared_suffix(self, a, b, suffix):
        assert rouge_l(a + suffix, b + suffix) >= rouge_l(a, b) - 1e-9

    @settings(max_examples=200, deadline=None)
    @given(
        st.text(alphabet=JP_ALPHABET, max_size=40),
        st.text(alphabet=JP_ALPHABET, max_size=40),
    )
    def test_range(self, a, b):
        assert 0.0 <= rouge_l(a, b) <= 100.0


class TestBertscore:
    def tok(self, *vectors):
        return [(f"t{i}", v) for i, v in enumerate(vectors)]

    def test_identical_sequences_100(self):
        tokens = self.tok([1.0, 0.0], [0.0, 1.0])
        assert bertscore(tokens, tokens) == pytest.approx(100.0)

    def test_orthonormal_worked_example(self):
        # reference {e1, e2}, candidate {e1}: P = 1, R = 0.5, F1 = 2/3
        ref = self.tok([1.0, 0.0], [0.0, 1.0])
        cand = self.tok([1.0, 0.0])
        assert bertscore(cand, ref) == pytest.approx(200.0 / 3.0, abs=0.01)

    def test_single_token_cosine_half(self):
        # cos = 0.5 => P = R = 0.5 => F1 = 0.5
        cand = self.tok([1.0, 0.0])
        ref = self.tok([0.5, math.sqrt(0.75)])
        assert bertscore(cand, ref) == pytest.approx(50.0, abs=1e-9)

    def test_symmetry_swaps_p_and_r_keeps_f1(self):
        cand = self.tok(det_vector("a"), det_vector("b"))
        ref = self.tok(det_vector("x"), det_vector("y"), det_vector("z"))
        assert bertscore(cand, ref) == pytest.approx(bertscore(ref, cand), abs=1e-9)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            bertscore([], self.tok([1.0, 0.0]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bertscore(self.tok([1.0, 0.0]), self.tok([1.0, 0.0, 0.0]))

    def test_range_on_random_inputs(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            cand = self.tok(*rng.normal(size=(rng.integers(1, 6), 4)) + 0.01)
            ref = self.tok(*rng.normal(size=(rng.integers(1, 6), 4)) + 0.01)
            assert 0.0 <= bertscore(cand, ref) <= 100.0


class TestAggregate:
    def scores(self, values):
        return [EvalScore(f"q{i}", rouge, bert) for i, (rouge, bert) in enumerate(values)]

    def test_borea_phi_delta(self):
        baseline = self.scores([(4.33, 61.20)])
        rag = self.scores([(4.77, 61.32)])
        report = aggregate(baseline, rag, {"dataset_name": "expertqa-bio", "model_name": "borea"})
        assert format_delta(report.delta_rouge_l) == "(+0.44%)"
        assert report.delta_rouge_l == pytest.approx(0.44)

    def test_mistral_negative_delta(self):
        baseline = self.scores([(20.85, 75.25)])
        rag = self.scores([(17.39, 72.13)])
        report = aggregate(baseline, rag, {"dataset_name": "expertqa-bio", "model_name": "mistral"})
        assert format_delta(report.delta_rouge_l) == "(-3.46%)"

    def test_identical_lists_zero_delta(self):
        baseline = self.scores([(10.0, 50.0), (20.0, 60.0)])
        rag = self.scores([(10.0, 50.0), (20.0, 60.0)])
        report = aggregate(baseline, rag, {"dataset_name": "d", "model_name": "m"})
        assert report.delta_rouge_l == 0.0
        assert report.delta_bertscore == 0.0

    def test_means_are_arithmetic(self):
        baseline = self.scores([(10.0, 40.0), (30.0, 60.0)])
        report = aggregate(baseline, None, {"dataset_name": "d", "model_name": "m"})
        assert report.baseline_rouge_l == 20.0
        assert report.baseline_bertscore == 50.0
        assert report.rag_rouge_l is None

    def test_id_mismatch_lists_symmetric_difference(self):
        baseline = self.scores([(1.0, 1.0), (2.0, 2.0)])
        rag = [EvalScore("q0", 1.0, 1.0), EvalScore("q9", 2.0, 2.0)]
        with pytest.raises(AggregationError) as excinfo:
            aggregate(baseline, rag, {"dataset_name": "d", "model_name": "m"})
        assert "q1" in str(excinfo.value) and "q9" in str(excinfo.value)
