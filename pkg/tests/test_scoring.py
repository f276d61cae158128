"""Tests for likelihood-ratio and cosine scoring."""

import math
import time

import numpy as np
import pytest

import oracles
from psda import (
    PsdaModel,
    ScoreReport,
    SideStats,
    Trial,
    VmfParams,
    cosine_score,
    llr_score,
    log_cnu,
    marginal_loglik,
    score_matrix,
    score_trials,
)
from psda.vmf import sample_with_rng


def _e(d, i=0):
    v = np.zeros(d)
    v[i] = 1.0
    return v


def _random_unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _random_stats(rng, d, max_n=4):
    n = int(rng.integers(1, max_n + 1))
    return SideStats(n, np.sum([_random_unit(rng, d) for _ in range(n)], axis=0))


def _random_model(rng, d):
    return PsdaModel(
        float(rng.uniform(1.0, 80.0)), float(rng.uniform(0.0, 30.0)), _random_unit(rng, d)
    )


class TestTrialAndReport:
    def test_trial_validation(self):
        s3, s4 = SideStats(1, _e(3)), SideStats(1, _e(4))
        with pytest.raises(ValueError, match="mismatch"):
            Trial(s3, s4)
        with pytest.raises(ValueError, match="label"):
            Trial(s3, s3, "genuine")
        with pytest.raises(TypeError):
            Trial(_e(3), s3)
        assert Trial(s3, s3, "target").label == "target"

    def test_report_validation(self):
        with pytest.raises(ValueError, match="finite"):
            ScoreReport((("a", "b"),), [np.inf])
        with pytest.raises(ValueError, match="one llr per trial"):
            ScoreReport((("a", "b"),), [1.0, 2.0])
        with pytest.raises(ValueError, match="one label per trial"):
            ScoreReport((("a", "b"),), [1.0], ("target", "target"))
        with pytest.raises(ValueError, match="invalid labels"):
            ScoreReport((("a", "b"),), [1.0], ("tar",))

    def test_labeled_arrays(self):
        r = ScoreReport(
            (("e", "t1"), ("e", "t2"), ("e", "t3")),
            [3.0, -1.0, 2.0],
            ("target", "nontarget", "target"),
        )
        tar, non = r.labeled_arrays()
        np.testing.assert_array_equal(tar, [3.0, 2.0])
        np.testing.assert_array_equal(non, [-1.0])
        assert len(r) == 3

    def test_labeled_arrays_requires_full_labels(self):
        r = ScoreReport((("e", "t"), ("e", "u")), [1.0, 2.0], ("target", None))
        with pytest.raises(ValueError, match="not fully labeled"):
            r.labeled_arrays()


class TestLlrScore:
    def test_matches_marginal_decomposition(self):
        """llr = marginal(union) - marginal(enroll) - marginal(test), to 1e-12."""
        rng = np.random.default_rng(30)
        for _ in range(100):
            d = int(rng.integers(2, 9))
            m = _random_model(rng, d)
            e, t = _random_stats(rng, d), _random_stats(rng, d)
            got = llr_score(m, Trial(e, t))
            want = marginal_loglik(m, e + t) - marginal_loglik(m, e) - marginal_loglik(m, t)
            assert got == pytest.approx(want, abs=1e-12)

    def test_d3_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(60):
            m = _random_model(rng, 3)
            e, t = _random_stats(rng, 3), _random_stats(rng, 3)
            got = llr_score(m, Trial(e, t))
            want = oracles.llr_d3(m.w, m.b, m.mu, e.n, e.total, t.n, t.total)
            assert got == pytest.approx(want, abs=1e-10)

    def test_antipodal_pair_no_prior(self):
        """b = 0, t = -e: evidence cancels, llr = 2[log C(w) - log C(0)] < 0."""
        m = PsdaModel(12.0, 0.0, _e(3))
        x = _random_unit(np.random.default_rng(32), 3)
        got = llr_score(m, Trial(SideStats(1, x), SideStats(1, -x)))
        want = 2.0 * (log_cnu(m.order, m.w) - log_cnu(m.order, 0.0))
        assert got == pytest.approx(want, rel=1e-12)
        assert got < 0.0

    def test_symmetry_exact(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            d = int(rng.integers(2, 7))
            m = _random_model(rng, d)
            e, t = _random_stats(rng, d), _random_stats(rng, d)
            assert llr_score(m, Trial(e, t)) == llr_score(m, Trial(t, e))

    def test_multi_enroll_uses_summed_stats(self):
        """Pooling three cuts of the same enrollment set scores identically,
        and differs from scoring against the renormalized average vector."""
        rng = np.random.default_rng(34)
        X = np.stack([_random_unit(rng, 5) for _ in range(6)])
        m = _random_model(rng, 5)
        t = _random_stats(rng, 5)
        pooled = SideStats.from_embeddings(X)
        pieced = SideStats.from_embeddings(X[:2]) + SideStats.from_embeddings(X[2:])
        assert llr_score(m, Trial(pooled, t)) == pytest.approx(
            llr_score(m, Trial(pieced, t)), rel=1e-14
        )
        avg = X.mean(axis=0)
        avg_stats = SideStats(1, avg / np.linalg.norm(avg))
        assert llr_score(m, Trial(pooled, t)) != pytest.approx(
            llr_score(m, Trial(avg_stats, t)), abs=1e-6
        )

    def test_monotone_toward_enrollment_when_b_zero(self):
        """With a flat prior the llr is strictly increasing in the cosine
        between the probe and the enrollment sum (the cosine-equivalence
        mechanism); with b > 0 the probe's own normalizer shifts the
        maximizer, so this holds only at b = 0."""
        rng = np.random.default_rng(35)
        m = PsdaModel(25.0, 0.0, _random_unit(rng, 4))
        e = _random_stats(rng, 4)
        target = e.total / np.linalg.norm(e.total)
        start = _random_unit(rng, 4)
        # interpolate on the sphere from start to the enrollment direction
        omega = math.acos(float(np.clip(start @ target, -1, 1)))
        llrs = []
        for t in np.linspace(0.0, 1.0, 9):
            x = (math.sin((1 - t) * omega) * start + math.sin(t * omega) * target) / math.sin(omega)
            x /= np.linalg.norm(x)
            llrs.append(llr_score(m, Trial(e, SideStats(1, x))))
        assert all(a < b for a, b in zip(llrs, llrs[1:]))

    def test_dimension_check(self):
        m = PsdaModel(5.0, 1.0, _e(3))
        with pytest.raises(ValueError, match="mismatch"):
            llr_score(m, Trial(SideStats(1, _e(4)), SideStats(1, _e(4))))


class TestScoreTrials:
    def test_ids_and_labels_carried(self):
        rng = np.random.default_rng(36)
        m = _random_model(rng, 4)
        trials = [
            Trial(_random_stats(rng, 4), _random_stats(rng, 4), "target"),
            Trial(_random_stats(rng, 4), _random_stats(rng, 4), None),
        ]
        r = score_trials(m, trials, ids=[("spkA", "seg1"), ("spkB", "seg2")])
        assert r.ids == (("spkA", "seg1"), ("spkB", "seg2"))
        assert r.labels == ("target", None)
        assert r.llrs[0] == llr_score(m, trials[0])

    def test_default_ids_and_label_elision(self):
        rng = np.random.default_rng(37)
        m = _random_model(rng, 3)
        trials = [Trial(_random_stats(rng, 3), _random_stats(rng, 3)) for _ in range(2)]
        r = score_trials(m, trials)
        assert r.ids == (("enroll0", "test0"), ("enroll1", "test1"))
        assert r.labels is None


class TestScoreMatrix:
    def test_single_entry_matches_per_trial_exactly(self):
        rng = np.random.default_rng(38)
        for _ in range(25):
            d = int(rng.integers(2, 8))
            m = _random_model(rng, d)
            e, t = _random_stats(rng, d), _random_stats(rng, d)
            got = score_matrix(m, [e], [t])
            assert got.shape == (1, 1)
            assert got[0, 0] == pytest.approx(llr_score(m, Trial(e, t)), abs=1e-12)

    def test_block_agrees_with_loop(self):
        """100 x 200 block within 1e-10 of the per-trial path."""
        rng = np.random.default_rng(39)
        d = 32
        m = PsdaModel(55.0, 7.0, _random_unit(rng, d))
        enrolls = [_random_stats(rng, d, max_n=5) for _ in range(100)]
        tests = [_random_stats(rng, d, max_n=2) for _ in range(200)]
        block = score_matrix(m, enrolls, tests)
        assert block.shape == (100, 200)
        for i in range(0, 100, 17):
            for j in range(0, 200, 23):
                want = llr_score(m, Trial(enrolls[i], tests[j]))
                assert block[i, j] == pytest.approx(want, abs=1e-10)

    def test_near_cancellation_entries(self):
        """Antipodal sides at b=0: the blocked quadratic form cancels and the
        refinement pass must keep the direct answer."""
        m = PsdaModel(50.0, 0.0, _e(6))
        rng = np.random.default_rng(40)
        xs = [_random_unit(rng, 6) for _ in range(4)]
        enrolls = [SideStats(1, x) for x in xs]
        tests = [SideStats(1, -x) for x in xs]
        block = score_matrix(m, enrolls, tests)
        for i in range(4):
            for j in range(4):
                want = llr_score(m, Trial(enrolls[i], tests[j]))
                assert block[i, j] == pytest.approx(want, abs=1e-10)

    def test_empty_sides(self):
        m = PsdaModel(5.0, 1.0, _e(3))
        assert score_matrix(m, [], []).shape == (0, 0)
        assert score_matrix(m, [SideStats(1, _e(3))], []).shape == (1, 0)

    def test_throughput_1000x1000(self):
        """Wall-clock check on the big block; generous bound for slow CI."""
        rng = np.random.default_rng(41)
        d = 64
        m = PsdaModel(30.0, 5.0, _random_unit(rng, d))
        E = rng.standard_normal((1000, d))
        E /= np.linalg.norm(E, axis=1, keepdims=True)
        T = rng.standard_normal((1000, d))
        T /= np.linalg.norm(T, axis=1, keepdims=True)
        enrolls = [SideStats(1, x) for x in E]
        tests = [SideStats(1, x) for x in T]
        t0 = time.perf_counter()
        block = score_matrix(m, enrolls, tests)
        dt = time.perf_counter() - t0
        print(f"\n1000x1000 score_matrix: {dt:.3f}s")
        assert block.shape == (1000, 1000)
        assert np.isfinite(block).all()
        assert dt < 30.0


class TestCosine:
    def test_hand_values(self):
        x = _random_unit(np.random.default_rng(42), 5)
        assert cosine_score(x, x) == pytest.approx(1.0, abs=1e-12)
        assert cosine_score(x, -x) == pytest.approx(-1.0, abs=1e-12)
        assert cosine_score(_e(4, 0), _e(4, 1)) == 0.0

    def test_norm_identity(self):
        """e't = (|e + t|^2 - 2) / 2 for unit vectors."""
        rng = np.random.default_rng(43)
        for _ in range(20):
            e, t = _random_unit(rng, 6), _random_unit(rng, 6)
            want = (np.linalg.norm(e + t) ** 2 - 2.0) / 2.0
            assert cosine_score(e, t) == pytest.approx(want, abs=1e-12)

    def test_clipped_to_range(self):
        x = _e(3)
        assert -1.0 <= cosine_score(x, x) <= 1.0

    def test_validates_inputs(self):
        with pytest.raises(ValueError):
            cosine_score(2.0 * _e(3), _e(3))
        with pytest.raises(ValueError, match="mismatch"):
            cosine_score(_e(3), _e(4))
