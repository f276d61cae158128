"""Tests for file formats, persistence, and synthetic data."""

import numpy as np
import pytest

from psda import (
    EmbeddingTable,
    ParseError,
    PsdaModel,
    ScoreReport,
    SideStats,
    Trial,
    llr_score,
    load_embeddings,
    load_enroll_map,
    load_labels,
    load_model,
    load_scores,
    load_trials,
    save_embeddings,
    save_labels,
    save_model,
    save_scores,
    save_trials,
    score_trials,
    speaker_stats,
    synth_dataset,
    synth_trials,
)
from psda.io import save_det_points, save_enroll_map


def _random_table(seed, n=20, d=6):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return EmbeddingTable(tuple(f"seg{i:03d}" for i in range(n)), X)


def _dyadic_table():
    """Unit rows whose coordinates are exact in float32 and float64 both."""
    rows = [np.zeros(4) for _ in range(4)]
    for i in range(4):
        rows[i][i] = 1.0
    for signs in ([1, 1, 1, 1], [1, -1, 1, -1], [-1, 1, 1, -1], [1, 1, -1, -1]):
        rows.append(0.5 * np.array(signs, dtype=float))
    return EmbeddingTable(tuple(f"v{i}" for i in range(len(rows))), np.stack(rows))


class TestEmbeddingTable:
    def test_lookup(self):
        t = _random_table(0)
        assert len(t) == 20
        assert t.dim == 6
        assert "seg003" in t
        assert "nope" not in t
        np.testing.assert_array_equal(t.row("seg003"), t.vectors[3])
        with pytest.raises(KeyError, match="nope"):
            t.row("nope")

    def test_stats_sums_rows(self):
        t = _random_table(1)
        s = t.stats(["seg000", "seg005", "seg009"])
        assert s.n == 3
        np.testing.assert_allclose(s.total, t.vectors[[0, 5, 9]].sum(axis=0))

    def test_rejects_duplicate_and_bad_ids(self):
        v = np.eye(2)
        with pytest.raises(ValueError, match="duplicate"):
            EmbeddingTable(("a", "a"), v)
        with pytest.raises(ValueError, match="invalid id"):
            EmbeddingTable(("a", "b c"), v)
        with pytest.raises(ValueError, match="invalid id"):
            EmbeddingTable(("a", ""), v)

    def test_rejects_bad_norm_naming_the_id(self):
        X = np.eye(3)
        X[1] *= 3.0
        with pytest.raises(ValueError, match="segB"):
            EmbeddingTable(("segA", "segB", "segC"), X)


class TestEmbeddingFiles:
    def test_tsv_round_trip_bit_identical(self, tmp_path):
        t = _random_table(2)
        p = tmp_path / "emb.tsv"
        save_embeddings(t, p)
        back = load_embeddings(p)
        assert back.ids == t.ids
        np.testing.assert_array_equal(back.vectors, t.vectors)

    def test_binary_round_trip(self, tmp_path):
        t = _random_table(3)
        p = tmp_path / "emb.bin"
        save_embeddings(t, p, fmt="bin")
        back = load_embeddings(p)
        assert back.ids == t.ids
        # coordinates pass through float32
        assert np.abs(back.vectors - t.vectors).max() < 1e-6

    def test_format_sniffing(self, tmp_path):
        t = _random_table(4, n=3)
        save_embeddings(t, tmp_path / "a", fmt="tsv")
        save_embeddings(t, tmp_path / "b", fmt="bin")
        assert load_embeddings(tmp_path / "a").ids == t.ids
        assert load_embeddings(tmp_path / "b").ids == t.ids
        with pytest.raises(ValueError, match="format"):
            load_embeddings(tmp_path / "a", fmt="csv")

    def test_formats_agree_exactly_on_dyadic_data(self, tmp_path):
        """Float32-exact coordinates survive both formats untouched, so the
        two loads score byte-identically."""
        t = _dyadic_table()
        save_embeddings(t, tmp_path / "e.tsv", fmt="tsv")
        save_embeddings(t, tmp_path / "e.bin", fmt="bin")
        a = load_embeddings(tmp_path / "e.tsv")
        b = load_embeddings(tmp_path / "e.bin")
        np.testing.assert_array_equal(a.vectors, b.vectors)
        m = PsdaModel(17.0, 3.0, np.array([0.5, 0.5, 0.5, 0.5]))
        trials = [Trial(a.stats([i]), a.stats([j])) for i in a.ids[:4] for j in a.ids[4:]]
        trials_b = [Trial(b.stats([i]), b.stats([j])) for i in b.ids[:4] for j in b.ids[4:]]
        sa, sb = score_trials(m, trials), score_trials(m, trials_b)
        save_scores(sa, tmp_path / "sa.txt")
        save_scores(sb, tmp_path / "sb.txt")
        assert (tmp_path / "sa.txt").read_bytes() == (tmp_path / "sb.txt").read_bytes()

    def test_tsv_parse_errors_carry_line_numbers(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("a\t1.0\t0.0\nb\t0.0\n")
        with pytest.raises(ParseError, match=r"bad\.tsv:2"):
            load_embeddings(p)
        p.write_text("a\t1.0\t0.0\na\t0.0\t1.0\n")
        with pytest.raises(ParseError, match="duplicate id"):
            load_embeddings(p)
        p.write_text("a\t1.0\tpotato\n")
        with pytest.raises(ParseError, match="malformed float"):
            load_embeddings(p)
        p.write_text("")
        with pytest.raises(ParseError, match="no embedding rows"):
            load_embeddings(p)

    def test_binary_truncation_detected(self, tmp_path):
        t = _random_table(5, n=4)
        p = tmp_path / "emb.bin"
        save_embeddings(t, p, fmt="bin")
        blob = p.read_bytes()
        p.write_bytes(blob[:-7])
        with pytest.raises(ParseError, match="truncated"):
            load_embeddings(p)
        p.write_bytes(blob + b"xx")
        with pytest.raises(ParseError, match="trailing bytes"):
            load_embeddings(p)

    def test_bad_norm_error_names_the_row_id(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("good\t1.0\t0.0\nshrunk\t0.5\t0.0\n")
        with pytest.raises(ValueError, match="shrunk"):
            load_embeddings(p)


class TestLabelsTrialsMaps:
    def test_labels_round_trip(self, tmp_path):
        labels = {"seg1": "spkA", "seg2": "spkA", "seg3": "spkB"}
        p = tmp_path / "labels.tsv"
        save_labels(labels, p)
        assert load_labels(p) == labels

    def test_labels_errors(self, tmp_path):
        p = tmp_path / "labels.tsv"
        p.write_text("seg1\tspkA\tspkB\n")
        with pytest.raises(ParseError, match=r"labels\.tsv:1"):
            load_labels(p)
        p.write_text("seg1\tspkA\nseg1\tspkB\n")
        with pytest.raises(ParseError, match="duplicate segment"):
            load_labels(p)

    def test_trials_round_trip(self, tmp_path):
        trials = [("m1", "s1", "target"), ("m1", "s2", "nontarget"), ("m2", "s1", None)]
        p = tmp_path / "trials.txt"
        save_trials(trials, p)
        assert load_trials(p) == trials
        assert "tar" in p.read_text() and "non" in p.read_text()

    def test_trials_errors(self, tmp_path):
        p = tmp_path / "trials.txt"
        p.write_text("a b tar extra\n")
        with pytest.raises(ParseError, match="2 or 3 tokens"):
            load_trials(p)
        p.write_text("a b genuine\n")
        with pytest.raises(ParseError, match="tar or non"):
            load_trials(p)

    def test_enroll_map_round_trip(self, tmp_path):
        mapping = {"m1": ["s1", "s2"], "m2": ["s3"]}
        p = tmp_path / "map.txt"
        save_enroll_map(mapping, p)
        assert load_enroll_map(p) == mapping

    def test_enroll_map_errors(self, tmp_path):
        p = tmp_path / "map.txt"
        p.write_text("m1 s1\nm1 s2\n")
        with pytest.raises(ParseError, match="duplicate model id"):
            load_enroll_map(p)
        p.write_text("lonely\n")
        with pytest.raises(ParseError, match="at least one segment"):
            load_enroll_map(p)

    def test_speaker_stats_grouping(self):
        t = _random_table(6, n=5)
        labels = {"seg000": "zeta", "seg001": "alpha", "seg002": "zeta", "seg003": "alpha"}
        stats = speaker_stats(t, labels)
        assert len(stats) == 2  # sorted speaker order: alpha, zeta
        np.testing.assert_allclose(stats[0].total, t.vectors[[1, 3]].sum(axis=0))
        np.testing.assert_allclose(stats[1].total, t.vectors[[0, 2]].sum(axis=0))
        with pytest.raises(KeyError):
            speaker_stats(t, {"missing": "spk"})


class TestModelFile:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(7)
        mu = rng.standard_normal(12)
        mu /= np.linalg.norm(mu)
        m = PsdaModel(123.45678901234567, 7.000000001, mu)
        p = tmp_path / "model.txt"
        save_model(m, p, n_speakers=42, n_observations=420)
        back, meta = load_model(p)
        assert back.w == m.w
        assert back.b == m.b
        np.testing.assert_array_equal(back.mu, m.mu)
        assert meta["n_speakers"] == "42"
        assert meta["n_observations"] == "420"
        assert meta["tool"].startswith("psda")

    def test_round_trip_preserves_all_scores(self, tmp_path):
        """Save/load round trip preserves all scores: differs by 0."""
        rng = np.random.default_rng(8)
        mu = rng.standard_normal(8)
        mu /= np.linalg.norm(mu)
        m = PsdaModel(31.7, 4.9, mu)
        p = tmp_path / "model.txt"
        save_model(m, p)
        back, _ = load_model(p)
        for _ in range(20):
            e = rng.standard_normal(8)
            t = rng.standard_normal(8)
            trial = Trial(
                SideStats(1, e / np.linalg.norm(e)), SideStats(1, t / np.linalg.norm(t))
            )
            assert llr_score(m, trial) == llr_score(back, trial)

    def test_parse_errors(self, tmp_path):
        p = tmp_path / "model.txt"
        p.write_text("dim 3\nformat psda-1\n")
        with pytest.raises(ParseError, match="first line"):
            load_model(p)
        p.write_text("format psda-2\n")
        with pytest.raises(ParseError, match="psda-1"):
            load_model(p)
        p.write_text("format psda-1\ndim 3\nw 1.0\nw 2.0\n")
        with pytest.raises(ParseError, match="duplicate key"):
            load_model(p)
        p.write_text("format psda-1\ndim 3\nw 1.0\nb 0.0\nmu 1.0 0.0\n")
        with pytest.raises(ParseError, match="mu has 2 values"):
            load_model(p)
        p.write_text("format psda-1\ndim 2\nb 0.0\nmu 1.0 0.0\n")
        with pytest.raises(ParseError, match="missing key 'w'"):
            load_model(p)


class TestScoreFiles:
    def _report(self):
        return ScoreReport(
            (("m1", "s1"), ("m1", "s2"), ("m2", "s1")),
            [1.234567890123456789, -0.5, 17.25],
            ("target", "nontarget", None),
        )

    def test_round_trip_labels_and_ids(self, tmp_path):
        p = tmp_path / "scores.txt"
        save_scores(self._report(), p)
        back = load_scores(p)
        assert back.ids == self._report().ids
        assert back.labels == self._report().labels
        np.testing.assert_allclose(back.llrs, self._report().llrs, rtol=1e-8)

    def test_digits_17_lossless(self, tmp_path):
        p = tmp_path / "scores.txt"
        save_scores(self._report(), p, digits=17)
        np.testing.assert_array_equal(load_scores(p).llrs, self._report().llrs)

    def test_digits_validation(self, tmp_path):
        with pytest.raises(ValueError, match="digits"):
            save_scores(self._report(), tmp_path / "x", digits=0)
        with pytest.raises(ValueError, match="digits"):
            save_scores(self._report(), tmp_path / "x", digits=18)

    def test_unlabeled_report_has_three_tokens(self, tmp_path):
        r = ScoreReport((("a", "b"),), [0.5])
        p = tmp_path / "scores.txt"
        save_scores(r, p)
        assert p.read_text() == "a b 0.5\n"
        assert load_scores(p).labels is None

    def test_parse_errors(self, tmp_path):
        p = tmp_path / "scores.txt"
        p.write_text("a b not-a-number\n")
        with pytest.raises(ParseError, match="malformed llr"):
            load_scores(p)
        p.write_text("a b 1.0 maybe\n")
        with pytest.raises(ParseError, match="tar or non"):
            load_scores(p)
        p.write_text("")
        with pytest.raises(ParseError, match="no scores"):
            load_scores(p)

    def test_det_points_file(self, tmp_path):
        p = tmp_path / "det.txt"
        save_det_points(np.array([[0.0, 1.0], [0.5, 0.25]]), p)
        assert p.read_text() == "0 1\n0.5 0.25\n"


class TestSynth:
    def _truth(self, w=50.0, b=5.0, d=8):
        mu = np.zeros(d)
        mu[0] = 1.0
        return PsdaModel(w, b, mu)

    def test_deterministic_per_seed(self, tmp_path):
        t1, l1 = synth_dataset(self._truth(), 10, 4, seed=99)
        t2, l2 = synth_dataset(self._truth(), 10, 4, seed=99)
        assert t1.ids == t2.ids
        np.testing.assert_array_equal(t1.vectors, t2.vectors)
        assert l1 == l2
        t3, _ = synth_dataset(self._truth(), 10, 4, seed=100)
        assert not np.array_equal(t1.vectors, t3.vectors)
        # byte-identical files from identical tables
        save_embeddings(t1, tmp_path / "a.tsv")
        save_embeddings(t2, tmp_path / "b.tsv")
        assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()

    def test_shapes_ids_and_labels(self):
        table, labels = synth_dataset(self._truth(), 7, [1, 2, 3, 1, 1, 2, 4], seed=0)
        assert len(table) == 14
        assert len(labels) == 14
        segs = dict(labels)
        assert segs["spk0002-002"] == "spk0002"
        assert all(seg in table for seg, _ in labels)

    def test_flat_prior_spreads_speakers(self):
        """b = 0: speaker directions are uniform, so the global mean is small."""
        table, _ = synth_dataset(self._truth(w=200.0, b=0.0, d=6), 2000, 1, seed=1)
        assert float(np.linalg.norm(table.vectors.mean(axis=0))) < 0.05

    def test_high_w_clusters_tightly(self):
        table, labels = synth_dataset(self._truth(w=1e4, b=2.0), 30, 6, seed=2)
        by_spk = {}
        for seg, spk in labels:
            by_spk.setdefault(spk, []).append(table.row(seg))
        for rows in by_spk.values():
            R = np.stack(rows)
            gram = R @ R.T
            assert gram.min() > 0.99

    def test_bad_args(self):
        with pytest.raises(ValueError):
            synth_dataset(self._truth(), 0, 3, seed=0)
        with pytest.raises(ValueError):
            synth_dataset(self._truth(), 3, 0, seed=0)

    def test_synth_trials_structure(self):
        _, labels = synth_dataset(self._truth(), 12, 3, seed=3)
        spk_of = dict(labels)
        trials = synth_trials(labels, 40, 60, seed=4)
        tars = [t for t in trials if t[2] == "target"]
        nons = [t for t in trials if t[2] == "nontarget"]
        assert len(tars) == 40 and len(nons) == 60
        for a, b, _ in tars:
            assert a != b and spk_of[a] == spk_of[b]
        for a, b, _ in nons:
            assert spk_of[a] != spk_of[b]
        assert synth_trials(labels, 40, 60, seed=4) == trials

    def test_synth_trials_degenerate_inputs(self):
        with pytest.raises(ValueError, match=">= 2 segments"):
            synth_trials([("s1", "spkA"), ("s2", "spkB")], 1, 0, seed=0)
        with pytest.raises(ValueError, match=">= 2 speakers"):
            synth_trials([("s1", "spkA"), ("s2", "spkA")], 0, 1, seed=0)


class TestAtomicWrites:
    def test_overwrite_leaves_no_droppings(self, tmp_path):
        p = tmp_path / "labels.tsv"
        save_labels({"s": "a"}, p)
        save_labels({"s": "b"}, p)
        assert load_labels(p) == {"s": "b"}
        assert sorted(f.name for f in tmp_path.iterdir()) == ["labels.tsv"]

    def test_missing_directory_fails_cleanly(self, tmp_path):
        with pytest.raises(OSError):
            save_labels({"s": "a"}, tmp_path / "nowhere" / "labels.tsv")
        assert not (tmp_path / "nowhere").exists()
