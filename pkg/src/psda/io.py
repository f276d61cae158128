"""File formats, model persistence, and synthetic-data generation.

Formats (all text is UTF-8, all writes atomic via temp-file + rename):

* embeddings, TSV: one ``id<TAB>v1<TAB>...<TAB>vd`` line per vector;
  floats are written with shortest exact repr, so TSV round trips are
  bit-identical.
* embeddings, binary: magic ``PSDAEMB1``, little-endian uint32 dim,
  uint64 count, then per record a uint16 id byte length, the id bytes,
  and dim float32 coordinates.
* speaker labels: ``segment_id<TAB>speaker_id`` lines.
* trials: whitespace-separated ``enroll_id test_id [tar|non]`` lines.
* enroll map: ``model_id seg_id [seg_id ...]`` lines.
* scores: ``enroll_id test_id llr [tar|non]`` lines.
* model: key/value lines tagged ``format psda-1``; w, b, mu at full
  precision so save/load round trips are bit-identical.

Ids may not contain whitespace (the trial, map, and score formats are
whitespace-delimited).
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ParseError
from .model import PsdaModel, SideStats
from .scoring import ScoreReport
from .vmf import VmfParams, sample_with_rng, unit_rows

__all__ = [
    "EmbeddingTable",
    "load_embeddings",
    "load_enroll_map",
    "load_labels",
    "load_model",
    "load_scores",
    "load_trials",
    "save_det_points",
    "save_embeddings",
    "save_labels",
    "save_model",
    "save_scores",
    "speaker_stats",
    "synth_dataset",
    "synth_trials",
]

_MAGIC = b"PSDAEMB1"
_LABEL_TOKENS = {"tar": "target", "non": "nontarget"}
_TOKEN_OF_LABEL = {v: k for k, v in _LABEL_TOKENS.items()}


def _check_id(token: str, path, lineno: int, what: str = "id") -> str:
    if not token or token != token.strip() or any(c.isspace() for c in token):
        raise ParseError(path, lineno, f"invalid {what} {token!r}")
    return token


@dataclass(frozen=True)
class EmbeddingTable:
    """Embedding vectors keyed by unique string ids.

    Rows are validated and renormalized on construction under the unit
    vector rules, so ``vectors`` always holds float64 unit rows.
    """

    ids: tuple
    vectors: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        if not ids:
            raise ValueError("embedding table is empty")
        for i in ids:
            if not i or any(c.isspace() for c in i):
                raise ValueError(f"invalid id {i!r} (empty or contains whitespace)")
        index = {}
        for pos, i in enumerate(ids):
            if i in index:
                raise ValueError(f"duplicate id {i!r}")
            index[i] = pos
        vectors = unit_rows(self.vectors, names=ids)
        if vectors.shape[0] != len(ids):
            raise ValueError("one id per row required")
        vectors.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, id_: str) -> bool:
        return id_ in self._index

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, id_: str) -> np.ndarray:
        try:
            return self.vectors[self._index[id_]]
        except KeyError:
            raise KeyError(f"unknown segment id {id_!r}") from None

    def stats(self, ids) -> SideStats:
        """Summed sufficient statistics of the named segments."""
        ids = list(ids)
        rows = np.stack([self.row(i) for i in ids])
        return SideStats(len(ids), rows.sum(axis=0))


def load_embeddings(path, fmt: str = "auto") -> EmbeddingTable:
    """Read an embedding table; ``fmt`` is tsv, bin, or auto (sniffed)."""
    if fmt == "auto":
        with open(path, "rb") as f:
            fmt = "bin" if f.read(len(_MAGIC)) == _MAGIC else "tsv"
    if fmt == "tsv":
        return _load_embeddings_tsv(path)
    if fmt == "bin":
        return _load_embeddings_bin(path)
    raise ValueError(f"unknown embedding format {fmt!r}")


def _load_embeddings_tsv(path) -> EmbeddingTable:
    ids, rows = [], []
    seen = set()
    dim = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise ParseError(path, lineno, f"expected id + >= 2 coordinates, got {len(parts)} fields")
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise ParseError(path, lineno, f"expected {dim} coordinates, got {len(parts) - 1}")
            _check_id(parts[0], path, lineno)
            try:
                rows.append([float(p) for p in parts[1:]])
            except ValueError:
                raise ParseError(path, lineno, "malformed float") from None
            if parts[0] in seen:
                raise ParseError(path, lineno, f"duplicate id {parts[0]!r}")
            seen.add(parts[0])
            ids.append(parts[0])
    if not ids:
        raise ParseError(path, 1, "no embedding rows")
    return EmbeddingTable(tuple(ids), np.array(rows))


def _load_embeddings_bin(path) -> EmbeddingTable:
    with open(path, "rb") as f:
        data = f.read()
    off = len(_MAGIC)
    if data[:off] != _MAGIC:
        raise ParseError(path, 1, "bad magic; not a binary embedding file")
    if len(data) < off + 12:
        raise ParseError(path, 1, "truncated header")
    dim, = struct.unpack_from("<I", data, off)
    count, = struct.unpack_from("<Q", data, off + 4)
    off += 12
    if dim < 2:
        raise ParseError(path, 1, f"dim must be >= 2, got {dim}")
    ids, rows = [], []
    for rec in range(count):
        if len(data) < off + 2:
            raise ParseError(path, 1, f"truncated at record {rec} (offset {off})")
        idlen, = struct.unpack_from("<H", data, off)
        off += 2
        end = off + idlen + 4 * dim
        if len(data) < end:
            raise ParseError(path, 1, f"truncated at record {rec} (offset {off})")
        try:
            ids.append(data[off : off + idlen].decode("utf-8"))
        except UnicodeDecodeError:
            raise ParseError(path, 1, f"record {rec}: id is not valid UTF-8") from None
        off += idlen
        rows.append(np.frombuffer(data, dtype="<f4", count=dim, offset=off))
        off += 4 * dim
    if off != len(data):
        raise ParseError(path, 1, f"{len(data) - off} trailing bytes after {count} records")
    if not ids:
        raise ParseError(path, 1, "no embedding records")
    return EmbeddingTable(tuple(ids), np.array(rows, dtype=np.float64))


def save_embeddings(table: EmbeddingTable, path, fmt: str = "tsv"):
    """Write a table as TSV (exact) or binary (float32 coordinates)."""
    if fmt == "tsv":
        lines = []
        for i, v in zip(table.ids, table.vectors):
            lines.append(i + "\t" + "\t".join(repr(float(x)) for x in v) + "\n")
        _atomic_write_text(path, "".join(lines))
    elif fmt == "bin":
        chunks = [_MAGIC, struct.pack("<IQ", table.dim, len(table))]
        for i, v in zip(table.ids, table.vectors):
            enc = i.encode("utf-8")
            chunks.append(struct.pack("<H", len(enc)))
            chunks.append(enc)
            chunks.append(v.astype("<f4").tobytes())
        _atomic_write_bytes(path, b"".join(chunks))
    else:
        raise ValueError(f"unknown embedding format {fmt!r}")


def load_labels(path) -> dict:
    """segment_id -> speaker_id from a two-column TSV."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected segment<TAB>speaker, got {len(parts)} fields")
            seg = _check_id(parts[0], path, lineno, "segment id")
            spk = _check_id(parts[1], path, lineno, "speaker id")
            if seg in out:
                raise ParseError(path, lineno, f"duplicate segment id {seg!r}")
            out[seg] = spk
    if not out:
        raise ParseError(path, 1, "no label rows")
    return out


def save_labels(labels, path):
    """Write (segment_id, speaker_id) pairs or a dict as two-column TSV."""
    items = labels.items() if isinstance(labels, dict) else labels
    _atomic_write_text(path, "".join(f"{s}\t{k}\n" for s, k in items))


def speaker_stats(table: EmbeddingTable, labels: dict) -> list:
    """Per-speaker SideStats in sorted speaker order, for training.

    Every labeled segment must exist in the table; table rows without a
    label are ignored.
    """
    groups: dict = {}
    for seg, spk in labels.items():
        groups.setdefault(spk, []).append(seg)
    return [table.stats(sorted(groups[spk])) for spk in sorted(groups)]


def load_trials(path) -> list:
    """(enroll_id, test_id, label-or-None) tuples from a trials file."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, f"expected 2 or 3 tokens, got {len(parts)}")
            label = None
            if len(parts) == 3:
                if parts[2] not in _LABEL_TOKENS:
                    raise ParseError(path, lineno, f"label must be tar or non, got {parts[2]!r}")
                label = _LABEL_TOKENS[parts[2]]
            out.append((parts[0], parts[1], label))
    if not out:
        raise ParseError(path, 1, "no trials")
    return out


def save_trials(trials, path):
    lines = []
    for enroll_id, test_id, label in trials:
        tok = "" if label is None else " " + _TOKEN_OF_LABEL[label]
        lines.append(f"{enroll_id} {test_id}{tok}\n")
    _atomic_write_text(path, "".join(lines))


def load_enroll_map(path) -> dict:
    """model_id -> [segment ids] from an enrollment map file."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(path, lineno, "enroll entry needs at least one segment id")
            if parts[0] in out:
                raise ParseError(path, lineno, f"duplicate model id {parts[0]!r}")
            out[parts[0]] = parts[1:]
    if not out:
        raise ParseError(path, 1, "no enroll entries")
    return out


def save_enroll_map(mapping: dict, path):
    _atomic_write_text(
        path, "".join(f"{mid} {' '.join(segs)}\n" for mid, segs in mapping.items())
    )


def save_model(model: PsdaModel, path, n_speakers: int | None = None, n_observations: int | None = None):
    """Persist a model as a psda-1 key/value document.

    Floats use shortest exact repr, so w, b, and mu survive a save/load
    round trip bit-identically.
    """
    lines = [
        "format psda-1\n",
        f"tool psda {__version__}\n",
        f"dim {model.dim}\n",
        f"w {model.w!r}\n",
        f"b {model.b!r}\n",
    ]
    if n_speakers is not None:
        lines.append(f"n_speakers {int(n_speakers)}\n")
    if n_observations is not None:
        lines.append(f"n_observations {int(n_observations)}\n")
    lines.append("mu " + " ".join(repr(float(x)) for x in model.mu) + "\n")
    _atomic_write_text(path, "".join(lines))


def load_model(path) -> tuple:
    """Read a psda-1 model file; returns (PsdaModel, metadata dict)."""
    fields = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(path, lineno, f"bad key/value line {line!r}")
            key = parts[0]
            if lineno == 1 and key != "format":
                raise ParseError(path, 1, "first line must be the format tag")
            if key in fields:
                raise ParseError(path, lineno, f"duplicate key {key!r}")
            fields[key] = (lineno, parts[1:])
    if "format" not in fields or fields["format"][1] != ["psda-1"]:
        raise ParseError(path, 1, "unsupported model format (want psda-1)")

    def _one_float(key) -> float:
        if key not in fields:
            raise ParseError(path, 1, f"missing key {key!r}")
        lineno, vals = fields[key]
        try:
            (v,) = vals
            return float(v)
        except ValueError:
            raise ParseError(path, lineno, f"bad value for {key!r}") from None

    dim = int(_one_float("dim"))
    w = _one_float("w")
    b = _one_float("b")
    if "mu" not in fields:
        raise ParseError(path, 1, "missing key 'mu'")
    lineno, mu_vals = fields["mu"]
    if len(mu_vals) != dim:
        raise ParseError(path, lineno, f"mu has {len(mu_vals)} values, dim says {dim}")
    try:
        mu = np.array([float(v) for v in mu_vals])
    except ValueError:
        raise ParseError(path, lineno, "malformed float in mu") from None
    meta = {}
    for key in ("tool", "n_speakers", "n_observations"):
        if key in fields:
            meta[key] = " ".join(fields[key][1])
    return PsdaModel(w, b, mu), meta


def save_scores(report: ScoreReport, path, digits: int = 9):
    """Write ``enroll_id test_id llr [tar|non]`` lines.

    ``digits`` is the significant-figure count (default 9; 17 is lossless
    for binary64).
    """
    digits = int(digits)
    if not 1 <= digits <= 17:
        raise ValueError(f"digits must be in 1..17, got {digits}")
    labels = report.labels or (None,) * len(report)
    lines = []
    for (eid, tid), llr, label in zip(report.ids, report.llrs, labels):
        tok = "" if label is None else " " + _TOKEN_OF_LABEL[label]
        lines.append(f"{eid} {tid} {llr:.{digits}g}{tok}\n")
    _atomic_write_text(path, "".join(lines))


def load_scores(path) -> ScoreReport:
    ids, llrs, labels = [], [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (3, 4):
                raise ParseError(path, lineno, f"expected 3 or 4 tokens, got {len(parts)}")
            try:
                llr = float(parts[2])
            except ValueError:
                raise ParseError(path, lineno, f"malformed llr {parts[2]!r}") from None
            label = None
            if len(parts) == 4:
                if parts[3] not in _LABEL_TOKENS:
                    raise ParseError(path, lineno, f"label must be tar or non, got {parts[3]!r}")
                label = _LABEL_TOKENS[parts[3]]
            ids.append((parts[0], parts[1]))
            llrs.append(llr)
            labels.append(label)
    if not ids:
        raise ParseError(path, 1, "no scores")
    if all(l is None for l in labels):
        labels = None
    return ScoreReport(tuple(ids), np.array(llrs), None if labels is None else tuple(labels))


def save_det_points(points, path):
    from .metrics import det_points_text

    _atomic_write_text(path, det_points_text(points))


def synth_dataset(truth: PsdaModel, n_speakers: int, n_per, seed) -> tuple:
    """Draw a synthetic labeled dataset from the generative model.

    Per speaker, an identity direction is drawn from the between prior,
    then ``n_per`` observations (an int, or one count per speaker) from
    the within distribution around it. Returns (EmbeddingTable, list of
    (segment_id, speaker_id)); deterministic for a given seed.
    """
    n_speakers = int(n_speakers)
    if n_speakers < 1:
        raise ValueError("n_speakers must be >= 1")
    counts = np.broadcast_to(np.asarray(n_per, dtype=int), (n_speakers,))
    if (counts < 1).any():
        raise ValueError("every speaker needs n_per >= 1")
    rng = np.random.default_rng(seed)
    prior = VmfParams(truth.mu, truth.b)
    z = sample_with_rng(prior, n_speakers, rng)
    ids, rows, labels = [], [], []
    width = max(4, len(str(n_speakers - 1)))
    for i in range(n_speakers):
        spk = f"spk{i:0{width}d}"
        x = sample_with_rng(VmfParams(z[i], truth.w), int(counts[i]), rng)
        for j in range(int(counts[i])):
            seg = f"{spk}-{j:03d}"
            ids.append(seg)
            rows.append(x[j])
            labels.append((seg, spk))
    return EmbeddingTable(tuple(ids), np.array(rows)), labels


def synth_trials(labels, n_targets: int, n_nontargets: int, seed) -> list:
    """Random labeled singleton trials (segment vs segment) from a labeled set.

    Target trials pair two distinct segments of one speaker; nontarget
    trials pair segments of two distinct speakers. Sampling is with
    replacement and deterministic per seed.
    """
    by_spk: dict = {}
    for seg, spk in labels:
        by_spk.setdefault(spk, []).append(seg)
    speakers = sorted(by_spk)
    multi = [s for s in speakers if len(by_spk[s]) >= 2]
    if n_targets > 0 and not multi:
        raise ValueError("target trials need a speaker with >= 2 segments")
    if n_nontargets > 0 and len(speakers) < 2:
        raise ValueError("nontarget trials need >= 2 speakers")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(int(n_targets)):
        segs = by_spk[multi[rng.integers(len(multi))]]
        i, j = rng.choice(len(segs), size=2, replace=False)
        out.append((segs[i], segs[j], "target"))
    for _ in range(int(n_nontargets)):
        a, b = rng.choice(len(speakers), size=2, replace=False)
        sa = by_spk[speakers[a]]
        sb = by_spk[speakers[b]]
        out.append((sa[rng.integers(len(sa))], sb[rng.integers(len(sb))], "nontarget"))
    return out


def _atomic_write_text(path, text: str):
    _atomic_write_bytes(path, text.encode("utf-8"))


def _atomic_write_bytes(path, data: bytes):
    path = os.fspath(path)
    parent = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=os.path.basename(path) + ".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
