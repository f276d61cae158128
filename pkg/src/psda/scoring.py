"""Likelihood-ratio scoring of verification trials.

A trial compares an enrollment side against a test side, each summarized
by SideStats. The log likelihood ratio for "same speaker" vs "different
speakers" is closed-form in the Bessel log-normalizer, symmetric in the
two sides, and supports multi-observation sides through summed statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bessel import log_cnu
from .model import PsdaModel, SideStats, marginal_loglik
from .vmf import unit

__all__ = [
    "ScoreReport",
    "Trial",
    "cosine_score",
    "llr_score",
    "score_matrix",
    "score_trials",
]

LABELS = ("target", "nontarget")

# kappa^2 entries below this fraction of the norm budget are recomputed
# directly; the blocked formula loses digits when the sides nearly cancel.
_CANCEL_FRAC = 1e-6


@dataclass(frozen=True)
class Trial:
    """One verification trial: enrollment side, test side, optional label."""

    enroll: SideStats
    test: SideStats
    label: str | None = None

    def __post_init__(self):
        if not isinstance(self.enroll, SideStats) or not isinstance(self.test, SideStats):
            raise TypeError("enroll and test must be SideStats")
        if self.enroll.dim != self.test.dim:
            raise ValueError(
                f"dimension mismatch: enroll {self.enroll.dim}, test {self.test.dim}"
            )
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class ScoreReport:
    """Scores for a list of trials, with ids and any labels carried through.

    ``ids`` holds (enroll id, test id) pairs; ``labels`` is None when no
    trial was labeled, otherwise one entry per trial (None where missing).
    """

    ids: tuple
    llrs: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        ids = tuple((str(a), str(b)) for a, b in self.ids)
        llrs = np.array(self.llrs, dtype=np.float64)
        if llrs.ndim != 1 or llrs.size != len(ids):
            raise ValueError("need exactly one llr per trial")
        if llrs.size and not np.isfinite(llrs).all():
            raise ValueError("scores must all be finite")
        llrs.flags.writeable = False
        labels = self.labels
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(ids):
                raise ValueError("need exactly one label per trial")
            bad = {l for l in labels if l is not None and l not in LABELS}
            if bad:
                raise ValueError(f"invalid labels: {sorted(bad)}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "llrs", llrs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.ids)

    def labeled_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(target scores, nontarget scores); every trial must be labeled."""
        if self.labels is None or any(l is None for l in self.labels):
            raise ValueError("score report is not fully labeled")
        lab = np.array([l == "target" for l in self.labels])
        return self.llrs[lab], self.llrs[~lab]


def llr_score(model: PsdaModel, trial: Trial) -> float:
    """Log likelihood ratio of same- vs different-speaker hypotheses.

    log C(|b mu + w etilde|) + log C(|b mu + w ttilde|)
        - log C(|b mu + w etilde + w ttilde|) - log C(b),

    which equals marginal_loglik(E u T) - marginal_loglik(E)
    - marginal_loglik(T) identically (the per-observation factors cancel).
    """
    if trial.enroll.dim != model.dim:
        raise ValueError(f"dimension mismatch: trial {trial.enroll.dim}, model {model.dim}")
    order = model.order
    bmu = model.b * model.mu
    w = model.w
    return float(
        log_cnu(order, np.linalg.norm(bmu + w * trial.enroll.total))
        + log_cnu(order, np.linalg.norm(bmu + w * trial.test.total))
        - log_cnu(order, np.linalg.norm(bmu + w * (trial.enroll.total + trial.test.total)))
        - log_cnu(order, model.b)
    )


def score_trials(model: PsdaModel, trials, ids=None) -> ScoreReport:
    """Score a list of Trials one by one; ids default to the positions."""
    trials = list(trials)
    llrs = np.array([llr_score(model, t) for t in trials])
    if ids is None:
        ids = [(f"enroll{i}", f"test{i}") for i in range(len(trials))]
    labels = tuple(t.label for t in trials)
    if all(l is None for l in labels):
        labels = None
    return ScoreReport(tuple(ids), llrs, labels)


def score_matrix(model: PsdaModel, enrolls, tests) -> np.ndarray:
    """All-pairs llr matrix, entry (i, j) = llr_score(enroll_i, test_j).

    The only pair-dependent quantity is |a_i + c_j| with a_i = b mu
    + w etilde_i and c_j = w ttilde_j, so the block reduces to one dense
    matrix product plus per-side norms; log C is applied elementwise at
    the end. Entries where the quadratic form nearly cancels are
    recomputed directly to protect the 1e-10 agreement with the
    per-trial path.
    """
    enrolls, tests = list(enrolls), list(tests)
    dim = model.dim
    for s in enrolls + tests:
        if s.dim != dim:
            raise ValueError(f"dimension mismatch: stats {s.dim}, model {dim}")
    if not enrolls or not tests:
        return np.zeros((len(enrolls), len(tests)))
    order = model.order
    bmu = model.b * model.mu
    A = bmu + model.w * np.stack([s.total for s in enrolls])  # (I, d)
    C = model.w * np.stack([s.total for s in tests])  # (J, d)
    a2 = np.einsum("ij,ij->i", A, A)
    c2 = np.einsum("ij,ij->i", C, C)
    k2 = a2[:, None] + c2[None, :] + 2.0 * (A @ C.T)
    np.maximum(k2, 0.0, out=k2)
    cancel = k2 < _CANCEL_FRAC * (a2[:, None] + c2[None, :])
    if cancel.any():
        for i, j in zip(*np.nonzero(cancel)):
            k2[i, j] = np.linalg.norm(A[i] + C[j]) ** 2
    num_e = log_cnu(order, np.sqrt(a2))
    num_t = log_cnu(order, np.linalg.norm(bmu + C, axis=1))
    return (
        num_e[:, None]
        + num_t[None, :]
        - log_cnu(order, np.sqrt(k2))
        - log_cnu(order, model.b)
    )


def cosine_score(e, t) -> float:
    """Cosine similarity of two unit vectors: their dot product in [-1, 1]."""
    ev = unit(e, "e")
    tv = unit(t, "t")
    if ev.size != tv.size:
        raise ValueError(f"dimension mismatch: {ev.size} vs {tv.size}")
    return float(np.clip(ev @ tv, -1.0, 1.0))
