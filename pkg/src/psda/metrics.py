"""Verification metrics over labeled score sets: DET points, EER, minDCF.

Threshold convention throughout: a trial whose score is exactly at the
threshold counts as an accept (>= comparison). All rates are fractions;
percent formatting belongs to the presentation layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LabeledScores",
    "det_points",
    "det_points_text",
    "eer",
    "eer_staircase",
    "min_dcf",
]


@dataclass(frozen=True)
class LabeledScores:
    """Scores split by ground truth: target trials and nontarget trials."""

    targets: np.ndarray
    nontargets: np.ndarray

    def __post_init__(self):
        for name in ("targets", "nontargets"):
            v = np.array(getattr(self, name), dtype=np.float64).ravel()
            if v.size == 0:
                raise ValueError(f"{name} must be nonempty")
            if not np.isfinite(v).all():
                raise ValueError(f"{name} contains non-finite scores")
            v.flags.writeable = False
            object.__setattr__(self, name, v)


def det_points(s: LabeledScores) -> np.ndarray:
    """Empirical DET operating points, one per distinct threshold.

    Returns a (K, 2) array of (p_miss, p_fa) rows swept over every
    distinct score as threshold (accept when score >= threshold) plus the
    reject-all point, so the accept-all endpoint (0, 1) and reject-all
    endpoint (1, 0) are always present; K <= #distinct scores + 1. Along
    the sweep p_miss is non-decreasing and p_fa non-increasing.
    """
    tar = np.sort(s.targets)
    non = np.sort(s.nontargets)
    thr = np.unique(np.concatenate([tar, non]))
    p_miss = np.searchsorted(tar, thr, side="left") / tar.size
    p_fa = (non.size - np.searchsorted(non, thr, side="left")) / non.size
    p_miss = np.append(p_miss, 1.0)
    p_fa = np.append(p_fa, 0.0)
    return np.column_stack([p_miss, p_fa])


def _roc_hull(points: np.ndarray) -> np.ndarray:
    """Lower-left convex hull of DET points in (p_fa, p_miss) space."""
    order = np.lexsort((points[:, 0], points[:, 1]))  # by p_fa, then p_miss
    hull: list[np.ndarray] = []
    for p in points[order]:
        # pop while the turn (in x=p_fa, y=p_miss coords) is not a left turn
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (a[1] - o[1]) * (p[0] - o[0]) - (a[0] - o[0]) * (p[1] - o[1])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def eer(s: LabeledScores) -> float:
    """Equal error rate from the ROC convex hull.

    The hull of the empirical operating points is intersected with the
    diagonal p_miss = p_fa, interpolating linearly on the crossing
    segment. Hull-based EER is invariant under strictly increasing score
    transforms and never exceeds the staircase value.
    """
    hull = _roc_hull(det_points(s))
    gap = hull[:, 0] - hull[:, 1]  # p_miss - p_fa, decreasing along the hull
    k = int(np.argmax(gap <= 0.0))
    if gap[k] == 0.0:
        return float(hull[k, 0])
    t = gap[k - 1] / (gap[k - 1] - gap[k])
    return float(hull[k - 1, 1] + t * (hull[k, 1] - hull[k - 1, 1]))


def eer_staircase(s: LabeledScores) -> float:
    """Naive EER: midpoint of (p_miss, p_fa) at the threshold where the
    empirical staircase comes closest to the diagonal. Kept as a secondary
    diagnostic; the hull value is the primary one."""
    pts = det_points(s)
    k = int(np.argmin(np.abs(pts[:, 0] - pts[:, 1])))
    return float(0.5 * (pts[k, 0] + pts[k, 1]))


def min_dcf(s: LabeledScores, p_tar: float = 0.05, c_miss: float = 1.0, c_fa: float = 1.0) -> float:
    """Minimum normalized detection cost over empirical thresholds.

    min over det_points (accept-all and reject-all included) of
    p_tar*c_miss*p_miss + (1-p_tar)*c_fa*p_fa, divided by
    min(p_tar*c_miss, (1-p_tar)*c_fa), the cost of the better blind
    policy; with unit costs the result lies in [0, 1].
    """
    p_tar = float(p_tar)
    if not 0.0 < p_tar < 1.0:
        raise ValueError(f"p_tar must lie in (0, 1), got {p_tar!r}")
    if not (c_miss > 0.0 and c_fa > 0.0):
        raise ValueError("costs must be positive")
    pts = det_points(s)
    dcf = p_tar * c_miss * pts[:, 0] + (1.0 - p_tar) * c_fa * pts[:, 1]
    return float(dcf.min() / min(p_tar * c_miss, (1.0 - p_tar) * c_fa))


def det_points_text(points: np.ndarray) -> str:
    """Two-column text serialization (p_miss p_fa per line) for plotting."""
    pts = np.asarray(points, dtype=np.float64)
    return "".join(f"{pm:.10g} {pf:.10g}\n" for pm, pf in pts)
