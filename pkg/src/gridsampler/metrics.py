"""Coverage of the slack-bus P-Q plane and PCM fidelity of sample sets.

Coverage is measured with convex hulls: how many reference points fall
inside a candidate cloud's hull, and how much of the reference hull the
candidate hull overlaps.
"""
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import check_matrix
from .stats import pcm, pcm_diff

BOUNDARY_TOL = 1e-12


class DegenerateHullError(ValueError):
    """Fewer than three non-collinear points."""


@dataclass(frozen=True)
class PqCloud:
    """Converged slack (P, Q) points of one strategy.

    ``n_total`` counts all attempted samples, converged or not, so the
    feasibility rate is ``len(points) / n_total``.
    """

    points: np.ndarray
    label: str
    n_total: int = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("P-Q cloud coordinates must be finite")
        object.__setattr__(self, "points", pts)
        if self.n_total is None:
            object.__setattr__(self, "n_total", len(pts))
        elif self.n_total < len(pts):
            raise ValueError("n_total cannot be smaller than the number of points")

    @classmethod
    def from_batch(cls, result, label):
        return cls(result.points(), label, len(result))

    @property
    def feasibility(self):
        return len(self.points) / self.n_total if self.n_total else float("nan")

    @property
    def centroid(self):
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class CoverageReport:
    strategy: str
    hull_area: float
    containment: float
    overlap_ratio: float
    feasibility: float
    pcm_fidelity: float = float("nan")

    def to_dict(self):
        return asdict(self)


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - \
        (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def convex_hull(points):
    """Counter-clockwise hull vertices (monotone chain), collinear points dropped."""
    pts = np.asarray(points.points if isinstance(points, PqCloud) else points, dtype=float)
    pts = np.unique(pts.reshape(-1, 2), axis=0)  # lexicographic sort
    if len(pts) < 3:
        raise DegenerateHullError(f"need at least 3 distinct points, got {len(pts)}")

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise DegenerateHullError("all points are collinear")
    return hull


def polygon_area(poly):
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_hull(hull, points, tol=BOUNDARY_TOL):
    """Mask of points inside or on (within ``tol``) a counter-clockwise hull."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    inside = np.ones(len(pts), bool)
    for a, b in zip(hull, np.roll(hull, -1, axis=0)):
        inside &= _cross(a, b, pts) >= -tol
    return inside


def clip_polygon(subject, clipper):
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW ``clipper``."""
    out = [tuple(p) for p in subject]
    for a, b in zip(clipper, np.roll(clipper, -1, axis=0)):
        if not out:
            break
        src, out = out, []
        for k, cur in enumerate(src):
            prev = src[k - 1]
            cur_in = _cross(a, b, np.array(cur)) >= 0
            prev_in = _cross(a, b, np.array(prev)) >= 0
            if cur_in:
                if not prev_in:
                    out.append(_intersect(prev, cur, a, b))
                out.append(cur)
            elif prev_in:
                out.append(_intersect(prev, cur, a, b))
    return np.array(out).reshape(-1, 2)


def _intersect(p, q, a, b):
    p, q = np.asarray(p), np.asarray(q)
    d1 = _cross(a, b, p)
    d2 = _cross(a, b, q)
    t = d1 / (d1 - d2)
    return tuple(p + t * (q - p))


def coverage(candidate, reference, tol=BOUNDARY_TOL):
    """Quantify how well ``candidate`` covers ``reference`` in the P-Q plane.

    Returns a :class:`CoverageReport` whose ``containment`` is the share of
    reference points inside the candidate hull and ``overlap_ratio`` the
    share of the reference hull area also covered by the candidate hull.
    """
    cand_hull = convex_hull(candidate)
    ref_hull = convex_hull(reference)
    containment = float(points_in_hull(cand_hull, reference.points, tol).mean())
    ref_area = polygon_area(ref_hull)
    inter = clip_polygon(ref_hull, cand_hull)
    overlap = min(1.0, polygon_area(inter) / ref_area) if ref_area > 0 else 0.0
    return CoverageReport(candidate.label, polygon_area(cand_hull), containment,
                          max(0.0, overlap), candidate.feasibility)


def pcm_fidelity(samples, source_pcm):
    """Correlation between the samples' PCM and ``source_pcm`` (all N*N entries)."""
    values, labels = check_matrix(samples)
    if tuple(labels) != tuple(source_pcm.labels):
        raise ValueError("sample columns do not match the PCM labels")
    return pcm_diff(pcm(values, columns=labels), source_pcm).correlation
