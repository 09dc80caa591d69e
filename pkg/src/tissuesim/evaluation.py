"""Track scoring with single-threshold HOTA, plus a degrader and a baseline tracker."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from ._validation import check_points, check_positive

__all__ = [
    "TrackSet",
    "HotaScores",
    "match_frame",
    "hota",
    "degrade_tracks",
    "detection_f1",
    "NearestNeighborTracker",
    "greedy_nn_tracker",
]


@dataclass
class TrackSet:
    """Tracks as ``{track_id: {frame: position}}`` over frames ``[0, frame_count)``."""

    tracks: dict = field(default_factory=dict)
    frame_count: int = 0

    def __post_init__(self):
        if self.frame_count < 0:
            raise ValueError(f"frame_count must be >= 0, got {self.frame_count}")
        tracks = {}
        for tid, frames in self.tracks.items():
            clean = {}
            for t, pos in frames.items():
                t = int(t)
                if not 0 <= t < self.frame_count:
                    raise ValueError(f"track {tid}: frame {t} outside [0, {self.frame_count})")
                clean[t] = np.asarray(pos, dtype=float)
            tracks[int(tid)] = clean
        self.tracks = tracks

    @classmethod
    def from_positions(cls, positions, ids=None) -> "TrackSet":
        """Build from an array ``(T, n, d)`` of positions; NaN rows mean absent."""
        positions = np.asarray(positions, dtype=float)
        n_frames, n = positions.shape[:2]
        ids = range(n) if ids is None else ids
        tracks = {}
        for k, tid in enumerate(ids):
            present = ~np.isnan(positions[:, k]).any(axis=1)
            tracks[int(tid)] = {int(t): positions[t, k] for t in np.nonzero(present)[0]}
        return cls(tracks, n_frames)

    @property
    def ndim(self) -> int | None:
        for frames in self.tracks.values():
            for pos in frames.values():
                return len(pos)
        return None

    def frame(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Track ids (ascending) and positions present at frame `t`."""
        ids = sorted(tid for tid, frames in self.tracks.items() if t in frames)
        pos = np.array([self.tracks[tid][t] for tid in ids]).reshape(len(ids), self.ndim or 0)
        return np.array(ids, dtype=np.int64), pos

    def detections(self) -> list[np.ndarray]:
        """Per-frame unlabelled positions, in ascending id order."""
        return [self.frame(t)[1] for t in range(self.frame_count)]

    def n_detections(self) -> int:
        return sum(len(frames) for frames in self.tracks.values())


@dataclass(frozen=True)
class HotaScores:
    hota: float
    det_a: float
    ass_a: float
    tp: int
    fn: int
    fp: int

    def as_dict(self) -> dict:
        return {"hota": self.hota, "det_a": self.det_a, "ass_a": self.ass_a, "tp": self.tp, "fn": self.fn, "fp": self.fp}


def match_frame(gt_points, pred_points, eta: float) -> list[tuple[int, int]]:
    """Optimal one-to-one matching within distance `eta`.

    Maximises the number of pairs closer than `eta`, breaking ties by the
    smallest total distance. Returns ``(gt_idx, pred_idx)`` pairs sorted by
    ground-truth index.
    """
    eta = check_positive(eta, "eta")
    gt_points = check_points(gt_points)
    pred_points = check_points(pred_points)
    if len(gt_points) == 0 or len(pred_points) == 0:
        return []
    dist = cdist(gt_points, pred_points)
    valid = dist <= eta
    if not valid.any():
        return []
    # Any extra valid pair saves more than the largest possible distance total.
    bonus = 2.0 * eta * (min(dist.shape) + 1)
    cost = np.where(valid, dist - bonus, 0.0)
    rows, cols = linear_sum_assignment(cost)
    keep = valid[rows, cols]
    return [(int(r), int(c)) for r, c in zip(rows[keep], cols[keep])]


def hota(gt: TrackSet, pred: TrackSet, eta: float = 2.0) -> HotaScores:
    """HOTA at a single distance threshold `eta`.

    Detections are matched frame by frame with `match_frame`. For a matched
    pair of ids ``(g, p)`` the association score is
    ``TPA / (TPA + FNA + FPA)`` where ``TPA`` counts the frames in which
    they are matched together, and ``FNA``, ``FPA`` the remaining detections
    of `g` and `p`. AssA averages it over all true positives.
    """
    eta = check_positive(eta, "eta")
    if gt.frame_count != pred.frame_count:
        raise ValueError(f"frame counts differ: gt has {gt.frame_count}, pred has {pred.frame_count}")
    tp = fn = fp = 0
    pair_matches: dict[tuple[int, int], int] = defaultdict(int)
    for t in range(gt.frame_count):
        gt_ids, gt_pos = gt.frame(t)
        pred_ids, pred_pos = pred.frame(t)
        pairs = match_frame(gt_pos, pred_pos, eta) if len(gt_ids) and len(pred_ids) else []
        tp += len(pairs)
        fn += len(gt_ids) - len(pairs)
        fp += len(pred_ids) - len(pairs)
        for g, p in pairs:
            pair_matches[(int(gt_ids[g]), int(pred_ids[p]))] += 1

    if tp == 0:
        return HotaScores(0.0, 0.0, 0.0, 0, fn, fp)
    gt_len = {tid: len(frames) for tid, frames in gt.tracks.items()}
    pred_len = {tid: len(frames) for tid, frames in pred.tracks.items()}
    ass_sum = 0.0
    for (g, p), tpa in pair_matches.items():
        ass_sum += tpa * tpa / (gt_len[g] + pred_len[p] - tpa)
    det_a = tp / (tp + fn + fp)
    ass_a = ass_sum / tp
    return HotaScores(math.sqrt(det_a * ass_a), det_a, ass_a, tp, fn, fp)


def degrade_tracks(
    gt: TrackSet,
    jitter_std: float = 0.0,
    miss_rate: float = 0.0,
    clutter_rate: float = 0.0,
    rng=None,
    mask=None,
) -> list[np.ndarray]:
    """Simulate an imperfect detector on ground-truth tracks.

    Each true position is dropped with probability `miss_rate`, otherwise
    jittered by isotropic Gaussian noise of std `jitter_std`. Each frame also
    receives ``Poisson(clutter_rate)`` false detections, uniform in `mask`
    (an `AnimalMask`) or, without one, in the bounding box of the ground
    truth.
    """
    if jitter_std < 0 or clutter_rate < 0 or not 0 <= miss_rate <= 1:
        raise ValueError("jitter_std and clutter_rate must be >= 0 and miss_rate in [0, 1]")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    d = gt.ndim or (mask.ndim if mask is not None else 2)
    if mask is not None:
        voxels = mask.voxels()
    else:
        everything = [pos for frames in gt.tracks.values() for pos in frames.values()]
        box = np.array(everything).reshape(-1, d)
        lo, hi = (box.min(axis=0), box.max(axis=0)) if len(box) else (np.zeros(d), np.ones(d))

    out = []
    for t in range(gt.frame_count):
        _, pos = gt.frame(t)
        pos = pos.reshape(-1, d)
        kept = pos[rng.random(len(pos)) >= miss_rate]
        if jitter_std > 0:
            kept = kept + rng.normal(0.0, jitter_std, size=kept.shape)
        n_clutter = int(rng.poisson(clutter_rate)) if clutter_rate > 0 else 0
        if n_clutter:
            if mask is not None:
                clutter = voxels[rng.integers(len(voxels), size=n_clutter)] + rng.uniform(-0.5, 0.5, (n_clutter, d))
            else:
                clutter = rng.uniform(lo, hi, size=(n_clutter, d))
            kept = np.vstack([kept, clutter])
        out.append(kept)
    return out


def detection_f1(gt: TrackSet, detections, eta: float = 2.0) -> float:
    """F1 score of per-frame detections against ground truth at distance `eta`."""
    tp = n_gt = n_det = 0
    for t, det in enumerate(detections):
        _, pos = gt.frame(t)
        tp += len(match_frame(pos, det, eta)) if len(pos) and len(det) else 0
        n_gt += len(pos)
        n_det += len(det)
    return 2.0 * tp / (n_gt + n_det) if n_gt + n_det else 1.0


class NearestNeighborTracker(BaseEstimator):
    """Frame-to-frame linking by optimal assignment.

    Detections of consecutive frames closer than `max_link` are linked with
    the same matcher as the evaluation. Unmatched detections open new
    tracks; tracks left unmatched end.

    Parameters
    ----------
    max_link : float, default=5.0
        Largest displacement, in pixels, allowed between linked detections.
    """

    def __init__(self, max_link: float = 5.0):
        self.max_link = max_link

    def fit(self, detections, y=None):
        check_positive(self.max_link, "max_link")
        tracks: dict[int, dict[int, np.ndarray]] = {}
        active_ids: list[int] = []
        active_pos = np.zeros((0, 0))
        next_id = 0
        for t, det in enumerate(detections):
            det = check_points(det)
            linked = match_frame(active_pos, det, self.max_link) if len(active_ids) and len(det) else []
            ids = [-1] * len(det)
            for a, k in linked:
                ids[k] = active_ids[a]
            for k in range(len(det)):
                if ids[k] < 0:
                    ids[k] = next_id
                    tracks[next_id] = {}
                    next_id += 1
                tracks[ids[k]][t] = det[k]
            active_ids = ids
            active_pos = det
        self.tracks_ = TrackSet(tracks, len(detections))
        return self

    def fit_predict(self, detections, y=None) -> TrackSet:
        return self.fit(detections).tracks_


def greedy_nn_tracker(detections, max_link: float = 5.0) -> TrackSet:
    return NearestNeighborTracker(max_link=max_link).fit_predict(detections)
