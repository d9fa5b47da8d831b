"""Synthetic scenes, a noise-injectable detection stub, and match metrics.

Stands in for the trained segmentation/keypoint network: fruit are spheres,
masks are their camera-plane discs (camera looks along +z, so the image
plane is x-y and z is depth), and detector imperfections are injected
explicitly (misses, keypoint scatter, ripeness confusion, false positives).
Metrics are exact counting metrics over the known ground truth, with mask
AP averaged over the ten IoU thresholds 0.50:0.05:0.95.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import NoMatches, PlacementFailed

RIPE = "ripe"
UNRIPE = "unripe"

#: IoU thresholds the mask AP averages over
AP_THRESHOLDS = tuple(0.50 + 0.05 * i for i in range(10))


@dataclass(frozen=True)
class Circle:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class SceneObject:
    """Ground-truth fruit: 3D center/pedicel in mm, camera-plane mask."""

    center: tuple[float, float, float]
    radius: float
    ripeness: str
    occlusion_fraction: float
    pedicel: tuple[float, float, float]

    def mask(self) -> Circle:
        return Circle(self.center[0], self.center[1], self.radius)


@dataclass(frozen=True)
class Detection:
    """Detector output: mask disc, label, confidence, two keypoints."""

    mask: Circle
    ripeness: str
    score: float
    center: tuple[float, float, float]
    pedicel: tuple[float, float, float]


@dataclass(frozen=True)
class NoiseModel:
    keypoint_sigma: float = 0.0       # mm, per-axis Gaussian
    miss_rate: float = 0.0            # per object
    false_positive_rate: float = 0.0  # Poisson mean per scene
    ripeness_confusion: float = 0.0   # label flip probability
    occlusion_miss_gain: float = 0.0  # extra miss probability per occlusion

    def validate(self) -> None:
        if self.keypoint_sigma < 0.0:
            raise ValueError("keypoint_sigma must be >= 0")
        if not 0.0 <= self.miss_rate < 1.0:
            raise ValueError("miss_rate must be in [0, 1)")
        if self.false_positive_rate < 0.0:
            raise ValueError("false_positive_rate must be >= 0")
        if not 0.0 <= self.ripeness_confusion < 1.0:
            raise ValueError("ripeness_confusion must be in [0, 1)")
        if self.occlusion_miss_gain < 0.0:
            raise ValueError("occlusion_miss_gain must be >= 0")


@dataclass(frozen=True)
class SceneParams:
    """Work volume and fruit statistics for scene generation."""

    x_range: tuple[float, float] = (-250.0, 250.0)
    y_range: tuple[float, float] = (150.0, 450.0)
    z_range: tuple[float, float] = (400.0, 800.0)
    radius_range: tuple[float, float] = (20.0, 28.0)
    stem_offset: float = 8.0     # pedicel height above the fruit top, mm
    stem_jitter: float = 2.0     # lateral pedicel scatter, mm
    ripe_fraction: float = 0.7
    max_attempts: int = 1000     # rejection samples per object


DEFAULT_SCENE = SceneParams()


@dataclass(frozen=True)
class DetectionMetrics:
    precision: float
    recall: float
    mask_ap: float


def circle_iou(a: Circle, b: Circle) -> float:
    """Exact intersection-over-union of two discs (lens area)."""
    if a.radius <= 0.0 or b.radius <= 0.0:
        raise ValueError("circle radii must be > 0")
    d = math.hypot(a.x - b.x, a.y - b.y)
    r1, r2 = a.radius, b.radius
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        inter = math.pi * min(r1, r2) ** 2
    else:
        alpha = math.acos((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))
        beta = math.acos((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))
        inter = (r1 * r1 * alpha + r2 * r2 * beta
                 - 0.5 * math.sqrt(max(0.0, (-d + r1 + r2) * (d + r1 - r2)
                                       * (d - r1 + r2) * (d + r1 + r2))))
    union = math.pi * r1 * r1 + math.pi * r2 * r2 - inter
    return inter / union


def _occlusion_fractions(centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Fraction of each disc covered by discs nearer to the camera."""
    n = len(radii)
    occ = np.zeros(n)
    for i in range(n):
        area = math.pi * radii[i] ** 2
        covered = 0.0
        for j in range(n):
            if j == i or centers[j, 2] >= centers[i, 2]:
                continue
            ci = Circle(centers[i, 0], centers[i, 1], radii[i])
            cj = Circle(centers[j, 0], centers[j, 1], radii[j])
            iou = circle_iou(ci, cj)
            if iou > 0.0:
                aj = math.pi * radii[j] ** 2
                inter = iou * (area + aj) / (1.0 + iou)
                covered += inter
        occ[i] = min(1.0, covered / area)
    return occ


def generate_scene(n_tomatoes: int, params: SceneParams = DEFAULT_SCENE,
                   rng: np.random.Generator | None = None) -> list[SceneObject]:
    """Place non-overlapping fruit in the work volume, pedicels on top.

    Deterministic per rng state; raises PlacementFailed when rejection
    sampling cannot fit an object within params.max_attempts tries.
    """
    if n_tomatoes < 1:
        raise ValueError("n_tomatoes must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    centers = np.empty((n_tomatoes, 3))
    radii = np.empty(n_tomatoes)
    for i in range(n_tomatoes):
        for attempt in range(params.max_attempts):
            radius = rng.uniform(*params.radius_range)
            center = np.array([rng.uniform(*params.x_range),
                               rng.uniform(*params.y_range),
                               rng.uniform(*params.z_range)])
            ok = True
            for j in range(i):
                if np.linalg.norm(center - centers[j]) <= radius + radii[j]:
                    ok = False
                    break
            if ok:
                centers[i] = center
                radii[i] = radius
                break
        else:
            raise PlacementFailed(
                f"could not place object {i + 1}/{n_tomatoes} "
                f"after {params.max_attempts} attempts")
    occ = _occlusion_fractions(centers, radii)
    scene = []
    for i in range(n_tomatoes):
        jitter = rng.uniform(-params.stem_jitter, params.stem_jitter, size=2)
        pedicel = (centers[i, 0] + jitter[0],
                   centers[i, 1] + radii[i] + params.stem_offset,
                   centers[i, 2] + jitter[1])
        ripeness = RIPE if rng.random() < params.ripe_fraction else UNRIPE
        scene.append(SceneObject(
            center=tuple(centers[i]), radius=float(radii[i]),
            ripeness=ripeness, occlusion_fraction=float(occ[i]),
            pedicel=pedicel))
    return scene


def simulate_detections(scene: list[SceneObject], noise: NoiseModel,
                        rng: np.random.Generator | None = None,
                        params: SceneParams = DEFAULT_SCENE) -> list[Detection]:
    """Detector stub: drop, scatter, confuse, and hallucinate.

    Each object is missed with probability min(1, miss_rate +
    occlusion_miss_gain * occlusion); survivors get per-axis Gaussian
    keypoint scatter and an independent label flip; Poisson-many false
    positives are appended as random discs with low scores.
    """
    noise.validate()
    rng = np.random.default_rng() if rng is None else rng
    detections: list[Detection] = []
    for obj in scene:
        p_miss = min(1.0, noise.miss_rate
                     + noise.occlusion_miss_gain * obj.occlusion_fraction)
        if rng.random() < p_miss:
            continue
        if noise.keypoint_sigma > 0.0:
            center = tuple(np.asarray(obj.center)
                           + rng.normal(0.0, noise.keypoint_sigma, size=3))
            pedicel = tuple(np.asarray(obj.pedicel)
                            + rng.normal(0.0, noise.keypoint_sigma, size=3))
        else:
            center = obj.center
            pedicel = obj.pedicel
        ripeness = obj.ripeness
        if noise.ripeness_confusion > 0.0 and rng.random() < noise.ripeness_confusion:
            ripeness = UNRIPE if ripeness == RIPE else RIPE
        score = float(rng.uniform(0.5, 1.0))
        detections.append(Detection(
            mask=Circle(center[0], center[1], obj.radius),
            ripeness=ripeness, score=score, center=center, pedicel=pedicel))
    n_fp = int(rng.poisson(noise.false_positive_rate)) if noise.false_positive_rate > 0.0 else 0
    for _ in range(n_fp):
        radius = float(rng.uniform(*params.radius_range))
        x = float(rng.uniform(*params.x_range))
        y = float(rng.uniform(*params.y_range))
        z = float(rng.uniform(*params.z_range))
        ripeness = RIPE if rng.random() < 0.5 else UNRIPE
        detections.append(Detection(
            mask=Circle(x, y, radius), ripeness=ripeness,
            score=float(rng.uniform(0.1, 0.6)), center=(x, y, z),
            pedicel=(x, y + radius + params.stem_offset, z)))
    return detections


def _candidate_ious(gt: list[SceneObject],
                    dets: list[Detection]) -> list[list[tuple[float, int]]]:
    """Per detection: overlapping same-label GT as (iou, gt index), best
    first.  Distance pruning keeps this near-linear for spread-out scenes."""
    n_gt = len(gt)
    gx = np.array([o.center[0] for o in gt])
    gy = np.array([o.center[1] for o in gt])
    gr = np.array([o.radius for o in gt])
    labels = [o.ripeness for o in gt]
    out: list[list[tuple[float, int]]] = []
    for det in dets:
        cands: list[tuple[float, int]] = []
        if n_gt:
            reach = (gr + det.mask.radius) ** 2
            close = np.nonzero((gx - det.mask.x) ** 2
                               + (gy - det.mask.y) ** 2 < reach)[0]
            for gi in close:
                if labels[gi] != det.ripeness:
                    continue
                iou = circle_iou(det.mask, gt[gi].mask())
                if iou > 0.0:
                    cands.append((iou, int(gi)))
            cands.sort(key=lambda c: (-c[0], c[1]))
        out.append(cands)
    return out


def _match_greedy(gt: list[SceneObject], dets: list[Detection],
                  iou_threshold: float,
                  cand: list[list[tuple[float, int]]] | None = None,
                  ) -> tuple[list[tuple[int, bool]], dict[int, int]]:
    """Score-descending greedy matching, one GT per detection, labels must
    agree.  Returns ((det index, is_tp) in score order, det->gt pairs)."""
    if cand is None:
        cand = _candidate_ious(gt, dets)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken: set[int] = set()
    flags: list[tuple[int, bool]] = []
    pairs: dict[int, int] = {}
    for di in order:
        best_gt = -1
        for iou, gi in cand[di]:
            if iou < iou_threshold:
                break
            if gi not in taken:
                best_gt = gi
                break
        if best_gt >= 0:
            taken.add(best_gt)
            pairs[di] = best_gt
            flags.append((di, True))
        else:
            flags.append((di, False))
    return flags, pairs


def _average_precision(scored_flags: list[tuple[float, bool]], n_gt: int) -> float:
    """All-point interpolated AP from (score, is_tp) pairs."""
    if n_gt == 0:
        return 0.0
    if not scored_flags:
        return 0.0
    scored_flags = sorted(scored_flags, key=lambda sf: -sf[0])
    tp_cum = 0
    precisions = []
    recalls = []
    for rank, (_, is_tp) in enumerate(scored_flags, start=1):
        tp_cum += int(is_tp)
        precisions.append(tp_cum / rank)
        recalls.append(tp_cum / n_gt)
    # precision envelope from the right
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for p, r in zip(precisions, recalls):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    return ap


def evaluate(gt: list[SceneObject], dets: list[Detection],
             iou_threshold: float = 0.5) -> DetectionMetrics:
    """Counting metrics at one threshold plus mask AP over 0.50:0.05:0.95.

    Conventions for degenerate inputs: precision is 0 with no detections,
    recall is 0 with no ground truth.
    """
    return evaluate_batch([(gt, dets)], iou_threshold)


def evaluate_batch(pairs: list[tuple[list[SceneObject], list[Detection]]],
                   iou_threshold: float = 0.5) -> DetectionMetrics:
    """Pooled metrics over multiple scenes (matching stays per scene)."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must be in (0, 1)")
    n_gt = sum(len(gt) for gt, _ in pairs)
    # the candidate IoU tables are threshold-independent; build once
    cands = [_candidate_ious(gt, dets) for gt, dets in pairs]
    tp = fp = 0
    for (gt, dets), cand in zip(pairs, cands):
        flags, _ = _match_greedy(gt, dets, iou_threshold, cand)
        tp += sum(1 for _, ok in flags if ok)
        fp += sum(1 for _, ok in flags if not ok)
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / n_gt if n_gt > 0 else 0.0
    aps = []
    for thr in AP_THRESHOLDS:
        pooled: list[tuple[float, bool]] = []
        for (gt, dets), cand in zip(pairs, cands):
            flags, _ = _match_greedy(gt, dets, thr, cand)
            pooled.extend((dets[di].score, ok) for di, ok in flags)
        aps.append(_average_precision(pooled, n_gt))
    return DetectionMetrics(precision=precision, recall=recall,
                            mask_ap=float(np.mean(aps)))


@dataclass(frozen=True)
class KeypointErrors:
    """Camera-plane (x, y) Euclidean errors over matched pairs, in mm."""

    center_mean: float
    center_max: float
    pedicel_mean: float
    pedicel_max: float
    n_pairs: int


def keypoint_error(gt: list[SceneObject], dets: list[Detection],
                   iou_threshold: float = 0.5) -> KeypointErrors:
    """Keypoint localization errors over IoU-matched pairs only."""
    _, pairs = _match_greedy(gt, dets, iou_threshold)
    if not pairs:
        raise NoMatches("no matched detection/ground-truth pairs")
    center_err = []
    pedicel_err = []
    for di, gi in pairs.items():
        det, obj = dets[di], gt[gi]
        center_err.append(math.hypot(det.center[0] - obj.center[0],
                                     det.center[1] - obj.center[1]))
        pedicel_err.append(math.hypot(det.pedicel[0] - obj.pedicel[0],
                                      det.pedicel[1] - obj.pedicel[1]))
    return KeypointErrors(
        center_mean=float(np.mean(center_err)),
        center_max=float(np.max(center_err)),
        pedicel_mean=float(np.mean(pedicel_err)),
        pedicel_max=float(np.max(pedicel_err)),
        n_pairs=len(pairs))


def scenes_to_json(scenes: list[list[SceneObject]]) -> str:
    """Serialize scenes for downstream consumers (harvest planning)."""
    return json.dumps([[asdict(obj) for obj in scene] for scene in scenes],
                      indent=2, sort_keys=True)


def scenes_from_json(text: str) -> list[list[SceneObject]]:
    raw = json.loads(text)
    scenes = []
    for scene in raw:
        objs = []
        for obj in scene:
            objs.append(SceneObject(
                center=tuple(obj["center"]), radius=obj["radius"],
                ripeness=obj["ripeness"],
                occlusion_fraction=obj["occlusion_fraction"],
                pedicel=tuple(obj["pedicel"])))
        scenes.append(objs)
    return scenes
