"""Corner-heatmap decoding and forward loss values.

Decoding follows the usual corner-keypoint recipe: 3x3 max-pool
suppression keeps only window maxima, top-k selection per corner kind,
then all-pairs grouping gated on class, embedding distance and box
geometry.  Corner coordinates live on the heatmap grid; ``(coord +
offset) * downsample_factor`` maps them back to input pixels.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import max_pool2d

CLAMP_EPS = 1e-7  # keeps log() finite in the losses

# object size routing by the longer box side, in input pixels
SMALL_MAX = 32.0   # strictly below -> small
MEDIUM_MAX = 96.0  # up to and including -> medium; beyond -> large


def size_class_of(longer_side):
    if longer_side < SMALL_MAX:
        return "small"
    if longer_side <= MEDIUM_MAX:
        return "medium"
    return "large"


@dataclass
class Corner:
    cls: int
    score: float
    x: int
    y: int
    dx: float = 0.0
    dy: float = 0.0
    embed: float = 0.0
    kind: str = "tl"


@dataclass
class Detection:
    cls: int
    score: float
    box: tuple  # (x1, y1, x2, y2) in input pixels

    def to_dict(self):
        return {"class": int(self.cls), "score": float(self.score),
                "box": [float(v) for v in self.box]}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["class"]), float(d["score"]), tuple(float(v) for v in d["box"]))

    @property
    def longer_side(self):
        x1, y1, x2, y2 = self.box
        return max(x2 - x1, y2 - y1)


def heatmap_peaks(heatmaps, k, offsets=None, embeddings=None, kind="tl"):
    """Top-k corners per kind from a (1, C, H, W) heatmap tensor.

    A location survives only if it equals its 3x3 window maximum.  Survivors
    sort by score descending with ties broken by (class, y, x) ascending.
    Offsets (1, 2, H, W; channel 0 = x) and embeddings (1, 1, H, W) are read
    out at each kept location when provided.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    heat = np.asarray(heatmaps, dtype=np.float32)
    if heat.ndim != 4 or heat.shape[0] != 1:
        raise ValueError(f"expected (1, C, H, W) heatmaps, got {heat.shape}")
    pooled = max_pool2d(heat, 3, 1, 1)
    keep = heat >= pooled  # equality: pooled >= heat everywhere by construction
    cs, ys, xs = np.nonzero(keep[0])
    scores = heat[0, cs, ys, xs]
    order = np.lexsort((xs, ys, cs, -scores))[:k]

    corners = []
    for idx in order:
        c, y, x = int(cs[idx]), int(ys[idx]), int(xs[idx])
        corner = Corner(cls=c, score=float(scores[idx]), x=x, y=y, kind=kind)
        if offsets is not None:
            corner.dx = float(offsets[0, 0, y, x])
            corner.dy = float(offsets[0, 1, y, x])
        if embeddings is not None:
            corner.embed = float(embeddings[0, 0, y, x])
        corners.append(corner)
    return corners


def group_corners(tl_corners, br_corners, embed_threshold=0.5, downsample_factor=4.0):
    """Pair top-left with bottom-right corners into detections.

    A pair (same class) forms a detection iff the embedding gap is within
    ``embed_threshold`` and, after offset correction, the top-left sits
    above-and-left of the bottom-right.  Detection score is the mean of the
    two corner scores.
    """
    if embed_threshold < 0:
        raise ValueError(f"embed_threshold must be >= 0, got {embed_threshold}")
    dets = []
    for tl in tl_corners:
        x1 = (tl.x + tl.dx) * downsample_factor
        y1 = (tl.y + tl.dy) * downsample_factor
        for br in br_corners:
            if tl.cls != br.cls:
                continue
            if abs(tl.embed - br.embed) > embed_threshold:
                continue
            x2 = (br.x + br.dx) * downsample_factor
            y2 = (br.y + br.dy) * downsample_factor
            if x1 > x2 or y1 > y2:
                continue
            dets.append(Detection(tl.cls, (tl.score + br.score) / 2.0, (x1, y1, x2, y2)))
    dets.sort(key=lambda d: (-d.score, d.cls, d.box))
    return dets


def focal_loss(pred, gt, alpha=2.0):
    """Binary-target focal loss, averaged over the positive count.

    loss = -(1/max(1, N_pos)) * sum[ gt*(1-p)^a*log(p) + (1-gt)*p^a*log(1-p) ]
    Predictions are clamped into (eps, 1-eps) before the logs.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"pred {p.shape} and gt {g.shape} differ in shape")
    if not np.all((g == 0) | (g == 1)):
        raise ValueError("gt must be binary (0 or 1)")
    p = np.clip(p, CLAMP_EPS, 1.0 - CLAMP_EPS)
    pos = g * ((1.0 - p) ** alpha) * np.log(p)
    neg = (1.0 - g) * (p ** alpha) * np.log(1.0 - p)
    n_pos = max(1.0, float(g.sum()))
    return float(-(pos + neg).sum() / n_pos)


def attention_targets(boxes, map_hw, size_class, stride):
    """Binary training targets for one attention scale.

    Boxes whose longer side routes to ``size_class`` contribute one positive
    pixel at their center, mapped to map coordinates at the given stride and
    rounded half-up.
    """
    h, w = map_hw
    target = np.zeros((1, 1, h, w), dtype=np.float32)
    for box in boxes:
        x1, y1, x2, y2 = box
        if size_class_of(max(x2 - x1, y2 - y1)) != size_class:
            continue
        mx = int(np.floor((x1 + x2) / 2.0 / stride + 0.5))
        my = int(np.floor((y1 + y2) / 2.0 / stride + 0.5))
        if 0 <= my < h and 0 <= mx < w:
            target[0, 0, my, mx] = 1.0
    return target


def _smooth_l1(d):
    d = np.abs(d)
    return np.where(d < 1.0, 0.5 * d * d, d - 0.5)


def pull_push_offset_losses(embeddings, offsets, gt_offsets):
    """Forward values of the grouping and offset losses.

    ``embeddings`` is (N, 2): each object's two corner embeddings.
    ``offsets`` / ``gt_offsets`` are (N, 2, 2): per object, per corner,
    (dx, dy).  pull penalizes within-object embedding spread, push rewards
    at-least-unit separation between object means, offset is the smooth-L1
    gap averaged over all offset components.
    """
    emb = np.asarray(embeddings, dtype=np.float64).reshape(-1, 2)
    n = emb.shape[0]
    if n == 0:
        return 0.0, 0.0, 0.0
    means = emb.mean(axis=1)
    pull = float(((emb - means[:, None]) ** 2).sum() / n)

    push = 0.0
    if n >= 2:
        diff = np.abs(means[:, None] - means[None, :])
        hinge = np.maximum(0.0, 1.0 - diff)
        push = float((hinge.sum() - n) / (n * (n - 1)))  # subtract the diagonal's n ones

    off = np.asarray(offsets, dtype=np.float64).reshape(n, 2, 2)
    gt = np.asarray(gt_offsets, dtype=np.float64).reshape(n, 2, 2)
    offset = float(_smooth_l1(off - gt).mean())
    return pull, push, offset
