"""Synthetic scenes and the perfect-network oracle.

A scene is solid rectangles (one intensity per class) over seeded noise,
replicated to three channels.  From its ground truth the oracle renders
exactly the maps a flawless detector head would produce: corner-heatmap
peaks at corner cells with sub-pixel remainders stored in the offset maps,
per-object integer embedding tags (starting at 1, so the zero background
never groups with a real corner), and one positive attention pixel per box
center on the size-appropriate scale.  Decoding oracle maps reproduces the
ground truth exactly, which makes the whole geometry pipeline testable
without any trained weights.
"""

from dataclasses import dataclass, field

import numpy as np

from .decode import Detection, size_class_of
from .pipeline import Affine, CROP_SIZE

ATTENTION_MAP_HW = {"small": (64, 64), "medium": (32, 32), "large": (16, 16)}
HEATMAP_HW = (64, 64)


@dataclass
class SceneObject:
    cls: int
    box: tuple  # (x1, y1, x2, y2) pixels

    def to_dict(self):
        return {"class": int(self.cls), "box": [float(v) for v in self.box]}


@dataclass
class SceneSpec:
    height: int
    width: int
    objects: list = field(default_factory=list)
    seed: int = 0
    noise: float = 0.1

    def to_dict(self):
        return {"height": self.height, "width": self.width, "seed": self.seed,
                "noise": self.noise, "objects": [o.to_dict() for o in self.objects]}

    @classmethod
    def from_dict(cls, d):
        objs = [SceneObject(int(o["class"]), tuple(float(v) for v in o["box"]))
                for o in d.get("objects", [])]
        return cls(int(d["height"]), int(d["width"]), objs,
                   int(d.get("seed", 0)), float(d.get("noise", 0.1)))


def gen_scene(spec):
    """Render a SceneSpec deterministically; returns (image, ground truth)."""
    rng = np.random.default_rng(spec.seed)
    canvas = rng.uniform(0.0, spec.noise, size=(spec.height, spec.width)).astype(np.float32)
    gt = []
    for obj in spec.objects:
        x1, y1, x2, y2 = obj.box
        if not (0 <= x1 <= x2 < spec.width and 0 <= y1 <= y2 < spec.height):
            raise ValueError(f"object box {obj.box} exceeds canvas {spec.height}x{spec.width}")
        intensity = 0.35 + 0.08 * (obj.cls % 8)
        canvas[int(round(y1)): int(round(y2)) + 1, int(round(x1)): int(round(x2)) + 1] = intensity
        gt.append(Detection(obj.cls, 1.0, (x1, y1, x2, y2)))
    image = np.repeat(canvas[None, None], 3, axis=1)
    return image, gt


def random_scene(seed, n_objects, hw=(510, 510), num_classes=3):
    """A scene of well-separated boxes spanning all three size classes.

    Separation keeps corner cells apart on every heatmap the pipeline will
    render (full frames and zoomed crops), so oracle peaks never collide.
    """
    h, w = hw
    rng = np.random.default_rng(seed)
    margin = 24
    boxes = []
    classes = []
    attempts = 0
    while len(boxes) < n_objects and attempts < 4000:
        attempts += 1
        side_a = rng.uniform(36, 0.55 * min(h, w))
        side_b = side_a * rng.uniform(0.6, 1.0)
        bw, bh = (side_a, side_b) if rng.random() < 0.5 else (side_b, side_a)
        x1 = rng.uniform(margin, w - margin - bw)
        y1 = rng.uniform(margin, h - margin - bh)
        cand = (x1, y1, x1 + bw, y1 + bh)
        if all(_separated(cand, b, 32.0) for b in boxes):
            boxes.append(cand)
            classes.append(int(rng.integers(0, num_classes)))
    objects = [SceneObject(c, b) for c, b in zip(classes, boxes)]
    return SceneSpec(height=h, width=w, objects=objects, seed=seed)


def _separated(a, b, gap):
    # disjoint with a margin, and same-kind corners at least `gap` apart
    if (a[0] - gap < b[2] and b[0] - gap < a[2] and
            a[1] - gap < b[3] and b[1] - gap < a[3]):
        return False
    tl_gap = max(abs(a[0] - b[0]), abs(a[1] - b[1]))
    br_gap = max(abs(a[2] - b[2]), abs(a[3] - b[3]))
    return tl_gap >= gap and br_gap >= gap


@dataclass
class OracleOutputs:
    attention: dict
    tl_heat: np.ndarray
    tl_embed: np.ndarray
    tl_off: np.ndarray
    br_heat: np.ndarray
    br_embed: np.ndarray
    br_off: np.ndarray

    def corners(self):
        return {"tl": {"heat": self.tl_heat, "embed": self.tl_embed, "off": self.tl_off},
                "br": {"heat": self.br_heat, "embed": self.br_embed, "off": self.br_off}}


def oracle_outputs(gt, num_classes, frame_hw=(CROP_SIZE, CROP_SIZE),
                   heat_hw=HEATMAP_HW, attn_hw=ATTENTION_MAP_HW, peak=0.9,
                   tags=None):
    """Analytically render the maps a perfect network would output for ``gt``.

    ``gt`` boxes are in frame pixels and must lie inside the frame.  ``tags``
    optionally fixes each object's embedding value (defaults to 1, 2, ...).
    """
    fh, fw = frame_hw
    hh, hw_ = heat_hw
    fy, fx = fh / hh, fw / hw_

    tl_heat = np.zeros((1, num_classes, hh, hw_), np.float32)
    br_heat = np.zeros_like(tl_heat)
    tl_embed = np.zeros((1, 1, hh, hw_), np.float32)
    br_embed = np.zeros_like(tl_embed)
    tl_off = np.zeros((1, 2, hh, hw_), np.float32)
    br_off = np.zeros_like(tl_off)
    attention = {size: np.zeros((1, 1) + tuple(dims), np.float32)
                 for size, dims in attn_hw.items()}

    for i, det in enumerate(gt):
        x1, y1, x2, y2 = det.box
        if det.cls >= num_classes:
            raise ValueError(f"class {det.cls} exceeds num_classes {num_classes}")
        tag = float(tags[i]) if tags is not None else float(i + 1)
        for (cx, cy), heat, embed, off in (((x1, y1), tl_heat, tl_embed, tl_off),
                                           ((x2, y2), br_heat, br_embed, br_off)):
            ix = int(np.floor(cx / fx))
            iy = int(np.floor(cy / fy))
            if not (0 <= ix < hw_ and 0 <= iy < hh):
                raise ValueError(f"corner ({cx}, {cy}) falls outside the {fh}x{fw} frame")
            heat[0, det.cls, iy, ix] = peak
            embed[0, 0, iy, ix] = tag
            off[0, 0, iy, ix] = cx / fx - ix
            off[0, 1, iy, ix] = cy / fy - iy

        size = size_class_of(max(x2 - x1, y2 - y1))
        ah, aw = attn_hw[size]
        sy, sx = fh / ah, fw / aw
        mx = int(np.floor((x1 + x2) / 2.0 / sx + 0.5))
        my = int(np.floor((y1 + y2) / 2.0 / sy + 0.5))
        if 0 <= my < ah and 0 <= mx < aw:
            attention[size][0, 0, my, mx] = peak

    return OracleOutputs(attention, tl_heat, tl_embed, tl_off, br_heat, br_embed, br_off)


class OracleModel:
    """Stand-in for a trained network: answers from ground truth and geometry.

    ``infer`` transforms the scene's ground-truth boxes into the queried
    frame (via the frame's map back to source pixels), keeps the ones fully
    inside, and renders oracle maps for them.  Embedding tags stay attached
    to scene objects, so the same object carries the same tag in every frame.
    """

    def __init__(self, gt, num_classes, with_attention=True, peak=0.9):
        self.gt = list(gt)
        self.num_classes = num_classes
        self.with_attention = with_attention
        self.peak = peak

    def infer(self, image, to_original):
        if to_original is None:
            raise ValueError("OracleModel needs the frame's map to source pixels")
        to_frame = to_original.invert()
        fh, fw = image.shape[2], image.shape[3]
        visible = []
        tags = []
        for i, det in enumerate(self.gt):
            box = to_frame.apply_box(det.box)
            if (box[0] >= 0 and box[1] >= 0 and
                    box[2] <= fw - 1 and box[3] <= fh - 1):
                visible.append(Detection(det.cls, self.peak, box))
                tags.append(i + 1)
        out = oracle_outputs(visible, self.num_classes, frame_hw=(fh, fw),
                             peak=self.peak, tags=tags)
        attention = out.attention if self.with_attention else {}
        return {"attention": attention, "corners": out.corners()}


def blank_model(num_classes=3):
    """An oracle with no objects: zero attention, zero heatmaps everywhere."""
    return OracleModel([], num_classes)
