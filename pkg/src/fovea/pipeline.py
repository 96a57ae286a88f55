"""Saccadic inference: find candidate locations on downsized images, zoom
into the promising ones, detect per crop, merge globally.

Geometry runs through tiny per-axis affine maps.  The canonical candidate
frame is the 255-longer-side downsized image; locations found on the
192-scale image are remapped into it before ranking, so suppression
distances and crop construction live in one coordinate system.
"""

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .decode import Detection, group_corners, heatmap_peaks, size_class_of
from .graph import forward
from .kernels import as_tensor, resize_longer_side, zero_pad_to

CROP_SIZE = 255
DOWNSIZE_SCALES = (255, 192)


@dataclass(frozen=True)
class Affine:
    """Separable affine map between pixel frames: out = scale * p + offset."""

    sx: float
    sy: float
    ox: float = 0.0
    oy: float = 0.0

    def apply(self, x, y):
        return self.sx * x + self.ox, self.sy * y + self.oy

    def invert(self):
        return Affine(1.0 / self.sx, 1.0 / self.sy, -self.ox / self.sx, -self.oy / self.sy)

    def compose(self, inner):
        """self o inner: apply ``inner`` first, then this map."""
        return Affine(self.sx * inner.sx, self.sy * inner.sy,
                      self.sx * inner.ox + self.ox, self.sy * inner.oy + self.oy)

    def apply_box(self, box):
        x1, y1 = self.apply(box[0], box[1])
        x2, y2 = self.apply(box[2], box[3])
        return (x1, y1, x2, y2)


def resize_affine(src_hw, dst_hw):
    """Map from resized-image pixels back to source pixels (half-pixel centers)."""
    sy = src_hw[0] / dst_hw[0]
    sx = src_hw[1] / dst_hw[1]
    return Affine(sx, sy, 0.5 * sx - 0.5, 0.5 * sy - 0.5)


@dataclass
class ObjectLocation:
    """A candidate object position in canonical downsized (255-frame) pixels."""

    x: float
    y: float
    size: str            # "small" | "medium" | "large"
    score: float
    source: str = "attention"   # "attention" | "box"
    scale: int = 255            # downsized image the candidate came from

    def key(self):
        return (self.source, self.size, self.scale, round(self.x, 4), round(self.y, 4),
                round(self.score, 6))


@dataclass
class CropWindow:
    """A 255x255 window in zoom-enlarged coordinates plus its pixel mapping."""

    zoom: float
    x0: int
    y0: int
    size: int = CROP_SIZE
    to_original: Affine = None

    def to_dict(self):
        d = {"zoom": self.zoom, "x0": self.x0, "y0": self.y0, "size": self.size}
        d["to_original"] = asdict(self.to_original)
        return d


@dataclass
class SaccadeConfig:
    attention_threshold: float = 0.3
    zoom_small: float = 4.0
    zoom_medium: float = 2.0
    zoom_large: float = 1.0
    max_regions: int = 12
    suppress_radius: float = 16.0
    nms_sigma: float = 0.5
    nms_floor: float = 0.001
    nms_method: str = "gaussian"
    nms_linear_threshold: float = 0.3
    boundary_margin: float = 0.0
    embed_threshold: float = 0.5
    corners_per_kind: int = 100

    def __post_init__(self):
        if not (self.zoom_small > self.zoom_medium > self.zoom_large >= 1.0):
            raise ValueError("zoom scales must satisfy small > medium > large >= 1")
        if not (0.0 < self.attention_threshold < 1.0):
            raise ValueError("attention_threshold must lie in (0, 1)")
        if self.max_regions < 1:
            raise ValueError("max_regions must be >= 1")
        if self.suppress_radius < 0:
            raise ValueError("suppress_radius must be >= 0")
        if self.nms_sigma <= 0:
            raise ValueError("nms_sigma must be > 0")
        if self.nms_method not in ("gaussian", "linear"):
            raise ValueError(f"unknown nms_method {self.nms_method!r}")

    def zoom_for(self, size):
        return {"small": self.zoom_small, "medium": self.zoom_medium,
                "large": self.zoom_large}[size]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ---- downsizing ----------------------------------------------------------------


def downsize_pair(image):
    """The two padded 255x255 candidate frames plus their maps to source pixels.

    Returns (frame255, affine255, content255_hw, frame192, affine192,
    content192_hw); content dims mark where real pixels end and zero padding
    begins.
    """
    image = as_tensor(image)
    frames = []
    for target in DOWNSIZE_SCALES:
        resized = resize_longer_side(image, target)
        content = resized.shape[2:]
        aff = resize_affine(image.shape[2:], content)
        frames.append((zero_pad_to(resized, CROP_SIZE, CROP_SIZE), aff, content))
    (f255, a255, c255), (f192, a192, c192) = frames
    return f255, a255, c255, f192, a192, c192


# ---- candidate locations --------------------------------------------------------


def extract_locations(attention_maps, threshold, strides, scale=255):
    """One location per attention pixel scoring strictly above the threshold.

    ``attention_maps`` maps size class -> (1, 1, h, w) score map;
    ``strides`` maps size class -> frame pixels per map pixel.  Output is
    sorted by score descending, ties by (y, x, size) ascending.
    """
    locations = []
    for size, arr in attention_maps.items():
        stride = strides[size]
        scores = np.asarray(arr, dtype=np.float32).reshape(arr.shape[-2], arr.shape[-1])
        ys, xs = np.nonzero(scores > threshold)
        for y, x in zip(ys.tolist(), xs.tolist()):
            locations.append(ObjectLocation(x=x * stride, y=y * stride, size=size,
                                            score=float(scores[y, x]), source="attention",
                                            scale=scale))
    locations.sort(key=lambda l: (-l.score, l.y, l.x, l.size))
    return locations


def location_from_detection(det, scale=255):
    """Coarse candidate from a downsized-image detection (box center)."""
    x1, y1, x2, y2 = det.box
    return ObjectLocation(x=(x1 + x2) / 2.0, y=(y1 + y2) / 2.0,
                          size=size_class_of(max(x2 - x1, y2 - y1)),
                          score=det.score, source="box", scale=scale)


def suppress_locations(locations, boxes_from_downsized=(), radius=16.0):
    """Greedy duplicate-location removal.

    Box-sourced candidates outrank every attention-sourced one; within a
    source, higher score wins (ties by y, then x).  Keeping a location
    removes all remaining ones within Chebyshev distance ``radius``.
    """
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    pool = [location_from_detection(d) for d in boxes_from_downsized]
    pool += list(locations)
    pool.sort(key=lambda l: (0 if l.source == "box" else 1, -l.score, l.y, l.x))
    kept = []
    while pool:
        best = pool.pop(0)
        kept.append(best)
        pool = [l for l in pool
                if max(abs(l.x - best.x), abs(l.y - best.y)) > radius]
    return kept


# ---- crops ----------------------------------------------------------------------


def make_crop(location, config, content_hw, frame_to_original):
    """Place a 255x255 window around the location in zoom-enlarged coordinates.

    The window is clamped to stay inside the enlarged content canvas where
    possible (shifted inward, never padded); when the canvas is smaller than
    the window it starts at 0 and sampling beyond reads zeros.
    """
    zoom = config.zoom_for(location.size)
    ch, cw = content_hw
    cx, cy = zoom * location.x, zoom * location.y
    canvas_w = int(round(cw * zoom))
    canvas_h = int(round(ch * zoom))
    x0 = int(round(cx)) - CROP_SIZE // 2
    y0 = int(round(cy)) - CROP_SIZE // 2
    x0 = max(0, min(x0, max(0, canvas_w - CROP_SIZE)))
    y0 = max(0, min(y0, max(0, canvas_h - CROP_SIZE)))
    # crop pixel -> enlarged -> frame (half-pixel centers) -> original
    crop_to_frame = Affine(1.0 / zoom, 1.0 / zoom,
                           (x0 + 0.5) / zoom - 0.5, (y0 + 0.5) / zoom - 0.5)
    return CropWindow(zoom=zoom, x0=x0, y0=y0,
                      to_original=frame_to_original.compose(crop_to_frame))


def crop_pixels(image, window):
    """Bilinearly sample the source image under the window's affine map.

    Sample points whose bilinear support falls outside the canvas read zero.
    """
    image = as_tensor(image)
    n, c, h, w = image.shape
    aff = window.to_original
    px = np.arange(window.size, dtype=np.float64)
    sx = aff.sx * px + aff.ox
    sy = aff.sy * px + aff.oy

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = (sx - x0).astype(np.float32)
    fy = (sy - y0).astype(np.float32)

    def gather(yi, xi):
        inside = ((yi[:, None] >= 0) & (yi[:, None] < h) &
                  (xi[None, :] >= 0) & (xi[None, :] < w))
        vals = image[:, :, np.clip(yi, 0, h - 1)[:, None], np.clip(xi, 0, w - 1)[None, :]]
        return vals * inside[None, None, :, :]

    fx2 = fx.reshape(1, 1, 1, -1)
    fy2 = fy.reshape(1, 1, -1, 1)
    top = gather(y0, x0) * (1 - fx2) + gather(y0, x0 + 1) * fx2
    bot = gather(y0 + 1, x0) * (1 - fx2) + gather(y0 + 1, x0 + 1) * fx2
    return (top * (1 - fy2) + bot * fy2).astype(np.float32)


def strip_boundary_boxes(dets, margin=0.0, crop_size=CROP_SIZE):
    """Drop detections whose box comes within ``margin`` pixels of a crop edge."""
    lo = margin
    hi = crop_size - 1 - margin
    return [d for d in dets
            if d.box[0] > lo and d.box[1] > lo and d.box[2] < hi and d.box[3] < hi]


# ---- merging ---------------------------------------------------------------------


def iou(box_a, box_b):
    ax1, ay1, ax2, ay2 = box_a
    bx1, by1, bx2, by2 = box_b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union if union > 0 else 0.0


def soft_nms(dets, sigma=0.5, score_floor=0.001, method="gaussian", linear_threshold=0.3):
    """Per-class score-decay duplicate removal.

    Repeatedly keep the highest-scoring remaining box; gaussian mode decays
    every other box by exp(-iou^2 / sigma), linear mode scales by (1 - iou)
    when iou exceeds ``linear_threshold``.  Boxes whose score ends up (or
    starts) below ``score_floor`` are dropped.  Output sorts by final score.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    out = []
    classes = sorted({d.cls for d in dets})
    for cls in classes:
        pool = [(d.score, d.box) for d in dets if d.cls == cls and d.score >= score_floor]
        pool.sort(key=lambda t: (-t[0], t[1]))
        while pool:
            score, box = pool.pop(0)
            out.append(Detection(cls, score, box))
            decayed = []
            for s, b in pool:
                ov = iou(box, b)
                if method == "gaussian":
                    s = s * math.exp(-(ov * ov) / sigma)
                elif ov > linear_threshold:
                    s = s * (1.0 - ov)
                if s >= score_floor:
                    decayed.append((s, b))
            decayed.sort(key=lambda t: (-t[0], t[1]))
            pool = decayed
    out.sort(key=lambda d: (-d.score, d.cls, d.box))
    return out


# ---- models ----------------------------------------------------------------------


class GraphModel:
    """Adapter running an ArchGraph's taps into the pipeline's output layout."""

    def __init__(self, graph, params=None):
        self.graph = graph
        self.params = params if params is not None else graph.params
        if not self.params:
            raise ValueError("graph has no weights attached; call init_weights or load them")

    def infer(self, image, to_original=None):
        taps = forward(self.graph, image, self.params)
        attention = {size: taps[f"attn_{size}"]
                     for size in ("small", "medium", "large") if f"attn_{size}" in taps}
        corners = {kind: {"heat": taps[f"{kind}_heat"], "embed": taps[f"{kind}_embed"],
                          "off": taps[f"{kind}_off"]}
                   for kind in ("tl", "br")}
        return {"attention": attention, "corners": corners}


def decode_frame_detections(corners, frame_size, config):
    """Peaks + grouping for one frame's corner maps, in frame pixels."""
    heat_h = corners["tl"]["heat"].shape[2]
    factor = frame_size / heat_h
    tl = heatmap_peaks(corners["tl"]["heat"], config.corners_per_kind,
                       offsets=corners["tl"]["off"], embeddings=corners["tl"]["embed"],
                       kind="tl")
    br = heatmap_peaks(corners["br"]["heat"], config.corners_per_kind,
                       offsets=corners["br"]["off"], embeddings=corners["br"]["embed"],
                       kind="br")
    return group_corners(tl, br, config.embed_threshold, factor)


# ---- the full pipeline ------------------------------------------------------------


def _clamp_box(box, width, height):
    x1 = min(max(box[0], 0.0), width - 1.0)
    y1 = min(max(box[1], 0.0), height - 1.0)
    x2 = min(max(box[2], 0.0), width - 1.0)
    y2 = min(max(box[3], 0.0), height - 1.0)
    return (x1, y1, x2, y2)


def run_saccade(image, model, config=None, trace=None, crop_order=None):
    """Full inference: downsize, rank candidate locations, zoom, detect, merge.

    ``model`` provides ``infer(frame, to_original)``; pass a dict as
    ``trace`` to collect locations, suppression decisions, crop windows and
    pixel counts.  ``crop_order`` permutes crop processing order (the result
    is invariant to it; exists for order-independence tests).
    """
    config = config or SaccadeConfig()
    if not hasattr(model, "infer"):  # a weighted ArchGraph works directly
        model = GraphModel(model)
    image = as_tensor(image)
    _, _, img_h, img_w = image.shape

    f255, aff255, content255, f192, aff192, content192 = downsize_pair(image)
    to_canonical = aff255.invert()

    attention_locations = []
    box_dets_canonical = []
    merged = []
    n_downsized_dets = 0
    for frame, aff, tag in ((f255, aff255, 255), (f192, aff192, 192)):
        out = model.infer(frame, aff)
        # map this frame's coordinates into the canonical 255 frame
        remap = Affine(1.0, 1.0) if tag == 255 else to_canonical.compose(aff)
        if out.get("attention"):
            strides = {size: CROP_SIZE / arr.shape[2] for size, arr in out["attention"].items()}
            locs = extract_locations(out["attention"], config.attention_threshold,
                                     strides, scale=tag)
            for loc in locs:
                loc.x, loc.y = remap.apply(loc.x, loc.y)
            attention_locations += locs
        for det in decode_frame_detections(out["corners"], CROP_SIZE, config):
            if det.score < config.nms_floor:
                continue
            n_downsized_dets += 1
            if det.score > config.attention_threshold:
                box_dets_canonical.append(Detection(det.cls, det.score,
                                                    remap.apply_box(det.box)))
            merged.append(Detection(det.cls, det.score,
                                    _clamp_box(aff.apply_box(det.box), img_w, img_h)))

    kept = suppress_locations(attention_locations, box_dets_canonical,
                              config.suppress_radius)
    selected = kept[:config.max_regions]
    windows = [make_crop(loc, config, content255, aff255) for loc in selected]

    order = list(crop_order) if crop_order is not None else list(range(len(windows)))
    if sorted(order) != list(range(len(windows))):
        raise ValueError("crop_order must be a permutation of the selected crop indices")
    crop_det_counts = [0] * len(windows)
    for idx in order:
        window = windows[idx]
        crop = crop_pixels(image, window)
        out = model.infer(crop, window.to_original)
        dets = decode_frame_detections(out["corners"], CROP_SIZE, config)
        dets = strip_boundary_boxes(dets, config.boundary_margin)
        n_kept = 0
        for det in dets:
            if det.score < config.nms_floor:
                continue
            n_kept += 1
            merged.append(Detection(det.cls, det.score,
                                    _clamp_box(window.to_original.apply_box(det.box),
                                               img_w, img_h)))
        crop_det_counts[idx] = n_kept

    merged.sort(key=lambda d: (-d.score, d.cls, d.box))
    final = soft_nms(merged, sigma=config.nms_sigma, score_floor=config.nms_floor,
                     method=config.nms_method, linear_threshold=config.nms_linear_threshold)

    if trace is not None:
        all_locations = [location_from_detection(d) for d in box_dets_canonical]
        all_locations += attention_locations
        # distinct candidates can share a key (same object seen on both
        # downsized scales); consume kept keys as a multiset so the flagged
        # count equals the kept count
        kept_keys = {}
        for loc in kept:
            kept_keys[loc.key()] = kept_keys.get(loc.key(), 0) + 1
        entries = []
        for loc in all_locations:
            k = loc.key()
            flag = kept_keys.get(k, 0) > 0
            if flag:
                kept_keys[k] -= 1
            entries.append({**asdict(loc), "kept": flag})
        trace["locations"] = entries
        trace["n_locations"] = len(all_locations)
        trace["n_kept_locations"] = len(kept)
        trace["crops"] = [{**w.to_dict(), "n_detections": crop_det_counts[i],
                           "size_class": selected[i].size}
                          for i, w in enumerate(windows)]
        trace["n_crops"] = len(windows)
        trace["n_downsized_detections"] = n_downsized_dets
        trace["pixels_processed"] = (2 + len(windows)) * CROP_SIZE * CROP_SIZE
        trace["pixels_full_resolution"] = img_h * img_w
        trace["pixels_ratio"] = trace["pixels_processed"] / trace["pixels_full_resolution"]
        trace["n_detections"] = len(final)
    return final
