"""Dense NCHW float32 tensor kernels.

Every array in this library is a 4-D numpy float32 tensor laid out as
(batch, channels, height, width).  Convolution is cross-correlation (no
kernel flip).  All kernels are pure functions; each has a slow loop-level
counterpart in ``fovea.naive`` used as an independent test oracle.
"""

from dataclasses import dataclass

import numpy as np

# Open-interval bounds used to keep sigmoid outputs strictly inside (0, 1)
# in float32, where the true value would otherwise round to 0.0 or 1.0.
_SIG_LO = np.float32(np.finfo(np.float32).tiny)
_SIG_HI = np.float32(1.0) - np.float32(2.0 ** -24)


def as_tensor(x):
    """Coerce to a 4-D float32 array, validating the NCHW layout."""
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim != 4:
        raise ValueError(f"expected 4-D (n, c, h, w) tensor, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"all dims must be >= 1, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ConvSpec:
    """Shape contract for a convolution: channels, kernel, stride, padding, groups."""

    in_channels: int
    out_channels: int
    kernel: tuple = (3, 3)
    stride: int = 1
    padding: int = 0
    groups: int = 1
    has_bias: bool = True

    def __post_init__(self):
        kh, kw = self.kernel
        if kh < 1 or kw < 1:
            raise ValueError(f"kernel must be >= 1, got {self.kernel}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")
        if self.groups < 1:
            raise ValueError(f"groups must be >= 1, got {self.groups}")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError(
                f"channels ({self.in_channels} -> {self.out_channels}) must be "
                f"divisible by groups ({self.groups})"
            )


def conv_output_hw(h, w, kernel, stride, padding):
    kh, kw = kernel
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    return oh, ow


def conv2d(x, weights, bias, spec):
    """Strided, grouped 2-D cross-correlation.

    ``weights`` has shape (out_channels, in_channels // groups, kh, kw);
    ``bias`` is a length-out_channels vector or None.  Output spatial dims
    follow floor((in + 2*pad - kernel) / stride) + 1.
    """
    x = as_tensor(x)
    w = np.asarray(weights, dtype=np.float32)
    n, c, h, wd = x.shape
    kh, kw = spec.kernel
    if c != spec.in_channels:
        raise ValueError(f"input has {c} channels, spec expects {spec.in_channels}")
    want = (spec.out_channels, spec.in_channels // spec.groups, kh, kw)
    if w.shape != want:
        raise ValueError(f"weights shaped {w.shape}, spec expects {want}")
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float32)
        if bias.shape != (spec.out_channels,):
            raise ValueError(f"bias shaped {bias.shape}, expected ({spec.out_channels},)")

    s, p = spec.stride, spec.padding
    oh, ow = conv_output_hw(h, wd, spec.kernel, s, p)
    if oh < 1 or ow < 1:
        raise ValueError(f"kernel {spec.kernel} does not fit input {h}x{wd} with pad {p}")
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x

    if spec.groups == c == spec.out_channels:
        # Depthwise fast path: one filter per channel, vectorized over channels.
        out = np.zeros((n, c, oh, ow), dtype=np.float32)
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, :, i : i + (oh - 1) * s + 1 : s, j : j + (ow - 1) * s + 1 : s]
                out += patch * w[:, 0, i, j].reshape(1, c, 1, 1)
    else:
        icg = c // spec.groups
        ocg = spec.out_channels // spec.groups
        parts = []
        for g in range(spec.groups):
            xg = xp[:, g * icg : (g + 1) * icg]
            wg = w[g * ocg : (g + 1) * ocg]
            acc = np.zeros((n, oh, ow, ocg), dtype=np.float32)
            for i in range(kh):
                for j in range(kw):
                    patch = xg[:, :, i : i + (oh - 1) * s + 1 : s, j : j + (ow - 1) * s + 1 : s]
                    # (n, icg, oh, ow) x (icg, ocg) -> (n, oh, ow, ocg), a BLAS matmul
                    acc += np.tensordot(patch, wg[:, :, i, j].T, axes=([1], [0]))
            parts.append(np.moveaxis(acc, 3, 1))
        out = parts[0] if spec.groups == 1 else np.concatenate(parts, axis=1)

    if bias is not None:
        out += bias.reshape(1, -1, 1, 1)
    return out


def depthwise_conv2d(x, weights, spec):
    """Per-channel convolution: groups == in_channels == out_channels, no bias."""
    if not (spec.groups == spec.in_channels == spec.out_channels):
        raise ValueError(
            f"depthwise requires groups == in == out channels, got spec "
            f"groups={spec.groups} in={spec.in_channels} out={spec.out_channels}"
        )
    return conv2d(x, weights, None, spec)


def transpose_conv2d(x, weights, bias=None, stride=2, padding=1):
    """Transpose (fractionally-strided) convolution by scatter-accumulate.

    ``weights`` has shape (in_channels, out_channels, kh, kw).  With the
    default 4x4 kernel / stride 2 / pad 1 the output spatial dims are exactly
    double the input's.
    """
    x = as_tensor(x)
    w = np.asarray(weights, dtype=np.float32)
    if w.ndim != 4:
        raise ValueError(f"weights must be 4-D (in, out, kh, kw), got {w.shape}")
    n, c, h, wd = x.shape
    ic, oc, kh, kw = w.shape
    if ic != c:
        raise ValueError(f"input has {c} channels, weights expect {ic}")
    oh = (h - 1) * stride - 2 * padding + kh
    ow = (wd - 1) * stride - 2 * padding + kw
    if oh < 1 or ow < 1:
        raise ValueError(f"degenerate transpose-conv output {oh}x{ow}")

    buf = np.zeros((n, (h - 1) * stride + kh, (wd - 1) * stride + kw, oc), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(x, w[:, :, i, j], axes=([1], [0]))  # (n, h, w, oc)
            buf[:, i : i + (h - 1) * stride + 1 : stride, j : j + (wd - 1) * stride + 1 : stride] += contrib
    out = np.moveaxis(buf[:, padding : padding + oh, padding : padding + ow], 3, 1)
    out = np.ascontiguousarray(out)

    if bias is not None:
        bias = np.asarray(bias, dtype=np.float32)
        if bias.shape != (oc,):
            raise ValueError(f"bias shaped {bias.shape}, expected ({oc},)")
        out += bias.reshape(1, -1, 1, 1)
    return out


def nearest_upsample2x(x):
    """Replicate every pixel into a 2x2 block."""
    x = as_tensor(x)
    return x.repeat(2, axis=2).repeat(2, axis=3)


def max_pool2d(x, kernel, stride, padding=0):
    """Sliding-window maximum; padded border cells count as -inf."""
    x = as_tensor(x)
    if isinstance(kernel, int):
        kernel = (kernel, kernel)
    kh, kw = kernel
    n, c, h, w = x.shape
    oh, ow = conv_output_hw(h, w, kernel, stride, padding)
    if oh < 1 or ow < 1:
        raise ValueError(f"kernel {kernel} does not fit input {h}x{w} with pad {padding}")
    if padding:
        xp = np.full((n, c, h + 2 * padding, w + 2 * padding), -np.inf, dtype=np.float32)
        xp[:, :, padding : padding + h, padding : padding + w] = x
    else:
        xp = x
    out = np.full((n, c, oh, ow), -np.inf, dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i : i + (oh - 1) * stride + 1 : stride, j : j + (ow - 1) * stride + 1 : stride]
            np.maximum(out, patch, out=out)
    return out


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0))


def sigmoid(x):
    """Numerically stable logistic, clamped to the open interval (0, 1)."""
    x = np.asarray(x, dtype=np.float32)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _SIG_LO, _SIG_HI)


_ELEMENTWISE = {"relu": relu, "sigmoid": sigmoid}


def elementwise(x, fn):
    """Apply a named pointwise nonlinearity ('relu' or 'sigmoid')."""
    try:
        return _ELEMENTWISE[fn](x)
    except KeyError:
        raise ValueError(f"unknown elementwise fn {fn!r}, expected one of {sorted(_ELEMENTWISE)}")


def bilinear_resize(x, out_h, out_w):
    """Bilinear resample with half-pixel-center alignment and edge clamping."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target dims must be >= 1, got {out_h}x{out_w}")
    # sample coordinates in float64: float32 coordinate rounding would shift
    # samples by ~1e-5 px, visibly perturbing values at these image sizes
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = (ys - y0).astype(np.float32)
    fx = (xs - x0).astype(np.float32)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)

    fy = fy.reshape(1, 1, out_h, 1)
    fx = fx.reshape(1, 1, 1, out_w)
    top = x[:, :, y0c[:, None], x0c[None, :]] * (1 - fx) + x[:, :, y0c[:, None], x1c[None, :]] * fx
    bot = x[:, :, y1c[:, None], x0c[None, :]] * (1 - fx) + x[:, :, y1c[:, None], x1c[None, :]] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def resize_longer_side(image, target):
    """Resize so the longer spatial side equals ``target``, keeping aspect ratio.

    The shorter side is rounded half-up and floored at 1 pixel.
    """
    image = as_tensor(image)
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    n, c, h, w = image.shape
    if h >= w:
        oh = target
        ow = max(1, int(np.floor(w * target / h + 0.5)))
    else:
        ow = target
        oh = max(1, int(np.floor(h * target / w + 0.5)))
    return bilinear_resize(image, oh, ow)


def zero_pad_to(image, h, w):
    """Zero-pad on the bottom/right so the content sits at the top-left."""
    image = as_tensor(image)
    _, _, ih, iw = image.shape
    if h < ih or w < iw:
        raise ValueError(f"cannot pad {ih}x{iw} down to {h}x{w}")
    if h == ih and w == iw:
        return image
    return np.pad(image, ((0, 0), (0, 0), (0, h - ih), (0, w - iw)))
