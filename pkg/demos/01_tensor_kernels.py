"""Tour of the numeric kernels: convolution variants, pooling, resizing,
and the SKT1 tensor file format.

Run:  python demos/01_tensor_kernels.py
"""

import os
import tempfile

import numpy as np

from fovea import (ConvSpec, conv2d, depthwise_conv2d, max_pool2d,
                   nearest_upsample2x, read_tensor, resize_longer_side, sigmoid,
                   transpose_conv2d, write_tensor, zero_pad_to)
from fovea.naive import conv2d_naive

rng = np.random.default_rng(0)

# A standard 3x3 convolution, then the same thing from the 6-nested-loop
# reference implementation. The vectorized kernel is the one the backbones
# use; the loop version exists purely to check it.
x = rng.normal(size=(1, 3, 8, 8)).astype(np.float32)
w = rng.normal(size=(5, 3, 3, 3)).astype(np.float32)
y_fast = conv2d(x, w, None, ConvSpec(3, 5, (3, 3), padding=1))
y_slow = conv2d_naive(x, w, None, 1, 1)
print("conv2d vs naive loops, max |diff|:", float(np.abs(y_fast - y_slow).max()))

# Depthwise convolution: one 3x3 filter per channel. This is what makes the
# compact backbone's expand branches cheap.
dw = rng.normal(size=(3, 1, 3, 3)).astype(np.float32)
y_dw = depthwise_conv2d(x, dw, ConvSpec(3, 3, (3, 3), padding=1, groups=3))
print("depthwise output shape:", y_dw.shape)

# Transpose convolution with a 4x4 kernel at stride 2 exactly doubles the
# spatial dims; it replaces nearest-neighbor upsampling in the compact
# backbone.
tw = rng.normal(size=(3, 3, 4, 4)).astype(np.float32)
print("tconv doubles 8x8 ->", transpose_conv2d(x, tw).shape[2:])
print("nearest upsample doubles 8x8 ->", nearest_upsample2x(x).shape[2:])

# Max pooling pads with -inf, so borders never win spuriously.
peak = np.zeros((1, 1, 5, 5), np.float32)
peak[0, 0, 2, 2] = 9.0
print("3x3 window max around a single peak:\n", max_pool2d(peak, 3, 1, 1)[0, 0])

# Image geometry used by the saccade pipeline: resize the longer side, pad
# with zeros to a square working frame.
image = rng.uniform(0, 1, (1, 3, 510, 340)).astype(np.float32)
small = resize_longer_side(image, 255)
padded = zero_pad_to(small, 255, 255)
print("510x340 image -> resized", small.shape[2:], "-> padded", padded.shape[2:])
print("padding conserves mass:", np.isclose(padded.sum(), small.sum()))

# Sigmoid stays strictly inside (0, 1) even for saturating inputs.
print("sigmoid(+-50):", sigmoid(np.array([-50.0, 50.0], np.float32)))

# Tensors round-trip through the little SKT1 binary format.
with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "tensor.skt")
    write_tensor(path, y_fast)
    back = read_tensor(path)
    print("SKT1 round trip exact:", np.array_equal(back, y_fast),
          "| file bytes:", os.path.getsize(path))
