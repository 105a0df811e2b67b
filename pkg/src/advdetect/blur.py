"""Truncated Gaussian blur on flattened image grids.

The kernel is separable, truncated at radius ceil(3*sigma) and renormalized
against the locally visible mass, so constant images pass through unchanged
even at the borders. ``raw_blur`` (plain zero-padded convolution) and
``blur_mass`` are exposed separately because the preprocessing defense needs
the adjoint of the renormalized operator: with a symmetric kernel K and mass
m = K*1, the blur is G(x) = K(x)/m and its adjoint is G^T(g) = K(g/m).
"""

import math

import numpy as np

from .errors import DimensionMismatchError


def gaussian_kernel(sigma):
    """Normalized 1-D Gaussian kernel truncated at radius ceil(3*sigma)."""
    if sigma <= 0.0:
        return np.ones(1)
    radius = max(1, math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (offsets / sigma) ** 2)
    return k / k.sum()


def _conv_axis(arr, kernel, axis):
    # zero-padded correlation along one axis; kernel is symmetric
    radius = len(kernel) // 2
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    for j, w in enumerate(kernel):
        shift = j - radius
        src = [slice(None)] * arr.ndim
        dst = [slice(None)] * arr.ndim
        if shift >= 0:
            src[axis] = slice(shift, n)
            dst[axis] = slice(0, n - shift)
        else:
            src[axis] = slice(0, n + shift)
            dst[axis] = slice(-shift, n)
        out[tuple(dst)] += w * arr[tuple(src)]
    return out


def _to_grid(X, shape):
    h, w, c = shape
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != h * w * c:
        raise DimensionMismatchError(
            f"flat length {X.shape[-1]} does not match image shape {shape}"
        )
    single = X.ndim == 1
    grid = X.reshape(-1, h, w, c)
    return grid, single


def raw_blur(X, shape, sigma):
    """Zero-padded separable Gaussian convolution, per channel, no renorm."""
    grid, single = _to_grid(X, shape)
    kernel = gaussian_kernel(sigma)
    out = _conv_axis(_conv_axis(grid, kernel, 1), kernel, 2)
    flat = out.reshape(-1, grid[0].size)
    return flat[0] if single else flat


def blur_mass(shape, sigma):
    """Per-pixel kernel mass visible inside the image (flat length h*w*c)."""
    h, w, c = shape
    ones = np.ones(h * w * c)
    return raw_blur(ones, shape, sigma)


def blur_grid(X, shape, sigma):
    """Border-renormalized Gaussian blur of flat images (rows of ``X``)."""
    if sigma <= 0.0:
        return np.array(X, dtype=np.float64, copy=True)
    return raw_blur(X, shape, sigma) / blur_mass(shape, sigma)
