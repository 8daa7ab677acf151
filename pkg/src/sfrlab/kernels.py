"""Naive reference kernels for every primitive layer.

Tensors are float32 numpy arrays laid out ``(channels, height, width)``;
conv kernels are ``(out_maps, in_maps_per_group, k_h, k_w)``.  Each
output element of a convolution is accumulated sequentially over
(input channel, kernel row, kernel column) with no fused multiply-add,
so results are bitwise reproducible.  Work is vectorised only across
independent output elements.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = [
    "as_tensor",
    "conv2d",
    "factorized_conv",
    "transposed_conv2d",
    "maxpool2d",
    "batchnorm_inference",
    "bilinear_upsample",
    "channel_shuffle",
    "relu",
    "add",
    "concat",
    "elementwise",
    "argmax_channels",
]

F32 = np.float32


def as_tensor(x, name="input", ndim=3) -> np.ndarray:
    """Validate and convert to a C-contiguous float32 array."""
    arr = np.ascontiguousarray(x, dtype=F32)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    if 0 in arr.shape:
        raise ValueError(f"{name} has an empty dimension: {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _split(n: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run(fn, chunks, threads):
    if threads <= 1 or len(chunks) <= 1:
        for c in chunks:
            fn(c)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(fn, chunks))


def conv2d(x, kernel, stride=1, dilation=1, pad_h=0, pad_w=0, groups=1, *, threads=1):
    """Zero-padded, bias-free grouped 2-D convolution (cross-correlation).

    ``out[o, y, x] = sum_c sum_m sum_n kernel[o, c, m, n] *
    padded[g*Cg + c, y*stride + m*dilation, x*stride + n*dilation]``
    where ``g`` is the group of output map ``o``.
    """
    x = as_tensor(x)
    w = as_tensor(kernel, "kernel", ndim=4)
    c_in, h, wd = x.shape
    o, ig, kh, kw = w.shape
    if groups < 1 or c_in % groups or o % groups:
        raise ValueError(f"channels ({c_in} in, {o} out) not divisible by groups={groups}")
    if ig != c_in // groups:
        raise ValueError(f"kernel expects {ig} maps per group, input gives {c_in // groups}")
    if stride < 1 or dilation < 1 or pad_h < 0 or pad_w < 0:
        raise ValueError("stride and dilation must be >= 1, padding >= 0")

    ho = (h + 2 * pad_h - (kh - 1) * dilation - 1) // stride + 1
    wo = (wd + 2 * pad_w - (kw - 1) * dilation - 1) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError("kernel larger than padded input")

    xp = np.pad(x, ((0, 0), (pad_h, pad_h), (pad_w, pad_w))) if pad_h or pad_w else x
    og = o // groups
    xg = xp.reshape(groups, ig, *xp.shape[1:])
    wg = w.reshape(groups, og, ig, kh, kw)
    out = np.zeros((groups, og, ho, wo), dtype=F32)
    span_h, span_w = stride * (ho - 1) + 1, stride * (wo - 1) + 1

    def work(sl):
        # sl selects groups when grouped, output maps otherwise
        gs, os_ = (sl, slice(None)) if groups > 1 else (slice(None), sl)
        acc = out[gs, os_]
        for c in range(ig):
            for m in range(kh):
                r0 = m * dilation
                for n in range(kw):
                    c0 = n * dilation
                    patch = xg[gs, c, r0:r0 + span_h:stride, c0:c0 + span_w:stride]
                    acc += wg[gs, os_, c, m, n][:, :, None, None] * patch[:, None]

    _run(work, _split(groups if groups > 1 else og, threads), threads)
    return out.reshape(o, ho, wo)


def factorized_conv(x, h_kernels, w_kernels, stride=1, dilation=1, groups=1, *, threads=1):
    """A ``k x 1`` conv followed directly by a ``1 x k`` conv.

    Both convs use "same" padding along their kernel axis; ``stride``
    applies to the height pass (first) and width pass (second) so the
    result matches one ``k x k`` conv with the rank-1 kernel
    ``h_kernels (x) w_kernels`` and matching stride.
    """
    hk = as_tensor(h_kernels, "h_kernels", ndim=4)
    wk = as_tensor(w_kernels, "w_kernels", ndim=4)
    if hk.shape[3] != 1 or wk.shape[2] != 1:
        raise ValueError("h_kernels must be (O, I, k, 1) and w_kernels (O, I, 1, k)")
    ph = (hk.shape[2] - 1) * dilation // 2
    pw = (wk.shape[3] - 1) * dilation // 2
    y = _conv_axis(x, hk, stride, 1, dilation, ph, 0, groups, threads)
    return _conv_axis(y, wk, 1, stride, dilation, 0, pw, groups, threads)


def _conv_axis(x, kernel, stride_h, stride_w, dilation, pad_h, pad_w, groups, threads):
    # conv2d with independent strides along the two axes
    if stride_h == stride_w:
        return conv2d(x, kernel, stride_h, dilation, pad_h, pad_w, groups, threads=threads)
    full = conv2d(x, kernel, 1, dilation, pad_h, pad_w, groups, threads=threads)
    return np.ascontiguousarray(full[:, ::stride_h, ::stride_w])


def transposed_conv2d(x, kernel, stride=1, pad=0, output_padding=0, *, threads=1):
    """Bias-free transposed convolution (scatter form).

    ``kernel`` is ``(out_maps, in_maps, k, k)``.  The result equals
    inserting ``stride - 1`` zeros between input pixels and running a
    stride-1 conv with the spatially flipped kernel; output size is
    ``(H - 1)*stride - 2*pad + k + output_padding``.  Contributions to
    each output element are accumulated in the same
    (input channel, flipped row, flipped column) order as that conv.
    """
    x = as_tensor(x)
    w = as_tensor(kernel, "kernel", ndim=4)
    c_in, h, wd = x.shape
    o, i, kh, kw = w.shape
    if i != c_in:
        raise ValueError(f"kernel expects {i} input maps, input has {c_in}")
    if stride < 1 or pad < 0 or output_padding < 0:
        raise ValueError("stride must be >= 1, padding >= 0")
    ho = (h - 1) * stride - 2 * pad + kh + output_padding
    wo = (wd - 1) * stride - 2 * pad + kw + output_padding
    if ho < 1 or wo < 1:
        raise ValueError("transposed conv output would be empty")

    # full-size buffer, cropped by `pad` on the leading edges afterwards
    fh = max((h - 1) * stride + kh, pad + ho)
    fw = max((wd - 1) * stride + kw, pad + wo)
    full = np.zeros((o, fh, fw), dtype=F32)
    span_h, span_w = stride * (h - 1) + 1, stride * (wd - 1) + 1

    def work(sl):
        acc = full[sl]
        for c in range(c_in):
            for m in reversed(range(kh)):
                for n in reversed(range(kw)):
                    acc[:, m:m + span_h:stride, n:n + span_w:stride] += (
                        w[sl, c, m, n][:, None, None] * x[c][None]
                    )

    _run(work, _split(o, threads), threads)
    return np.ascontiguousarray(full[:, pad:pad + ho, pad:pad + wo])


def maxpool2d(x, k, stride):
    x = as_tensor(x)
    c, h, w = x.shape
    if h < k or w < k:
        raise ValueError(f"pool window {k} larger than input {h}x{w}")
    ho, wo = (h - k) // stride + 1, (w - k) // stride + 1
    out = None
    for m in range(k):
        for n in range(k):
            patch = x[:, m:m + stride * (ho - 1) + 1:stride, n:n + stride * (wo - 1) + 1:stride]
            out = patch.copy() if out is None else np.maximum(out, patch)
    return out


def batchnorm_inference(x, gamma, beta, mean, var, epsilon=1e-5):
    x = as_tensor(x)
    c = x.shape[0]
    vecs = [np.asarray(v, dtype=F32).reshape(-1) for v in (gamma, beta, mean, var)]
    if any(v.shape != (c,) for v in vecs):
        raise ValueError(f"batch norm parameters must have length {c}")
    gamma, beta, mean, var = vecs
    if (var < 0).any():
        raise ValueError("variance must be non-negative")
    scale = gamma / np.sqrt(var + F32(epsilon))
    return ((x - mean[:, None, None]) * scale[:, None, None] + beta[:, None, None]).astype(F32)


def bilinear_upsample(x, factor):
    """Half-pixel-centre bilinear resize by an integer factor, edges clamped."""
    x = as_tensor(x)
    if int(factor) != factor or factor < 1:
        raise ValueError("factor must be a positive integer")
    factor = int(factor)
    if factor == 1:
        return x.copy()
    c, h, w = x.shape

    def axis(n):
        src = (np.arange(n * factor, dtype=np.float64) + 0.5) / factor - 0.5
        src = np.clip(src, 0, n - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n - 1)
        return lo, hi, (src - lo).astype(F32)

    y0, y1, ty = axis(h)
    x0, x1, tx = axis(w)
    rows = x[:, y0, :] * (1 - ty)[None, :, None] + x[:, y1, :] * ty[None, :, None]
    out = rows[:, :, x0] * (1 - tx)[None, None, :] + rows[:, :, x1] * tx[None, None, :]
    return out.astype(F32)


def channel_shuffle(x, groups):
    """Channel ``g*(C/groups) + i`` moves to ``i*groups + g``."""
    x = as_tensor(x)
    c = x.shape[0]
    if groups < 1 or c % groups:
        raise ValueError(f"{c} channels not divisible by {groups} groups")
    return np.ascontiguousarray(
        x.reshape(groups, c // groups, *x.shape[1:]).transpose(1, 0, 2, 3).reshape(x.shape)
    )


def relu(x):
    return np.maximum(as_tensor(x), F32(0))


def add(a, b):
    a, b = as_tensor(a), as_tensor(b, "second input")
    if a.shape != b.shape:
        raise ValueError(f"add needs identical shapes, got {a.shape} and {b.shape}")
    return a + b


def concat(*xs):
    xs = [as_tensor(x, f"input {i}") for i, x in enumerate(xs)]
    if len({x.shape[1:] for x in xs}) != 1:
        raise ValueError("concat inputs must share height and width")
    return np.concatenate(xs, axis=0)


def elementwise(kind, *inputs):
    if kind == "relu":
        (x,) = inputs
        return relu(x)
    if kind == "add":
        return add(*inputs)
    if kind == "concat":
        return concat(*inputs)
    raise ValueError(f"unknown elementwise kind {kind!r}")


def argmax_channels(x) -> np.ndarray:
    """Index of the largest channel per pixel (first index wins ties)."""
    return np.argmax(as_tensor(x), axis=0).astype(np.int64)
