"""Independent reference implementations used by the property suites."""

import numpy as np

from sfrlab.kernels import conv2d


def brute_conv(x, w, stride=1, dilation=1, pad_h=0, pad_w=0, groups=1):
    """Per-element float64 loops straight from the convolution sum."""
    c, h, wd = x.shape
    o, ig, kh, kw = w.shape
    xp = np.zeros((c, h + 2 * pad_h, wd + 2 * pad_w))
    xp[:, pad_h:pad_h + h, pad_w:pad_w + wd] = x
    ho = (h + 2 * pad_h - (kh - 1) * dilation - 1) // stride + 1
    wo = (wd + 2 * pad_w - (kw - 1) * dilation - 1) // stride + 1
    og = o // groups
    out = np.zeros((o, ho, wo))
    for oc in range(o):
        g = oc // og
        for y in range(ho):
            for xx in range(wo):
                s = 0.0
                for ci in range(ig):
                    for m in range(kh):
                        for n in range(kw):
                            s += float(w[oc, ci, m, n]) * xp[g * ig + ci, y * stride + m * dilation,
                                                              xx * stride + n * dilation]
                out[oc, y, xx] = s
    return out


def zero_insert_kernel(w, dilation):
    """Kernel with ``dilation - 1`` zeros between consecutive taps."""
    o, i, kh, kw = w.shape
    out = np.zeros((o, i, (kh - 1) * dilation + 1, (kw - 1) * dilation + 1), dtype=w.dtype)
    out[:, :, ::dilation, ::dilation] = w
    return out


def block_diagonal(w, groups):
    """Dense ``(O, C, k, k)`` kernel that is zero across group boundaries."""
    o, ig, kh, kw = w.shape
    og = o // groups
    out = np.zeros((o, ig * groups, kh, kw), dtype=w.dtype)
    for g in range(groups):
        out[g * og:(g + 1) * og, g * ig:(g + 1) * ig] = w[g * og:(g + 1) * og]
    return out


def transposed_by_zero_insertion(x, w, stride, pad, output_padding):
    """Insert ``stride - 1`` zeros between pixels, pad, then convolve with the flipped kernel."""
    c, h, wd = x.shape
    o, _, k, _ = w.shape
    up = np.zeros((c, (h - 1) * stride + 1, (wd - 1) * stride + 1), dtype=np.float32)
    up[:, ::stride, ::stride] = x
    lo = k - 1 - pad
    hi = lo + output_padding
    up = np.pad(up, ((0, 0), (lo, hi), (lo, hi)))
    flipped = np.ascontiguousarray(w[:, :, ::-1, ::-1])
    return conv2d(up, flipped)


def brute_transposed(x, w, stride, pad, output_padding):
    """Scatter definition in float64: every input pixel stamps a scaled kernel."""
    c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho = (h - 1) * stride - 2 * pad + k + output_padding
    wo = (wd - 1) * stride - 2 * pad + k + output_padding
    full = np.zeros((o, (h - 1) * stride + k + output_padding, (wd - 1) * stride + k + output_padding))
    for ci in range(c):
        for y in range(h):
            for xx in range(wd):
                full[:, y * stride:y * stride + k, xx * stride:xx * stride + k] += (
                    float(x[ci, y, xx]) * w[:, ci].astype(np.float64))
    return full[:, pad:pad + ho, pad:pad + wo]


def brute_counts(pred, gt):
    tp = fp = fn = tn = 0
    for p, g in zip(np.ravel(pred).tolist(), np.ravel(gt).tolist()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn
