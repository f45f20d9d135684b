"""3-D convolutions on channels-last tensors.

Activations are laid out ``(B, D, H, W, C)`` and kernels ``(k, k, k, Cin, Cout)``.
Both ops reduce to one matmul against an im2col buffer. Strided cases are
rewritten as stride-1 or patch-wise products over a space-to-depth view.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, concat, pad


def _out_size(n, k, s, p):
    return (n + 2 * p - k) // s + 1


def _taps(k):
    return [(i, j, l) for i in range(k) for j in range(k) for l in range(k)]


def im2col(xp: np.ndarray, k: int, s: int, out: tuple) -> np.ndarray:
    """(B, D, H, W, C) padded input -> (B, Do, Ho, Wo, k^3, C)."""
    b, c = xp.shape[0], xp.shape[-1]
    do, ho, wo = out
    cols = np.empty((b, do, ho, wo, k ** 3, c), dtype=xp.dtype)
    for t, (i, j, l) in enumerate(_taps(k)):
        cols[..., t, :] = xp[:, i:i + s * do:s, j:j + s * ho:s, l:l + s * wo:s, :]
    return cols


def col2im(cols: np.ndarray, shape: tuple, k: int, s: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add taps back into a padded volume."""
    out = np.zeros(shape, dtype=cols.dtype)
    do, ho, wo = cols.shape[1:4]
    for t, (i, j, l) in enumerate(_taps(k)):
        out[:, i:i + s * do:s, j:j + s * ho:s, l:l + s * wo:s, :] += cols[..., t, :]
    return out


def _pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (p, p), (p, p), (p, p), (0, 0)))


def _unpad(x, p):
    return x if p == 0 else x[:, p:-p, p:-p, p:-p, :]


def conv3d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    if stride == 2 and w.shape[0] == 2 and padding == 0 and x.ndim == 5 and all(n % 2 == 0 for n in x.shape[1:4]):
        return _conv3d_patch(x, w, b)
    if stride == 2 and w.shape[0] == 3 and padding == 1 and x.ndim == 5 and all(n % 2 == 0 for n in x.shape[1:4]):
        return _conv3d_s2(x, w, b)
    return _conv3d(x, w, b, stride, padding)


def _conv3d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    k, cin, cout = w.shape[0], w.shape[3], w.shape[4]
    if x.ndim != 5 or x.shape[-1] != cin:
        raise ShapeMismatch(f"conv3d expects (B, D, H, W, {cin}), got {x.shape}")
    if stride == 1 and k > 1:
        return _conv3d_shift(x, w, b, padding)
    xp = _pad(x.data, padding)
    out_sp = tuple(_out_size(n, k, stride, padding) for n in x.shape[1:4])
    cols = im2col(xp, k, stride, out_sp)
    flat = cols.reshape(-1, k ** 3 * cin)
    wmat = w.data.reshape(k ** 3 * cin, cout)
    y = (flat @ wmat).reshape(x.shape[0], *out_sp, cout)
    parents = (x, w)
    if b is not None:
        y = y + b.data
        parents = (x, w, b)

    def back(g):
        g2 = g.reshape(-1, cout)
        gw = (flat.T @ g2).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g2 @ wmat.T).reshape(cols.shape)
            gx = _unpad(col2im(gcols, xp.shape, k, stride), padding)
        if b is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return Tensor._make(y, parents, back, "conv3d")


def _conv3d_shift(x: Tensor, w: Tensor, b: Tensor | None, padding: int) -> Tensor:
    """Stride-1 convolution as one matmul per tap.

    On the flattened padded volume a tap is a constant row offset, so every
    product reads a contiguous slice. Outputs are computed on the padded
    grid and cropped.
    """
    k, cin, cout = w.shape[0], w.shape[3], w.shape[4]
    xp = _pad(x.data, padding)
    bsz, dp, hp, wp = xp.shape[:4]
    out_sp = (dp - k + 1, hp - k + 1, wp - k + 1)
    flat = xp.reshape(-1, cin)
    offs = [(i * hp + j) * wp + l for i, j, l in _taps(k)]
    rows = flat.shape[0] - offs[-1]
    wt = w.data.reshape(k ** 3, cin, cout)
    full = np.zeros((flat.shape[0], cout), dtype=np.result_type(x.dtype, w.dtype))
    for t, o in enumerate(offs):
        full[:rows] += flat[o:o + rows] @ wt[t]
    crop = (slice(None), slice(0, out_sp[0]), slice(0, out_sp[1]), slice(0, out_sp[2]))
    y = np.ascontiguousarray(full.reshape(bsz, dp, hp, wp, cout)[crop])
    parents = (x, w)
    if b is not None:
        y += b.data
        parents = (x, w, b)

    def back(g):
        gfull = np.zeros((bsz, dp, hp, wp, cout), dtype=g.dtype)
        gfull[crop] = g
        gfull = gfull.reshape(-1, cout)[:rows]
        gw = None
        if w.requires_grad:
            gw = np.stack([flat[o:o + rows].T @ gfull for o in offs]).reshape(w.shape)
        gx = None
        if x.requires_grad:
            gflat = np.zeros_like(flat)
            for t, o in enumerate(offs):
                gflat[o:o + rows] += gfull @ wt[t].T
            gx = _unpad(gflat.reshape(xp.shape), padding)
        if b is None:
            return gx, gw
        return gx, gw, g.reshape(-1, cout).sum(axis=0)

    return Tensor._make(y, parents, back, "conv3d")


def conv_transpose3d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution; output size ``(n - 1) * stride - 2 * padding + k``."""
    if stride == 2 and w.shape[0] == 2 and padding == 0 and x.ndim == 5:
        return _conv_transpose3d_patch(x, w, b)
    if stride == 2 and w.shape[0] == 4 and padding == 1 and x.ndim == 5:
        return _conv_transpose3d_s2(x, w, b)
    return _conv_transpose3d(x, w, b, stride, padding)


def _conv_transpose3d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    k, cin, cout = w.shape[0], w.shape[3], w.shape[4]
    if x.ndim != 5 or x.shape[-1] != cin:
        raise ShapeMismatch(f"conv_transpose3d expects (B, D, H, W, {cin}), got {x.shape}")
    bsz, sp = x.shape[0], x.shape[1:4]
    full = tuple((n - 1) * stride + k for n in sp)
    wmat = w.data.transpose(3, 0, 1, 2, 4).reshape(cin, k ** 3 * cout)
    xflat = x.data.reshape(-1, cin)
    cols = (xflat @ wmat).reshape(bsz, *sp, k ** 3, cout)
    y = _unpad(col2im(cols, (bsz, *full, cout), k, stride), padding)
    parents = (x, w)
    if b is not None:
        y = y + b.data
        parents = (x, w, b)

    def back(g):
        gp = _pad(g, padding)
        gcols = im2col(gp, k, stride, sp).reshape(-1, k ** 3 * cout)
        gx = (gcols @ wmat.T).reshape(x.shape) if x.requires_grad else None
        gw = None
        if w.requires_grad:
            gw = (xflat.T @ gcols).reshape(cin, k, k, k, cout).transpose(1, 2, 3, 0, 4)
        if b is None:
            return gx, gw
        return gx, gw, g.reshape(-1, cout).sum(axis=0)

    return Tensor._make(np.ascontiguousarray(y), parents, back, "conv_transpose3d")


# Stride-2 gathers are slow strided copies. Both stride-2 ops are rewritten as
# stride-1 convolutions whose taps are contiguous shifts, with the kernel
# remapped by a differentiable gather (unused slots point at a zero row).

def _space_to_depth(x: Tensor) -> Tensor:
    b, d, h, w, c = x.shape
    y = x.reshape(b, d // 2, 2, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4, 6, 7)
    return y.reshape(b, d // 2, h // 2, w // 2, 8 * c)


def _depth_to_space(x: Tensor) -> Tensor:
    b, d, h, w, c8 = x.shape
    c = c8 // 8
    y = x.reshape(b, d, h, w, 2, 2, 2, c).transpose(0, 1, 4, 2, 5, 3, 6, 7)
    return y.reshape(b, 2 * d, 2 * h, 2 * w, c)


def _remap(w: Tensor, index: np.ndarray) -> Tensor:
    k, cin, cout = w.shape[0], w.shape[3], w.shape[4]
    rows = concat([w.reshape(k ** 3, cin, cout), Tensor(np.zeros((1, cin, cout), dtype=w.dtype))], axis=0)
    return rows[index]


def _s2_index():
    # block offset b and phase p address padded tap t = 2b + p (k=3)
    idx = np.full((2, 2, 2, 2, 2, 2), 27)
    for bd, bh, bw, pd, ph, pw in np.ndindex(2, 2, 2, 2, 2, 2):
        t = (2 * bd + pd, 2 * bh + ph, 2 * bw + pw)
        if max(t) <= 2:
            idx[bd, bh, bw, pd, ph, pw] = (t[0] * 3 + t[1]) * 3 + t[2]
    return idx


# output phase a and k3 tap s map to the k4 transposed tap
_T4 = {(0, 1): 1, (0, 0): 3, (1, 2): 0, (1, 1): 2}


def _t2_index():
    idx = np.full((3, 3, 3, 2, 2, 2), 64)
    for sd, sh, sw, ad, ah, aw in np.ndindex(3, 3, 3, 2, 2, 2):
        t = (_T4.get((ad, sd)), _T4.get((ah, sh)), _T4.get((aw, sw)))
        if None not in t:
            idx[sd, sh, sw, ad, ah, aw] = (t[0] * 4 + t[1]) * 4 + t[2]
    return idx


_S2_INDEX = _s2_index()
_T2_INDEX = _t2_index()


def _conv3d_s2(x: Tensor, w: Tensor, b: Tensor | None) -> Tensor:
    cin, cout = w.shape[3], w.shape[4]
    xs = _space_to_depth(pad(x, ((0, 0), (1, 1), (1, 1), (1, 1), (0, 0))))
    w2 = _remap(w, _S2_INDEX).reshape(2, 2, 2, 8 * cin, cout)
    return _conv3d(xs, w2, b, 1, 0)


def _conv_transpose3d_s2(x: Tensor, w: Tensor, b: Tensor | None) -> Tensor:
    cin, cout = w.shape[3], w.shape[4]
    wb = _remap(w, _T2_INDEX)  # (3, 3, 3, 2, 2, 2, cin, cout)
    wb = wb.transpose(0, 1, 2, 6, 3, 4, 5, 7).reshape(3, 3, 3, cin, 8 * cout)
    y = _depth_to_space(_conv3d(x, wb, None, 1, 1))
    return y if b is None else y + b


# Non-overlapping k2 s2 ops need no im2col: one matmul plus a reshuffle.

def _conv3d_patch(x: Tensor, w: Tensor, b: Tensor | None) -> Tensor:
    cin, cout = w.shape[3], w.shape[4]
    if x.shape[-1] != cin:
        raise ShapeMismatch(f"conv3d expects (B, D, H, W, {cin}), got {x.shape}")
    xs = _space_to_depth(x)
    y = (xs.reshape(-1, 8 * cin) @ w.reshape(8 * cin, cout)).reshape(*xs.shape[:4], cout)
    return y if b is None else y + b


def _conv_transpose3d_patch(x: Tensor, w: Tensor, b: Tensor | None) -> Tensor:
    cin, cout = w.shape[3], w.shape[4]
    if x.shape[-1] != cin:
        raise ShapeMismatch(f"conv_transpose3d expects (B, D, H, W, {cin}), got {x.shape}")
    wm = w.transpose(3, 0, 1, 2, 4).reshape(cin, 8 * cout)
    y = _depth_to_space((x.reshape(-1, cin) @ wm).reshape(*x.shape[:4], 8 * cout))
    return y if b is None else y + b


def conv3d_reference(x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Direct loop definition, used to check the im2col path."""
    k = w.shape[0]
    xp = _pad(x, padding)
    out_sp = [_out_size(n, k, stride, padding) for n in x.shape[1:4]]
    y = np.zeros((x.shape[0], *out_sp, w.shape[4]))
    for o0 in range(out_sp[0]):
        for o1 in range(out_sp[1]):
            for o2 in range(out_sp[2]):
                patch = xp[:, o0 * stride:o0 * stride + k, o1 * stride:o1 * stride + k, o2 * stride:o2 * stride + k, :]
                y[:, o0, o1, o2, :] = np.einsum("bijlc,ijlco->bo", patch, w)
    return y
