"""Deterministic CPU splatting.

Each Gaussian is projected with the first-order (EWA) perspective
approximation ``Σ2 = J W Σ Wᵀ Jᵀ``; its footprint is cut at 3σ. Every
(pixel, Gaussian) pair inside a footprint is enumerated explicitly, pairs
are sorted by pixel, view depth and input index, and each pixel composites
front to back:

    C = Σ_i c_i α_i T_i,   T_i = Π_{j<i} (1 - α_j),   α_i = o_i exp(-½ dᵀ Σ2⁻¹ d)

Transmittance is ``exp`` of a segmented exclusive cumulative sum of
``log(1 - α)``. The whole pipeline is written with autodiff tensor ops so the
same code gives images and gradients; :func:`render` just runs it without a
graph, in row bands.
"""

from __future__ import annotations

import numpy as np

from ..kinematics import covariance
from ..numerics import Tensor, concat, index_add, no_grad
from .camera import Camera
from .image import Image
from .splats import SplatSet

NEAR = 0.05
ALPHA_MAX = 0.999
MAX_COND = 1e8
SIGMA_CUT = 3.0
BAND_PAIRS = 2_000_000


def _col(x: Tensor, i: int) -> Tensor:
    return x[:, i]


def quat_rotation(q: Tensor) -> Tensor:
    """Rotation matrices ``(G, 3, 3)`` from (not necessarily unit) quaternions."""
    q = q / (q * q).sum(axis=1, keepdims=True).sqrt()
    w, x, y, z = (_col(q, i) for i in range(4))
    entries = [
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    ]
    return concat([e.reshape(-1, 1) for e in entries], axis=1).reshape(-1, 3, 3)


def covariance_tensor(scales: Tensor, quats: Tensor) -> Tensor:
    m = quat_rotation(quats) * scales.reshape(-1, 1, 3)
    return m @ m.transpose(0, 2, 1)


class _Projected:
    """Screen-space quantities of the Gaussians in front of the camera."""

    def __init__(self, means: Tensor, cov: Tensor, cam: Camera):
        rot = cam.rotation
        pc = (means - cam.position) @ Tensor(rot.T.astype(means.dtype))
        depth = pc.data[:, 2]
        keep = np.flatnonzero(depth > NEAR)
        pc = pc[keep]
        cov = cov[keep]
        f, (cx, cy) = cam.focal, cam.principal
        x, y, z = _col(pc, 0), _col(pc, 1), _col(pc, 2)
        iz = 1.0 / z
        # J W with W = world-to-camera rotation
        zero = Tensor(np.zeros(len(keep), dtype=means.dtype))
        j = concat([e.reshape(-1, 1) for e in (f * iz, zero, -f * x * iz * iz, zero, f * iz, -f * y * iz * iz)],
                   axis=1).reshape(-1, 2, 3)
        t = j @ Tensor(rot.astype(means.dtype))
        s2 = t @ cov @ t.transpose(0, 2, 1)
        a, b, c = s2[:, 0, 0], s2[:, 0, 1], s2[:, 1, 1]
        ad, bd, cd = a.data, b.data, c.data
        half_tr = 0.5 * (ad + cd)
        disc = np.sqrt(np.maximum(0.25 * (ad - cd) ** 2 + bd * bd, 0.0))
        lmax, lmin = half_tr + disc, half_tr - disc
        with np.errstate(divide="ignore", invalid="ignore"):
            good = (lmin > 0) & (lmax / lmin <= MAX_COND) & np.isfinite(lmax)
        self.skipped = int((~good).sum())
        sel = np.flatnonzero(good)
        self.index = keep[sel]  # into the input splats
        a, b, c = a[sel], b[sel], c[sel]
        det = a * c - b * b
        self.conic = (c / det, -b / det, a / det)
        self.u = f * x[sel] * iz[sel] + cx
        self.v = f * y[sel] * iz[sel] + cy
        self.depth = depth[keep][sel]
        self.rx = SIGMA_CUT * np.sqrt(a.data)
        self.ry = SIGMA_CUT * np.sqrt(c.data)


def _pairs(proj: _Projected, width: int, row0: int, row1: int):
    """Candidate (pixel, splat) pairs whose pixel lies in the splat's 3σ box."""
    u, v = proj.u.data, proj.v.data
    x0 = np.maximum(np.ceil(u - proj.rx), 0).astype(np.int64)
    x1 = np.minimum(np.floor(u + proj.rx), width - 1).astype(np.int64)
    y0 = np.maximum(np.ceil(v - proj.ry), row0).astype(np.int64)
    y1 = np.minimum(np.floor(v + proj.ry), row1 - 1).astype(np.int64)
    nx = np.maximum(x1 - x0 + 1, 0)
    ny = np.maximum(y1 - y0 + 1, 0)
    counts = nx * ny
    total = int(counts.sum())
    g = np.repeat(np.arange(len(u)), counts)
    local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    px = x0[g] + local % nx[g]
    py = y0[g] + local // nx[g]
    return g, px, py


def _composite(proj: _Projected, opac: Tensor, colors: Tensor, width: int, row0: int, row1: int, with_depth: bool):
    g, px, py = _pairs(proj, width, row0, row1)
    npix = (row1 - row0) * width
    dtype = opac.dtype
    if len(g) == 0:
        zeros = Tensor(np.zeros((npix, 3), dtype=dtype))
        return zeros, Tensor(np.zeros(npix, dtype=dtype)), np.zeros(npix)
    # exact 3σ ellipse test on values, then sort
    dxn = px - proj.u.data[g]
    dyn = py - proj.v.data[g]
    ca, cb, cc = (k.data[g] for k in proj.conic)
    maha = ca * dxn * dxn + 2.0 * cb * dxn * dyn + cc * dyn * dyn
    inside = maha <= SIGMA_CUT ** 2
    g, px, py = g[inside], px[inside], py[inside]
    pix = (py - row0) * width + px
    order = np.lexsort((proj.index[g], proj.depth[g], pix))
    g, px, py, pix = g[order], px[order], py[order], pix[order]

    dx = Tensor(px.astype(dtype)) - proj.u[g]
    dy = Tensor(py.astype(dtype)) - proj.v[g]
    a, b, c = (k[g] for k in proj.conic)
    power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
    src = proj.index[g]
    alpha = (opac[src] * power.exp()).clip(None, ALPHA_MAX)
    log1m = (1.0 - alpha).log()
    cs = log1m.cumsum(0)
    excl = concat([Tensor(np.zeros(1, dtype=dtype)), cs[:-1]], axis=0)
    starts = np.flatnonzero(np.r_[True, pix[1:] != pix[:-1]])
    seg_start = np.repeat(starts, np.diff(np.r_[starts, len(pix)]))
    trans = (excl - excl[seg_start]).exp()
    w = alpha * trans
    rgb = index_add(npix, pix, w.reshape(-1, 1) * colors[src])
    acc = index_add(npix, pix, w)
    depth = np.zeros(npix)
    if with_depth:
        np.add.at(depth, pix, w.data * proj.depth[g])
    return rgb, acc, depth


def render_tensors(means: Tensor, scales: Tensor, quats: Tensor, opac: Tensor, colors: Tensor, cam: Camera,
                   rows=None):
    """Differentiable render. Returns ``(rgb (H, W, 3), alpha (H, W), depth ndarray, skipped)``."""
    row0, row1 = (0, cam.height) if rows is None else rows
    proj = _Projected(means, covariance_tensor(scales, quats), cam)
    rgb, acc, depth = _composite(proj, opac, colors, cam.width, row0, row1, with_depth=True)
    h = row1 - row0
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(acc.data > 0, depth / acc.data, 0.0)
    return rgb.reshape(h, cam.width, 3), acc.reshape(h, cam.width), depth.reshape(h, cam.width), proj.skipped


def render(splats: SplatSet, cam: Camera) -> Image:
    """Forward render over a black background, processed in row bands."""
    h, w = cam.height, cam.width
    if len(splats) == 0:
        return Image(np.zeros((h, w, 3)), np.zeros((h, w)), np.zeros((h, w)))
    with no_grad():
        means = Tensor(splats.means)
        cov = Tensor(covariance(splats.scales, splats.quats))
        proj = _Projected(means, cov, cam)
        opac, colors = Tensor(splats.opacities), Tensor(splats.colors)
        # band height from the expected pair count
        area = float(((2 * proj.rx + 1) * (2 * proj.ry + 1)).sum())
        n_bands = int(min(h, max(1, np.ceil(area / BAND_PAIRS))))
        edges = np.linspace(0, h, n_bands + 1).round().astype(int)
        rgb, alpha, depth = np.zeros((h, w, 3)), np.zeros((h, w)), np.zeros((h, w))
        for r0, r1 in zip(edges[:-1], edges[1:]):
            if r1 <= r0:
                continue
            c, a, d = _composite(proj, opac, colors, w, r0, r1, with_depth=True)
            rgb[r0:r1] = c.data.reshape(r1 - r0, w, 3)
            alpha[r0:r1] = a.data.reshape(r1 - r0, w)
            depth[r0:r1] = d.reshape(r1 - r0, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(alpha > 0, depth / alpha, 0.0)
    return Image(rgb, alpha, depth, proj.skipped)
