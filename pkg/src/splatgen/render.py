"""View-dependent color evaluation and tile-based splat rasterization.

Color: per-channel sigmoid of a degree-3 real SH expansion evaluated along
the direction from the camera center to each Gaussian. Rasterization:
Gaussians are projected with the local affine (EWA) approximation of the
pinhole map, binned into tiles, depth-sorted front to back, and
alpha-composited. Depth is the alpha-weighted mean of composited splat
depths, +inf wherever accumulated weight stays below 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .errors import ValidationError
from .scene import GaussianScene, make_scene
from .transforms import quats_to_matrices

# Real SH basis constants, degree 0..3 (Condon-Shortley phase).
_C0 = 0.28209479177387814
_C1 = 0.4886025119029199
_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792, 0.5462742152960396)
_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

# Rasterizer constants: per-splat alpha ceiling, minimum contributing alpha,
# transmittance early-out, 2D covariance dilation floor (pixels^2), and the
# accumulated weight below which a pixel's depth is undefined.
ALPHA_CLAMP = 0.99
ALPHA_SKIP = 1.0 / 255.0
TRANSMITTANCE_EPS = 1e-4
COV2D_FLOOR = 0.3
DEPTH_VALID_THRESHOLD = 0.5
_DET_EPS = 1e-12


@dataclass
class RenderOutput:
    """rgb (H,W,3) in [0,1] over black; alpha (H,W); depth (H,W) meters, +inf
    where coverage is below DEPTH_VALID_THRESHOLD."""

    rgb: np.ndarray
    alpha: np.ndarray
    depth: np.ndarray


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sh_basis(dirs: np.ndarray) -> np.ndarray:
    """Degree-3 real SH basis values for unit directions; (..., 3) -> (..., 16)."""
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    out = np.empty(dirs.shape[:-1] + (16,))
    out[..., 0] = _C0
    out[..., 1] = -_C1 * y
    out[..., 2] = _C1 * z
    out[..., 3] = -_C1 * x
    out[..., 4] = _C2[0] * xy
    out[..., 5] = _C2[1] * yz
    out[..., 6] = _C2[2] * (2.0 * zz - xx - yy)
    out[..., 7] = _C2[3] * xz
    out[..., 8] = _C2[4] * (xx - yy)
    out[..., 9] = _C3[0] * y * (3.0 * xx - yy)
    out[..., 10] = _C3[1] * xy * z
    out[..., 11] = _C3[2] * y * (4.0 * zz - xx - yy)
    out[..., 12] = _C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    out[..., 13] = _C3[4] * x * (4.0 * zz - xx - yy)
    out[..., 14] = _C3[5] * z * (xx - yy)
    out[..., 15] = _C3[6] * x * (xx - 3.0 * yy)
    return out


def _normalize_dirs(dirs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(dirs, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-3):
        raise ValidationError("view direction deviates from unit length by more than 1e-3")
    return dirs / norms[..., None]


def eval_sh(sh0: np.ndarray, sh_rest: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Sigmoid(SH expansion) color for one Gaussian along one view direction."""
    sh0 = np.asarray(sh0, dtype=np.float64).reshape(3)
    sh_rest = np.asarray(sh_rest, dtype=np.float64).reshape(45)
    d = _normalize_dirs(np.asarray(direction, dtype=np.float64).reshape(3))
    basis = sh_basis(d)
    # channel-major rest layout: 15 coefficients per channel
    lin = basis[0] * sh0 + sh_rest.reshape(3, 15) @ basis[1:]
    return _sigmoid(lin)


def eval_sh_many(sh0: np.ndarray, sh_rest: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Batched eval_sh: (N,3), (N,45), (N,3) unit dirs -> (N,3) colors."""
    sh0 = np.asarray(sh0, dtype=np.float64)
    sh_rest = np.asarray(sh_rest, dtype=np.float64)
    dirs = _normalize_dirs(np.asarray(dirs, dtype=np.float64))
    basis = sh_basis(dirs)  # (N, 16)
    rest = sh_rest.reshape(-1, 3, 15)
    lin = basis[:, :1] * sh0 + np.einsum("ncb,nb->nc", rest, basis[:, 1:])
    return _sigmoid(lin)


def _covariances_camera(scene: GaussianScene, r_cw: np.ndarray) -> np.ndarray:
    """Per-Gaussian 3x3 covariance in camera frame."""
    rot = quats_to_matrices(scene.rotations.astype(np.float64))
    scales = np.exp(scene.log_scales.astype(np.float64))
    m = rot * scales[:, None, :]  # columns scaled by principal std-devs
    cov_world = np.einsum("nij,nkj->nik", m, m)
    return np.einsum("ij,njk,lk->nil", r_cw, cov_world, r_cw)


def project_gaussians(scene: GaussianScene, camera: Camera):
    """Project every Gaussian; returns arrays over the surviving subset.

    Culling: camera depth outside [near, far] or 3-sigma footprint entirely
    off the image; 2D covariances whose determinant stays below 1e-12 even
    after the dilation floor are dropped as singular. Survivors keep their
    original order.
    """
    r_cw, t_cw = camera.camera_from_world()
    p_cam = scene.positions.astype(np.float64) @ r_cw.T + t_cw
    z = p_cam[:, 2]
    keep = (z >= camera.near) & (z <= camera.far)

    cov_cam = _covariances_camera(scene, r_cw)

    x, y = p_cam[:, 0], p_cam[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_z = np.where(z != 0.0, 1.0 / z, 0.0)
    # local affine Jacobian of the pinhole map
    j = np.zeros((scene.count, 2, 3))
    j[:, 0, 0] = camera.fx * inv_z
    j[:, 0, 2] = -camera.fx * x * inv_z * inv_z
    j[:, 1, 1] = camera.fy * inv_z
    j[:, 1, 2] = -camera.fy * y * inv_z * inv_z
    cov2d = np.einsum("nij,njk,nlk->nil", j, cov_cam, j)
    cov2d[:, 0, 0] += COV2D_FLOOR
    cov2d[:, 1, 1] += COV2D_FLOOR

    mean2d = np.stack([camera.fx * x * inv_z + camera.cx, camera.fy * y * inv_z + camera.cy], axis=1)

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    keep &= det > _DET_EPS

    lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    radius = 3.0 * np.sqrt(np.maximum(lam_max, 0.0))
    keep &= (mean2d[:, 0] + radius > 0.0) & (mean2d[:, 0] - radius < camera.width)
    keep &= (mean2d[:, 1] + radius > 0.0) & (mean2d[:, 1] - radius < camera.height)

    idx = np.flatnonzero(keep)
    return {
        "index": idx,
        "mean2d": mean2d[idx],
        "cov2d": cov2d[idx],
        "depth": z[idx],
        "radius": radius[idx],
    }


def project_gaussian(position, rotation, log_scale, camera: Camera):
    """Single-Gaussian projection; None when culled."""
    scene = make_scene(
        positions=np.asarray(position, dtype=np.float64).reshape(1, 3),
        rotations=np.asarray(rotation, dtype=np.float64).reshape(1, 4),
        log_scales=np.asarray(log_scale, dtype=np.float64).reshape(1, 3),
        opacity_logits=np.zeros(1),
        sh0=np.zeros((1, 3)),
        sh_rest=np.zeros((1, 45)),
        dtype=np.float64,
    )
    proj = project_gaussians(scene, camera)
    if proj["index"].size == 0:
        return None
    return proj["mean2d"][0], proj["cov2d"][0], float(proj["depth"][0])


def rasterize(scene: GaussianScene, camera: Camera, tile_size: int = 16) -> RenderOutput:
    """Render RGB, alpha and depth over a black background.

    Front-to-back compositing in global depth order (ties broken by original
    Gaussian index), per-splat alpha clamped at 0.99, contributions below
    1/255 skipped, accumulation stopping once transmittance drops under
    1e-4.
    """
    h, w = camera.height, camera.width
    rgb = np.zeros((h, w, 3))
    alpha = np.zeros((h, w))
    depth_num = np.zeros((h, w))
    weight = np.zeros((h, w))

    proj = project_gaussians(scene, camera)
    m = proj["index"].size
    if m:
        # stable sort keeps original index order among equal depths
        order = np.argsort(proj["depth"], kind="stable")
        mean2d = proj["mean2d"][order]
        depth_v = proj["depth"][order]
        radius = proj["radius"][order]
        cov2d = proj["cov2d"][order]
        sel = proj["index"][order]

        a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
        det = a * c - b * b
        inv_a, inv_b, inv_c = c / det, -b / det, a / det

        opac = _sigmoid(scene.opacity_logits.astype(np.float64)[sel])
        view_dirs = scene.positions.astype(np.float64)[sel] - camera.center
        view_dirs /= np.linalg.norm(view_dirs, axis=1)[:, None]
        colors = eval_sh_many(scene.sh0[sel], scene.sh_rest[sel], view_dirs)

        ntx = (w + tile_size - 1) // tile_size
        nty = (h + tile_size - 1) // tile_size
        tx0 = np.clip(((mean2d[:, 0] - radius) // tile_size).astype(np.int64), 0, ntx - 1)
        tx1 = np.clip(((mean2d[:, 0] + radius) // tile_size).astype(np.int64), 0, ntx - 1)
        ty0 = np.clip(((mean2d[:, 1] - radius) // tile_size).astype(np.int64), 0, nty - 1)
        ty1 = np.clip(((mean2d[:, 1] + radius) // tile_size).astype(np.int64), 0, nty - 1)

        spans_x = tx1 - tx0 + 1
        spans_y = ty1 - ty0 + 1
        counts = spans_x * spans_y
        total = int(counts.sum())
        gauss_of_pair = np.repeat(np.arange(m), counts)
        # per-pair offset within its Gaussian's tile rectangle
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        local = np.arange(total) - np.repeat(starts, counts)
        px = tx0[gauss_of_pair] + local % spans_x[gauss_of_pair]
        py = ty0[gauss_of_pair] + local // spans_x[gauss_of_pair]
        tile_of_pair = py * ntx + px

        pair_order = np.argsort(tile_of_pair, kind="stable")
        tile_sorted = tile_of_pair[pair_order]
        gauss_sorted = gauss_of_pair[pair_order]
        tiles, tile_starts = np.unique(tile_sorted, return_index=True)
        tile_ends = np.concatenate([tile_starts[1:], [total]])

        chunk = 1024
        for tile, start, end in zip(tiles, tile_starts, tile_ends):
            tyi, txi = divmod(int(tile), ntx)
            x_lo, y_lo = txi * tile_size, tyi * tile_size
            tw = min(tile_size, w - x_lo)
            th = min(tile_size, h - y_lo)
            pxs = x_lo + 0.5 + np.arange(tw)
            pys = y_lo + 0.5 + np.arange(th)
            gx, gy = np.meshgrid(pxs, pys)
            gx = gx.ravel()
            gy = gy.ravel()

            t_run = np.ones(tw * th)
            c_acc = np.zeros((tw * th, 3))
            d_acc = np.zeros(tw * th)
            w_acc = np.zeros(tw * th)

            members = gauss_sorted[start:end]
            for s in range(0, members.size, chunk):
                g = members[s : s + chunk]
                dx = gx[None, :] - mean2d[g, 0][:, None]
                dy = gy[None, :] - mean2d[g, 1][:, None]
                q = (
                    inv_a[g][:, None] * dx * dx
                    + 2.0 * inv_b[g][:, None] * dx * dy
                    + inv_c[g][:, None] * dy * dy
                )
                av = opac[g][:, None] * np.exp(-0.5 * np.maximum(q, 0.0))
                np.minimum(av, ALPHA_CLAMP, out=av)
                av[av < ALPHA_SKIP] = 0.0

                cp = np.cumprod(1.0 - av, axis=0)
                t_excl = np.empty_like(cp)
                t_excl[0] = t_run
                t_excl[1:] = t_run[None, :] * cp[:-1]
                live = t_excl >= TRANSMITTANCE_EPS
                wgt = av * live * t_excl

                c_acc += np.einsum("gp,gc->pc", wgt, colors[g])
                d_acc += (wgt * depth_v[g][:, None]).sum(axis=0)
                w_acc += wgt.sum(axis=0)
                t_run = t_run * np.prod(1.0 - av * live, axis=0)
                if t_run.max() < TRANSMITTANCE_EPS:
                    break

            sl = (slice(y_lo, y_lo + th), slice(x_lo, x_lo + tw))
            rgb[sl] = c_acc.reshape(th, tw, 3)
            alpha[sl] = 1.0 - t_run.reshape(th, tw)
            depth_num[sl] = d_acc.reshape(th, tw)
            weight[sl] = w_acc.reshape(th, tw)

    depth = np.full((h, w), np.inf)
    valid = weight >= DEPTH_VALID_THRESHOLD
    depth[valid] = depth_num[valid] / weight[valid]
    return RenderOutput(rgb=rgb, alpha=alpha, depth=depth)
