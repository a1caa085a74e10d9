"""Gaussian-to-voxel splatting and the occupancy cross-entropy loss with analytic gradients.

Splatting evaluates the class-weighted kernel sum at every voxel center to
produce a dense semantic label grid. The loss interprets the per-class
evidence, together with a fixed empty-evidence mass, as a (C+1)-way
distribution per voxel and scores it against a target label grid; gradients
with respect to every Gaussian parameter are exact derivatives of that scalar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EMPTY, ClassConfig, GaussianScene, quat_to_rot
from .grid import GridSpec, OccupancyGrid, voxel_centers

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class SplatParams:
    cfg: ClassConfig
    use_index: bool = True  # restrict each Gaussian to its cutoff bounding box
    store_fields: bool = False


@dataclass(frozen=True)
class GaussianGrads:
    """Exact gradients of the occupancy loss per Gaussian, plus the loss itself."""

    d_means: np.ndarray  # (N,3)
    d_log_scales: np.ndarray  # (N,3)
    d_logits: np.ndarray  # (N,C)
    d_rotations: np.ndarray  # (N,4), ambient tangent (projected to the unit sphere)
    loss_value: float


def _block_flat_indices(spec: GridSpec, mean, radius):
    """Flat voxel indices whose centers may lie within `radius` of `mean`."""
    nx, ny, nz = spec.dims
    o = np.array(spec.origin)
    vs = spec.voxel_size
    lo = np.ceil((mean - radius - o) / vs - 0.5).astype(int)
    hi = np.floor((mean + radius - o) / vs - 0.5).astype(int)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, np.array([nx - 1, ny - 1, nz - 1]))
    if np.any(hi < lo):
        return None
    i = np.arange(lo[0], hi[0] + 1)
    j = np.arange(lo[1], hi[1] + 1)
    k = np.arange(lo[2], hi[2] + 1)
    I, J, K = np.meshgrid(i, j, k, indexing="ij")
    return (I + nx * (J + ny * K)).ravel()


def _iter_gaussian_blocks(scene: GaussianScene, spec: GridSpec, kappa, use_index):
    """Yield (gaussian index, flat voxel indices) in ascending Gaussian order."""
    all_voxels = None
    radii = kappa * np.exp(np.max(scene.log_scales, axis=1)) if len(scene) else None
    for gi in range(len(scene)):
        if use_index:
            flat = _block_flat_indices(spec, scene.means[gi], radii[gi])
            if flat is None:
                continue
        else:
            if all_voxels is None:
                all_voxels = np.arange(spec.num_voxels)
            flat = all_voxels
        yield gi, flat


def evidence_field(scene: GaussianScene, spec: GridSpec, params: SplatParams):
    """Dense per-class evidence F, shape (num_voxels, C), κ cutoff applied."""
    cfg = params.cfg
    C = cfg.num_classes
    F = np.zeros((spec.num_voxels, C))
    if len(scene) == 0:
        return F
    centers = voxel_centers(spec)
    probs = scene.class_probs()
    rots = quat_to_rot(scene.rotations)
    s2inv = np.exp(-2.0 * scene.log_scales)
    k2 = cfg.mahalanobis_cutoff**2
    for gi, flat in _iter_gaussian_blocks(scene, spec, cfg.mahalanobis_cutoff, params.use_index):
        d = centers[flat] - scene.means[gi]
        u = d @ rots[gi]  # Rᵀd rowwise
        q = (u * u) @ s2inv[gi]
        inside = q <= k2
        if not np.any(inside):
            continue
        rho = np.exp(-0.5 * q[inside])
        F[flat[inside]] += rho[:, None] * probs[gi]
    return F


def labels_from_field(F, empty_evidence):
    """Per-voxel argmax label, EMPTY where total evidence is below threshold."""
    total = F.sum(axis=1)
    lab = np.argmax(F, axis=1).astype(np.uint8)
    lab[total < empty_evidence] = EMPTY
    return lab


def splat(scene: GaussianScene, spec: GridSpec, params: SplatParams):
    """Rasterize the scene to an occupancy label grid.

    Returns (OccupancyGrid, F) where F is the dense per-class evidence when
    params.store_fields is set, else None.
    """
    if len(scene) and scene.num_classes != params.cfg.num_classes:
        raise ValueError("scene class count does not match splat config")
    F = evidence_field(scene, spec, params)
    grid = OccupancyGrid(spec, labels_from_field(F, params.cfg.empty_evidence))
    return grid, (F if params.store_fields else None)


def occupancy_loss(scene: GaussianScene, target: OccupancyGrid, params: SplatParams):
    """Loss value only; same objective as occupancy_loss_and_grads."""
    cfg = params.cfg
    spec = target.spec
    eps = cfg.empty_evidence
    t = target.labels
    F = evidence_field(scene, spec, params)
    denom = F.sum(axis=1) + eps
    is_empty = t == EMPTY
    sem_idx = np.nonzero(~is_empty)[0]
    sem_t = t[sem_idx].astype(np.int64)
    if np.any(sem_t >= cfg.num_classes):
        raise ValueError("target contains labels outside the class range")
    loss = np.sum(np.log(denom[is_empty])) - np.count_nonzero(is_empty) * np.log(eps)
    Pt = F[sem_idx, sem_t] / denom[sem_idx]
    loss += -np.sum(np.log(np.maximum(Pt, PROB_FLOOR)))
    return float(loss / spec.num_voxels)


# quaternion -> rotation-matrix Jacobian, for the unit quaternion (w,x,y,z)
def _dR_dquat(q):
    w, x, y, z = q
    dRw = 2.0 * np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    dRx = 2.0 * np.array([[0.0, y, z], [y, -2 * x, -w], [z, w, -2 * x]])
    dRy = 2.0 * np.array([[-2 * y, x, w], [x, 0.0, z], [-w, z, -2 * y]])
    dRz = 2.0 * np.array([[-2 * z, -w, x], [w, -2 * z, y], [x, y, 0.0]])
    return np.stack([dRw, dRx, dRy, dRz])  # (4,3,3)


def occupancy_loss_and_grads(scene: GaussianScene, target: OccupancyGrid, params: SplatParams):
    """Mean per-voxel (C+1)-way cross-entropy vs the target labels, with exact gradients.

    Per voxel, class probabilities are P_c = F_c/(S+ε) and P_EMPTY = ε/(S+ε)
    with S = ΣF and ε the empty-evidence mass; the loss is -log of the target's
    probability (floored at PROB_FLOOR), averaged over voxels. Voxels beyond a
    Gaussian's κ cutoff contribute zero gradient to that Gaussian.
    """
    cfg = params.cfg
    spec = target.spec
    C = cfg.num_classes
    N = len(scene)
    M = spec.num_voxels
    eps = cfg.empty_evidence
    t = target.labels

    F = evidence_field(scene, spec, params)
    S = F.sum(axis=1)
    denom = S + eps

    is_empty = t == EMPTY
    sem_idx = np.nonzero(~is_empty)[0]
    sem_t = t[sem_idx].astype(np.int64)
    if np.any(sem_t >= C):
        raise ValueError("target contains labels outside the class range")

    loss = np.sum(np.log(denom[is_empty])) - np.count_nonzero(is_empty) * np.log(eps)
    Ft = F[sem_idx, sem_t]
    Pt = Ft / denom[sem_idx]
    clamped = Pt < PROB_FLOOR
    loss += -np.sum(np.log(np.maximum(Pt, PROB_FLOOR)))
    loss /= M

    # per-voxel dL/dF, already including the 1/M averaging
    dLdF = np.zeros((M, C))
    dLdF[is_empty] = (1.0 / denom[is_empty])[:, None]
    active = sem_idx[~clamped]
    active_t = sem_t[~clamped]
    dLdF[active] = (1.0 / denom[active])[:, None]
    dLdF[active, active_t] -= 1.0 / F[active, active_t]
    dLdF /= M

    d_means = np.zeros((N, 3))
    d_log_scales = np.zeros((N, 3))
    d_rotations = np.zeros((N, 4))
    dLdp = np.zeros((N, C))

    if N:
        centers = voxel_centers(spec)
        probs = scene.class_probs()
        rots = quat_to_rot(scene.rotations)
        s2inv_all = np.exp(-2.0 * scene.log_scales)
        k2 = cfg.mahalanobis_cutoff**2
        for gi, flat in _iter_gaussian_blocks(scene, spec, cfg.mahalanobis_cutoff, params.use_index):
            R = rots[gi]
            s2inv = s2inv_all[gi]
            d = centers[flat] - scene.means[gi]
            u = d @ R
            q = (u * u) @ s2inv
            inside = q <= k2
            if not np.any(inside):
                continue
            flat = flat[inside]
            d = d[inside]
            u = u[inside]
            rho = np.exp(-0.5 * q[inside])
            g_rho = dLdF[flat] @ probs[gi]  # dL/dρ for this Gaussian per voxel
            w = g_rho * rho
            a = u * s2inv  # S⁻²·Rᵀd
            # dρ/dμ = ρ·Σ⁻¹d with Σ⁻¹d = R·a
            d_means[gi] = w @ (a @ R.T)
            # dρ/d(ls_k) = ρ·u_k²·s2inv_k
            d_log_scales[gi] = s2inv * (w @ (u * u))
            # dL/dp_c accumulates ρ·dL/dF_c; softmax backprop happens once at the end
            dLdp[gi] = rho @ dLdF[flat]
            # dρ/dR = -ρ·d·aᵀ
            dLdR = -np.einsum("v,vi,vj->ij", w, d, a)
            dq_hat = np.einsum("mij,ij->m", _dR_dquat(scene.rotations[gi]), dLdR)
            qv = scene.rotations[gi]
            d_rotations[gi] = dq_hat - qv * (qv @ dq_hat)  # project to unit-sphere tangent

        d_logits = probs * (dLdp - np.sum(dLdp * probs, axis=1, keepdims=True))
    else:
        d_logits = np.zeros((0, C))

    return GaussianGrads(
        d_means=d_means,
        d_log_scales=d_log_scales,
        d_logits=d_logits,
        d_rotations=d_rotations,
        loss_value=float(loss),
    )
