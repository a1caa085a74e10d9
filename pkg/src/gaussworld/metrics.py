"""Evaluation metrics: occupancy mIoU/IoU, trajectory L2 error, collision rate, forecast scores."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import rects_overlap
from .core import EMPTY
from .flow import Trajectory, Waypoint, compose
from .grid import OccupancyGrid, voxel_centers


def miou_iou(pred: OccupancyGrid, gt: OccupancyGrid):
    """Semantic mIoU, binary occupied IoU, and per-class IoUs.

    mIoU averages only classes present in the ground truth; per_class maps
    every class present in either grid to its intersection-over-union.
    """
    if pred.spec != gt.spec:
        raise ValueError("grids must share the same spec")
    p, g = pred.labels, gt.labels
    classes = sorted(set(np.unique(g[g != EMPTY])) | set(np.unique(p[p != EMPTY])))
    per_class = {}
    present_in_gt = []
    for c in classes:
        inter = int(np.sum((p == c) & (g == c)))
        union = int(np.sum((p == c) | (g == c)))
        iou = inter / union if union else 0.0
        per_class[int(c)] = iou
        if np.any(g == c):
            present_in_gt.append(iou)
    miou = float(np.mean(present_in_gt)) if present_in_gt else 1.0
    p_occ, g_occ = p != EMPTY, g != EMPTY
    union_occ = int(np.sum(p_occ | g_occ))
    iou = float(np.sum(p_occ & g_occ) / union_occ) if union_occ else 1.0
    return miou, iou, per_class


def l2_errors(plan: Trajectory, gt: Trajectory, horizons=(2, 4, 6), mode="at-step"):
    """Planar displacement errors at the given horizon steps (1-indexed).

    'at-step' evaluates the error at the horizon waypoint; 'averaged' means the
    per-step errors over all steps up to and including the horizon.
    """
    if mode not in ("at-step", "averaged"):
        raise ValueError("mode must be 'at-step' or 'averaged'")
    n = min(len(plan), len(gt))
    errs = np.linalg.norm(plan.xy()[:n] - gt.xy()[:n], axis=1)
    out = []
    for h in horizons:
        if not 1 <= h <= n:
            raise ValueError(f"horizon {h} outside trajectory length {n}")
        if mode == "at-step":
            out.append(float(errs[h - 1]))
        else:
            out.append(float(np.mean(errs[:h])))
    return out


@dataclass(frozen=True)
class CollisionScenario:
    """Ground truth for collision checking, all in the observation frame at time T.

    boxes_per_step[k] holds other agents' boxes at future step k+1; grids, when
    given, are ego-frame occupancy forecasts aligned to gt_ego waypoints.
    """

    boxes_per_step: tuple = ()
    grids: tuple = ()
    gt_ego: Trajectory = None
    obstacle_class_ids: frozenset = field(default_factory=frozenset)
    z_slab: tuple = (0.2, 2.0)


def _footprint_hits_grid(grid: OccupancyGrid, rel: Waypoint, footprint, obstacle_ids, z_slab):
    centers = voxel_centers(grid.spec)
    labels = grid.labels
    occupied = labels != EMPTY
    if obstacle_ids:
        occupied &= np.isin(labels, sorted(obstacle_ids))
    occupied &= (centers[:, 2] >= z_slab[0]) & (centers[:, 2] <= z_slab[1])
    if not np.any(occupied):
        return False
    pts = centers[occupied]
    c, s = math.cos(rel.psi), math.sin(rel.psi)
    dx = pts[:, 0] - rel.x
    dy = pts[:, 1] - rel.y
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return bool(np.any((np.abs(lx) <= footprint[0] / 2.0) & (np.abs(ly) <= footprint[1] / 2.0)))


def _collides_at_step(plan: Trajectory, scenario: CollisionScenario, step, footprint):
    w = plan.waypoints[step - 1]
    ego_rect = (w.x, w.y, w.psi, footprint[0], footprint[1])
    if scenario.boxes_per_step and step <= len(scenario.boxes_per_step):
        for box in scenario.boxes_per_step[step - 1]:
            b = (box.center[0], box.center[1], box.yaw, box.size[0], box.size[1])
            if rects_overlap(ego_rect, b):
                return True
    if scenario.grids and step <= len(scenario.grids):
        grid = scenario.grids[step - 1]
        ego_frame = (
            scenario.gt_ego.waypoints[step - 1] if scenario.gt_ego is not None else Waypoint.identity()
        )
        rel = compose(ego_frame.inverse(), w)
        if _footprint_hits_grid(
            grid, rel, footprint, scenario.obstacle_class_ids, scenario.z_slab
        ):
            return True
    return False


def collision_rate(plans, scenarios, horizons=(2, 4, 6), footprint=(4.6, 1.9)):
    """Percentage of (plan, scenario) samples colliding at or before each horizon.

    A sample collides at horizon h if, at any step <= h, the ego footprint at
    the planned waypoint pose intersects a ground-truth agent box or an
    obstacle-class occupied voxel.
    """
    if len(plans) != len(scenarios):
        raise ValueError("one scenario per plan is required")
    n = len(plans)
    rates = []
    for h in horizons:
        hits = 0
        for plan, scenario in zip(plans, scenarios):
            if any(
                _collides_at_step(plan, scenario, k, footprint)
                for k in range(1, min(h, len(plan)) + 1)
            ):
                hits += 1
        rates.append(100.0 * hits / n if n else 0.0)
    return rates


def forecast_eval(pred_grids, gt_grids, horizons=(2, 4, 6)):
    """Per-horizon (mIoU, IoU) for aligned grid sequences, plus their averages.

    Index 0 of each sequence is the current frame; horizons index future steps.
    The averages cover exactly the listed horizons.
    """
    if len(pred_grids) != len(gt_grids):
        raise ValueError("prediction and ground-truth sequences must align")
    per_horizon = {}
    for h in horizons:
        if not 0 <= h < len(pred_grids):
            raise ValueError(f"horizon {h} outside sequence length {len(pred_grids)}")
        m, i, _ = miou_iou(pred_grids[h], gt_grids[h])
        per_horizon[int(h)] = (m, i)
    avg_miou = float(np.mean([v[0] for v in per_horizon.values()]))
    avg_iou = float(np.mean([v[1] for v in per_horizon.values()]))
    return {"per_horizon": per_horizon, "avg": (avg_miou, avg_iou)}
