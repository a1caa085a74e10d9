"""Deterministic synthetic driving scenarios: corridor layout, moving agents, ego motion.

Everything is generated in closed form from a config, so scenarios double as
analytic ground truth: per-step ego-frame occupancy, agent boxes, map
polylines, the ego trajectory, and rigid-motion Gaussian flows for any scene
fitted at the first step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxes import Box, points_in_box
from .core import EMPTY, GaussianScene
from .flow import FlowField, Trajectory, Waypoint
from .grid import GridSpec, OccupancyGrid, voxel_centers
from .plan import unicycle_rollout


@dataclass(frozen=True)
class AgentSpec:
    """One moving agent: initial planar pose, box size, constant speed / turn rate."""

    class_id: int
    x: float
    y: float
    yaw: float = 0.0
    size: tuple = (4.0, 2.0, 1.6)
    speed: float = 0.0
    turn_rate: float = 0.0  # rad/s

    def pose_at(self, t):
        """Closed-form unicycle pose (x, y, yaw) after time t."""
        if self.turn_rate == 0.0:
            return (
                self.x + self.speed * t * math.cos(self.yaw),
                self.y + self.speed * t * math.sin(self.yaw),
                self.yaw,
            )
        dpsi = self.turn_rate * t
        r = self.speed / self.turn_rate
        dx = r * math.sin(dpsi)
        dy = r * (1.0 - math.cos(dpsi))
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return (self.x + c * dx - s * dy, self.y + s * dx + c * dy, self.yaw + dpsi)

    def box_at(self, t, z_center=None):
        x, y, yaw = self.pose_at(t)
        z = z_center if z_center is not None else self.size[2] / 2.0
        return Box((x, y, z), self.size, yaw, self.class_id)


@dataclass(frozen=True)
class LayoutConfig:
    """Static corridor along +x: drivable ground slab between two walls."""

    corridor_width: float = 8.0
    wall_thickness: float = 0.5
    wall_height: float = 2.0
    ground_thickness: float = 0.4
    drivable_class_id: int = 0
    wall_class_id: int = 1
    length: float = 100.0


@dataclass(frozen=True)
class ScenarioConfig:
    spec: GridSpec
    num_steps: int = 6
    dt: float = 0.5
    seed: int = 0
    layout: LayoutConfig = None
    agents: tuple = ()
    ego_speed: float = 0.0
    ego_curvature: float = 0.0
    num_classes: int = 0  # 0: inferred from layout/agent class ids

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        object.__setattr__(self, "agents", tuple(self.agents))

    def inferred_num_classes(self):
        if self.num_classes:
            return self.num_classes
        ids = [a.class_id for a in self.agents]
        if self.layout is not None:
            ids += [self.layout.drivable_class_id, self.layout.wall_class_id]
        return (max(ids) + 1) if ids else 1


def layout_boxes(layout: LayoutConfig):
    """Static layout as boxes in the observation frame (drivable first, walls after)."""
    if layout is None:
        return []
    half_w = layout.corridor_width / 2.0
    ground = Box(
        (0.0, 0.0, -layout.ground_thickness / 2.0),
        (layout.length, layout.corridor_width, layout.ground_thickness),
        0.0,
        layout.drivable_class_id,
    )
    wall_y = half_w + layout.wall_thickness / 2.0
    size = (layout.length, layout.wall_thickness, layout.wall_height)
    left = Box((0.0, wall_y, layout.wall_height / 2.0), size, 0.0, layout.wall_class_id)
    right = Box((0.0, -wall_y, layout.wall_height / 2.0), size, 0.0, layout.wall_class_id)
    return [ground, left, right]


def rasterize_boxes(boxes, spec: GridSpec):
    """Label voxels whose centers fall inside each oriented box; later boxes win."""
    labels = np.full(spec.num_voxels, EMPTY, dtype=np.uint8)
    centers = voxel_centers(spec)
    for box in boxes:
        inside = points_in_box(centers, box)
        labels[inside] = box.class_id
    return OccupancyGrid(spec, labels)


def map_polylines(layout: LayoutConfig):
    """Corridor boundaries and the center divider as map polylines."""
    if layout is None:
        return ()
    half_w = layout.corridor_width / 2.0
    half_l = layout.length / 2.0
    line = lambda y: np.array([[-half_l, y], [half_l, y]])
    return (
        ("boundary", line(half_w)),
        ("boundary", line(-half_w)),
        ("divider", line(0.0)),
    )


@dataclass(frozen=True)
class Scenario:
    """Generated ground truth; grids are expressed in the ego frame of each step."""

    cfg: ScenarioConfig
    gt_grids: tuple  # num_steps + 1 OccupancyGrids
    gt_boxes: tuple  # per step (0..num_steps), agent boxes in the observation frame
    gt_map: tuple
    gt_ego: Trajectory
    num_classes: int

    def agent_motions(self):
        """Per-agent future (x, y) waypoints (observation frame), aligned with gt_boxes[0]."""
        out = []
        for a in self.cfg.agents:
            steps = [a.pose_at(k * self.cfg.dt)[:2] for k in range(1, self.cfg.num_steps + 1)]
            out.append(np.array(steps))
        return tuple(out)


def generate(cfg: ScenarioConfig):
    """Build the scenario deterministically from its config."""
    C = cfg.inferred_num_classes()
    statics = layout_boxes(cfg.layout)
    ego = unicycle_rollout(cfg.ego_speed, cfg.ego_curvature, cfg.num_steps, cfg.dt)
    ego_poses = [Waypoint.identity()] + list(ego.waypoints)

    gt_grids = []
    gt_boxes = []
    for k in range(cfg.num_steps + 1):
        t = k * cfg.dt
        agent_boxes = [a.box_at(t) for a in cfg.agents]
        gt_boxes.append(tuple(agent_boxes))
        pose = ego_poses[k]
        frame_boxes = [b.transformed(pose.x, pose.y, pose.psi) for b in statics + agent_boxes]
        grid = rasterize_boxes(frame_boxes, cfg.spec)
        gt_grids.append(OccupancyGrid(cfg.spec, grid.labels, C))

    return Scenario(
        cfg=cfg,
        gt_grids=tuple(gt_grids),
        gt_boxes=tuple(gt_boxes),
        gt_map=map_polylines(cfg.layout),
        gt_ego=ego,
        num_classes=C,
    )


def config_to_dict(cfg: ScenarioConfig):
    return {
        "spec": {
            "origin": list(cfg.spec.origin),
            "dims": list(cfg.spec.dims),
            "voxel_size": cfg.spec.voxel_size,
        },
        "num_steps": cfg.num_steps,
        "dt": cfg.dt,
        "seed": cfg.seed,
        "layout": None
        if cfg.layout is None
        else {
            "corridor_width": cfg.layout.corridor_width,
            "wall_thickness": cfg.layout.wall_thickness,
            "wall_height": cfg.layout.wall_height,
            "ground_thickness": cfg.layout.ground_thickness,
            "drivable_class_id": cfg.layout.drivable_class_id,
            "wall_class_id": cfg.layout.wall_class_id,
            "length": cfg.layout.length,
        },
        "agents": [
            {
                "class_id": a.class_id,
                "x": a.x,
                "y": a.y,
                "yaw": a.yaw,
                "size": list(a.size),
                "speed": a.speed,
                "turn_rate": a.turn_rate,
            }
            for a in cfg.agents
        ],
        "ego_speed": cfg.ego_speed,
        "ego_curvature": cfg.ego_curvature,
        "num_classes": cfg.num_classes,
    }


def config_from_dict(doc):
    from .grid import GridSpec as _GridSpec

    try:
        spec = _GridSpec(
            tuple(doc["spec"]["origin"]), tuple(doc["spec"]["dims"]), doc["spec"]["voxel_size"]
        )
        layout = None
        if doc.get("layout") is not None:
            layout = LayoutConfig(**doc["layout"])
        agents = tuple(
            AgentSpec(
                class_id=a["class_id"],
                x=a["x"],
                y=a["y"],
                yaw=a.get("yaw", 0.0),
                size=tuple(a.get("size", (4.0, 2.0, 1.6))),
                speed=a.get("speed", 0.0),
                turn_rate=a.get("turn_rate", 0.0),
            )
            for a in doc.get("agents", [])
        )
        return ScenarioConfig(
            spec=spec,
            num_steps=doc.get("num_steps", 6),
            dt=doc.get("dt", 0.5),
            seed=doc.get("seed", 0),
            layout=layout,
            agents=agents,
            ego_speed=doc.get("ego_speed", 0.0),
            ego_curvature=doc.get("ego_curvature", 0.0),
            num_classes=doc.get("num_classes", 0),
        )
    except KeyError as e:
        raise ValueError(f"scenario config missing key {e.args[0]!r}") from e


def save_scenario(directory, scenario: Scenario):
    """Write the bundle: scenario.json plus one grid file per step."""
    import json
    import os

    from . import io as gio

    os.makedirs(directory, exist_ok=True)
    doc = {
        "format": "gauss-scenario",
        "version": 1,
        "config": config_to_dict(scenario.cfg),
        "num_classes": scenario.num_classes,
        "ego": [[w.x, w.y, w.psi] for w in scenario.gt_ego.waypoints],
        "boxes": [
            [
                {"center": list(b.center), "size": list(b.size), "yaw": b.yaw, "class_id": b.class_id}
                for b in step_boxes
            ]
            for step_boxes in scenario.gt_boxes
        ],
        "map": [[cat, np.asarray(pts).tolist()] for cat, pts in scenario.gt_map],
    }
    with open(os.path.join(directory, "scenario.json"), "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    for k, grid in enumerate(scenario.gt_grids):
        gio.save_grid(os.path.join(directory, f"grid_{k:03d}.occ"), grid)


def load_scenario(directory):
    import json
    import os

    from . import io as gio

    with open(os.path.join(directory, "scenario.json")) as f:
        doc = json.load(f)
    if doc.get("format") != "gauss-scenario" or doc.get("version") != 1:
        raise ValueError("unsupported scenario bundle")
    cfg = config_from_dict(doc["config"])
    grids = tuple(
        gio.load_grid(os.path.join(directory, f"grid_{k:03d}.occ")) for k in range(cfg.num_steps + 1)
    )
    boxes = tuple(
        tuple(
            Box(tuple(b["center"]), tuple(b["size"]), b["yaw"], b["class_id"]) for b in step_boxes
        )
        for step_boxes in doc["boxes"]
    )
    gt_map = tuple((cat, np.array(pts)) for cat, pts in doc["map"])
    ego = Trajectory(tuple(Waypoint(*w) for w in doc["ego"]), cfg.dt)
    return Scenario(
        cfg=cfg,
        gt_grids=grids,
        gt_boxes=boxes,
        gt_map=gt_map,
        gt_ego=ego,
        num_classes=doc.get("num_classes", cfg.inferred_num_classes()),
    )


def gt_flows(scenario: Scenario, scene: GaussianScene, margin=0.5):
    """Analytic rigid-motion flows for a scene fitted at step 0.

    A Gaussian follows an agent when its argmax class matches and its mean lies
    inside the agent's step-0 box (inflated by `margin`); everything else gets
    zero displacement. Displacements are cumulative from step 0, observation
    frame.
    """
    cfg = scenario.cfg
    F = cfg.num_steps
    N = len(scene)
    steps = np.zeros((F, N, 3))
    if N == 0:
        return FlowField(steps)
    arg = np.argmax(scene.logits, axis=1)
    for a in cfg.agents:
        sel = (arg == a.class_id) & points_in_box(scene.means, a.box_at(0.0), margin)
        if not np.any(sel):
            continue
        x0, y0, yaw0 = a.pose_at(0.0)
        c0, s0 = math.cos(yaw0), math.sin(yaw0)
        dx = scene.means[sel, 0] - x0
        dy = scene.means[sel, 1] - y0
        # local offset in the agent frame at step 0
        lx = c0 * dx + s0 * dy
        ly = -s0 * dx + c0 * dy
        for k in range(1, F + 1):
            xk, yk, yawk = a.pose_at(k * cfg.dt)
            ck, sk = math.cos(yawk), math.sin(yawk)
            px = xk + ck * lx - sk * ly
            py = yk + sk * lx + ck * ly
            steps[k - 1, sel, 0] = px - scene.means[sel, 0]
            steps[k - 1, sel, 1] = py - scene.means[sel, 1]
    return FlowField(steps)
