"""Plan through a corridor with an oncoming vehicle.

The planner rolls out a small lattice of constant-speed, constant-curvature
candidates, forecasts the scene along each one, and scores collision, comfort,
and deviation from a reference. Here a fast reference trajectory would drive
straight into an oncoming vehicle; the planner instead picks the slow straight
candidate that lets the vehicle pass.

Run: python3 demos/04_plan_corridor.py
"""

import math

import numpy as np

from gaussworld import (
    AgentSpec,
    ClassConfig,
    CollisionScenario,
    EMPTY,
    GaussianScene,
    GridSpec,
    LayoutConfig,
    PlannerConfig,
    ScenarioConfig,
    SplatParams,
    collision_rate,
    generate,
    gt_flows,
    plan,
    unicycle_rollout,
)
from gaussworld.grid import voxel_centers


def voxel_perfect_scene(grid, num_classes):
    centers = voxel_centers(grid.spec)
    occ = grid.labels != EMPTY
    means = centers[occ]
    labels = grid.labels[occ]
    n = len(means)
    logits = np.zeros((n, num_classes))
    logits[np.arange(n), labels] = 6.0
    return GaussianScene(
        means,
        np.full((n, 3), math.log(0.12)),
        np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)),
        logits,
        tuple(f"class_{c}" for c in range(num_classes)),
    )


def main():
    spec = GridSpec(origin=(-4.0, -6.0, -0.5), dims=(56, 24, 6), voxel_size=0.5)
    oncoming = AgentSpec(class_id=2, x=16.0, y=0.0, yaw=math.pi, speed=2.0)
    cfg = ScenarioConfig(
        spec=spec,
        num_steps=6,
        dt=0.5,
        layout=LayoutConfig(corridor_width=8.0, length=60.0),
        agents=(oncoming,),
    )
    scenario = generate(cfg)
    scene = voxel_perfect_scene(scenario.gt_grids[0], scenario.num_classes)
    flows = gt_flows(scenario, scene)
    params = SplatParams(ClassConfig(scenario.num_classes, dynamic_class_ids=frozenset({2})))

    pcfg = PlannerConfig(
        num_steps=6,
        dt=0.5,
        speeds=(1.0, 2.0, 4.0),
        curvatures=(-0.15, 0.0, 0.15),
        drivable_class_ids=frozenset({0}),
    )
    reference = unicycle_rollout(speed=4.0, curvature=0.0, num_steps=6, dt=0.5)
    best, table = plan(scene, flows, spec, pcfg, params, reference)

    print("candidate costs (collision / comfort / deviation / total):")
    for i, row in enumerate(table):
        marker = "  <-- chosen" if np.allclose(row["total"], min(r["total"] for r in table)) else ""
        print(
            f"  {i}: {row['collision']:7.1f} / {row['comfort']:5.2f} / "
            f"{row['deviation']:5.2f} / {row['total']:8.2f}{marker}"
        )

    collisions = CollisionScenario(boxes_per_step=scenario.gt_boxes[1:])
    horizons = (2, 4, 6)
    planner_rates = collision_rate([best], [collisions], horizons)
    reference_rates = collision_rate([reference], [collisions], horizons)
    print("\nhorizon steps:", horizons)
    print("planner collision rate:  ", [f"{r:.0f}%" for r in planner_rates])
    print("reference collision rate:", [f"{r:.0f}%" for r in reference_rates])
    print("\nplanned x positions:", np.round(best.xy()[:, 0], 2))


if __name__ == "__main__":
    main()
