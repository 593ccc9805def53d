"""Cost and violation metrics for a day-ahead plan under realized scenarios."""
from __future__ import annotations

import numpy as np

from .envs import DayAheadPlan, ScenarioGenerator, sample_scenario, violation_degree
from .grid import GridCase
from .rl import rollout_real_time, zero_policy

METRICS = ("total_cost", "operational_cost", "startup_cost", "violation", "adjustment_output_mw", "wall_time_s")

# scenario indices at or above this are never used for training
HELDOUT_OFFSET = 1_000_000


def plan_metrics(case: GridCase, plan: DayAheadPlan, scenarios, policy=None) -> dict:
    """Mean over scenarios of the two-stage cost of ``plan``.

    startup_cost is the plan's start-up bill. operational_cost adds fuel to
    the real-time shed, curtailment and VPP payments. total_cost further adds
    the priced voltage and branch violations. violation is the summed
    violation degree (p.u.), adjustment_output_mw the summed |p_vpp|.
    """
    policy = policy or zero_policy(case)
    rt_ops, penalty, viol, adj = [], [], [], []
    for sc in scenarios:
        run = rollout_real_time(case, plan, sc, policy)
        infos = run["infos"]
        rt_ops.append(sum(case.c_ls * i.shed + case.c_curt * i.curtail + i.vpp_cost for i in infos))
        penalty.append(sum(case.lambda_v * i.voltage_violation + case.lambda_b * i.branch_violation for i in infos))
        viol.append(sum(violation_degree(i, case) for i in infos))
        adj.append(run["adjustment"])
    startup = float(plan.costs["startup"])
    operational = float(plan.costs["fuel"] + np.mean(rt_ops))
    return {
        "total_cost": startup + operational + float(np.mean(penalty)),
        "operational_cost": operational,
        "startup_cost": startup,
        "violation": float(np.mean(viol)),
        "adjustment_output_mw": float(np.mean(adj)),
    }


def heldout_scenarios(case: GridCase, day: int, gen: ScenarioGenerator, count: int) -> list:
    return [sample_scenario(gen, case, day, HELDOUT_OFFSET + k) for k in range(count)]


def average_metrics(rows: list[dict]) -> dict:
    keys = [k for k in METRICS if all(k in r for r in rows)]
    return {k: float(np.mean([r[k] for r in rows])) for k in keys}
