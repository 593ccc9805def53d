"""Command-line entry point: ``qcommit <command> ...``.

Exit codes: 0 success, 2 invalid case or input file, 3 training contract
violation, 4 size guard.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import svg
from .envs import ScenarioGenerator, forecast_scenario, rollout_day_ahead
from .errors import QcommitError, SizeGuardError, ValidationError
from .evaluation import METRICS, average_metrics, heldout_scenarios, plan_metrics
from .grid import GridCase, flow_matrices, load_case
from .oracle import brute_force_uc, export_lp, priority_list
from .rl import (
    DA_DEFAULTS,
    RT_DEFAULTS,
    TrainConfig,
    deterministic_policy,
    dqn_checkpoint,
    dqn_from_checkpoint,
    greedy_plan,
    rollout_real_time,
    sac_checkpoint,
    train_day_ahead,
    train_real_time,
    zero_policy,
)

CURVE_HEADER = ["episode", "return", "violation", "epsilon", "loss"]
HELDOUT_SCENARIOS = 20


# ---------------------------------------------------------------------------
# file helpers


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, doc) -> None:
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def curve_rows(curve) -> list:
    return [[r.episode, r.ret, r.violation, r.epsilon, r.loss] for r in curve]


def curve_totals(curve) -> dict:
    def total(vals):
        vals = [v for v in vals if v is not None]
        return float(sum(vals)) if vals else None

    return {
        "episodes": len(curve),
        "return": total(r.ret for r in curve),
        "violation": total(r.violation for r in curve),
        "loss": total(r.loss for r in curve),
    }


def read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}", "$") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ValidationError(f"JSON parse error at byte offset {offset}: {exc.msg}", str(path)) from None


class RunLog:
    """Timestamps and wall-clock numbers go here, never into result files."""

    def __init__(self, out: Path):
        self.lines = []
        self.out = out

    def __call__(self, msg: str) -> None:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.lines.append(f"{stamp} {msg}")

    def flush(self) -> None:
        atomic_write(self.out / "run.log", "\n".join(self.lines) + "\n")


def thread_cap() -> int:
    raw = os.environ.get("QCOMMIT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValidationError(f"QCOMMIT_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def open_case(source: str) -> GridCase:
    try:
        return load_case(source)
    except OSError as exc:
        raise ValidationError(f"cannot read {source}: {exc.strerror}", "$") from None


def make_config(path, defaults: dict, seed=None, agent=None) -> TrainConfig:
    doc = dict(defaults)
    if path:
        doc.update(read_json(path))
    if seed is not None:
        doc["seed"] = seed
    if agent is not None:
        doc["agent"] = agent
    return TrainConfig.from_dict(doc)


def run_config(command: str, args, config: TrainConfig, **extra) -> dict:
    doc = {"command": command, "case": str(args.case), "out": str(args.out), "train": config.to_dict()}
    doc.update(extra)
    return doc


def _days(case: GridCase, config: TrainConfig):
    return list(config.days) if config.days else list(range(case.days))


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    case = open_case(args.case)
    print(f"{case.name}: {case.summary()}")
    print(f"  {case.details()}")
    m = flow_matrices(case)
    checks = [
        ("schema and field ranges", True),
        ("network connected", True),
        ("flow matrices finite", bool(np.all(np.isfinite(m.ptdf)) and np.all(np.isfinite(m.volt_sens)))),
        ("p_min <= p_max", bool(np.all(case.p_min <= case.p_max))),
        ("ramp limits r_d <= 0 <= r_u", bool(np.all(case.r_d <= 0) and np.all(case.r_u >= 0))),
        ("profiles cover whole days", case.days >= 1),
    ]
    ok = all(passed for _, passed in checks)
    for name, passed in checks:
        print(f"  [{'ok' if passed else 'FAIL'}] {name}")
    return 0 if ok else 2


def da_metrics(case: GridCase, agent, days) -> dict:
    rows = [plan_metrics(case, greedy_plan(case, agent, d), [forecast_scenario(case, d)]) for d in days]
    return average_metrics(rows)


def cmd_train_da(args) -> int:
    case = open_case(args.case)
    config = make_config(args.config, DA_DEFAULTS, args.seed, args.agent)
    out = Path(args.out)
    log = RunLog(out)
    log(f"train-da start case={case.name} agent={config.agent} seed={config.seed}")
    write_json(out / "config.json", run_config("train-da", args, config))
    res = train_day_ahead(case, config)
    days = _days(case, config)
    metrics = da_metrics(case, res.agent, days)
    metrics["wall_time_s"] = res.wall_time_s
    metrics["curve_totals"] = curve_totals(res.curve)
    atomic_write(out / "curve.csv", csv_text(CURVE_HEADER, curve_rows(res.curve)))
    atomic_write(out / "eval.csv", csv_text(["episode", "greedy_return"],
                                            [[e["episode"], e["return"]] for e in res.evals]))
    atomic_write(out / "trajectories.csv", csv_text(
        ["episode", "t", "e_prev", "e", "startup", "shutdown"],
        [[r["episode"], r["t"], _bits(r["e_prev"]), _bits(r["e"]), _bits(r["startup"]), _bits(r["shutdown"])]
         for r in res.trajectories]))
    write_json(out / "checkpoint.json", dqn_checkpoint(res.agent, case))
    write_json(out / "metrics.json", metrics)
    atomic_write(out / "curve.svg", svg.line_plot({config.agent: [r.ret for r in res.curve]},
                                                  f"day-ahead return, {case.name}"))
    log(f"train-da done wall_time_s={res.wall_time_s:.3f}")
    log.flush()
    print(_metrics_line(metrics))
    return 0


def _bits(values) -> str:
    return "".join(str(int(v)) for v in values)


def _metrics_line(m: dict) -> str:
    return " ".join(f"{k}={m[k]:.6g}" for k in METRICS if k in m)


def cmd_train_rt(args) -> int:
    case = open_case(args.case)
    config = make_config(args.config, RT_DEFAULTS, args.seed, args.agent)
    out = Path(args.out)
    log = RunLog(out)
    da_agent = dqn_from_checkpoint(read_json(args.da_checkpoint), case)
    day = _days(case, config)[0]
    plan = greedy_plan(case, da_agent, day)
    log(f"train-rt start case={case.name} agent={config.agent} seed={config.seed} day={day}")
    write_json(out / "config.json", run_config("train-rt", args, config, da_checkpoint=str(args.da_checkpoint)))
    res = train_real_time(case, plan, config)
    gen = ScenarioGenerator(config.sigma_load, config.sigma_pv, config.sigma_wind, seed=config.seed)
    scenarios = heldout_scenarios(case, day, gen, HELDOUT_SCENARIOS)
    metrics = plan_metrics(case, plan, scenarios, deterministic_policy(res.agent))
    metrics["wall_time_s"] = res.wall_time_s
    metrics["zero_action_baseline"] = plan_metrics(case, plan, scenarios, zero_policy(case))
    metrics["curve_totals"] = curve_totals(res.curve)
    atomic_write(out / "curve.csv", csv_text(CURVE_HEADER, curve_rows(res.curve)))
    adj = res.extra["adjustments"]
    atomic_write(out / "adjustments.csv", csv_text([f"vpp{i}" for i in range(case.n_vpps)], adj.tolist()))
    write_json(out / "checkpoint.json", sac_checkpoint(res.agent, case))
    write_json(out / "metrics.json", metrics)
    atomic_write(out / "curve.svg", svg.line_plot({"return": [r.ret for r in res.curve],
                                                   "violation": [r.violation for r in res.curve]},
                                                  f"real-time training, {case.name}", ylabel="per episode"))
    atomic_write(out / "adjustment.svg", svg.histogram({config.agent: adj}, "VPP adjustment during training"))
    log(f"train-rt done wall_time_s={res.wall_time_s:.3f}")
    log.flush()
    print(_metrics_line(metrics))
    return 0


def _compare_job(job: dict) -> dict:
    """One (method, seed) run of the comparison; returns plain data."""
    case = load_case(job["case"])
    seed = job["seed"]
    start = time.perf_counter()
    gen = ScenarioGenerator(job["sigma_load"], job["sigma_pv"], job["sigma_wind"], seed=seed)
    curve = []
    if job["method"] == "priority_list":
        plans = {d: rollout_day_ahead(case, priority_list(case, d).best_actions, d)[0] for d in job["days"]}
        policy = zero_policy(case)
    else:
        da_cfg = TrainConfig.from_dict({**job["da"], "seed": seed, "agent": job["method"]})
        res = train_day_ahead(case, da_cfg)
        curve = [r.ret for r in res.curve]
        plans = {d: greedy_plan(case, res.agent, d) for d in job["days"]}
        policy = zero_policy(case)
        if case.n_vpps:
            rt_cfg = TrainConfig.from_dict({**job["rt"], "seed": seed, "agent": job["method"]})
            rt = train_real_time(case, plans[job["days"][0]], rt_cfg)
            policy = deterministic_policy(rt.agent)
    rows, adjustments = [], []
    for d, plan in plans.items():
        scenarios = heldout_scenarios(case, d, gen, job["scenarios"])
        rows.append(plan_metrics(case, plan, scenarios, policy))
        for sc in scenarios[:5]:
            run = rollout_real_time(case, plan, sc, policy)
            adjustments += [float(a) for i in run["infos"] for a in i.action]
    metrics = average_metrics(rows)
    metrics["wall_time_s"] = time.perf_counter() - start
    da_reward = {d: plans[d].total_reward for d in plans}
    return {"method": job["method"], "seed": seed, "metrics": metrics, "curve": curve,
            "adjustments": adjustments, "da_reward": da_reward}


def cmd_compare(args) -> int:
    case = open_case(args.case)
    doc = read_json(args.config) if args.config else {}
    unknown = set(doc) - {"da", "rt", "scenarios", "sigma_load", "sigma_pv", "sigma_wind", "days"}
    if unknown:
        raise ValidationError(f"unknown compare config keys {sorted(unknown)}", str(args.config))
    da = {**DA_DEFAULTS, **doc.get("da", {})}
    rt = {**RT_DEFAULTS, **doc.get("rt", {})}
    days = doc.get("days") or list(range(case.days))
    TrainConfig.from_dict(da), TrainConfig.from_dict(rt)  # fail fast on bad configs
    out = Path(args.out)
    log = RunLog(out)
    common = {
        "case": str(Path(args.case).resolve()) if Path(args.case).exists() else args.case,
        "days": days, "scenarios": int(doc.get("scenarios", HELDOUT_SCENARIOS)),
        "sigma_load": doc.get("sigma_load", 0.1), "sigma_pv": doc.get("sigma_pv", 0.1),
        "sigma_wind": doc.get("sigma_wind", 0.1), "da": da, "rt": rt,
    }
    methods = ["priority_list", "classical", "quantum"]
    jobs = [{**common, "method": m, "seed": s} for m in methods for s in range(args.seeds)]
    write_json(out / "config.json", {"command": "compare", "case": str(args.case), "out": str(out),
                                     "seeds": args.seeds, **{k: v for k, v in common.items() if k != "case"}})
    workers = min(thread_cap(), len(jobs))
    log(f"compare start case={case.name} seeds={args.seeds} workers={workers}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_compare_job, jobs))
    else:
        results = [_compare_job(j) for j in jobs]
    by_method = {m: [r for r in results if r["method"] == m] for m in methods}
    table = []
    for m in methods:
        avg = average_metrics([r["metrics"] for r in by_method[m]])
        table.append([m] + [avg[k] for k in METRICS])
    atomic_write(out / "comparison.csv", csv_text(["method", *METRICS], table))
    atomic_write(out / "comparison_by_seed.csv", csv_text(
        ["method", "seed", *METRICS], [[r["method"], r["seed"]] + [r["metrics"][k] for k in METRICS] for r in results]))

    summary = {"case": case.name, "seeds": args.seeds, "days": days}
    optimum = {}
    for d in days:
        try:
            optimum[d] = brute_force_uc(case, d).best_value
        except SizeGuardError:
            break
    if optimum:
        checks = []
        for r in by_method["priority_list"]:
            for d, v in optimum.items():
                heuristic = r["da_reward"][d]
                checks.append(heuristic <= v)
        summary["oracle"] = {
            "optimum_cost": {str(d): -v * case.reward_scale for d, v in optimum.items()},
            "priority_list_cost": {str(d): -by_method["priority_list"][0]["da_reward"][d] * case.reward_scale
                                   for d in optimum},
            "dominance_holds": all(checks),
        }
    viol = {m: float(np.mean([r["metrics"]["violation"] for r in by_method[m]])) for m in ("classical", "quantum")}
    if viol["quantum"] < viol["classical"]:
        ordering = "quantum < classical"
    elif viol["quantum"] > viol["classical"]:
        ordering = "quantum > classical"
    else:
        ordering = "quantum = classical"
    summary["violation"] = viol
    summary["violation_ordering"] = ordering
    write_json(out / "summary.json", summary)

    curves = {}
    for m in ("classical", "quantum"):
        runs = [r["curve"] for r in by_method[m] if r["curve"]]
        if runs:
            curves[m] = np.mean(np.array(runs), axis=0)
    atomic_write(out / "reward_curves.svg", svg.line_plot(curves, f"day-ahead training return, {case.name}"))
    atomic_write(out / "vpp_adjustment.svg", svg.histogram(
        {m: sum((r["adjustments"] for r in by_method[m]), []) for m in methods}, "VPP adjustment (held-out)"))
    for r in results:
        log(f"{r['method']} seed={r['seed']} wall_time_s={r['metrics']['wall_time_s']:.3f}")
    log.flush()

    width = max(len(m) for m in methods)
    print(f"{'method':<{width}}  " + "  ".join(f"{k:>20}" for k in METRICS))
    for row in table:
        print(f"{row[0]:<{width}}  " + "  ".join(f"{v:>20.6g}" for v in row[1:]))
    if "oracle" in summary:
        print(f"priority-list dominance vs exhaustive optimum: {'ok' if summary['oracle']['dominance_holds'] else 'VIOLATED'}")
    print(f"violation ordering (reported, not gated): {ordering}")
    return 0


def cmd_oracle(args) -> int:
    case = open_case(args.case)
    res = brute_force_uc(case, args.day)
    doc = {
        "case": case.name,
        "day": args.day,
        "best_value": res.best_value,
        "best_cost": -res.best_value * case.reward_scale,
        "schedule": res.best_actions,
        "evaluated_count": res.evaluated_count,
    }
    print(f"optimum reward {res.best_value:.10g} (cost {doc['best_cost']:.10g}) over {res.evaluated_count} sequences")
    for t, e in enumerate(res.best_actions):
        print(f"  t={t}: {_bits(e)}")
    if args.out:
        write_json(Path(args.out), doc)
    else:
        print(json.dumps(doc, sort_keys=True))
    if args.lp:
        atomic_write(Path(args.lp), export_lp(case, args.day))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcommit", description="Quantum RL for two-stage unit commitment.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a case file and print its summary")
    v.add_argument("case")
    v.set_defaults(func=cmd_validate)

    for name, func, needs_da in (("train-da", cmd_train_da, False), ("train-rt", cmd_train_rt, True)):
        t = sub.add_parser(name, help=f"{'day-ahead DQN' if name == 'train-da' else 'real-time SAC'} training")
        t.add_argument("--case", required=True)
        if needs_da:
            t.add_argument("--da-checkpoint", required=True)
        t.add_argument("--config", help="JSON file of training settings")
        t.add_argument("--out", required=True)
        t.add_argument("--seed", type=int)
        t.add_argument("--agent", choices=["quantum", "classical"])
        t.set_defaults(func=func)

    c = sub.add_parser("compare", help="priority list vs classical vs quantum")
    c.add_argument("--case", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--seeds", type=int, default=1)
    c.add_argument("--config", help="JSON with optional da, rt, scenarios, sigma_*, days")
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", help="exhaustive day-ahead optimum")
    o.add_argument("--case", required=True)
    o.add_argument("--day", type=int, default=0)
    o.add_argument("--out", help="write the optimum as JSON here")
    o.add_argument("--lp", help="also export the instance in LP format")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QcommitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
