"""Power-system data model, linearized network evaluation and dispatch.

Network model (lossless, solver-free):

* active flows from DC power-transfer distribution factors with bus 0 as
  the slack, in MW;
* voltage deviations from the LinDistFlow form dv = 2 (R p + X q), where
  R and X are the inverses of the slack-reduced Laplacians weighted by
  1/r and 1/x. On radial networks these equal the shared-path resistance
  and reactance, which is exactly LinDistFlow.

Dispatch is a merit-order fill with ramp-aware bounds on a single
copper-plate balance.
"""
from __future__ import annotations

import json
from importlib import resources
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ContractError, TopologyError, ValidationError

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_PF = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
_PROFILE = {"type": "array", "items": _NONNEG, "minItems": 1}
_ID = {"type": "integer"}


def _obj(required: dict, optional: dict | None = None) -> dict:
    props = dict(required)
    props.update(optional or {})
    return {
        "type": "object",
        "properties": props,
        "required": list(required),
        "additionalProperties": False,
    }


CASE_SCHEMA = _obj(
    {
        "meta": _obj(
            {"name": {"type": "string"}, "periods": {"type": "integer", "minimum": 1}, "base_mva": _POS},
            {"reward_scale": _POS, "description": {"type": "string"}},
        ),
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": _obj(
                {"id": _ID, "voltage_min": _POS, "voltage_max": _POS},
                {"load_profile_ref": {"type": "string"}},
            ),
        },
        "branches": {
            "type": "array",
            "items": _obj({"from": _ID, "to": _ID, "r": _NONNEG, "x": _POS, "flow_limit": _POS}),
        },
        "units": {
            "type": "array",
            "items": _obj(
                {
                    "bus": _ID,
                    "c_g": _NONNEG,
                    "c_su": _NONNEG,
                    "p_min": _NONNEG,
                    "p_max": _NONNEG,
                    "r_u": _NONNEG,
                    "r_d": {"type": "number", "maximum": 0},
                    "initial_status": {"type": "integer", "enum": [0, 1]},
                },
                {"name": {"type": "string"}, "power_factor": _PF},
            ),
        },
        "vpps": {
            "type": "array",
            "items": _obj({"bus": _ID, "p_vpp_max": _NONNEG, "c_vpp": _NONNEG}, {"power_factor": _PF}),
        },
        "renewables": {
            "type": "array",
            "items": _obj(
                {"bus": _ID, "kind": {"enum": ["pv", "wind"]}, "forecast_profile": _PROFILE},
                {"power_factor": _PF},
            ),
        },
        "loads": {
            "type": "array",
            "items": _obj({"bus": _ID, "forecast_profile": _PROFILE, "power_factor": _PF}),
        },
        "costs": _obj({"c_ls": _NONNEG, "lambda_v": _NONNEG, "lambda_b": _NONNEG}, {"c_curt": _NONNEG}),
    }
)


def _q_ratio(pf: float) -> float:
    return math.tan(math.acos(pf))


@dataclass(frozen=True)
class Bus:
    id: int
    voltage_min: float
    voltage_max: float
    load_profile_ref: str | None = None


@dataclass(frozen=True)
class Branch:
    from_bus: int  # bus indices, not ids
    to_bus: int
    r: float
    x: float
    flow_limit: float


@dataclass
class GridCase:
    name: str
    periods: int
    base_mva: float
    buses: list[Bus]
    branches: list[Branch]
    units: list[dict]
    vpps: list[dict]
    renewables: list[dict]
    loads: list[dict]
    c_ls: float
    lambda_v: float
    lambda_b: float
    c_curt: float = 0.0
    reward_scale_override: float | None = None
    document: dict = field(default=None, repr=False)

    # --- shapes -------------------------------------------------------------
    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_vpps(self) -> int:
        return len(self.vpps)

    @property
    def n_renewables(self) -> int:
        return len(self.renewables)

    @property
    def days(self) -> int:
        if self.loads:
            return len(self.loads[0]["forecast_profile"]) // self.periods
        if self.renewables:
            return len(self.renewables[0]["forecast_profile"]) // self.periods
        return 1

    # --- unit arrays ----------------------------------------------------------
    def _unit_array(self, key: str) -> np.ndarray:
        return np.array([u[key] for u in self.units], dtype=float)

    @cached_property
    def c_g(self):
        return self._unit_array("c_g")

    @cached_property
    def c_su(self):
        return self._unit_array("c_su")

    @cached_property
    def p_min(self):
        return self._unit_array("p_min")

    @cached_property
    def p_max(self):
        return self._unit_array("p_max")

    @cached_property
    def r_u(self):
        return self._unit_array("r_u")

    @cached_property
    def r_d(self):
        return self._unit_array("r_d")

    @cached_property
    def initial_status(self):
        return np.array([u["initial_status"] for u in self.units], dtype=int)

    @cached_property
    def unit_bus(self):
        return np.array([u["bus"] for u in self.units], dtype=int)

    @cached_property
    def vpp_bus(self):
        return np.array([v["bus"] for v in self.vpps], dtype=int)

    @cached_property
    def vpp_max(self):
        return np.array([v["p_vpp_max"] for v in self.vpps], dtype=float)

    @cached_property
    def c_vpp(self):
        return np.array([v["c_vpp"] for v in self.vpps], dtype=float)

    @cached_property
    def renewable_bus(self):
        return np.array([r["bus"] for r in self.renewables], dtype=int)

    @cached_property
    def renewable_kind(self):
        return [r["kind"] for r in self.renewables]

    @cached_property
    def load_bus(self):
        return np.array([ld["bus"] for ld in self.loads], dtype=int)

    @cached_property
    def v_min(self):
        return np.array([b.voltage_min for b in self.buses])

    @cached_property
    def v_max(self):
        return np.array([b.voltage_max for b in self.buses])

    @cached_property
    def flow_limit(self):
        return np.array([b.flow_limit for b in self.branches])

    # --- reactive ratios ------------------------------------------------------
    @cached_property
    def load_q_ratio(self):
        return np.array([_q_ratio(ld["power_factor"]) for ld in self.loads])

    @cached_property
    def unit_q_ratio(self):
        return np.array([_q_ratio(u.get("power_factor", 1.0)) for u in self.units])

    @cached_property
    def vpp_q_ratio(self):
        return np.array([_q_ratio(v.get("power_factor", 1.0)) for v in self.vpps])

    @cached_property
    def renewable_q_ratio(self):
        return np.array([_q_ratio(r.get("power_factor", 1.0)) for r in self.renewables])

    # --- profiles -------------------------------------------------------------
    def _slice(self, items, day: int) -> np.ndarray:
        if not 0 <= day < self.days:
            raise ContractError(f"day {day} outside [0, {self.days})")
        t0 = day * self.periods
        out = np.zeros((self.periods, len(items)))
        for j, item in enumerate(items):
            out[:, j] = item["forecast_profile"][t0 : t0 + self.periods]
        return out

    def load_forecast(self, day: int = 0) -> np.ndarray:
        """(T, n_loads) MW."""
        return self._slice(self.loads, day)

    def renewable_forecast(self, day: int = 0) -> np.ndarray:
        """(T, n_renewables) MW."""
        return self._slice(self.renewables, day)

    def to_bus(self, values: np.ndarray, element_bus: np.ndarray) -> np.ndarray:
        """Aggregate per-element values (..., k) onto buses (..., n_bus)."""
        values = np.asarray(values, dtype=float)
        out = np.zeros(values.shape[:-1] + (self.n_bus,))
        for j, b in enumerate(element_bus):
            out[..., b] += values[..., j]
        return out

    @cached_property
    def peak_load(self) -> float:
        if not self.loads:
            return 0.0
        total = np.sum([ld["forecast_profile"] for ld in self.loads], axis=0)
        return float(np.max(total))

    @property
    def reward_scale(self) -> float:
        if self.reward_scale_override:
            return self.reward_scale_override
        return max(self.c_ls * self.peak_load, 1.0)

    @cached_property
    def matrices(self) -> "NetworkMatrices":
        return flow_matrices(self)

    def summary(self) -> str:
        return f"{self.n_bus} buses, {self.n_units} units, {self.n_vpps} VPPs, T={self.periods}"

    def details(self) -> str:
        return (
            f"{len(self.branches)} branches, {self.n_renewables} renewables, {len(self.loads)} loads, "
            f"{self.days} day(s) of profiles, base {self.base_mva:g} MVA"
        )


BUILTIN_CASES = ("toy3", "toy3rt", "rts24")


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def load_case(source) -> GridCase:
    """Build a validated GridCase from a path, bundled case name, JSON text or parsed dict."""
    if isinstance(source, dict):
        doc = source
    else:
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            path = Path(source)
            if not path.exists() and isinstance(source, str) and source in BUILTIN_CASES:
                path = resources.files("qcommit.data").joinpath(f"{source}.json")
            raw = path.read_bytes()
            text = raw.decode("utf-8")
        else:
            text = source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            offset = len(text[: exc.pos].encode("utf-8"))
            raise ValidationError(f"JSON parse error at byte offset {offset}: {exc.msg}", "$") from None
    try:
        jsonschema.validate(doc, CASE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(exc.message, _json_path(exc.absolute_path)) from None
    return _build_case(doc)


def _build_case(doc: dict) -> GridCase:
    meta = doc["meta"]
    T = meta["periods"]
    index = {}
    buses = []
    for i, b in enumerate(doc["buses"]):
        if b["id"] in index:
            raise ValidationError(f"duplicate bus id {b['id']}", f"$.buses[{i}].id")
        if not b["voltage_min"] < b["voltage_max"]:
            raise ValidationError("voltage_min must be below voltage_max", f"$.buses[{i}]")
        index[b["id"]] = i
        buses.append(Bus(b["id"], b["voltage_min"], b["voltage_max"], b.get("load_profile_ref")))

    def bus_index(value, path):
        if value not in index:
            raise ValidationError(f"unknown bus id {value}", path)
        return index[value]

    branches = []
    for i, br in enumerate(doc["branches"]):
        f = bus_index(br["from"], f"$.branches[{i}].from")
        t = bus_index(br["to"], f"$.branches[{i}].to")
        if f == t:
            raise ValidationError("branch endpoints must differ", f"$.branches[{i}]")
        branches.append(Branch(f, t, br["r"], br["x"], br["flow_limit"]))

    def relink(items, key):
        out = []
        for i, item in enumerate(doc[key]):
            item = dict(item)
            item["bus"] = bus_index(item["bus"], f"$.{key}[{i}].bus")
            out.append(item)
        return out

    units = relink(doc["units"], "units")
    for i, u in enumerate(units):
        if u["p_min"] > u["p_max"]:
            raise ValidationError("p_min exceeds p_max", f"$.units[{i}]")
    renewables = relink(doc["renewables"], "renewables")
    loads = relink(doc["loads"], "loads")
    vpps = relink(doc["vpps"], "vpps")

    lengths = {}
    for key, items in (("loads", loads), ("renewables", renewables)):
        for i, item in enumerate(items):
            lengths[f"$.{key}[{i}].forecast_profile"] = len(item["forecast_profile"])
    if lengths:
        first_path, first = next(iter(lengths.items()))
        for path, n in lengths.items():
            if n % T or n != first:
                raise ValidationError(
                    f"profile length {n} must equal {first} and be a multiple of periods={T}", path
                )

    _check_connected(len(buses), branches)
    costs = doc["costs"]
    case = GridCase(
        name=meta["name"],
        periods=T,
        base_mva=meta["base_mva"],
        buses=buses,
        branches=branches,
        units=units,
        vpps=vpps,
        renewables=renewables,
        loads=loads,
        c_ls=costs["c_ls"],
        lambda_v=costs["lambda_v"],
        lambda_b=costs["lambda_b"],
        c_curt=costs.get("c_curt", 0.0),
        reward_scale_override=meta.get("reward_scale"),
        document=doc,
    )
    return case


def _check_connected(n_bus: int, branches) -> None:
    adj = [[] for _ in range(n_bus)]
    for br in branches:
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != n_bus:
        missing = sorted(set(range(n_bus)) - seen)
        raise TopologyError(f"network disconnected; unreachable bus indices {missing}", "$.branches")


# ---------------------------------------------------------------------------
# network evaluation


@dataclass(frozen=True)
class NetworkMatrices:
    ptdf: np.ndarray  # (branch, bus), slack column zero
    volt_sens_p: np.ndarray  # (bus, bus) p.u. per MW
    volt_sens_q: np.ndarray  # (bus, bus) p.u. per MVAr

    @property
    def volt_sens(self) -> np.ndarray:
        return np.hstack([self.volt_sens_p, self.volt_sens_q])


def _reduced_inverse(n_bus, branches, weights) -> np.ndarray:
    lap = np.zeros((n_bus, n_bus))
    for br, w in zip(branches, weights):
        i, j = br.from_bus, br.to_bus
        lap[i, i] += w
        lap[j, j] += w
        lap[i, j] -= w
        lap[j, i] -= w
    out = np.zeros((n_bus, n_bus))
    if n_bus > 1:
        try:
            out[1:, 1:] = np.linalg.inv(lap[1:, 1:])
        except np.linalg.LinAlgError:
            raise TopologyError("singular reduced network matrix", "$.branches") from None
    return out


def flow_matrices(case: GridCase) -> NetworkMatrices:
    nb, nl = case.n_bus, len(case.branches)
    x = np.array([br.x for br in case.branches])
    r = np.maximum(np.array([br.r for br in case.branches]), 1e-9)
    inv_bx = _reduced_inverse(nb, case.branches, 1 / x) if nl else np.zeros((nb, nb))
    incidence = np.zeros((nl, nb))
    for k, br in enumerate(case.branches):
        incidence[k, br.from_bus] = 1
        incidence[k, br.to_bus] = -1
    ptdf = (incidence / x[:, None]) @ inv_bx if nl else np.zeros((0, nb))
    base = case.base_mva
    inv_r = _reduced_inverse(nb, case.branches, 1 / r) if nl else np.zeros((nb, nb))
    return NetworkMatrices(ptdf, 2 * inv_r / base, 2 * inv_bx / base)


@dataclass
class NetworkEval:
    flows: np.ndarray
    voltages: np.ndarray
    branch_violation: np.ndarray | float
    voltage_violation: np.ndarray | float


def evaluate_network(case: GridCase, matrices: NetworkMatrices, injections, q_injections) -> NetworkEval:
    """Flows, voltages and summed limit exceedances.

    Accepts one injection vector or a (k, n_bus) stack. Any nonzero total
    injection is absorbed by the slack bus.
    """
    p = np.asarray(injections, dtype=float)
    q = np.asarray(q_injections, dtype=float)
    single = p.ndim == 1
    p, q = np.atleast_2d(p), np.atleast_2d(q)
    flows = p @ matrices.ptdf.T
    volts = 1.0 + p @ matrices.volt_sens_p.T + q @ matrices.volt_sens_q.T
    b_viol = np.maximum(np.abs(flows) - case.flow_limit, 0).sum(axis=1)
    v_viol = (np.maximum(case.v_min - volts, 0) + np.maximum(volts - case.v_max, 0)).sum(axis=1)
    if single:
        return NetworkEval(flows[0], volts[0], float(b_viol[0]), float(v_viol[0]))
    return NetworkEval(flows, volts, b_viol, v_viol)


# ---------------------------------------------------------------------------
# dispatch


@dataclass
class DispatchResult:
    p_gen: np.ndarray
    p_shed: np.ndarray  # per bus
    p_curtail: np.ndarray  # per renewable
    spill: float  # surplus of mandatory output beyond what curtailment absorbs
    startup: np.ndarray
    shutdown: np.ndarray
    lower: np.ndarray = field(repr=False, default=None)
    upper: np.ndarray = field(repr=False, default=None)

    @property
    def total_shed(self) -> float:
        return float(self.p_shed.sum())

    @property
    def total_curtailment(self) -> float:
        """Renewable curtailment plus spilled surplus."""
        return float(self.p_curtail.sum() + self.spill)

    @property
    def infeasible_surplus(self) -> bool:
        return self.spill > 0


_TOL = 1e-9


def effective_bounds(case: GridCase, e, prev_p, prev_e):
    on = np.asarray(e, dtype=bool)
    lo = np.where(on, case.p_min, 0.0)
    hi = np.where(on, case.p_max, 0.0)
    both = on & np.asarray(prev_e, dtype=bool)
    lo = np.where(both, np.maximum(lo, prev_p + case.r_d), lo)
    hi = np.where(both, np.minimum(hi, prev_p + case.r_u), hi)
    return lo, hi


def merit_order_dispatch(case: GridCase, e, prev_p, load, renewables=None, prev_e=None) -> DispatchResult:
    """Ramp-aware merit-order dispatch for commitment ``e``.

    ``load`` is per bus (MW), ``renewables`` per renewable (MW available).
    ``prev_e`` defaults to "on wherever prev_p > 0". Committed units start
    at their lower bound, the remainder is filled cheapest first (ties by
    index); unmet demand is shed pro rata to bus load, and excess
    mandatory output curtails renewables pro rata before spilling.
    """
    e = np.asarray(e, dtype=int)
    prev_p = np.asarray(prev_p, dtype=float)
    if e.shape != (case.n_units,) or prev_p.shape != (case.n_units,):
        raise ContractError("commitment and prev_p must have one entry per unit")
    if np.any((e != 0) & (e != 1)):
        raise ContractError("commitment entries must be 0 or 1")
    prev_e = (prev_p > 0).astype(int) if prev_e is None else np.asarray(prev_e, dtype=int)
    off_bad = (prev_e == 0) & (np.abs(prev_p) > _TOL)
    on_bad = (prev_e == 1) & ((prev_p < case.p_min - 1e-6) | (prev_p > case.p_max + 1e-6))
    if np.any(off_bad | on_bad):
        bad = np.flatnonzero(off_bad | on_bad).tolist()
        raise ContractError(f"prev_p inconsistent with previous commitment for units {bad}")
    load = np.asarray(load, dtype=float)
    ren = np.zeros(case.n_renewables) if renewables is None else np.asarray(renewables, dtype=float)

    lo, hi = effective_bounds(case, e, prev_p, prev_e)
    p = lo.copy()
    demand = load.sum()
    ren_total = ren.sum()
    need = demand - ren_total - p.sum()
    curtail = np.zeros_like(ren)
    spill = 0.0
    if need < -_TOL:
        surplus = -need
        absorbed = min(surplus, ren_total)
        if ren_total > 0:
            curtail = ren * (absorbed / ren_total)
        spill = surplus - absorbed
        if spill <= _TOL:
            spill = 0.0
        need = 0.0
    else:
        for g in sorted(range(case.n_units), key=lambda k: (case.c_g[k], k)):
            if need <= _TOL:
                break
            add = min(hi[g] - p[g], need)
            if add > 0:
                p[g] += add
                need -= add
    need = need if need > _TOL else 0.0
    shed = load * (need / demand) if need > 0 else np.zeros_like(load)
    startup = (e == 1) & (prev_e == 0)
    shutdown = (e == 0) & (prev_e == 1)
    return DispatchResult(p, shed, curtail, spill, startup, shutdown, lo, hi)


def stage_costs(case: GridCase, dispatch: DispatchResult, e_prev, e_now) -> dict:
    started = (np.asarray(e_now) > np.asarray(e_prev)).astype(float)
    return {
        "fuel": float(case.c_g @ dispatch.p_gen),
        "startup": float(case.c_su @ started),
        "shed": float(case.c_ls * dispatch.p_shed.sum()),
    }
