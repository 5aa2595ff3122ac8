"""Scenario files: strict JSON schema, defaults, and round-trip writing.

Example::

    {
      "name": "two-inverter load step",
      "network": {
        "nodes": [
          {"id": "G", "kind": "generator", "M": 0.1, "D": 0.05, "P_nom": 4.0},
          {"id": "I1", "kind": "inverter", "P_nom": 0.5},
          {"id": "I2", "kind": "inverter", "P_nom": 1.0},
          {"id": "L", "kind": "load", "P_nom": 5.5}
        ],
        "edges": [["G", "I1", 0.12], ["I1", "I2", 0.12], ["I2", "L", 0.12]]
      },
      "controller": {"mode": "pi", "gamma": 0.15, "beta": 1.5, "xi": [0.3333333333333333, 0.6666666666666666]},
      "events": [{"time": 0.0, "kind": "load_step", "node": "L", "delta": 0.5}],
      "integrator": {"t_end": 20.0}
    }

``xi`` may also be the string ``"optimal"`` when ``costs`` is given.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema

from .controllers import ControllerConfig, make_controller
from .device import DeviceLags
from .errors import ParseError, SchemaError
from .network import XI_TOL, Edge, MicrogridState, NetworkSpec, NodeSpec
from .sharing import CostMatrix, optimal_sharing
from .simulator import DispatchRamp, LoadStep, Scenario, validate_scenario

_num = {"type": "number"}
_str = {"type": "string"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["network", "controller", "integrator"],
    "properties": {
        "name": _str,
        "description": _str,
        "network": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nodes"],
            "properties": {
                "nodes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id", "kind", "P_nom"],
                        "properties": {
                            "id": _str,
                            "kind": {"enum": ["generator", "inverter", "load"]},
                            "P_nom": _num, "M": _num, "D": _num,
                        },
                    },
                },
                "edges": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "prefixItems": [_str, _str, _num],
                        "minItems": 3, "maxItems": 3,
                    },
                },
            },
        },
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode", "gamma", "xi"],
            "properties": {
                "mode": {"enum": ["pi", "proportional", "dual_pi"]},
                "u_bar": _num, "alpha": _num, "beta": _num, "gamma": _num,
                "xi": {"oneOf": [{"type": "array", "items": _num, "minItems": 1},
                                 {"const": "optimal"}]},
                "allow_nonpositive_xi": {"type": "boolean"},
            },
        },
        "events": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"type": "object", "additionalProperties": False,
                     "required": ["time", "kind", "node", "delta"],
                     "properties": {"time": _num, "kind": {"const": "load_step"},
                                    "node": _str, "delta": _num}},
                    {"type": "object", "additionalProperties": False,
                     "required": ["time", "kind", "target", "rate"],
                     "properties": {"time": _num, "kind": {"const": "dispatch_ramp"},
                                    "target": _num, "rate": _num}},
                ],
            },
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_end"],
            "properties": {
                "t_end": _num, "step": _num, "steady_window": _num,
                "record_stride": {"type": "integer", "minimum": 1},
                "initial_state": {"type": "object", "additionalProperties": False,
                                  "properties": {"omega": _num, "chi": _num}},
            },
        },
        "costs": {"type": "array", "items": _num, "minItems": 1},
        "device": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tau_pll": _num, "tau_cc": _num, "v_d": _num},
        },
    },
}

_validator = jsonschema.Draft202012Validator(SCHEMA)


def _field(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _raise(err, prefix=()):
    path = list(prefix) + list(err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        raise SchemaError(_field(path + extra[:1]), "unknown key")
    raise SchemaError(_field(path), err.message)


_EVENT_BRANCHES = {
    b["properties"]["kind"]["const"]: jsonschema.Draft202012Validator(b)
    for b in SCHEMA["properties"]["events"]["items"]["oneOf"]
}


def _check_schema(doc):
    # events are checked against the branch named by their "kind" so errors
    # point at the offending key rather than at the oneOf
    events = doc.get("events") if isinstance(doc, dict) else None
    if isinstance(events, list):
        for i, ev in enumerate(events):
            branch = _EVENT_BRANCHES.get(ev.get("kind")) if isinstance(ev, dict) else None
            if branch is not None:
                err = jsonschema.exceptions.best_match(branch.iter_errors(ev))
                if err is not None:
                    _raise(err, ("events", i))
    err = jsonschema.exceptions.best_match(_validator.iter_errors(doc))
    if err is not None:
        _raise(err)


def scenario_from_dict(doc: dict) -> Scenario:
    _check_schema(doc)
    nodes = []
    for i, nd in enumerate(doc["network"]["nodes"]):
        where = f"network.nodes[{i}]"
        if nd["kind"] == "generator":
            for key in ("M", "D"):
                if key not in nd:
                    raise SchemaError(f"{where}.{key}", "required for the generator")
            nodes.append(NodeSpec.generator(nd["id"], nd["M"], nd["D"], nd["P_nom"]))
        else:
            for key in ("M", "D"):
                if key in nd:
                    raise SchemaError(f"{where}.{key}", "only valid on the generator node")
            nodes.append(NodeSpec(nd["id"], nd["kind"], float(nd["P_nom"])))
    edges = [Edge(a, b, float(x)) for a, b, x in doc["network"].get("edges", [])]
    network = NetworkSpec(tuple(nodes), tuple(edges))

    costs = tuple(float(c) for c in doc["costs"]) if "costs" in doc else None
    c = doc["controller"]
    xi = c["xi"]
    if xi == "optimal":
        if costs is None:
            raise SchemaError("controller.xi", '"optimal" needs a costs section')
        try:
            xi = tuple(float(x) for x in optimal_sharing(CostMatrix(costs)))
        except ValueError as exc:
            raise SchemaError("costs", str(exc)) from None
    if abs(math.fsum(xi) - 1.0) > XI_TOL:
        raise SchemaError("controller.xi", f"entries must sum to 1 (sum is {math.fsum(xi):.12g})")
    controller = make_controller(c["mode"], float(c["gamma"]), xi, float(c.get("u_bar", 0.0)),
                                 float(c.get("alpha", 0.0)), float(c.get("beta", 0.0)),
                                 bool(c.get("allow_nonpositive_xi", False)))

    events = []
    for ev in doc.get("events", []):
        if ev["kind"] == "load_step":
            events.append(LoadStep(float(ev["time"]), ev["node"], float(ev["delta"])))
        else:
            events.append(DispatchRamp(float(ev["time"]), float(ev["target"]), float(ev["rate"])))

    integ = doc["integrator"]
    init = integ.get("initial_state", {})
    device = None
    if "device" in doc:
        dv = doc["device"]
        device = DeviceLags(float(dv.get("tau_pll", 0.0)), float(dv.get("tau_cc", 0.0)),
                            float(dv.get("v_d", 1.0)))
    if costs is not None:
        if len(costs) != network.n_inverters:
            raise SchemaError("costs", f"expected {network.n_inverters} entries, got {len(costs)}")
        try:
            CostMatrix(costs)
        except ValueError as exc:
            raise SchemaError("costs", str(exc)) from None
    scn = Scenario(
        network=network,
        controller=controller,
        t_end=float(integ["t_end"]),
        events=tuple(events),
        step=float(integ.get("step", 1e-3)),
        record_stride=int(integ.get("record_stride", 10)),
        initial_state=MicrogridState(float(init.get("omega", 0.0)), float(init.get("chi", 0.0))),
        name=doc.get("name", "scenario"),
        description=doc.get("description", ""),
        costs=costs,
        device=device,
        steady_window=float(integ.get("steady_window", 1.0)),
    )
    return validate_scenario(scn)


def parse_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object", 1, 1)
    doc.setdefault("name", path.stem)
    return scenario_from_dict(doc)


def scenario_to_dict(scn: Scenario) -> dict:
    nodes = []
    for n in scn.network.nodes:
        d = {"id": n.id, "kind": n.kind, "P_nom": n.P_nom}
        if n.kind == "generator":
            d.update(M=n.M, D=n.D)
        nodes.append(d)
    c: ControllerConfig = scn.controller
    ctrl = {"mode": c.mode, "u_bar": c.u_bar, "alpha": c.alpha, "beta": c.beta,
            "gamma": c.gamma, "xi": list(c.xi)}
    if c.allow_nonpositive_xi:
        ctrl["allow_nonpositive_xi"] = True
    events = []
    for ev in scn.events:
        if isinstance(ev, LoadStep):
            events.append({"time": ev.time, "kind": "load_step", "node": ev.node, "delta": ev.delta})
        else:
            events.append({"time": ev.time, "kind": "dispatch_ramp", "target": ev.target, "rate": ev.rate})
    doc = {
        "name": scn.name,
        "network": {"nodes": nodes, "edges": [[e.a, e.b, e.reactance] for e in scn.network.edges]},
        "controller": ctrl,
        "events": events,
        "integrator": {
            "t_end": scn.t_end, "step": scn.step, "record_stride": scn.record_stride,
            "steady_window": scn.steady_window,
            "initial_state": {"omega": scn.initial_state.omega, "chi": scn.initial_state.chi},
        },
    }
    if scn.description:
        doc["description"] = scn.description
    if scn.costs is not None:
        doc["costs"] = list(scn.costs)
    if scn.device is not None:
        doc["device"] = {"tau_pll": scn.device.tau_pll, "tau_cc": scn.device.tau_cc,
                         "v_d": scn.device.v_d}
    return doc


def write_scenario(scn: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(scn), indent=2) + "\n")
    return path
