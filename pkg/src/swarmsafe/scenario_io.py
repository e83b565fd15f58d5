"""Scenario TOML loading, override handling, and the shipped reference file.

Document layout::

    [graph]
    edges = [{ i = 0, j = 1, k = 3.0, b = 1.0, R = 3.0 }, ...]

    [[agents]]
    pos = [0.0, 0.0]
    vel = [0.0, 0.0]
    mass = 0.5
    leader_input = [3.0, 0.0]   # optional

    [[obstacles]]
    id = "obs-1"                # optional, defaults to obs-<index>
    pos = [8.0, 0.6]
    margin = 1.0
    vel = [0.0, 0.0]            # optional

    [gains]
    alpha0 = 2.0
    alpha1 = 2.0
    alpha2 = 2.0

    [sim]
    dt = 0.01
    duration = 30.0
    tau = 0.1
    max_rounds = 10
    sensing_radius = 4.0
    control_limit = 15.0
    agent_margin = 1.0
    spring_sign = "restoring"
    objective = "minimal"
    tau_mode = "paper"
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import (
    AgentState,
    ConfigurationError,
    FormationGraph,
    Gains,
    Obstacle,
    Scenario,
    SpringParams,
    Vec2,
)


class ScenarioParseError(ValueError):
    """The scenario file is unreadable or not valid TOML/shape."""


_SIM_KEYS = {
    "dt": float,
    "duration": float,
    "tau": float,
    "max_rounds": int,
    "sensing_radius": float,
    "control_limit": float,
    "agent_margin": float,
    "spring_sign": str,
    "objective": str,
    "tau_mode": str,
}
_GAIN_KEYS = ("alpha0", "alpha1", "alpha2")


def reference_scenario_path() -> Path:
    """Filesystem path of the packaged reference scenario."""
    return Path(str(resources.files("swarmsafe") / "scenarios" / "reference.toml"))


def _vec(doc, key, default=None) -> Vec2:
    raw = doc.get(key, default)
    if raw is None or len(raw) != 2:
        raise ScenarioParseError(f"expected 2-element array for {key!r}, got {raw!r}")
    return Vec2(float(raw[0]), float(raw[1]))


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        agents = doc["agents"]
        graph_doc = doc.get("graph", {})
        sim_doc = doc.get("sim", {})
        gains_doc = doc.get("gains", {})
    except (KeyError, TypeError) as exc:
        raise ScenarioParseError(f"missing section: {exc}") from exc
    if not isinstance(agents, list) or not agents:
        raise ScenarioParseError("[[agents]]: at least one agent required")

    n = len(agents)
    edges = {}
    for edge in graph_doc.get("edges", []):
        try:
            key = (int(edge["i"]), int(edge["j"]))
            edges[key] = SpringParams(
                stiffness=float(edge["k"]),
                damping=float(edge["b"]),
                rest_length=float(edge["R"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioParseError(f"[graph] edge {edge!r}: {exc}") from exc

    states, masses, leader_inputs = [], [], {}
    for idx, a in enumerate(agents):
        states.append(AgentState(_vec(a, "pos"), _vec(a, "vel", [0.0, 0.0])))
        masses.append(float(a.get("mass", 1.0)))
        if "leader_input" in a:
            leader_inputs[idx] = _vec(a, "leader_input")

    obstacles = []
    for idx, o in enumerate(doc.get("obstacles", [])):
        obstacles.append(
            Obstacle(
                id=str(o.get("id", f"obs-{idx}")),
                position=_vec(o, "pos"),
                velocity=_vec(o, "vel", [0.0, 0.0]),
                radius_margin=float(o.get("margin", 1.0)),
            )
        )

    try:
        gains = Gains(*(float(gains_doc.get(k, 1.0)) for k in _GAIN_KEYS))
        graph = FormationGraph(n, edges)
        sim_kwargs = {}
        for key, conv in _SIM_KEYS.items():
            if key in sim_doc:
                sim_kwargs[key] = conv(sim_doc[key])
        unknown = set(sim_doc) - set(_SIM_KEYS)
        if unknown:
            raise ScenarioParseError(f"[sim]: unknown keys {sorted(unknown)}")
        return Scenario(
            graph=graph,
            initial_states=states,
            obstacles=obstacles,
            masses=masses,
            gains=[gains] * n,
            leader_inputs=leader_inputs,
            sensing_radius=float(sim_doc.get("sensing_radius", 5.0)),
            control_limit=float(sim_doc.get("control_limit", 15.0)),
            **{k: v for k, v in sim_kwargs.items()
               if k not in ("sensing_radius", "control_limit")},
        )
    except ConfigurationError as exc:
        raise ScenarioParseError(str(exc)) from exc


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` overrides onto the raw document.

    Only [sim] and [gains] scalar keys may be overridden; unknown keys error.
    """
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        section, _, name = key.partition(".")
        if section == "sim" and name in _SIM_KEYS:
            conv = _SIM_KEYS[name]
            out.setdefault("sim", {})
            out["sim"] = dict(out["sim"])
            out["sim"][name] = raw if conv is str else conv(float(raw))
        elif section == "gains" and name in _GAIN_KEYS:
            out.setdefault("gains", {})
            out["gains"] = dict(out["gains"])
            out["gains"][name] = float(raw)
        else:
            raise ConfigurationError(f"unknown override key {key!r}")
    return out


def load_scenario(path: str | Path, overrides: list[str] | None = None) -> Scenario:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioParseError(f"malformed TOML in {path}: {exc}") from exc
    if overrides:
        doc = apply_overrides(doc, overrides)
    return scenario_from_dict(doc)
