"""Fixed-step closed-loop engine: sense, collaborate, filter, integrate, log.

The filter action chosen at a tick is held constant across the step
(zero-order hold); the formation forces are re-evaluated at the RK4 internal
stages so the nominal coupling stays fourth-order accurate.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import collab
from .formation import FormationParams, closed_loop_drift
from .model import Scenario, validate

CSV_HEADER = "t,agent,px,py,vx,vy,ufx,ufy,usx,usy,min_h,rounds"


class SimulationError(RuntimeError):
    """A module error during a run, annotated with the failing tick."""

    def __init__(self, tick: int, t: float, cause: Exception):
        super().__init__(f"tick {tick} (t={t:.4f}s): {cause}")
        self.tick = tick
        self.t = t
        self.cause = cause


@dataclass
class TickRecord:
    t: float
    states: np.ndarray  # (n, 4) at tick start
    u_f: np.ndarray  # (n, 2), leader input included
    u_s: np.ndarray  # (n, 2), effective (after clipping fold-back)
    applied: np.ndarray  # (n, 2) = u_f - u_s
    barrier_values: list[list[tuple[str, float, float]]]  # per agent: (id, h, phi1)
    rounds_used: int
    converged: bool
    degraded: list[int]
    clipped: list[int]

    def min_h(self, agent: int) -> float:
        vals = [hv for _, hv, _ in self.barrier_values[agent]]
        return min(vals) if vals else float("inf")


@dataclass
class RunResult:
    records: list[TickRecord]
    min_h: float
    min_h_per_agent: list[float]
    max_rounds_used: int
    convergence_failures: int
    degraded_events: int
    clip_events: int
    wall_time: float
    messages: list[dict] = field(default_factory=list)


def _drift_all(states: np.ndarray, u_s: np.ndarray, params: FormationParams) -> np.ndarray:
    n = states.shape[0]
    out = np.empty_like(states)
    for i in range(n):
        d = closed_loop_drift(states, params, i)
        d[2:] -= u_s[i]
        out[i] = d
    return out


def integrate_step(
    states: np.ndarray, u_s: np.ndarray, dt: float, params: FormationParams
) -> np.ndarray:
    """One RK4 step of the filtered dynamics with u_s held constant."""
    states = np.asarray(states, dtype=float)
    u_s = np.asarray(u_s, dtype=float)
    k1 = _drift_all(states, u_s, params)
    k2 = _drift_all(states + 0.5 * dt * k1, u_s, params)
    k3 = _drift_all(states + 0.5 * dt * k2, u_s, params)
    k4 = _drift_all(states + dt * k3, u_s, params)
    return states + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def run(scenario: Scenario, trace: bool = False) -> RunResult:
    """Simulate the scenario from t=0 to duration at fixed dt."""
    violations = validate(scenario)
    if violations:
        raise ValueError("invalid scenario: " + "; ".join(violations))
    params = FormationParams(
        scenario.graph, scenario.masses, scenario.spring_sign, scenario.leader_inputs
    )
    n = scenario.agent_count
    states = np.vstack([s.as_array() for s in scenario.initial_states])
    ticks = int(round(scenario.duration / scenario.dt))
    limit = scenario.control_limit

    records: list[TickRecord] = []
    messages: list[dict] = []
    start = time.perf_counter()
    for tick in range(ticks):
        t = tick * scenario.dt
        try:
            outcome = collab.run_tick(states, scenario, t, params,
                                      trace=messages if trace else None)
            u_f = outcome.u_f
            u_s = outcome.u_s
            # Clip the applied control into the box, folding the correction
            # back into u_s so the recorded pair stays consistent.
            applied = np.clip(u_f - u_s, -limit, limit)
            clipped = [
                i for i in range(n)
                if np.max(np.abs((u_f[i] - u_s[i]) - applied[i])) > 1e-12
            ]
            u_s_eff = u_f - applied

            barrier_values: list[list[tuple[str, float, float]]] = []
            for i in range(n):
                vals = [
                    (row.obstacle_id, row.h_value, row.phi1_value)
                    for row in outcome.agents[i].system.rows
                ]
                barrier_values.append(vals)

            records.append(
                TickRecord(
                    t=t,
                    states=states.copy(),
                    u_f=u_f.copy(),
                    u_s=u_s_eff,
                    applied=applied,
                    barrier_values=barrier_values,
                    rounds_used=outcome.rounds_used,
                    converged=outcome.converged,
                    degraded=list(outcome.degraded),
                    clipped=clipped,
                )
            )
            states = integrate_step(states, u_s_eff, scenario.dt, params)
        except Exception as exc:
            if isinstance(exc, SimulationError):
                raise
            raise SimulationError(tick, t, exc) from exc

    wall = time.perf_counter() - start
    min_per_agent = [
        min((r.min_h(i) for r in records), default=float("inf")) for i in range(n)
    ]
    return RunResult(
        records=records,
        min_h=min(min_per_agent) if min_per_agent else float("inf"),
        min_h_per_agent=min_per_agent,
        max_rounds_used=max((r.rounds_used for r in records), default=0),
        convergence_failures=sum(1 for r in records if not r.converged),
        degraded_events=sum(len(r.degraded) for r in records),
        clip_events=sum(len(r.clipped) for r in records),
        wall_time=wall,
        messages=messages,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(result: RunResult, path: Path) -> None:
    """Trajectory CSV, one row per (tick, agent); byte-stable across runs."""
    lines = [CSV_HEADER]
    for rec in result.records:
        for i in range(rec.states.shape[0]):
            px, py, vx, vy = rec.states[i]
            lines.append(
                ",".join(
                    [
                        _fmt(rec.t),
                        str(i),
                        _fmt(px), _fmt(py), _fmt(vx), _fmt(vy),
                        _fmt(rec.u_f[i, 0]), _fmt(rec.u_f[i, 1]),
                        _fmt(rec.u_s[i, 0]), _fmt(rec.u_s[i, 1]),
                        _fmt(rec.min_h(i)),
                        str(rec.rounds_used),
                    ]
                )
            )
    path.write_text("\n".join(lines) + "\n")


def metrics_dict(result: RunResult, scenario: Scenario | None = None) -> dict:
    """Canonical run metrics.  Wall time is intentionally excluded so two
    identical runs serialize byte-identically; it lives on RunResult only.
    With a scenario, the obstacle layout is included so downstream plotting
    tools can work from the output files alone.
    """
    out = {
        "min_h": result.min_h,
        "min_h_per_agent": result.min_h_per_agent,
        "max_rounds_used": result.max_rounds_used,
        "convergence_failures": result.convergence_failures,
        "degraded_events": result.degraded_events,
        "clip_events": result.clip_events,
        "ticks": len(result.records),
    }
    if scenario is not None:
        out["obstacles"] = [
            {
                "id": o.id,
                "pos": [o.position.x, o.position.y],
                "margin": o.radius_margin,
            }
            for o in scenario.obstacles
        ]
    return out


def write_metrics(result: RunResult, path: Path, scenario: Scenario | None = None) -> None:
    path.write_text(
        json.dumps(metrics_dict(result, scenario), indent=2, sort_keys=True) + "\n"
    )


def write_trace(result: RunResult, path: Path) -> None:
    """Line-delimited JSON message trace: (tick, round, kind, from, to, payload)."""
    with path.open("w") as fh:
        for msg in result.messages:
            fh.write(json.dumps(msg, sort_keys=True) + "\n")


def leader_displacement(result: RunResult, agent: int) -> float:
    """Net planar displacement of one agent over the run."""
    if not result.records:
        return 0.0
    first = result.records[0].states[agent, :2]
    last = result.records[-1].states[agent, :2]
    return float(np.linalg.norm(last - first))
