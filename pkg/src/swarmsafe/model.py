"""Shared domain types: agents, obstacles, formation graph, polytopes, scenarios.

All value types are immutable and reject non-finite numbers at construction,
so downstream numerics never have to re-check for NaN/Inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised for structurally invalid configuration (bad index, bad key, ...)."""


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ConfigurationError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Vec2:
    """Planar vector; unit (m, m/s, m/s^2) depends on context."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("Vec2 component", self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @staticmethod
    def from_array(a) -> "Vec2":
        return Vec2(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class AgentState:
    """Position/velocity of one planar agent."""

    position: Vec2
    velocity: Vec2

    def as_array(self) -> np.ndarray:
        """State vector [px, py, vx, vy]."""
        return np.concatenate([self.position.as_array(), self.velocity.as_array()])


@dataclass(frozen=True)
class Obstacle:
    """A sensed circular hazard: static scenery or another agent in range.

    ``radius_margin`` is the minimum center distance the sensing agent must keep.
    ``agent_index`` is set when this obstacle is really another agent, in which
    case the barrier derivatives pick up that agent's formation dynamics.
    """

    id: str
    position: Vec2
    velocity: Vec2
    radius_margin: float
    agent_index: int | None = None

    def __post_init__(self):
        _require_finite("Obstacle.radius_margin", self.radius_margin)
        if self.radius_margin <= 0:
            raise ConfigurationError(
                f"obstacle {self.id!r}: radius_margin must be > 0, got {self.radius_margin}"
            )


@dataclass(frozen=True)
class SpringParams:
    """Virtual spring linking two agents."""

    stiffness: float  # N/m
    damping: float  # N*s/m
    rest_length: float  # m

    def __post_init__(self):
        _require_finite("SpringParams", self.stiffness, self.damping, self.rest_length)
        if self.stiffness <= 0:
            raise ConfigurationError(f"stiffness must be > 0, got {self.stiffness}")
        if self.damping < 0:
            raise ConfigurationError(f"damping must be >= 0, got {self.damping}")
        if self.rest_length <= 0:
            raise ConfigurationError(f"rest_length must be > 0, got {self.rest_length}")


class FormationGraph:
    """Undirected formation graph with per-edge spring parameters.

    Edges are stored under sorted index pairs, so symmetry holds by
    construction; self-loops and out-of-range indices are rejected.
    """

    def __init__(self, agent_count: int, edges: dict[tuple[int, int], SpringParams]):
        if agent_count < 1:
            raise ConfigurationError(f"agent_count must be >= 1, got {agent_count}")
        self.agent_count = int(agent_count)
        self._edges: dict[tuple[int, int], SpringParams] = {}
        for (i, j), params in edges.items():
            if i == j:
                raise ConfigurationError(f"self-loop on agent {i}")
            if not (0 <= i < agent_count and 0 <= j < agent_count):
                raise ConfigurationError(f"edge ({i},{j}) out of range for n={agent_count}")
            self._edges[(min(i, j), max(i, j))] = params

    @property
    def edges(self) -> dict[tuple[int, int], SpringParams]:
        return dict(self._edges)

    def neighbors(self, i: int) -> list[int]:
        """Sorted neighbor indices of agent ``i``."""
        if not 0 <= i < self.agent_count:
            raise ConfigurationError(f"agent index {i} out of range for n={self.agent_count}")
        out = []
        for a, b in self._edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def spring(self, i: int, j: int) -> SpringParams:
        return self._edges[(min(i, j), max(i, j))]


def neighbors(graph: FormationGraph, i: int) -> list[int]:
    """Sorted neighbor set of agent ``i`` (module-level convenience)."""
    return graph.neighbors(i)


@dataclass(frozen=True)
class Polytope:
    """Convex set {u in R^M : G @ u - l <= 0}."""

    G: np.ndarray
    l: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        l = np.atleast_1d(np.asarray(self.l, dtype=float))
        if G.shape[0] != l.shape[0]:
            raise ConfigurationError(
                f"Polytope row mismatch: G has {G.shape[0]} rows, l has {l.shape[0]}"
            )
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(l))):
            raise ConfigurationError("Polytope entries must be finite")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "l", l)

    @property
    def rows(self) -> int:
        return self.G.shape[0]

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        if self.rows == 0:
            return True
        return bool(np.all(self.G @ u - self.l <= tol))

    def with_rows(self, G_extra, l_extra) -> "Polytope":
        """New polytope with additional rows appended."""
        G_extra = np.atleast_2d(np.asarray(G_extra, dtype=float))
        l_extra = np.atleast_1d(np.asarray(l_extra, dtype=float))
        if self.rows == 0:
            return Polytope(G_extra, l_extra)
        return Polytope(np.vstack([self.G, G_extra]), np.concatenate([self.l, l_extra]))

    @staticmethod
    def box(limit: float, dim: int = 2) -> "Polytope":
        """Infinity-norm ball ||u||_inf <= limit."""
        eye = np.eye(dim)
        return Polytope(np.vstack([eye, -eye]), np.full(2 * dim, float(limit)))


@dataclass(frozen=True)
class Gains:
    """Linear class-K gains for the barrier ladder; all strictly positive."""

    alpha0: float
    alpha1: float
    alpha2: float

    def __post_init__(self):
        _require_finite("Gains", self.alpha0, self.alpha1, self.alpha2)
        for name in ("alpha0", "alpha1", "alpha2"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def beta(self) -> float:
        return self.alpha1 + self.alpha2


@dataclass
class Scenario:
    """Full declarative experiment description."""

    graph: FormationGraph
    initial_states: list[AgentState]
    obstacles: list[Obstacle]
    sensing_radius: float
    masses: list[float]
    gains: list[Gains]
    control_limit: float
    leader_inputs: dict[int, Vec2] = field(default_factory=dict)
    tau: float = 0.1
    dt: float = 0.01
    duration: float = 30.0
    max_rounds: int = 10
    spring_sign: str = "restoring"  # or "paper_literal"
    objective: str = "minimal"  # or "paper_literal"
    tau_mode: str = "paper"  # or "kinematic"
    agent_margin: float = 1.0
    agent_margin_overrides: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def agent_count(self) -> int:
        return self.graph.agent_count

    def pair_margin(self, i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        return self.agent_margin_overrides.get(key, self.agent_margin)

    def control_box(self) -> Polytope:
        return Polytope.box(self.control_limit)


def sensed_obstacles(
    scenario: Scenario, states: np.ndarray, i: int, t: float = 0.0
) -> list[Obstacle]:
    """Everything within sensing range of agent ``i``: static obstacles by id,
    then other agents by index, each carrying its live velocity.
    """
    if not 0 <= i < scenario.agent_count:
        raise ConfigurationError(f"agent index {i} out of range")
    states = np.asarray(states, dtype=float)
    p_i = states[i, :2]
    out: list[Obstacle] = []
    for obs in sorted(scenario.obstacles, key=lambda o: o.id):
        if np.linalg.norm(obs.position.as_array() - p_i) <= scenario.sensing_radius:
            out.append(obs)
    for j in range(scenario.agent_count):
        if j == i:
            continue
        if np.linalg.norm(states[j, :2] - p_i) <= scenario.sensing_radius:
            out.append(
                Obstacle(
                    id=f"agent:{j}",
                    position=Vec2.from_array(states[j, :2]),
                    velocity=Vec2.from_array(states[j, 2:]),
                    radius_margin=scenario.pair_margin(i, j),
                    agent_index=j,
                )
            )
    return out


def validate(scenario: Scenario) -> list[str]:
    """Check every scenario invariant; returns human-readable violations.

    Total: never raises on arbitrary finite input.
    """
    v: list[str] = []
    n = scenario.agent_count
    if len(scenario.initial_states) != n:
        v.append(f"agents: expected {n} initial states, got {len(scenario.initial_states)}")
    if len(scenario.masses) != n:
        v.append(f"agents: expected {n} masses, got {len(scenario.masses)}")
    else:
        for i, m in enumerate(scenario.masses):
            if not (math.isfinite(m) and m > 0):
                v.append(f"agents[{i}].mass: must be > 0, got {m}")
    if len(scenario.gains) != n:
        v.append(f"gains: expected {n} entries, got {len(scenario.gains)}")
    if not (math.isfinite(scenario.dt) and scenario.dt > 0):
        v.append(f"sim.dt: must be > 0, got {scenario.dt}")
    if not (math.isfinite(scenario.duration) and scenario.duration > 0):
        v.append(f"sim.duration: must be > 0, got {scenario.duration}")
    if scenario.dt > 0 and scenario.duration > 0 and not scenario.dt < scenario.duration:
        v.append(f"sim.dt: must be < duration ({scenario.dt} >= {scenario.duration})")
    if not (math.isfinite(scenario.tau) and scenario.tau > 0):
        v.append(f"sim.tau: must be > 0, got {scenario.tau}")
    if scenario.max_rounds < 1:
        v.append(f"sim.max_rounds: must be >= 1, got {scenario.max_rounds}")
    if not (math.isfinite(scenario.control_limit) and scenario.control_limit > 0):
        v.append(f"sim.control_limit: must be > 0, got {scenario.control_limit}")
    if not (math.isfinite(scenario.sensing_radius) and scenario.sensing_radius > 0):
        v.append(f"sim.sensing_radius: must be > 0, got {scenario.sensing_radius}")
    else:
        margins = [o.radius_margin for o in scenario.obstacles] + [scenario.agent_margin]
        if scenario.sensing_radius <= max(margins):
            v.append(
                "sim.sensing_radius: must exceed the largest radius_margin "
                f"({scenario.sensing_radius} <= {max(margins)})"
            )
    if scenario.spring_sign not in ("restoring", "paper_literal"):
        v.append(f"sim.spring_sign: unknown value {scenario.spring_sign!r}")
    if scenario.objective not in ("minimal", "paper_literal"):
        v.append(f"sim.objective: unknown value {scenario.objective!r}")
    if scenario.tau_mode not in ("paper", "kinematic"):
        v.append(f"sim.tau_mode: unknown value {scenario.tau_mode!r}")
    for idx in scenario.leader_inputs:
        if not 0 <= idx < n:
            v.append(f"leader_input: agent index {idx} out of range")
    # Symmetry holds for FormationGraph by construction, but validate goes
    # through the generic neighbor interface so replacement graphs are checked.
    try:
        for i in range(n):
            for j in scenario.graph.neighbors(i):
                if i not in scenario.graph.neighbors(j):
                    v.append(f"graph: edge symmetry violated for pair ({i},{j})")
    except Exception as exc:  # noqa: BLE001 - validate must stay total
        v.append(f"graph: neighbor query failed: {exc}")
    ids = [o.id for o in scenario.obstacles]
    if len(ids) != len(set(ids)):
        v.append("obstacles: duplicate ids")
    for o in scenario.obstacles:
        if o.agent_index is not None:
            v.append(f"obstacles[{o.id}]: static obstacle must not carry agent_index")
    return v
