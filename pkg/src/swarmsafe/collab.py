"""Round-based neighbor collaboration that restricts unsafe actions.

Each physics tick the agents run synchronized rounds of a three-phase
exchange (send requests, process requests, return adjustments) until every
promise ledger is stable and no agent is left with a capability shortfall,
or the round budget runs out.  Afterwards each agent picks its filter action
with a minimally-invasive projection QP over its (possibly shrunken) set.

Concrete protocol choices made here, all deterministic:

* shortfalls are split across neighbors proportionally to the 2-norm of the
  neighbor-effect row; neighbors with zero effect get nothing;
* a recipient services all incoming requests with one common scale
  ``lambda`` in [0, 1], found by a small LP over its own constrained set and
  its pending first-order rows; it grants ``lambda * amount`` each;
* grants are keyed by (requester, obstacle), so a re-request replaces the
  old promise instead of stacking, keeping the constrained sets monotone
  within a tick;
* ledgers reset at the start of every tick.

Ledger sign convention: ``c_bar_ij`` records capability promised *to* agent i
by neighbor j, stored negated, so the shortfall test is literally
``delta_i = c_bar_i - sum_j c_bar_ij >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import barrier
from .barrier import SafetySystem
from .formation import FormationParams, nominal_control
from .model import ConfigurationError, Polytope, Scenario, sensed_obstacles
from .optim import LpResult, maxmin_capability, qp_safety_filter, solve_lp

LEDGER_TOL = 1e-9  # "remains constant" threshold for promise vectors


@dataclass(frozen=True)
class RequestRow:
    obstacle_id: str
    direction: np.ndarray  # velocity-space neighbor-effect row a_ij,o
    amount: float  # requested capability, >= 0


@dataclass(frozen=True)
class RequestMsg:
    sender: int
    recipient: int
    rows: tuple[RequestRow, ...]


@dataclass(frozen=True)
class AdjustMsg:
    sender: int
    recipient: int
    grants: tuple[tuple[str, float], ...]  # (obstacle_id, granted amount)


@dataclass
class CapabilityLedger:
    """Per-agent view of own capability and promises received from neighbors."""

    c_bar_i: np.ndarray = field(default_factory=lambda: np.zeros(0))
    promises: dict[int, dict[str, float]] = field(default_factory=dict)

    def promised_total(self, obstacle_ids: list[str]) -> np.ndarray:
        out = np.zeros(len(obstacle_ids))
        for per_obs in self.promises.values():
            for k, oid in enumerate(obstacle_ids):
                out[k] += per_obs.get(oid, 0.0)
        return out

    def c_bar_ij(self, j: int, obstacle_ids: list[str]) -> np.ndarray:
        per_obs = self.promises.get(j, {})
        return -np.array([per_obs.get(oid, 0.0) for oid in obstacle_ids])

    def delta(self, obstacle_ids: list[str]) -> np.ndarray:
        total = np.zeros(len(obstacle_ids))
        for j in self.promises:
            total += self.c_bar_ij(j, obstacle_ids)
        return self.c_bar_i - total


@dataclass
class ConstrainedSet:
    """Shrinking action set: base polytope plus promise-backed halfspaces."""

    base: Polytope
    added: dict[tuple[int, str], tuple[np.ndarray, float]] = field(default_factory=dict)

    def halfspaces(self) -> list[tuple[np.ndarray, float]]:
        """Granted rows as (c, d) with c.u >= d, in deterministic key order."""
        return [self.added[key] for key in sorted(self.added)]

    def polytope(self) -> Polytope:
        rows = self.halfspaces()
        if not rows:
            return self.base
        G_extra = np.vstack([-c for c, _ in rows])
        l_extra = np.array([-d for _, d in rows])
        return self.base.with_rows(G_extra, l_extra)


def convert_velocity_constraints(poly_v: Polytope, tau: float, mode: str = "paper") -> Polytope:
    """Map a velocity-space polytope to acceleration space over horizon tau.

    ``paper`` scales the coefficient matrix by 1/tau (tightening for tau < 1);
    ``kinematic`` uses v ~ tau * a and scales by tau instead.
    """
    if tau <= 0:
        raise ConfigurationError(f"tau must be > 0, got {tau}")
    scale = 1.0 / tau if mode == "paper" else tau
    return Polytope(scale * poly_v.G, poly_v.l)


def convert_amount(amount: float, tau: float, mode: str = "paper") -> float:
    """Acceleration-space bound matching :func:`convert_velocity_constraints`.

    A velocity request a.u >= s is the polytope row (-a, -s); scaling G by
    1/tau gives a.u >= tau*s in acceleration space.
    """
    if tau <= 0:
        raise ConfigurationError(f"tau must be > 0, got {tau}")
    return amount * tau if mode == "paper" else amount / tau


def compute_deficit(system: SafetySystem, lp: LpResult) -> np.ndarray:
    """Per-obstacle capability shortfall max(0, -(q + B u*)) at the LP optimum."""
    if system.K == 0:
        return np.zeros(0)
    c_bar = system.q + system.B @ lp.u_star
    return np.maximum(0.0, -c_bar)


def allocate_requests(
    agent: int,
    deficit: np.ndarray,
    system: SafetySystem,
    prev_requested: dict[tuple[int, str], float] | None = None,
    prev_granted: dict[tuple[int, str], float] | None = None,
):
    """Split each row's shortfall across neighbors, proportional to ||a_ij||_2.

    A neighbor that under-delivered on the previous round (granted strictly
    less than asked) is treated as capped at what it actually granted, and
    the rerouted remainder goes to the uncapped neighbors by the same
    proportional rule.  Without history the split is purely proportional.

    Returns (requests, unservable_ids): rows with positive deficit but zero
    neighbor effect everywhere cannot be served and are reported.
    """
    prev_requested = prev_requested or {}
    prev_granted = prev_granted or {}
    per_neighbor: dict[int, list[RequestRow]] = {j: [] for j in system.neighbor_order}
    unservable: list[str] = []
    for k, row in enumerate(system.rows):
        need = float(deficit[k])
        if need <= 0.0:
            continue
        norms = {
            j: float(np.linalg.norm(row.a[j]))
            for j in system.neighbor_order
            if float(np.linalg.norm(row.a[j])) > 0.0
        }
        total = sum(norms.values())
        if total <= 0.0:
            unservable.append(row.obstacle_id)
            continue
        caps: dict[int, float] = {}
        for j in norms:
            asked = prev_requested.get((j, row.obstacle_id))
            if asked is not None and asked > 0.0:
                got = prev_granted.get((j, row.obstacle_id), 0.0)
                if got < asked - LEDGER_TOL:
                    caps[j] = max(0.0, got)
        shares = {j: need * norms[j] / total for j in norms}
        overflow = 0.0
        for j, cap in caps.items():
            if shares[j] > cap:
                overflow += shares[j] - cap
                shares[j] = cap
        free = [j for j in norms if j not in caps]
        if overflow > 0.0 and free:
            free_norm = sum(norms[j] for j in free)
            for j in free:
                shares[j] += overflow * norms[j] / free_norm
        for j in sorted(norms):
            if shares[j] > 0.0:
                per_neighbor[j].append(
                    RequestRow(row.obstacle_id, row.a[j].copy(), shares[j])
                )
    requests = [
        RequestMsg(agent, j, tuple(rows)) for j, rows in per_neighbor.items() if rows
    ]
    return requests, unservable


def process_requests(
    agent: int,
    own_set: ConstrainedSet,
    first_order_rows: list[tuple[np.ndarray, float]],
    incoming: list[RequestMsg],
    tau: float,
    tau_mode: str = "paper",
):
    """Service incoming requests with one common feasibility scale.

    Requests arrive in velocity space; each row converts to an acceleration
    halfspace over horizon tau.  One LP maximizes lambda in [0, 1] such that
    some action in the agent's current constrained set (plus its own pending
    first-order rows) meets lambda times every converted request.  Grants of
    lambda * amount go back, and the matching halfspaces are added to the
    constrained set so the promises bind.
    """
    if not incoming:
        return [], own_set, True
    rows = []
    for msg in incoming:
        for row in msg.rows:
            rows.append((msg.sender, row, convert_amount(row.amount, tau, tau_mode)))

    poly = own_set.polytope()
    base_G = [poly.G]
    base_l = [poly.l]
    for c, d in first_order_rows:
        base_G.append(-np.asarray(c, dtype=float)[None, :])
        base_l.append(np.array([-d]))
    G_fixed = np.vstack(base_G)
    l_fixed = np.concatenate(base_l)
    nfixed = G_fixed.shape[0]

    # A request this agent cannot meet even at zero amount (direction.u >= 0
    # conflicts with its own rows) is refused outright, so the common-scale
    # LP below stays feasible for the rest.
    refused: list[int] = []
    serviced: list[int] = []
    for r, (_, req, _) in enumerate(rows):
        A1 = np.vstack([G_fixed, -req.direction[None, :]])
        b1 = np.concatenate([l_fixed, [0.0]])
        feas = solve_lp(np.zeros(2), A1, b1)
        (serviced if feas.status == "optimal" else refused).append(r)

    # Variables (u, lambda): maximize lambda subject to the fixed rows,
    # direction_r . u >= lambda * amount_r, and 0 <= lambda <= 1.
    lam = 0.0
    ok = not serviced
    if serviced:
        nreq = len(serviced)
        A = np.zeros((nfixed + nreq + 2, 3))
        b = np.zeros(nfixed + nreq + 2)
        A[:nfixed, :2] = G_fixed
        b[:nfixed] = l_fixed
        for slot, r in enumerate(serviced):
            _, req, amt = rows[r]
            A[nfixed + slot, :2] = -req.direction
            A[nfixed + slot, 2] = amt
        A[nfixed + nreq, 2] = 1.0
        b[nfixed + nreq] = 1.0
        A[nfixed + nreq + 1, 2] = -1.0
        res = solve_lp(np.array([0.0, 0.0, -1.0]), A, b)
        if res.status == "optimal":
            lam = float(min(max(res.x[2], 0.0), 1.0))
            ok = True
        else:
            lam = 0.0  # jointly conflicting requests: grant nothing
            ok = False

    grants: dict[int, list[tuple[str, float]]] = {}
    new_added = dict(own_set.added)
    refused_set = set(refused)
    for r, (sender, req, amt) in enumerate(rows):
        granted = 0.0 if r in refused_set else lam * req.amount
        grants.setdefault(sender, []).append((req.obstacle_id, granted))
        if granted > 0.0:
            new_added[(sender, req.obstacle_id)] = (req.direction.copy(), lam * amt)
    adjustments = [
        AdjustMsg(agent, sender, tuple(rows_)) for sender, rows_ in sorted(grants.items())
    ]
    return adjustments, ConstrainedSet(own_set.base, new_added), ok


@dataclass
class AgentTick:
    """Per-agent working state and outputs for one tick."""

    u_f: np.ndarray
    system: SafetySystem
    first_order_rows: list[tuple[np.ndarray, float]]
    constrained: ConstrainedSet
    ledger: CapabilityLedger
    requested: dict[tuple[int, str], float] = field(default_factory=dict)
    gamma: float = np.nan
    u_s: np.ndarray = field(default_factory=lambda: np.zeros(2))
    qp_status: str = ""


@dataclass
class TickOutcome:
    agents: list[AgentTick]
    rounds_used: int
    converged: bool
    unservable: list[tuple[int, str]]
    degraded: list[int]
    qp_infeasible: list[int]
    messages: list[dict]

    @property
    def u_s(self) -> np.ndarray:
        return np.vstack([a.u_s for a in self.agents])

    @property
    def u_f(self) -> np.ndarray:
        return np.vstack([a.u_f for a in self.agents])


def _viable_action_set(u_f: np.ndarray, limit: float) -> Polytope:
    """{u : ||u||_inf <= limit and ||u_f - u||_inf <= limit}."""
    box = Polytope.box(limit)
    eye = np.eye(2)
    return box.with_rows(
        np.vstack([eye, -eye]),
        np.concatenate([limit + u_f, limit - u_f]),
    )


def run_tick(
    states: np.ndarray,
    scenario: Scenario,
    t: float,
    params: FormationParams | None = None,
    trace: list[dict] | None = None,
) -> TickOutcome:
    """One full sensing / collaboration / filtering pass for every agent."""
    states = np.asarray(states, dtype=float)
    n = scenario.agent_count
    if params is None:
        params = FormationParams(
            scenario.graph, scenario.masses, scenario.spring_sign, scenario.leader_inputs
        )
    messages: list[dict] = []

    agents: list[AgentTick] = []
    for i in range(n):
        sensed = sensed_obstacles(scenario, states, i, t)
        system = barrier.assemble(states, i, sensed, scenario.gains[i], params)
        u_f = nominal_control(states, params, i)
        fo_rows = [
            barrier.first_order_constraint(states, i, obs, scenario.gains[i], params)
            for obs in sensed
        ]
        agents.append(
            AgentTick(
                u_f=u_f,
                system=system,
                first_order_rows=fo_rows,
                constrained=ConstrainedSet(_viable_action_set(u_f, scenario.control_limit)),
                ledger=CapabilityLedger(),
            )
        )

    unservable: list[tuple[int, str]] = []
    converged = False
    rounds_used = 0
    for rnd in range(1, scenario.max_rounds + 1):
        rounds_used = rnd
        prev_promises = [
            {j: dict(per) for j, per in a.ledger.promises.items()} for a in agents
        ]

        # Phase 1: capability + requests.
        outbox: dict[int, list[RequestMsg]] = {i: [] for i in range(n)}
        for i, a in enumerate(agents):
            lp = maxmin_capability(a.system.B, a.constrained.polytope())
            a.gamma = lp.gamma
            if a.system.K == 0 or lp.status != "optimal":
                a.ledger.c_bar_i = np.zeros(a.system.K)
                continue
            a.ledger.c_bar_i = a.system.q + a.system.B @ lp.u_star
            deficit = compute_deficit(a.system, lp)
            granted = {
                (j, oid): amount
                for j, per in a.ledger.promises.items()
                for oid, amount in per.items()
            }
            requests, unserved = allocate_requests(
                i, deficit, a.system, a.requested, granted
            )
            for msg in requests:
                for row in msg.rows:
                    a.requested[(msg.recipient, row.obstacle_id)] = row.amount
            for oid in unserved:
                if (i, oid) not in unservable:
                    unservable.append((i, oid))
            for msg in requests:
                outbox[msg.recipient].append(msg)
                messages.append(
                    {
                        "tick": t,
                        "round": rnd,
                        "kind": "request",
                        "from": msg.sender,
                        "to": msg.recipient,
                        "payload": [
                            {
                                "obstacle": r.obstacle_id,
                                "direction": [float(r.direction[0]), float(r.direction[1])],
                                "amount": float(r.amount),
                            }
                            for r in msg.rows
                        ],
                    }
                )

        # Phase 2: process requests, make compromises.
        sets_changed = False
        adjust_inbox: dict[int, list[AdjustMsg]] = {i: [] for i in range(n)}
        for j, a in enumerate(agents):
            incoming = sorted(outbox[j], key=lambda m: m.sender)
            old_added = dict(a.constrained.added)
            adjustments, new_set, _ok = process_requests(
                j, a.constrained, a.first_order_rows, incoming,
                scenario.tau, scenario.tau_mode,
            )
            a.constrained = new_set
            if set(new_set.added) != set(old_added) or any(
                abs(new_set.added[k][1] - old_added[k][1]) > LEDGER_TOL
                or np.any(np.abs(new_set.added[k][0] - old_added[k][0]) > LEDGER_TOL)
                for k in old_added
                if k in new_set.added
            ):
                sets_changed = True
            for adj in adjustments:
                adjust_inbox[adj.recipient].append(adj)
                messages.append(
                    {
                        "tick": t,
                        "round": rnd,
                        "kind": "adjust",
                        "from": adj.sender,
                        "to": adj.recipient,
                        "payload": [
                            {"obstacle": oid, "granted": float(g)} for oid, g in adj.grants
                        ],
                    }
                )

        # Phase 3: record adjustments in the requesters' ledgers.
        for i, a in enumerate(agents):
            for adj in sorted(adjust_inbox[i], key=lambda m: m.sender):
                per = a.ledger.promises.setdefault(adj.sender, {})
                for oid, granted in adj.grants:
                    per[oid] = granted

        # Exit test: promises stable and no shortfall anywhere.
        stable = True
        for a, prev in zip(agents, prev_promises):
            keys = set(prev) | set(a.ledger.promises)
            for j in keys:
                olds, news = prev.get(j, {}), a.ledger.promises.get(j, {})
                for oid in set(olds) | set(news):
                    if abs(news.get(oid, 0.0) - olds.get(oid, 0.0)) > LEDGER_TOL:
                        stable = False
        all_satisfied = True
        for a in agents:
            ids = [row.obstacle_id for row in a.system.rows]
            if ids and np.any(a.ledger.delta(ids) < -LEDGER_TOL):
                all_satisfied = False
        if stable and all_satisfied:
            converged = True
            break
        if stable and not sets_changed:
            # Fixed point: every later round would replay this one verbatim,
            # so further iteration cannot clear the remaining shortfall.
            break

    # Safety filter per agent, honoring promises when feasible.
    degraded: list[int] = []
    qp_infeasible: list[int] = []
    for i, a in enumerate(agents):
        obj_center = a.u_f if scenario.objective == "paper_literal" else np.zeros(2)
        halfspaces = a.first_order_rows + a.constrained.halfspaces()
        res = qp_safety_filter(obj_center, halfspaces, a.constrained.base)
        if res.status != "optimal" and a.constrained.added:
            degraded.append(i)
            res = qp_safety_filter(obj_center, a.first_order_rows, a.constrained.base)
        if res.status != "optimal":
            qp_infeasible.append(i)
            if i not in degraded:
                degraded.append(i)
            res = qp_safety_filter(obj_center, [], a.constrained.base)
        a.u_s = res.u_s
        a.qp_status = res.status

    outcome = TickOutcome(
        agents=agents,
        rounds_used=rounds_used,
        converged=converged,
        unservable=unservable,
        degraded=degraded,
        qp_infeasible=qp_infeasible,
        messages=messages,
    )
    if trace is not None:
        trace.extend(messages)
    return outcome
