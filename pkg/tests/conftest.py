"""Shared fixtures: the reference run is expensive, so it is session-scoped."""

from __future__ import annotations

import numpy as np
import pytest

from swarmsafe import sim
from swarmsafe.model import (
    AgentState,
    FormationGraph,
    Gains,
    Obstacle,
    Scenario,
    SpringParams,
    Vec2,
)
from swarmsafe.scenario_io import load_scenario, reference_scenario_path


@pytest.fixture(scope="session")
def reference_scenario() -> Scenario:
    return load_scenario(reference_scenario_path())


@pytest.fixture(scope="session")
def reference_result(reference_scenario):
    return sim.run(reference_scenario)


def two_agent_request_scenario() -> Scenario:
    """Two spring-coupled agents closing on a static obstacle head-on.

    At t=0 agent 0 has a genuine capability shortfall on the obstacle row
    while agent 1 can cover the full request, so one request/adjust exchange
    settles the ledger.  Used by the protocol unit tests and acceptance.
    """
    graph = FormationGraph(2, {(0, 1): SpringParams(3.0, 1.0, 3.0)})
    return Scenario(
        graph=graph,
        initial_states=[
            AgentState(Vec2(0.0, 0.0), Vec2(4.0, 0.0)),
            AgentState(Vec2(-3.0, 0.0), Vec2(4.0, 0.0)),
        ],
        obstacles=[Obstacle("obs", Vec2(3.0, 0.0), Vec2(0.0, 0.0), 1.0)],
        sensing_radius=4.0,
        masses=[0.5, 0.5],
        gains=[Gains(2.0, 2.0, 2.0)] * 2,
        control_limit=15.0,
        dt=0.01,
        duration=1.0,
        tau=0.1,
    )


def single_agent_scenario(
    state: np.ndarray,
    obstacle: Obstacle,
    duration: float = 10.0,
    dt: float = 0.02,
) -> Scenario:
    return Scenario(
        graph=FormationGraph(1, {}),
        initial_states=[
            AgentState(Vec2.from_array(state[:2]), Vec2.from_array(state[2:]))
        ],
        obstacles=[obstacle],
        sensing_radius=8.0,
        masses=[0.5],
        gains=[Gains(2.0, 2.0, 2.0)],
        control_limit=15.0,
        dt=dt,
        duration=duration,
    )
