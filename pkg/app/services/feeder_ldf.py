"""LinDistFlow on radial feeders.

Squared voltage drops linearly along each line with the real and reactive
flow it carries; flows are sums of every downstream nodal demand:

    v_child**2 = v_parent**2 - 2 * (r_line * P_flow + x_line * Q_flow)

Phases are decoupled and computed side by side.
"""
import logging
import math
from typing import Iterable, Optional

import networkx as nx
import numpy as np

from app.core.config import settings
from app.core.errors import LrpError, TopologyError
from app.schemas.feeder import PHASES, FeederModel, NodalInjection, NodeLoad, VoltageReport

logger = logging.getLogger(__name__)


class RadialFeeder:
    """Topology and path-impedance matrices of a FeederModel, computed once."""

    def __init__(self, model: FeederModel):
        self.model = model
        self.node_ids = [n.id for n in model.nodes]
        if len(set(self.node_ids)) != len(self.node_ids):
            raise TopologyError("duplicate node ids")
        self.index = {node_id: i for i, node_id in enumerate(self.node_ids)}
        if model.substation not in self.index:
            raise TopologyError(f"substation '{model.substation}' is not a feeder node")

        graph = nx.Graph()
        graph.add_nodes_from(self.node_ids)
        for line in model.lines:
            for end in (line.from_node, line.to_node):
                if end not in self.index:
                    raise TopologyError(f"line references unknown node '{end}'")
            if graph.has_edge(line.from_node, line.to_node):
                raise TopologyError(f"parallel lines between {line.from_node} and {line.to_node}")
            graph.add_edge(line.from_node, line.to_node, r=line.r_pu, x=line.x_pu)
        if not nx.is_connected(graph):
            stray = set(self.node_ids) - nx.node_connected_component(graph, model.substation)
            raise TopologyError(f"nodes not connected to the substation: {sorted(stray)}")
        if not nx.is_tree(graph):
            raise TopologyError(f"feeder is not radial: cycle {nx.find_cycle(graph)}")

        n = len(self.node_ids)
        self.root = self.index[model.substation]
        self.parent = np.full(n, -1)
        self.r = np.zeros(n)
        self.x = np.zeros(n)
        # Parents come before children in this order
        self.order = [self.root]
        for u, v in nx.bfs_edges(graph, model.substation):
            i, j = self.index[u], self.index[v]
            self.parent[j] = i
            self.r[j] = graph.edges[u, v]["r"]
            self.x[j] = graph.edges[u, v]["x"]
            self.order.append(j)

        # ancestry[i, k] = 1 when the line feeding node k lies on the path to node i
        self.ancestry = np.zeros((n, n))
        for k in self.order[1:]:
            self.ancestry[k] = self.ancestry[self.parent[k]]
            self.ancestry[k, k] = 1.0
        self.r_common = self.ancestry @ np.diag(self.r) @ self.ancestry.T

        self.phase_mask = np.zeros((n, len(PHASES)), dtype=bool)
        for node in model.nodes:
            for phase in node.phases:
                self.phase_mask[self.index[node.id], PHASES.index(phase)] = True
        logger.debug(f"Radial feeder with {n} nodes rooted at {model.substation}")

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def leaves(self) -> list:
        children = set(self.parent[self.parent >= 0].tolist())
        return [self.node_ids[i] for i in range(self.n_nodes) if i != self.root and i not in children]

    def node_index(self, node: str) -> int:
        try:
            return self.index[node]
        except KeyError:
            raise TopologyError(f"unknown node '{node}'") from None


def map_building_loads(
    energy_kwh,
    period_hours: float,
    phases: int = 3,
    controllable: bool = False,
    power_factor: Optional[float] = None,
):
    """Per-phase (P kW, Q kVAr) of a balanced building load.

    Building load runs at the building power factor (0.9 lagging by default),
    controllable EV load at unity.
    """
    if period_hours <= 0:
        raise LrpError(f"period_hours must be > 0, got {period_hours}")
    energy = np.asarray(energy_kwh, dtype=float)
    if not controllable and (energy < 0).any():
        raise LrpError("uncontrollable building energy must be >= 0")
    p = energy / period_hours / phases
    if controllable:
        return p, np.zeros_like(p)
    pf = settings.BUILDING_POWER_FACTOR if power_factor is None else power_factor
    return p, p * math.tan(math.acos(pf))


def build_injections(feeder: RadialFeeder, loads: Iterable[NodeLoad], period_hours: float) -> NodalInjection:
    loads = list(loads)
    if not loads:
        raise LrpError("no loads to place on the feeder")
    n_periods = len(loads[0].base_kwh)
    shape = (n_periods, feeder.n_nodes, len(PHASES))
    p, q, p_ctrl = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    for load in loads:
        i = feeder.node_index(load.node)
        mask = feeder.phase_mask[i]
        n_phases = int(mask.sum())
        bp, bq = map_building_loads(load.base_kwh, period_hours, phases=n_phases)
        cp, _ = map_building_loads(load.controllable_kwh, period_hours, phases=n_phases, controllable=True)
        p[:, i, mask] += bp[:, None]
        q[:, i, mask] += bq[:, None]
        p_ctrl[:, i, mask] += cp[:, None]
    return NodalInjection(
        node_ids=list(feeder.node_ids), p_kw=p, q_kvar=q, p_ctrl_kw=p_ctrl, q_ctrl_kvar=np.zeros(shape)
    )


def voltage_profile(feeder: RadialFeeder, injections: NodalInjection, period: int) -> np.ndarray:
    """Squared voltage (pu^2) per node and phase; NaN on phases a node lacks."""
    if injections.node_ids != feeder.node_ids:
        raise TopologyError("injections are not defined on this feeder's nodes")
    if not 0 <= period < injections.n_periods:
        raise LrpError(f"period {period} out of range [0, {injections.n_periods})")
    base = feeder.model.base_kva
    flow_p = (injections.p_kw[period] + injections.p_ctrl_kw[period]) / base
    flow_q = (injections.q_kvar[period] + injections.q_ctrl_kvar[period]) / base
    for k in reversed(feeder.order[1:]):
        flow_p[feeder.parent[k]] += flow_p[k]
        flow_q[feeder.parent[k]] += flow_q[k]

    v2 = np.empty_like(flow_p)
    v2[feeder.root] = feeder.model.v_substation_pu ** 2
    for k in feeder.order[1:]:
        v2[k] = v2[feeder.parent[k]] - 2.0 * (feeder.r[k] * flow_p[k] + feeder.x[k] * flow_q[k])
    return np.where(feeder.phase_mask, v2, np.nan)


def horizon_voltages(feeder: RadialFeeder, injections: NodalInjection) -> np.ndarray:
    return np.stack([voltage_profile(feeder, injections, t) for t in range(injections.n_periods)])


def voltage_sensitivity(feeder: RadialFeeder, node: str, phase: str = "a") -> np.ndarray:
    """d(v_node**2)/d(P_j) for every node j, per-unit; -2 x common-path resistance."""
    i = feeder.node_index(node)
    if phase not in PHASES or not feeder.phase_mask[i, PHASES.index(phase)]:
        raise TopologyError(f"node '{node}' has no phase '{phase}'")
    return -2.0 * feeder.r_common[i].copy()


def check_violations(
    feeder: RadialFeeder,
    v_squared: np.ndarray,
    periods_per_day: int = 24,
    v_min: Optional[float] = None,
    tol: Optional[float] = None,
    period_offset: int = 0,
) -> VoltageReport:
    """Flag every (node, phase, period) with |V| < v_min - tol and count affected days."""
    v_min = settings.V_MIN_PU if v_min is None else v_min
    tol = settings.VIOLATION_TOL_PU if tol is None else tol
    v = np.sqrt(np.clip(v_squared, 0.0, None))
    low = np.nan_to_num(v, nan=np.inf) < v_min - tol
    violations = [
        (feeder.node_ids[i], PHASES[p], int(t) + period_offset)
        for t, i, p in zip(*np.nonzero(low))
    ]
    days = {period // periods_per_day for _, _, period in violations}
    report = VoltageReport(
        v_squared=v_squared,
        v_pu=v,
        min_voltage=float(np.nanmin(v)),
        violations=violations,
        violation_days=len(days),
    )
    if violations:
        logger.info(
            f"{len(violations)} voltage violations below {v_min} pu on {report.violation_days} day(s), "
            f"min {report.min_voltage:.4f} pu"
        )
    return report
