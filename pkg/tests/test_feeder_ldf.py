import math

import numpy as np
import pytest

from app.core.errors import LrpError, TopologyError
from app.schemas.feeder import FeederLine, FeederModel, FeederNode, NodalInjection, NodeLoad
from app.services.feeder_ldf import (
    RadialFeeder,
    build_injections,
    check_violations,
    horizon_voltages,
    map_building_loads,
    voltage_profile,
    voltage_sensitivity,
)

TAN_PF09 = math.sqrt(1 - 0.81) / 0.9


def _chain(r=0.05, x=0.05, n=3):
    nodes = [FeederNode(id=str(i)) for i in range(n)]
    lines = [FeederLine(from_node=str(i), to_node=str(i + 1), r_pu=r, x_pu=x) for i in range(n - 1)]
    return FeederModel(nodes=nodes, lines=lines, substation="0")


def _random_tree(rng, n):
    labels = [f"n{k}" for k in rng.permutation(n)]
    lines = []
    for k in range(1, n):
        parent = labels[int(rng.integers(0, k))]
        ends = (parent, labels[k]) if rng.random() < 0.5 else (labels[k], parent)
        lines.append(
            FeederLine(from_node=ends[0], to_node=ends[1], r_pu=rng.uniform(1e-3, 2e-2), x_pu=rng.uniform(1e-3, 2e-2))
        )
    nodes = [FeederNode(id=label) for label in sorted(labels)]
    return FeederModel(nodes=nodes, lines=lines, substation=labels[0], v_substation_pu=rng.uniform(0.98, 1.05))


def _injection(feeder, p, q):
    zeros = np.zeros_like(p)
    return NodalInjection(node_ids=list(feeder.node_ids), p_kw=p, q_kvar=q, p_ctrl_kw=zeros, q_ctrl_kvar=zeros)


def _incidence_oracle(model, p_pu, q_pu):
    """Dense LinDistFlow: flow conservation and line drops as two linear solves."""
    ids = [n.id for n in model.nodes]
    index = {node: i for i, node in enumerate(ids)}
    root = index[model.substation]
    C = np.zeros((len(model.lines), len(ids)))
    r = np.array([line.r_pu for line in model.lines])
    x = np.array([line.x_pu for line in model.lines])
    for l, line in enumerate(model.lines):
        C[l, index[line.from_node]] = 1.0
        C[l, index[line.to_node]] = -1.0
    others = [i for i in range(len(ids)) if i != root]
    C_red = C[:, others]
    f_p = np.linalg.solve(-C_red.T, p_pu[others])
    f_q = np.linalg.solve(-C_red.T, q_pu[others])
    rhs = 2.0 * (r * f_p + x * f_q) - C[:, root] * model.v_substation_pu ** 2
    v2 = np.empty(len(ids))
    v2[root] = model.v_substation_pu ** 2
    v2[others] = np.linalg.solve(C_red, rhs)
    return v2


def test_single_line_example():
    feeder = RadialFeeder(_chain(r=0.01, x=0.01, n=2))
    p = np.zeros((1, 2, 3))
    p[0, 1, :] = 100.0
    v2 = voltage_profile(feeder, _injection(feeder, p, np.zeros_like(p)), 0)
    assert v2[1] == pytest.approx([0.98] * 3)
    assert math.sqrt(v2[1, 0]) == pytest.approx(0.98995, abs=1e-5)


def test_zero_injection_is_flat():
    feeder = RadialFeeder(_chain())
    p = np.zeros((1, 3, 3))
    assert voltage_profile(feeder, _injection(feeder, p, p), 0) == pytest.approx(np.ones((3, 3)))


def test_matches_incidence_oracle_on_random_trees(rng):
    for _ in range(50):
        n = int(rng.integers(2, 31))
        model = _random_tree(rng, n)
        feeder = RadialFeeder(model)
        p = rng.uniform(0, 5, (1, n, 3))
        q = rng.uniform(0, 2, (1, n, 3))
        v2 = voltage_profile(feeder, _injection(feeder, p, q), 0)
        for phase in range(3):
            oracle = _incidence_oracle(model, p[0, :, phase] / model.base_kva, q[0, :, phase] / model.base_kva)
            assert np.abs(v2[:, phase] - oracle).max() < 1e-10


def test_drop_is_linear_and_monotone(rng):
    model = _random_tree(rng, 15)
    feeder = RadialFeeder(model)
    v0 = model.v_substation_pu ** 2
    a = rng.uniform(0, 5, (1, 15, 3))
    b = rng.uniform(0, 5, (1, 15, 3))
    zero = np.zeros_like(a)
    va = voltage_profile(feeder, _injection(feeder, a, zero), 0)
    vb = voltage_profile(feeder, _injection(feeder, b, zero), 0)
    vab = voltage_profile(feeder, _injection(feeder, a + b, zero), 0)
    assert vab - v0 == pytest.approx((va - v0) + (vb - v0), abs=1e-12)
    assert (vab <= va + 1e-15).all()


def test_sensitivity_matches_finite_difference(rng):
    model = _random_tree(rng, 12)
    feeder = RadialFeeder(model)
    base = rng.uniform(0, 3, (1, 12, 3))
    v_base = voltage_profile(feeder, _injection(feeder, base, np.zeros_like(base)), 0)
    target = model.nodes[5].id
    sens = voltage_sensitivity(feeder, target, "a")
    for j in range(12):
        bumped = base.copy()
        bumped[0, j, 0] += 1.0
        v = voltage_profile(feeder, _injection(feeder, bumped, np.zeros_like(base)), 0)
        delta_pu = 1.0 / model.base_kva
        slope = (v[feeder.node_index(target), 0] - v_base[feeder.node_index(target), 0]) / delta_pu
        assert slope == pytest.approx(sens[j], abs=1e-9)


def test_map_building_loads():
    p, q = map_building_loads(np.array([90.0]), 1.0)
    assert p[0] == pytest.approx(30.0)
    assert q[0] == pytest.approx(30.0 * TAN_PF09)
    assert q[0] == pytest.approx(14.53, abs=0.01)
    p, q = map_building_loads(np.array([21.6]), 1.0, controllable=True)
    assert p[0] == pytest.approx(7.2) and q[0] == 0.0
    p, q = map_building_loads(np.zeros(3), 1.0)
    assert not p.any() and not q.any()
    with pytest.raises(LrpError):
        map_building_loads(np.array([1.0]), 0.0)
    with pytest.raises(LrpError):
        map_building_loads(np.array([-1.0]), 1.0)


def test_desk_feeder_day_ahead_peak():
    feeder = RadialFeeder(_chain())
    base = np.full(2, 30.0)
    loads = [
        NodeLoad(node="1", base_kwh=base, controllable_kwh=np.array([0.0, 72.0])),
        NodeLoad(node="2", base_kwh=base, controllable_kwh=np.array([0.0, 72.0])),
    ]
    v2 = horizon_voltages(feeder, build_injections(feeder, loads, 1.0))
    assert v2[0, 2, 0] == pytest.approx(1 - 0.1 * (0.2 + 0.2 * TAN_PF09) - 0.1 * (0.1 + 0.1 * TAN_PF09))
    assert v2[1, 2, 0] == pytest.approx(0.8834703, abs=1e-7)
    report = check_violations(feeder, v2, periods_per_day=1)
    assert {(node, period) for node, _, period in report.violations} == {("2", 1)}
    assert report.violation_days == 1
    assert report.min_voltage == pytest.approx(math.sqrt(0.8834703), abs=1e-7)


def test_violation_tolerance_and_days():
    feeder = RadialFeeder(_chain())
    v2 = np.ones((48, 3, 3))
    v2[5, 2, :] = 0.95 ** 2
    v2[30, 1, 0] = 0.94 ** 2
    report = check_violations(feeder, v2, periods_per_day=24)
    assert report.violations == [("1", "a", 30)]
    assert report.violation_days == 1


def test_single_phase_nodes_are_masked():
    model = FeederModel(
        nodes=[FeederNode(id="s"), FeederNode(id="lat", phases=["b"])],
        lines=[FeederLine(from_node="s", to_node="lat", r_pu=0.01, x_pu=0.01)],
        substation="s",
    )
    feeder = RadialFeeder(model)
    inj = build_injections(feeder, [NodeLoad("lat", np.array([9.0]), np.array([0.0]))], 1.0)
    assert inj.p_kw[0, 1].tolist() == [0.0, 9.0, 0.0]
    v2 = voltage_profile(feeder, inj, 0)
    assert np.isnan(v2[1, 0]) and np.isnan(v2[1, 2])
    with pytest.raises(TopologyError):
        voltage_sensitivity(feeder, "lat", "a")


def test_topology_errors():
    nodes = [FeederNode(id=i) for i in "abc"]
    line = lambda u, v: FeederLine(from_node=u, to_node=v, r_pu=0.01, x_pu=0.01)
    with pytest.raises(TopologyError):
        RadialFeeder(FeederModel(nodes=nodes, lines=[line("a", "b"), line("b", "c"), line("c", "a")], substation="a"))
    with pytest.raises(TopologyError):
        RadialFeeder(FeederModel(nodes=nodes, lines=[line("a", "b")], substation="a"))
    with pytest.raises(TopologyError):
        RadialFeeder(FeederModel(nodes=nodes, lines=[line("a", "b"), line("b", "z")], substation="a"))
    with pytest.raises(TopologyError):
        RadialFeeder(_chain()).node_index("missing")
