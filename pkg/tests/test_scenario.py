import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bondnet import MaterialLaw, emit_scenario, generate_example, parse_scenario, solve
from bondnet.errors import (
    ConflictingConstraint,
    InputError,
    InvalidGridDimensions,
    ParseError,
    UnknownLawId,
    UnknownNodeId,
)
from bondnet.scenario import (
    EXAMPLES,
    ResultBundle,
    Scenario,
    emit_results,
    grid,
    read_csv_table,
    read_results,
    scenario_to_dict,
)


def minimal(**over):
    doc = {
        "laws": {"default": {"stiffness": 1.0, "yield_extension": 0.5,
                             "fracture_extension": 1.0}},
        "nodes": [{"id": 1, "x": 0, "y": 0, "z": 0}, {"id": 2, "x": 1, "y": 0, "z": 0}],
        "bonds": [{"id": 1, "start": 1, "end": 2}],
        "prescribed": [{"node": 1, "position": [0, 0, 0]}],
        "loads": [{"node": 2, "force": [0.1, 0, 0]}],
    }
    doc.update(over)
    return json.dumps(doc)


def test_minimal_parses_and_solves():
    sc = parse_scenario(minimal())
    prob, opts = sc.to_problem()
    rep = solve(prob, opts)
    assert rep.converged
    assert rep.X[1, 0] == pytest.approx(1.1, rel=1e-12)
    assert sc.laws["default"].hardening_ratio == 0.0


@pytest.mark.parametrize("name", EXAMPLES)
def test_examples_roundtrip(name):
    sc = generate_example(name)
    text = emit_scenario(sc)
    again = parse_scenario(text)
    assert again == sc
    assert emit_scenario(again) == text


def test_roundtrip_keeps_awkward_floats():
    sc = parse_scenario(minimal())
    sc.nodes[1] = (2, 0.1 + 0.2, 1e-300, -math.pi)
    sc.loads[0] = (2, (1 / 3, 2.0 ** -52, 0.0))
    back = parse_scenario(emit_scenario(sc))
    assert back.nodes == sc.nodes and back.loads == sc.loads


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=6, max_size=6))
def test_roundtrip_property(vals):
    sc = parse_scenario(minimal())
    sc.nodes[1] = (2, 1.0 + abs(vals[0]), vals[1], vals[2])
    sc.loads[0] = (2, tuple(vals[3:]))
    assert parse_scenario(emit_scenario(sc)) == sc


@pytest.mark.parametrize("override, exc, field", [
    ({"bonds": []}, ParseError, "bonds"),
    ({"bonds": [{"id": 1, "start": 1, "end": 9}]}, UnknownNodeId, None),
    ({"bonds": [{"id": 1, "start": 1, "end": 2, "law": "steel"}]}, UnknownLawId, None),
    ({"loads": [{"node": 1, "force": [0, 0, 1]}]}, ConflictingConstraint, None),
    ({"nodes": [{"id": 1, "x": 0, "y": 0, "z": 0}, {"id": 1, "x": 1, "y": 0, "z": 0}]},
     ParseError, "nodes[1].id"),
    ({"nodes": [{"id": 1, "x": 0, "y": 0, "z": 0}, {"id": 2, "x": "a", "y": 0, "z": 0}]},
     ParseError, "nodes[1].x"),
    ({"prescribed": [{"node": 1, "position": [0, 0]}]}, ParseError, "prescribed[0].position"),
    ({"laws": {"default": {"stiffness": -1.0, "yield_extension": 0.5,
                           "fracture_extension": 1.0}}}, ParseError, "laws.default"),
    ({"solver": {"warp": 9}}, ParseError, "solver"),
    ({"format": 2}, ParseError, "format"),
])
def test_parse_errors(override, exc, field):
    with pytest.raises(exc) as info:
        parse_scenario(minimal(**override))
    assert isinstance(info.value, InputError)
    if field is not None:
        assert info.value.field == field


def test_syntax_error_reports_line():
    text = minimal().replace('"bonds"', '"bonds" "oops"')
    with pytest.raises(ParseError) as info:
        parse_scenario(text)
    assert info.value.line == 1
    with pytest.raises(ParseError) as info:
        parse_scenario('{\n  "laws": {},\n  oops\n}')
    assert info.value.line == 3


def test_ids_remap_in_order_of_appearance():
    doc = json.loads(minimal())
    doc["nodes"] = [{"id": 40, "x": 1, "y": 0, "z": 0}, {"id": 7, "x": 0, "y": 0, "z": 0}]
    doc["bonds"] = [{"id": 3, "start": 7, "end": 40}]
    doc["prescribed"] = [{"node": 7, "position": [0, 0, 0]}]
    doc["loads"] = [{"node": 40, "force": [0.2, 0, 0]}]
    prob, _ = parse_scenario(json.dumps(doc)).to_problem()
    assert prob.part.prescribed.tolist() == [1]
    assert prob.net.bonds == [(1, 0)]
    np.testing.assert_array_equal(prob.B_P, [[0.2, 0, 0]])


def test_octahedron_geometry():
    sc = generate_example("octahedron")
    prob, _ = sc.to_problem()
    assert prob.net.n == 6 and prob.net.m == 12
    L = prob.net.rest_lengths
    assert np.ptp(L) <= 1e-12 and L[0] == pytest.approx(math.sqrt(2))
    # the three prescribed vertices are pairwise bonded: a face
    pres = set(prob.part.prescribed.tolist())
    assert sum(1 for s, e in prob.net.bonds if s in pres and e in pres) == 3


def test_grid_counts():
    sc = grid(2, 1, 1)
    assert len(sc.nodes) == 2 and len(sc.bonds) == 1
    sc = grid(3, 2, 2)
    assert len(sc.nodes) == 12 and len(sc.bonds) == 2 * 2 * 2 + 3 * 1 * 2 + 3 * 2 * 1
    with pytest.raises(InvalidGridDimensions):
        grid(0, 1, 1)
    with pytest.raises(InvalidGridDimensions):
        grid(1, 1, 1)


def test_bond_without_law_needs_default():
    doc = json.loads(minimal())
    doc["laws"] = {"a": doc["laws"]["default"], "b": doc["laws"]["default"]}
    with pytest.raises(UnknownLawId):
        parse_scenario(json.dumps(doc))
    doc["laws"] = {"only": doc["laws"]["a"]}
    assert parse_scenario(json.dumps(doc)).law_for((1, 1, 2, None)) == "only"


def test_results_roundtrip(tmp_path):
    sc = generate_example("series")
    prob, opts = sc.to_problem()
    from bondnet import load_sweep
    rep = load_sweep(prob, opts)
    bundle = ResultBundle.from_report(rep, sc, prob)
    paths = emit_results(bundle, tmp_path, timestamp=False, history=True)
    names = sorted(p.name for p in paths)
    assert names == ["broken_bonds.txt", "forces.csv", "history.csv", "positions.csv",
                     "reactions.csv", "report.json"]
    back = read_results(tmp_path)
    for attr in ("positions", "forces", "reactions", "extensions", "magnitudes"):
        np.testing.assert_array_equal(getattr(back, attr), getattr(bundle, attr))
    assert back.broken_bonds == [2]
    ids, vals = read_csv_table(tmp_path / "positions.csv")
    assert ids == [1, 2, 3]
    np.testing.assert_array_equal(vals, rep.X)
    ids, vals = read_csv_table(tmp_path / "forces.csv")
    np.testing.assert_array_equal(vals[:, :3], rep.F)
    assert (tmp_path / "broken_bonds.txt").read_text() == "2\n"
    assert "timestamp" not in json.loads((tmp_path / "report.json").read_text())


def test_scenario_dict_has_no_empty_solver():
    d = scenario_to_dict(Scenario([(1, 0, 0, 0)], [], {"d": MaterialLaw.linear(1)}, [], []))
    assert "solver" not in d
