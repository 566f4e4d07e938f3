"""Scenario files, built-in examples and result bundles.

A scenario is a JSON document (see ``docs/scenario_format.md``). Node and
bond ids in files are arbitrary distinct integers, conventionally 1-based;
internally they are remapped to dense 0-based indices in order of
appearance.
"""
from dataclasses import dataclass, field
import csv
import datetime
import itertools
import json
import math
from pathlib import Path

import numpy as np

from .equilibrium import EquilibriumProblem, Partition
from .errors import (
    ConflictingConstraint,
    InvalidGridDimensions,
    InvalidLawParameters,
    ParseError,
    UnknownLawId,
    UnknownNodeId,
)
from .material import MaterialLaw
from .network import build_network
from .solver import SolverOptions

FORMAT_VERSION = 1
DEFAULT_LAW = "default"

_TOP_KEYS = {"format", "name", "notes", "units", "laws", "nodes", "bonds",
             "prescribed", "loads", "solver"}
_LAW_KEYS = {"stiffness", "yield_extension", "hardening_ratio",
             "fracture_extension", "compression_mode", "smoothing_radius"}


@dataclass
class Scenario:
    nodes: list                     # (id, x, y, z)
    bonds: list                     # (id, start id, end id, law id or None)
    laws: dict                      # law id -> MaterialLaw
    prescribed: list                # (node id, (x, y, z))
    loads: list                     # (node id, (fx, fy, fz))
    solver: dict = field(default_factory=dict)
    name: str = ""
    notes: str = ""
    units: dict = field(default_factory=dict)

    @property
    def node_ids(self):
        return [nd[0] for nd in self.nodes]

    @property
    def bond_ids(self):
        return [bd[0] for bd in self.bonds]

    def law_for(self, bond):
        law_id = bond[3]
        if law_id is None:
            if DEFAULT_LAW in self.laws:
                return DEFAULT_LAW
            if len(self.laws) == 1:
                return next(iter(self.laws))
            raise UnknownLawId(
                f"bond {bond[0]} has no law and there is no {DEFAULT_LAW!r} law")
        if law_id not in self.laws:
            raise UnknownLawId(f"bond {bond[0]} references unknown law {law_id!r}")
        return law_id

    def to_problem(self):
        """Build the :class:`EquilibriumProblem` and :class:`SolverOptions`."""
        index = {nid: i for i, nid in enumerate(self.node_ids)}
        D = np.array([nd[1:4] for nd in self.nodes], dtype=float)
        pairs = [(index[bd[1]], index[bd[2]]) for bd in self.bonds]
        net = build_network(D, pairs)

        law_names = list(self.laws)
        law_ids = np.array([law_names.index(self.law_for(bd)) for bd in self.bonds],
                           dtype=np.intp)
        laws = [self.laws[name] for name in law_names]

        pres = [index[nid] for nid, _ in self.prescribed]
        part = Partition.from_prescribed(net.n, pres)
        X_Q = np.array([pos for _, pos in self.prescribed], dtype=float).reshape(-1, 3)
        free_pos = {int(v): i for i, v in enumerate(part.free)}
        B_P = np.zeros((part.p, 3))
        for nid, force in self.loads:
            B_P[free_pos[index[nid]]] += force
        prob = EquilibriumProblem.create(net, laws, part, X_Q, B_P, law_ids)
        return prob, SolverOptions.from_dict(self.solver)


# -- parsing ---------------------------------------------------------------

def _num(v, fieldname):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected a number, got {v!r}", field=fieldname)
    v = float(v)
    if not math.isfinite(v):
        raise ParseError("value must be finite", field=fieldname)
    return v


def _int(v, fieldname):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"expected an integer id, got {v!r}", field=fieldname)
    return v


def _vec3(v, fieldname):
    if not isinstance(v, list) or len(v) != 3:
        raise ParseError(f"expected a list of 3 numbers, got {v!r}", field=fieldname)
    return tuple(_num(c, f"{fieldname}[{i}]") for i, c in enumerate(v))


def _obj(v, fieldname, required, optional=()):
    if not isinstance(v, dict):
        raise ParseError(f"expected an object, got {type(v).__name__}", field=fieldname)
    missing = [k for k in required if k not in v]
    if missing:
        raise ParseError(f"missing key(s) {missing}", field=fieldname)
    extra = set(v) - set(required) - set(optional)
    if extra:
        raise ParseError(f"unknown key(s) {sorted(extra)}", field=fieldname)
    return v


def _list(doc, key):
    v = doc.get(key, [])
    if not isinstance(v, list):
        raise ParseError("expected an array", field=key)
    return v


def parse_scenario(text):
    """Parse and validate scenario JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    _obj(doc, "<root>", ("nodes", "bonds", "laws"), _TOP_KEYS)
    if doc.get("format", FORMAT_VERSION) != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {doc['format']!r}", field="format")

    laws = {}
    if not isinstance(doc["laws"], dict) or not doc["laws"]:
        raise ParseError("expected a non-empty object of laws", field="laws")
    for name, spec in doc["laws"].items():
        f = f"laws.{name}"
        _obj(spec, f, ("stiffness", "yield_extension", "fracture_extension"), _LAW_KEYS)
        kw = {k: (spec[k] if k == "compression_mode" else _num(spec[k], f"{f}.{k}"))
              for k in spec}
        kw.setdefault("hardening_ratio", 0.0)
        try:
            laws[name] = MaterialLaw(**kw)
        except InvalidLawParameters as exc:
            raise ParseError(str(exc), field=f) from None

    nodes, seen = [], set()
    for i, nd in enumerate(_list(doc, "nodes")):
        f = f"nodes[{i}]"
        _obj(nd, f, ("id", "x", "y", "z"))
        nid = _int(nd["id"], f"{f}.id")
        if nid in seen:
            raise ParseError(f"duplicate node id {nid}", field=f"{f}.id")
        seen.add(nid)
        nodes.append((nid, _num(nd["x"], f"{f}.x"), _num(nd["y"], f"{f}.y"),
                      _num(nd["z"], f"{f}.z")))

    bonds, bseen = [], set()
    raw_bonds = _list(doc, "bonds")
    if not raw_bonds:
        raise ParseError("scenario has no bonds", field="bonds")
    for i, bd in enumerate(raw_bonds):
        f = f"bonds[{i}]"
        _obj(bd, f, ("id", "start", "end"), ("law",))
        bid = _int(bd["id"], f"{f}.id")
        if bid in bseen:
            raise ParseError(f"duplicate bond id {bid}", field=f"{f}.id")
        bseen.add(bid)
        ends = []
        for key in ("start", "end"):
            nid = _int(bd[key], f"{f}.{key}")
            if nid not in seen:
                raise UnknownNodeId(f"{f}.{key}: unknown node id {nid}")
            ends.append(nid)
        law = bd.get("law")
        if law is not None and law not in laws:
            raise UnknownLawId(f"{f}.law: unknown law id {law!r}")
        bonds.append((bid, ends[0], ends[1], law))

    def constraints(key, vkey):
        out, used = [], set()
        for i, c in enumerate(_list(doc, key)):
            f = f"{key}[{i}]"
            _obj(c, f, ("node", vkey))
            nid = _int(c["node"], f"{f}.node")
            if nid not in seen:
                raise UnknownNodeId(f"{f}.node: unknown node id {nid}")
            if nid in used:
                raise ParseError(f"node {nid} listed twice", field=f)
            used.add(nid)
            out.append((nid, _vec3(c[vkey], f"{f}.{vkey}")))
        return out, used

    prescribed, pset = constraints("prescribed", "position")
    loads, lset = constraints("loads", "force")
    both = sorted(pset & lset)
    if both:
        raise ConflictingConstraint(f"node(s) {both} are both prescribed and loaded")

    solver = doc.get("solver", {})
    if not isinstance(solver, dict):
        raise ParseError("expected an object", field="solver")
    try:
        SolverOptions.from_dict(solver)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), field="solver") from None

    units = doc.get("units", {})
    if not isinstance(units, dict):
        raise ParseError("expected an object", field="units")
    sc = Scenario(nodes, bonds, laws, prescribed, loads, dict(solver),
                  str(doc.get("name", "")), str(doc.get("notes", "")), dict(units))
    for bd in bonds:
        sc.law_for(bd)
    sc.to_problem()
    return sc


def load_scenario(path):
    return parse_scenario(Path(path).read_text())


def scenario_to_dict(sc):
    doc = {"format": FORMAT_VERSION}
    if sc.name:
        doc["name"] = sc.name
    if sc.notes:
        doc["notes"] = sc.notes
    if sc.units:
        doc["units"] = dict(sc.units)
    doc["laws"] = {name: law.to_dict() for name, law in sc.laws.items()}
    doc["nodes"] = [{"id": i, "x": x, "y": y, "z": z} for i, x, y, z in sc.nodes]
    doc["bonds"] = [dict(id=i, start=s, end=e, **({"law": law} if law is not None else {}))
                    for i, s, e, law in sc.bonds]
    doc["prescribed"] = [{"node": i, "position": list(p)} for i, p in sc.prescribed]
    doc["loads"] = [{"node": i, "force": list(f)} for i, f in sc.loads]
    if sc.solver:
        doc["solver"] = dict(sc.solver)
    return doc


def emit_scenario(sc):
    """Serialize to JSON text; floats use shortest round-trip repr."""
    return json.dumps(scenario_to_dict(sc), indent=2) + "\n"


# -- built-in examples -----------------------------------------------------

def _default_law():
    return MaterialLaw(stiffness=1.0, yield_extension=0.5, hardening_ratio=0.1,
                       fracture_extension=1.0)


def triangle():
    D = [(1.0, 1.0, 0.0), (2.0, 1.0, 1.0), (1.0, 2.0, 1.0)]
    # equal and opposite pull along bond 1-2: torque free about node 3
    d = np.subtract(D[0], D[1])
    pull = tuple((0.01 * d / np.linalg.norm(d)).tolist())
    return Scenario(
        nodes=[(i + 1, *p) for i, p in enumerate(D)],
        bonds=[(1, 1, 2, None), (2, 2, 3, None), (3, 3, 1, None)],
        laws={DEFAULT_LAW: _default_law()},
        prescribed=[(3, D[2])],
        loads=[(1, pull), (2, tuple(-c for c in pull))],
        name="triangle",
    )


def octahedron():
    V = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    V = [tuple(float(c) for c in v) for v in V]
    opposite = {(0, 1), (2, 3), (4, 5)}
    edges = [(i, j) for i, j in itertools.combinations(range(6), 2) if (i, j) not in opposite]
    # face (-x, -y, -z) held fixed, small load on the +z apex
    return Scenario(
        nodes=[(i + 1, *v) for i, v in enumerate(V)],
        bonds=[(k + 1, i + 1, j + 1, None) for k, (i, j) in enumerate(edges)],
        laws={DEFAULT_LAW: _default_law()},
        prescribed=[(n, V[n - 1]) for n in (2, 4, 6)],
        loads=[(5, (0.001, 0.002, -0.01))],
        name="octahedron",
        notes=("Regular octahedron: 6 vertices, 12 edges. A '15 node / 14 edge' "
               "structure is not a regular octahedron; define it explicitly in a "
               "scenario file if needed."),
    )


def grid(nx, ny, nz, spacing=1.0):
    """``nx x ny x nz`` cubic lattice with nearest-neighbour bonds.

    The ``x = 0`` face is prescribed; the ``x = max`` face carries a small
    ``+x`` load when ``nx > 1``.
    """
    dims = (nx, ny, nz)
    if not all(isinstance(v, int) and v >= 1 for v in dims) or nx * ny * nz < 2:
        raise InvalidGridDimensions(f"grid dimensions must be positive with >= 2 nodes, got {dims}")

    def nid(i, j, k):
        return 1 + i + nx * (j + ny * k)

    nodes, bonds = [], []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                nodes.append((nid(i, j, k), i * spacing, j * spacing, k * spacing))
                for di, dj, dk in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                    a, b, c = i + di, j + dj, k + dk
                    if a < nx and b < ny and c < nz:
                        bonds.append((len(bonds) + 1, nid(i, j, k), nid(a, b, c), None))
    pos = {n[0]: tuple(n[1:]) for n in nodes}
    prescribed = [(nid(0, j, k), pos[nid(0, j, k)]) for k in range(nz) for j in range(ny)]
    loads = []
    if nx > 1:
        loads = [(nid(nx - 1, j, k), (0.01, 0.0, 0.0)) for k in range(nz) for j in range(ny)]
    return Scenario(nodes, bonds, {DEFAULT_LAW: _default_law()}, prescribed, loads,
                    name=f"grid_{nx}x{ny}x{nz}")


def bar(final_length=2.2):
    """Single bond, both ends prescribed; the far end is pulled to ``final_length``."""
    return Scenario(
        nodes=[(1, 0.0, 0.0, 0.0), (2, 1.0, 0.0, 0.0)],
        bonds=[(1, 1, 2, None)],
        laws={DEFAULT_LAW: _default_law()},
        prescribed=[(1, (0.0, 0.0, 0.0)), (2, (final_length, 0.0, 0.0))],
        loads=[],
        solver={"load_steps": 48},
        name="bar",
    )


def series_bar(final_length=3.2):
    """Stiff bond and a breakable bond in series; the middle node is free.

    Node 1 is fixed, node 3 is pulled to ``final_length``; the weak bond
    yields, hardens and breaks while the stiff one stays elastic.
    """
    return Scenario(
        nodes=[(1, 0.0, 0.0, 0.0), (2, 1.0, 0.0, 0.0), (3, 2.0, 0.0, 0.0)],
        bonds=[(1, 1, 2, "stiff"), (2, 2, 3, DEFAULT_LAW)],
        laws={DEFAULT_LAW: _default_law(), "stiff": MaterialLaw.linear(100.0)},
        prescribed=[(1, (0.0, 0.0, 0.0)), (3, (final_length, 0.0, 0.0))],
        loads=[],
        solver={"load_steps": 50},
        name="series_bar",
    )


EXAMPLES = ("triangle", "octahedron", "grid", "bar", "series")


def generate_example(name, nx=2, ny=2, nz=2):
    if name == "triangle":
        return triangle()
    if name == "octahedron":
        return octahedron()
    if name == "grid":
        return grid(nx, ny, nz)
    if name == "bar":
        return bar()
    if name == "series":
        return series_bar()
    raise ValueError(f"unknown example {name!r}; choose one of {EXAMPLES}")


# -- results ---------------------------------------------------------------

def _g(v):
    return format(float(v), ".17g")


@dataclass
class ResultBundle:
    status: str
    message: str
    residual_norm: float
    node_ids: list
    bond_ids: list
    reaction_ids: list
    positions: np.ndarray
    forces: np.ndarray
    magnitudes: np.ndarray
    extensions: np.ndarray
    reactions: np.ndarray
    broken_bonds: list
    trace: list
    history: list
    broken_history: list
    timestamp: str = None

    @classmethod
    def from_report(cls, report, scenario, prob=None):
        if prob is None:
            prob, _ = scenario.to_problem()
        nids, bids = scenario.node_ids, scenario.bond_ids
        return cls(
            status=report.status.value,
            message=report.message,
            residual_norm=report.residual_norm,
            node_ids=list(nids),
            bond_ids=list(bids),
            reaction_ids=[nids[i] for i in prob.part.prescribed],
            positions=np.asarray(report.X),
            forces=np.asarray(report.F),
            magnitudes=np.asarray(report.forces),
            extensions=np.asarray(report.extensions),
            reactions=np.asarray(report.B_Q),
            broken_bonds=[bids[i] for i in report.broken_bonds],
            trace=[dict(r.__dict__) for r in report.trace],
            history=[np.asarray(h) for h in report.per_step_history],
            broken_history=[[bids[i] for i in b] for b in report.broken_history],
        )

    def to_dict(self):
        d = {
            "status": self.status,
            "message": self.message,
            "residual_norm": self.residual_norm,
            "iterations": len(self.trace),
            "node_ids": self.node_ids,
            "bond_ids": self.bond_ids,
            "reaction_ids": self.reaction_ids,
            "positions": self.positions.tolist(),
            "forces": self.forces.tolist(),
            "magnitudes": self.magnitudes.tolist(),
            "extensions": self.extensions.tolist(),
            "reactions": self.reactions.tolist(),
            "broken_bonds": self.broken_bonds,
            "trace": self.trace,
            "history": [h.tolist() for h in self.history],
            "broken_history": self.broken_history,
        }
        if self.timestamp is not None:
            d["timestamp"] = self.timestamp
        return d

    @classmethod
    def from_dict(cls, d):
        arr = lambda v: np.array(v, dtype=float)  # noqa: E731
        return cls(
            status=d["status"], message=d["message"], residual_norm=d["residual_norm"],
            node_ids=d["node_ids"], bond_ids=d["bond_ids"], reaction_ids=d["reaction_ids"],
            positions=arr(d["positions"]).reshape(-1, 3),
            forces=arr(d["forces"]).reshape(-1, 3),
            magnitudes=arr(d["magnitudes"]), extensions=arr(d["extensions"]),
            reactions=arr(d["reactions"]).reshape(-1, 3),
            broken_bonds=d["broken_bonds"], trace=d["trace"],
            history=[arr(h).reshape(-1, 2) for h in d["history"]],
            broken_history=d["broken_history"], timestamp=d.get("timestamp"),
        )


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_history_csv(bundle, path):
    rows = []
    for step, h in enumerate(bundle.history, start=1):
        for bid, (e, f) in zip(bundle.bond_ids, h):
            rows.append([step, bid, _g(e), _g(f)])
    _write_csv(path, ["step", "bond", "extension", "force"], rows)
    return Path(path)


def emit_results(bundle, out_dir, formats=("csv", "json"), timestamp=True, history=False):
    """Write the result files into ``out_dir``; returns the written paths.

    csv: ``positions.csv``, ``forces.csv``, ``reactions.csv``,
    ``broken_bonds.txt`` and, with ``history``, ``history.csv``.
    json: ``report.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        _write_csv(out / "positions.csv", ["node", "x", "y", "z"],
                   [[i, *map(_g, p)] for i, p in zip(bundle.node_ids, bundle.positions)])
        _write_csv(out / "forces.csv", ["bond", "fx", "fy", "fz", "magnitude", "extension"],
                   [[i, *map(_g, F), _g(f), _g(e)] for i, F, f, e in
                    zip(bundle.bond_ids, bundle.forces, bundle.magnitudes, bundle.extensions)])
        _write_csv(out / "reactions.csv", ["node", "rx", "ry", "rz"],
                   [[i, *map(_g, r)] for i, r in zip(bundle.reaction_ids, bundle.reactions)])
        (out / "broken_bonds.txt").write_text("".join(f"{b}\n" for b in bundle.broken_bonds))
        written += [out / n for n in ("positions.csv", "forces.csv", "reactions.csv",
                                      "broken_bonds.txt")]
        if history:
            written.append(write_history_csv(bundle, out / "history.csv"))
    if "json" in formats:
        if timestamp:
            bundle.timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        else:
            bundle.timestamp = None
        (out / "report.json").write_text(json.dumps(bundle.to_dict(), indent=2) + "\n")
        written.append(out / "report.json")
    return written


def read_results(out_dir):
    """Load a bundle back from ``report.json``."""
    return ResultBundle.from_dict(json.loads((Path(out_dir) / "report.json").read_text()))


def read_csv_table(path):
    """Rows of a result CSV as ``(ids, values)`` with values at full precision."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    ids = [int(r[0]) for r in rows]
    vals = np.array([[float(v) for v in r[1:]] for r in rows], dtype=float)
    return ids, vals
