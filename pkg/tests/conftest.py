import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bondnet import EquilibriumProblem, MaterialLaw, Partition, build_network, jacobian  # noqa: E402
from oracles import random_connected_bonds  # noqa: E402

TRIANGLE_D = np.array([[1.0, 1.0, 0.0], [2.0, 1.0, 1.0], [1.0, 2.0, 1.0]])
TRIANGLE_BONDS = [(0, 1), (1, 2), (2, 0)]


@pytest.fixture
def triangle_net():
    return build_network(TRIANGLE_D, TRIANGLE_BONDS)


@pytest.fixture
def linear_law():
    return MaterialLaw.linear(1.0)


@pytest.fixture
def trilinear():
    return MaterialLaw(stiffness=2.0, yield_extension=0.5, hardening_ratio=0.1,
                       fracture_extension=1.0)


def triangle_problem(law, B_P=None):
    net = build_network(TRIANGLE_D, TRIANGLE_BONDS)
    part = Partition.from_prescribed(3, [2])
    return EquilibriumProblem.create(net, law, part, B_P=B_P)


def random_law(rng, smoothing=False):
    ey = rng.uniform(0.05, 0.3)
    ef = ey + rng.uniform(0.1, 0.5)
    r = rng.uniform(0.01, 0.45) * min(ey, ef - ey) if smoothing else 0.0
    return MaterialLaw(
        stiffness=rng.uniform(0.5, 5.0),
        yield_extension=ey,
        hardening_ratio=rng.uniform(0.0, 0.9),
        fracture_extension=ef,
        compression_mode=rng.choice(["symmetric", "linear_only"]),
        smoothing_radius=r,
    )


def random_problem(rng, n_range=(3, 30), n_laws=2, smoothing=False, load_scale=0.1):
    """Random connected network with a random partition, laws and loads."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    D = rng.uniform(0.0, 3.0, size=(n, 3))
    bonds = random_connected_bonds(rng, n, extra=int(rng.integers(0, n + 1)))
    net = build_network(D, bonds)
    q = int(rng.integers(1, n))
    part = Partition.from_prescribed(n, rng.choice(n, size=q, replace=False))
    laws = [random_law(rng, smoothing) for _ in range(n_laws)]
    law_ids = rng.integers(0, n_laws, size=net.m)
    X_Q = net.D[part.prescribed] + 0.05 * rng.standard_normal((q, 3))
    B_P = load_scale * rng.standard_normal((part.p, 3))
    return EquilibriumProblem.create(net, laws, part, X_Q, B_P, law_ids)


def rigid_problem(rng, n_range=(4, 25), law=None, disp_scale=0.02, min_cond=0.02):
    """Random rigid network: a tetrahedron grown one node at a time, each new
    node bonded to three existing ones; the first three nodes are prescribed.

    Draws whose reference stiffness has eigenvalue ratio below ``min_cond``
    (near mechanisms) are rejected. Loads are the linear response to a random
    displacement of size ``disp_scale`` so an equilibrium exists nearby.
    """
    law = law or MaterialLaw(stiffness=rng.uniform(0.5, 5.0), yield_extension=0.5,
                             hardening_ratio=0.1, fracture_extension=1.0)
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        D = rng.uniform(0.0, 2.0, size=(n, 3))
        bonds = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        for i in range(4, n):
            for j in rng.choice(i, size=3, replace=False):
                bonds.append((i, int(j)) if rng.random() < 0.5 else (int(j), i))
        net = build_network(D, bonds)
        part = Partition.from_prescribed(n, [0, 1, 2])
        prob = EquilibriumProblem.create(net, law, part)
        K0 = jacobian(prob, prob.reference_free_positions()).toarray()
        ev = np.linalg.eigvalsh(K0)
        if ev[0] >= min_cond * ev[-1]:
            B_P = (K0 @ (disp_scale * rng.standard_normal(3 * part.p))).reshape(-1, 3)
            return EquilibriumProblem.create(net, law, part, B_P=B_P)


# -- acceptance summary ------------------------------------------------------

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("measured", "")
        _CRITERIA.append((mark.args[0], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
