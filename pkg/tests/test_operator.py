import math

import numpy as np
import pytest

from patspec import grid as grid_mod
from patspec.errors import IllConditionedError, ProvenanceError
from patspec.grid import build_interval, build_rectangle, sample_speed
from patspec.operator import DIRICHLET, BcFlavor, Robin, apply, assemble, mass_inner, solve_elliptic


@pytest.fixture
def two_cells(monkeypatch):
    monkeypatch.setattr(grid_mod, "MIN_CELLS", 2)
    g = build_interval(1.0, 2)
    return g, sample_speed(g, 1.0)


def test_hand_assembly_dirichlet(two_cells):
    g, c = two_cells
    op = assemble(g, c, DIRICHLET)
    np.testing.assert_array_equal(op.active, [1])
    np.testing.assert_allclose(op.stiffness.toarray(), [[4.0]])
    np.testing.assert_allclose(op.mass, [0.5])


def test_hand_assembly_robin(two_cells):
    g, c = two_cells
    op = assemble(g, c, Robin(1.0))
    np.testing.assert_allclose(op.stiffness.toarray(), [[3, -2, 0], [-2, 4, -2], [0, -2, 3]])
    np.testing.assert_allclose(op.mass, [0.25, 0.5, 0.25])


def _operators():
    g1 = build_interval(math.pi, 60)
    g2 = build_rectangle(1.0, 1.3, 10, 12)
    out = []
    for g, spec in ((g1, "sine:amp=0.5,base=1.0"), (g2, "sine:amp=0.25,base=1.0")):
        c = sample_speed(g, spec)
        out += [assemble(g, c, Robin(0.7)), assemble(g, c, DIRICHLET)]
    return out


OPERATORS = _operators()
IDS = ["1d-robin", "1d-dirichlet", "2d-robin", "2d-dirichlet"]


@pytest.mark.parametrize("op", OPERATORS, ids=IDS)
def test_stiffness_symmetric(op):
    S = op.stiffness
    assert abs(S - S.T).max() <= 1e-13 * abs(S).max()
    assert np.all(op.mass > 0)


@pytest.mark.parametrize("op", OPERATORS, ids=IDS)
def test_self_adjoint_random_pairs(op, rng):
    S = op.stiffness
    norm = abs(S).max()
    for _ in range(100):
        u, v = rng.standard_normal((2, op.size))
        assert abs(u @ (S @ v) - v @ (S @ u)) <= 1e-12 * norm * np.linalg.norm(u) * np.linalg.norm(v)


@pytest.mark.parametrize("op", OPERATORS, ids=IDS)
def test_rayleigh_quotient_positive(op, rng):
    for _ in range(100):
        u = rng.standard_normal(op.size)
        assert u @ (op.stiffness @ u) / mass_inner(op, u, u) > 0


@pytest.mark.parametrize("op", OPERATORS, ids=IDS)
def test_weighted_product_self_adjoint(op, rng):
    apply_matches = []
    for _ in range(20):
        f, g = rng.standard_normal((2, op.size))
        Tf, Tg = solve_elliptic(op, f), solve_elliptic(op, g)
        lhs, rhs = mass_inner(op, Tf, g), mass_inner(op, f, Tg)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))
        # <apply(u), g>_M = u^T S g
        r = apply(op, f)
        apply_matches.append(abs(mass_inner(op, r, g) - f @ (op.stiffness @ g)) / abs(f @ (op.stiffness @ g)))
    assert max(apply_matches) <= 1e-12


@pytest.mark.parametrize("op", OPERATORS, ids=IDS)
def test_solve_inverts_apply(op, rng):
    u = rng.standard_normal(op.size)
    back = solve_elliptic(op, apply(op, u))
    assert np.linalg.norm(back - u) <= 1e-9 * np.linalg.norm(u)


def test_zero_in_zero_out():
    op = OPERATORS[0]
    assert not apply(op, np.zeros(op.size)).any()
    assert not solve_elliptic(op, np.zeros(op.size)).any()


def test_minus_laplacian_of_sine():
    g = build_interval(math.pi, 200)
    op = assemble(g, sample_speed(g, 1.0), DIRICHLET)
    x = g.nodes[op.active, 0]
    h = g.spacing[0]
    # second difference of sin is (2 - 2 cos h)/h^2 sin = (1 - h^2/12) sin
    assert np.max(np.abs(apply(op, np.sin(x)) - np.sin(x))) <= 0.1 * h**2
    assert np.max(np.abs(solve_elliptic(op, np.sin(x)) - np.sin(x))) <= 0.1 * h**2


def test_dimension_mismatch():
    op = OPERATORS[1]
    with pytest.raises(ValueError, match="active set"):
        apply(op, np.zeros(op.size + 1))
    with pytest.raises(ValueError):
        solve_elliptic(op, np.zeros(3))


def test_mismatched_speed_rejected():
    g1 = build_interval(1.0, 10)
    g2 = build_interval(2.0, 10)
    with pytest.raises(ProvenanceError):
        assemble(g1, sample_speed(g2, 1.0), DIRICHLET)


@pytest.mark.parametrize("alpha", [0.0, -1.0, float("nan")])
def test_robin_alpha_must_be_positive(alpha):
    with pytest.raises(ValueError):
        BcFlavor(alpha)


def test_ill_conditioned_rejected():
    # alpha huge: the Robin term vanishes and S is (numerically) the singular Neumann stiffness
    g = build_interval(1.0, 20)
    with pytest.raises(IllConditionedError):
        assemble(g, sample_speed(g, 1.0), Robin(1e300))


def test_bc_names():
    assert str(Robin(2.0)) == "Robin(alpha=2)"
    assert Robin(2.0).name == "robin"
    assert DIRICHLET.name == "dirichlet" and not DIRICHLET.is_robin
