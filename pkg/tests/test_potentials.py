import numpy as np
import pytest

from bridgelab import TrapPotential, build_grid


def test_hard_wall_closed_box():
    W = TrapPotential.hard_wall(((0.0, 1.0),))
    assert W(0.5) == 0.0
    # faces belong to the box
    assert W(0.0) == 0.0
    assert W(1.0) == 0.0
    assert W(-0.1) == np.inf
    assert W(1.2) == np.inf
    assert W.is_hard_wall
    assert W.dimension == 1


def test_hard_wall_2d():
    W = TrapPotential.hard_wall([(0.0, 1.0), (-1.0, 1.0)])
    assert W.dimension == 2
    vals = W(np.array([[0.5, 0.0], [0.5, 2.0], [-1.0, 0.0]]))
    assert vals[0] == 0.0
    assert vals[1] == np.inf
    assert vals[2] == np.inf


def test_quadratic_values():
    W = TrapPotential.quadratic((2.0,), offset=0.5)
    assert W(3.0) == pytest.approx(0.5 + 2.0 * 9.0)
    arr = W(np.array([0.0, 1.0, -1.0]))
    assert np.allclose(arr, [0.5, 2.5, 2.5])
    W2 = TrapPotential.quadratic((1.0, 4.0))
    assert W2(np.array([1.0, 0.5])) == pytest.approx(1.0 + 1.0)
    assert not W2.is_hard_wall


def test_potential_validation():
    with pytest.raises(ValueError):
        TrapPotential.quadratic((-1.0,))
    with pytest.raises(ValueError):
        TrapPotential.quadratic((1.0,), offset=-0.5)
    with pytest.raises(ValueError):
        TrapPotential.hard_wall(((1.0, 0.0),))
    with pytest.raises(ValueError):
        TrapPotential(kind="mystery")


def test_tabulated_interpolation():
    g = build_grid((0.0, 1.0), 5)
    vals = g.nodes[:, 0] ** 2
    W = TrapPotential.tabulated(g, vals)
    assert W(0.5) == pytest.approx(0.25)
    # halfway between nodes: linear interpolation, not the exact square
    assert W(0.125) == pytest.approx((0.0 + 0.0625) / 2.0)
    assert W.dimension == 1
    with pytest.raises(ValueError):
        TrapPotential.tabulated(g, vals[:-1])
    with pytest.raises(ValueError):
        TrapPotential.tabulated(g, -vals - 1.0)


def test_on_grid_matches_call():
    g = build_grid((-2.0, 2.0), 9)
    W = TrapPotential.quadratic((1.0,))
    assert np.allclose(W.on_grid(g), g.nodes[:, 0] ** 2)
    Wall = TrapPotential.hard_wall(((-1.0, 1.0),))
    vals = Wall.on_grid(g)
    inside = np.abs(g.nodes[:, 0]) <= 1.0
    assert np.all(vals[inside] == 0.0)
    assert np.all(np.isinf(vals[~inside]))
