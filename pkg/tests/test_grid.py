import pytest
from hypothesis import given, strategies as st

from quantile_ipp.grid import (Action, BudgetExhaustedError, GridWorld,
                               RejectedActionError, RobotState, apply_action,
                               neighbors)


def test_corner_has_two_moves():
    w = GridWorld((10, 10))
    assert len(neighbors(RobotState((0, 0), 0, 5), w)) == 2


def test_interior_has_four_moves():
    w = GridWorld((10, 10))
    assert len(neighbors(RobotState((4, 5), 0, 5), w)) == 4


def test_3d_moves():
    # With two depth layers every cell has exactly one vertical neighbour.
    assert len(neighbors(RobotState((5, 5, 0), 0, 5), GridWorld((12, 14, 2)))) == 5
    assert len(neighbors(RobotState((5, 5, 1), 0, 5), GridWorld((12, 14, 3)))) == 6


def test_neighbor_order_is_axis_major_negative_first():
    w = GridWorld((5, 5))
    acts = neighbors(RobotState((2, 2), 0, 1), w)
    assert acts == [Action(0, -1), Action(0, 1), Action(1, -1), Action(1, 1)]


def test_apply_action():
    w = GridWorld((10, 10))
    s = apply_action(RobotState((0, 0), 0, 3), Action(0, 1), w)
    assert s.position == (1, 0)
    assert s.steps_taken == 1


def test_apply_action_off_grid_is_rejected():
    w = GridWorld((10, 10))
    with pytest.raises(RejectedActionError):
        apply_action(RobotState((0, 0), 0, 3), Action(0, -1), w)


def test_apply_action_without_budget():
    w = GridWorld((10, 10))
    with pytest.raises(BudgetExhaustedError):
        apply_action(RobotState((3, 3), 4, 4), Action(0, 1), w)


def test_measurable_lattice_is_finer_and_covers_plan_points():
    w = GridWorld((4, 3), resolution=2, margin=(1, 0))
    assert w.measure_dims == (9, 5)
    assert w.n_measure >= w.n_plan
    for i, p in enumerate(w.plan_points):
        j = w.plan_to_measure(w.plan_position(i))
        assert (w.measure_points[j] == p).all()


def test_index_coordinate_bijection():
    w = GridWorld((3, 4, 2), resolution=3)
    for i in range(w.n_measure):
        assert w.measure_index(w.measure_cell(i)) == i
    for i in range(w.n_plan):
        assert w.plan_index(w.plan_position(i)) == i


def test_invalid_dims():
    with pytest.raises(ValueError):
        GridWorld((0, 3))
    with pytest.raises(ValueError):
        GridWorld((3,))


positions = st.tuples(st.integers(0, 6), st.integers(0, 4), st.integers(0, 2))


@given(positions)
def test_neighbors_never_error_and_reverse(pos):
    w = GridWorld((7, 5, 3))
    s = RobotState(pos, 0, 10)
    for a in neighbors(s, w):
        moved = apply_action(s, a, w)
        back = apply_action(moved, a.reversed(), w)
        assert back.position == pos
        assert back.steps_taken == 2


@given(st.lists(st.integers(0, 3), max_size=20))
def test_path_cost_is_number_of_moves(choices):
    w = GridWorld((6, 6))
    s = RobotState((3, 3), 0, 100)
    for c in choices:
        acts = neighbors(s, w)
        s = apply_action(s, acts[c % len(acts)], w)
    assert s.steps_taken == len(choices)
