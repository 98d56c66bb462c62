from __future__ import annotations

import pytest

from src.envs.craft import CraftGenParams, GenerationFailed, generate_craft_map
from src.envs.grid import (
    CRAFT_PROPS,
    OFFICE_PROPS,
    GridAction,
    GridState,
    MapError,
    MapErrorKind,
    bfs_distances,
    env_step,
    grid_labelling,
    label,
    load_map,
)
from src.envs.tasks import craft_tasks, office_tasks, select_tasks
from src.oracle import nearest_first_tour, shortest_tour

# ── Office map ────────────────────────────────────────────────


def test_office_map_layout(office_map):
    assert (office_map.width, office_map.height) == (13, 7)
    assert office_map.start == GridState(3, 3)
    assert len(office_map.states) == 51
    assert set(office_map.locations["c"]) == {GridState(2, 2), GridState(8, 3)}
    assert office_map.locations["o"] == (GridState(11, 3),)
    assert office_map.locations["m"] == (GridState(7, 4),)


def test_walls_block(office_map):
    corner = GridState(1, 1)
    assert env_step(office_map, corner, GridAction.NORTH) == corner
    assert env_step(office_map, corner, GridAction.WEST) == corner
    assert env_step(office_map, corner, GridAction.EAST) == GridState(2, 1)
    # the partition wall at x=5 only opens at row 3
    assert env_step(office_map, GridState(4, 2), GridAction.EAST) == GridState(4, 2)
    assert env_step(office_map, GridState(4, 3), GridAction.EAST) == GridState(5, 3)


def test_label_is_arrival_cell(office_map):
    s = GridState(2, 3)
    s_next = env_step(office_map, s, GridAction.NORTH)
    assert s_next == GridState(2, 2)
    assert label(office_map, s, GridAction.NORTH, s_next) == frozenset({"c"})
    assert label(office_map, office_map.start, GridAction.SOUTH, GridState(3, 4)) == frozenset()
    labelling = grid_labelling(office_map, "office")
    assert labelling.props == OFFICE_PROPS
    assert labelling(s, GridAction.NORTH, s_next) == frozenset({"c"})


def test_precomputed_dynamics_cover_every_open_cell(office_map):
    assert len(office_map.successor) == len(office_map.labels) == len(office_map.states) == 51
    for s in office_map.states:
        for a in GridAction:
            s_next = env_step(office_map, s, a)
            assert abs(s_next.x - s.x) + abs(s_next.y - s.y) <= 1
            loc = office_map.location(s_next)
            assert label(office_map, s, a, s_next) == (frozenset() if loc is None else frozenset({loc}))


def test_hrm_trap_geometry(office_map):
    start = office_map.start
    dist = bfs_distances(office_map, start, avoid={"d"})
    nearest = min(office_map.locations["c"], key=dist.__getitem__)
    assert nearest == GridState(2, 2)
    assert dist[nearest] == 2
    stages = [{"c"}, {"o"}]
    assert shortest_tour(office_map, start, stages, avoid={"d"}) == 8
    assert nearest_first_tour(office_map, start, stages, avoid={"d"}) == 12


@pytest.mark.parametrize(
    ("stages", "length"),
    [
        ([{"c"}, {"o"}], 8),
        ([{"m"}, {"o"}], 10),
        ([{"A"}, {"B"}, {"C"}, {"D"}], 36),
    ],
)
def test_office_tour_lengths(office_map, stages, length):
    assert shortest_tour(office_map, office_map.start, stages, avoid={"d"}) == length


# ── Map errors ────────────────────────────────────────────────


@pytest.mark.parametrize(
    ("text", "kind", "row", "column"),
    [
        ("XXXX\nXS.X\nXXX\n", MapErrorKind.NOT_RECTANGULAR, 3, 4),
        ("XXXX\nX..X\nXXXX\n", MapErrorKind.NO_START, 1, 1),
        ("XXXXX\nXSS.X\nXXXXX\n", MapErrorKind.MULTIPLE_STARTS, 2, 3),
        ("XXXX\nXS..\nXXXX\n", MapErrorKind.OPEN_BORDER, 2, 4),
        ("XXXX\nXSqX\nXXXX\n", MapErrorKind.UNKNOWN_GLYPH, 2, 3),
    ],
)
def test_map_errors(text, kind, row, column):
    with pytest.raises(MapError) as info:
        load_map(text, OFFICE_PROPS)
    assert info.value.kind is kind
    assert (info.value.row, info.value.column) == (row, column)


def test_start_candidates_exclude_locations(office_map):
    candidates = office_map.start_candidates
    assert office_map.start in candidates
    assert all(office_map.location(s) is None for s in candidates)
    assert len(candidates) == 51 - 9


# ── Craft generation ──────────────────────────────────────────


def test_craft_generation_is_deterministic():
    a = generate_craft_map(42)
    b = generate_craft_map(42)
    assert a.text == b.text
    assert generate_craft_map(43).text != a.text


def test_craft_map_contents():
    m = generate_craft_map(5)
    assert (m.width, m.height) == (21, 21)
    assert m.props == CRAFT_PROPS
    counts = CraftGenParams().counts
    for glyph, n in counts.items():
        assert len(m.locations.get(glyph, ())) == n
    reach = bfs_distances(m, m.start)
    assert all(c in reach for cells in m.locations.values() for c in cells)


def test_craft_walls_keep_locations_reachable():
    m = generate_craft_map(3, CraftGenParams(width=11, height=11, walls=10, max_attempts=500))
    reach = bfs_distances(m, m.start)
    assert all(c in reach for cells in m.locations.values() for c in cells)


def test_craft_generation_fails_when_overfull():
    with pytest.raises(GenerationFailed):
        generate_craft_map(0, CraftGenParams(width=5, height=5))


def test_craft_params_reject_unknown_glyph():
    with pytest.raises(ValueError):
        CraftGenParams(counts={"q": 1})


# ── Task library ──────────────────────────────────────────────


def test_task_library():
    office, craft = office_tasks(), craft_tasks()
    assert [t.name for t in office] == ["deliver-coffee", "deliver-mail", "patrol", "deliver-coffee-and-mail"]
    assert len(craft) == 10
    assert all(set(t.rm.props) <= set(CRAFT_PROPS) for t in craft)
    assert office[0].rm.n_interior == 2


def test_select_tasks():
    assert [t.number for t in select_tasks("office", "1,4")] == [1, 4]
    assert len(select_tasks("craft", "all")) == 10
    with pytest.raises(ValueError):
        select_tasks("office", "5")
