import numpy as np
import pytest

from ppmatch import bipartite, processes, radii
from conftest import derive


def make_fields(window, own, other, r0=4):
    fl = radii.compute_radius_field(own, other, window, r0, side="left")
    fr = radii.compute_radius_field(other, own, window, r0, side="right")
    return fl, fr


def test_degenerate_graph_structure(tree3_d8):
    v = processes.multiset_from_counts(np.ones(tree3_d8.n, dtype=np.int64))
    fl, fr = make_fields(tree3_d8, v, v)
    g = bipartite.build_match_graph(v, v, fl, fr, tree3_d8)
    # 46 decided vertices on each side, all points kept.
    assert g.n_left == g.n_right == 46
    assert g.censor.left_points_dropped == g.censor.right_points_dropped == 766 - 46
    # Reach r0 = 4 around a depth <= 4 vertex never leaves the decided
    # region entirely, so every kept pair within distance 4 is an edge.
    for i in range(g.n_left):
        for j in range(g.n_right):
            d = tree3_d8.distance(int(g.left_vertex[i]), int(g.right_vertex[j]))
            assert g.has_edge(i, j) == (d <= 4)


def test_edge_rule_uses_max_of_the_two_radii():
    # Hand-built fields on a 7-path: left point reaches 1, right reaches
    # 3; the pair at distance 3 must still be connected (max rule).
    from ppmatch.graphs import GraphFamily, build_window

    fam = GraphFamily.explicit(
        [[j for j in (i - 1, i + 1) if 0 <= j < 7] for i in range(7)]
    )
    w = build_window(fam, 0, 0)
    left = processes.multiset_from_counts([1, 0, 0, 0, 0, 0, 0])
    right = processes.multiset_from_counts([0, 0, 0, 1, 0, 0, 0])

    def field(values, side):
        vals = np.asarray(values, dtype=np.int32)
        return radii.RadiusField(
            vals, np.zeros(7, bool), np.full(7, 1, np.int8), side,
            radii.SUPPORT, 2, 10, None,
            radii.compute_bad_set(right, w, 2),
        )

    g = bipartite.build_match_graph(
        left, right, field([1] * 7, "left"), field([3] * 7, "right"), w
    )
    assert g.n_edges == 1
    assert g.tags_left[0] == bipartite.TAG_FROM_RIGHT
    g2 = bipartite.build_match_graph(
        left, right, field([1] * 7, "left"), field([2] * 7, "right"), w
    )
    assert g2.n_edges == 0


def test_multiplicity_expands_to_point_pairs(tree3_d8):
    counts = np.zeros(tree3_d8.n, dtype=np.int64)
    counts[0] = 2
    left = processes.multiset_from_counts(counts)
    counts2 = np.zeros(tree3_d8.n, dtype=np.int64)
    counts2[1] = 3
    right = processes.multiset_from_counts(counts2)
    v = processes.multiset_from_counts(np.ones(tree3_d8.n, dtype=np.int64))
    fl, fr = make_fields(tree3_d8, v, v)
    g = bipartite.build_match_graph(left, right, fl, fr, tree3_d8)
    assert g.n_left == 2 and g.n_right == 3
    assert g.n_edges == 6  # complete bipartite between the two piles
    assert list(g.left_slot) == [1, 2]
    assert list(g.right_slot) == [1, 2, 3]
    ref = g.right_ref(2)
    assert (ref.vertex, ref.slot) == (1, 3)


def test_censored_points_are_dropped_and_counted(tree3_d8):
    v = processes.multiset_from_counts(np.ones(tree3_d8.n, dtype=np.int64))
    fl, fr = make_fields(tree3_d8, v, v)
    g = bipartite.build_match_graph(v, v, fl, fr, tree3_d8)
    deep = tree3_d8.depth_from_root > 4
    assert g.censor.left_points_dropped == int(deep.sum())
    assert set(g.censor.left_vertices) == set(np.nonzero(deep)[0])


def test_graph_from_point_edges_and_neighborhood():
    g = bipartite.graph_from_point_edges(
        [0, 0, 5], [1, 2], [(0, 0), (1, 0), (2, 1)]
    )
    assert g.n_left == 3 and g.n_right == 2
    assert list(g.left_slot) == [1, 2, 1]
    assert list(g.right_neighbors(0)) == [0]
    assert list(g.left_neighbors(0)) == [0, 1]
    np.testing.assert_array_equal(
        bipartite.neighborhood(g, [0, 1]), np.array([0])
    )
    np.testing.assert_array_equal(
        bipartite.neighborhood(g, []), np.empty(0, dtype=np.int64)
    )


def test_density_core_restriction():
    est = bipartite.density([0, 0, 3, 9], core=[0, 1, 2, 3])
    assert est.value == pytest.approx(3 / 4)
    est_all = bipartite.density([], core=[0, 1])
    assert est_all.value == 0.0


def test_dump_graph_lines(tree3_d8):
    v = processes.multiset_from_counts(np.ones(tree3_d8.n, dtype=np.int64))
    fl, fr = make_fields(tree3_d8, v, v)
    g = bipartite.build_match_graph(v, v, fl, fr, tree3_d8)
    lines = bipartite.dump_graph(g)
    assert len(lines) == g.n_edges
    assert lines[0] == "L 0 1 | R 0 1"
