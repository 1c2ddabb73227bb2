import numpy as np
import pytest

from ppmatch import bipartite
from ppmatch.graphs import GraphFamily, build_window
from ppmatch.seeds import derive_seed, uniform_stream


@pytest.fixture(scope="session")
def tree3_d8():
    return build_window(GraphFamily.regular_tree(3), 8, 4)


@pytest.fixture(scope="session")
def tree3_d5():
    return build_window(GraphFamily.regular_tree(3), 5, 2)


@pytest.fixture(scope="session")
def ladder_d10():
    return build_window(GraphFamily.ladder_diagonal(), 10, 3)


def random_instance(seed, max_left, max_right, edge_prob=0.18):
    """A seeded synthetic bipartite instance with collider vertex ids.

    Points sit on arbitrary integer vertices (several per vertex to
    exercise slot handling); edges are iid with the given density.
    """
    u = uniform_stream(seed, 4, "shape")
    nl = 1 + int(u[0] * max_left)
    nr = 1 + int(u[1] * max_right)
    lv = (uniform_stream(seed, nl, "lv") * max(2, nl // 2)).astype(int)
    rv = (uniform_stream(seed, nr, "rv") * max(2, nr // 2)).astype(int)
    flat = uniform_stream(seed, nl * nr, "edges")
    edges = [
        (i, j)
        for i in range(nl)
        for j in range(nr)
        if flat[i * nr + j] < edge_prob
    ]
    return bipartite.graph_from_point_edges(lv, rv, edges)


def exhaustive_max_matching(g):
    """Third oracle: branch on each left point (skip or take any free
    right neighbor).  Only for tiny instances."""

    def best(i, used):
        if i == g.n_left:
            return 0
        top = best(i + 1, used)
        for j in g.right_neighbors(i):
            if int(j) not in used:
                used.add(int(j))
                top = max(top, 1 + best(i + 1, used))
                used.discard(int(j))
        return top

    return best(0, set())


def exhaustive_chains_below(g, m, max_len):
    """Independent alternating-path search, deliberately naive.

    Yields every simple alternating path with both endpoints unmatched,
    odd edge count < max_len, starting from unmatched left points.  The
    engine under test never sees this code path.
    """
    found = []

    def walk(path, at_right):
        if len(path) >= 2 and len(path) % 2 == 0:
            j = path[-1] - g.n_left
            if m.matchR[j] == -1:
                found.append(tuple(path))
        if len(path) >= max_len:
            return
        if at_right:
            j = path[-1] - g.n_left
            i = m.matchR[j]
            if i >= 0 and i not in path:
                walk(path + [int(i)], False)
        else:
            i = path[-1]
            for j in g.right_neighbors(i):
                gj = g.n_left + int(j)
                if gj not in path and m.matchL[i] != j:
                    walk(path + [gj], True)

    for i in range(g.n_left):
        if m.matchL[i] == -1:
            walk([i], False)
    return found


def seeded_ranks(g, seed):
    """A deterministic random total order on the points of g."""
    u = uniform_stream(seed, g.n_points, "ranks")
    ranks = np.empty(g.n_points, dtype=np.int64)
    ranks[np.argsort(u, kind="stable")] = np.arange(g.n_points)
    return ranks


def index_ranks(g):
    return np.arange(g.n_points, dtype=np.int64)


def attach_tree_adjacency(n, seed, max_depth=5):
    """Random recursive tree on n vertices with root depth <= max_depth."""
    us = uniform_stream(seed, n, "attach")
    depth = [0] * n
    adj = [[] for _ in range(n)]
    for v in range(1, n):
        pool = [u for u in range(v) if depth[u] < max_depth]
        u = pool[int(us[v] * len(pool))]
        depth[v] = depth[u] + 1
        adj[v].append(u)
        adj[u].append(v)
    return adj


def derive(*parts):
    return derive_seed(20260825, *parts)
