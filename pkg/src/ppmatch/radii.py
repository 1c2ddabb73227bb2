"""Reach radii: the deficiency set, the per-vertex radius fields, and
connected-component analysis of high-radius sets.

The radius of a vertex is defined by a two-clause rule.  A vertex whose
neighborhood is free of deficient vertices and carries few own points
gets the base radius.  Every other vertex searches for the smallest
radius r at which the opposite process dominates the own process over
an enumerated family of 4r-connected vertex sets containing it.

Enumeration runs in one of two modes.  Exact mode walks every
4r-connected subset of the window containing the vertex (test oracle,
exponential).  Support mode checks only the connected component of the
vertex in the 4r-proximity graph on the occupied vertices, a documented
under-approximation that can only lower the resulting radius.

Any quantity whose value would depend on data outside the window is
explicitly censored, never silently defaulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .enumeration import connected_subsets_containing
from .errors import ConfigurationError
from .graphs import EXPLICIT, GraphWindow, ball_size_infinite
from .processes import PointMultiset, count_in

CENSORED = -1

HOLDS = "holds"
VIOLATED = "violated"
TRUNCATED = "truncated"
CENSORED_STATUS = "censored"

EXACT = "exact"
SUPPORT = "support"


def _as_fraction(threshold) -> Fraction:
    if isinstance(threshold, Fraction):
        return threshold
    # Decimal-string round trip keeps 0.9 meaning 9/10, not the binary float.
    return Fraction(str(threshold))


def _ball_counts(window: GraphWindow, counts: np.ndarray, radius: int) -> np.ndarray:
    """counts summed over B_radius(v) for every window vertex v."""
    dm = window.distance_matrix()
    if dm is not None:
        mask = (dm >= 0) & (dm <= radius)
        return mask @ counts.astype(np.int64)
    out = np.empty(window.n, dtype=np.int64)
    for v in range(window.n):
        row = window.dist_row(v)
        out[v] = counts[(row >= 0) & (row <= radius)].sum()
    return out


# ---------------------------------------------------------------------------
# Deficiency set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BadSet:
    """Vertices whose half-radius ball is underpopulated by the opposite
    process.  Membership is only evaluated where the ball is complete;
    elsewhere the vertex is flagged censored."""

    member: np.ndarray
    censored: np.ndarray
    r0: int
    threshold: Fraction

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.member))


def compute_bad_set(
    other: PointMultiset,
    window: GraphWindow,
    r0: int,
    threshold=Fraction(9, 10),
) -> BadSet:
    if r0 < 2 or r0 % 2 != 0:
        raise ConfigurationError(f"r0 must be an even integer >= 2, got {r0}")
    thr = _as_fraction(threshold)
    half = r0 // 2
    ball = _ball_counts(window, other.counts, half)
    if window.family.kind == EXPLICIT:
        dm = window.distance_matrix()
        expected = ((dm >= 0) & (dm <= half)).sum(axis=1).astype(np.int64)
        censored = np.zeros(window.n, dtype=bool)
    else:
        expected = np.full(
            window.n, ball_size_infinite(window.family, half), dtype=np.int64
        )
        censored = (window.depth_from_root.astype(np.int64) + half) > window.depth
    member = (~censored) & (ball * thr.denominator <= thr.numerator * expected)
    member.setflags(write=False)
    censored.setflags(write=False)
    return BadSet(member, censored, r0, thr)


# ---------------------------------------------------------------------------
# Connected-set enumeration over the proximity graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectedSetQuery:
    """Enumeration parameters: center vertex, connectivity gap, caps."""

    center: int
    gap: int
    size_cap: int
    radius_cap: int
    count_cap: int = 200_000

    def __post_init__(self):
        if self.gap < 1:
            raise ConfigurationError("connectivity gap must be >= 1")
        if self.radius_cap < 1 or self.count_cap < 1:
            raise ConfigurationError("caps must be positive")


class _SupportCache:
    """Shared per-(window, process-pair) state for radius computation.

    Caches proximity components of the own-process support per gap, and
    per (r, component) evaluations of the domination constraint, so that
    a full radius field costs one component labeling per search radius.
    """

    def __init__(self, own: PointMultiset, other: PointMultiset, window: GraphWindow):
        self.own = own
        self.other = other
        self.window = window
        self.supp = own.support
        self._labels: dict[int, np.ndarray] = {}
        self._comp_eval: dict[tuple[int, int], tuple[bool, int, int]] = {}

    def labels(self, gap: int) -> np.ndarray:
        """Component id per support position under gap-proximity; -1 = unvisited."""
        got = self._labels.get(gap)
        if got is not None:
            return got
        supp = self.supp
        lab = np.full(len(supp), -1, dtype=np.int64)
        nxt = 0
        for s in range(len(supp)):
            if lab[s] >= 0:
                continue
            lab[s] = nxt
            stack = [s]
            while stack:
                u = stack.pop()
                row = self.window.dist_row(int(supp[u]))[supp]
                close = np.nonzero((row >= 0) & (row <= gap) & (lab == -1))[0]
                lab[close] = nxt
                stack.extend(int(c) for c in close)
            nxt += 1
        self._labels[gap] = lab
        return lab

    def component_of(self, v: int, gap: int) -> np.ndarray:
        """The component of v in the gap-proximity graph on supp + {v}."""
        supp = self.supp
        lab = self.labels(gap)
        pos = np.searchsorted(supp, v)
        if pos < len(supp) and supp[pos] == v:
            return supp[lab == lab[pos]]
        row = self.window.dist_row(v)[supp]
        near = np.nonzero((row >= 0) & (row <= gap))[0]
        if len(near) == 0:
            return np.asarray([v], dtype=np.int64)
        ids = np.unique(lab[near])
        members = supp[np.isin(lab, ids)]
        return np.unique(np.concatenate((members, [v])))

    def evaluate_component(self, r: int, comp_id: int) -> tuple[bool, int, int]:
        """(complete, own count, other count on the r-enlargement) for a
        support component under gap 4r."""
        key = (r, comp_id)
        got = self._comp_eval.get(key)
        if got is not None:
            return got
        lab = self.labels(4 * r)
        members = self.supp[lab == comp_id]
        res = evaluate_set(self.own, self.other, self.window, members, r)
        self._comp_eval[key] = res
        return res


def evaluate_set(
    own: PointMultiset,
    other: PointMultiset,
    window: GraphWindow,
    members: np.ndarray,
    r: int,
) -> tuple[bool, int, int]:
    """(enlargement complete, |own on U|, |other on U^{+r}|) for a set U."""
    members = np.asarray(members, dtype=np.int64)
    complete = all(window.ball_complete(int(u), r) for u in members)
    own_count = count_in(own, members)
    dm = window.distance_matrix()
    if dm is not None:
        mask = ((dm[members] >= 0) & (dm[members] <= r)).any(axis=0)
    else:
        mask = np.zeros(window.n, dtype=bool)
        for u in members:
            row = window.dist_row(int(u))
            mask |= (row >= 0) & (row <= r)
    other_count = int(other.counts[mask].sum())
    return complete, own_count, other_count


def enumerate_rconnected(
    pm: PointMultiset | None,
    window: GraphWindow,
    q: ConnectedSetQuery,
    mode: str = SUPPORT,
) -> tuple[list[frozenset[int]], bool]:
    """Candidate vertex sets containing q.center, per the chosen mode.

    Exact mode yields every gap-connected subset of the window containing
    the center, up to q.size_cap members, each exactly once; hitting
    q.count_cap abandons the stream with truncated=True.  Support mode
    yields the single component of the center in the gap-proximity graph
    on supp(pm) + {center}.
    """
    if mode == EXACT:
        if q.size_cap < 1:
            return [], True

        def prox(u: int) -> list[int]:
            row = window.dist_row(u)
            near = np.nonzero((row >= 0) & (row <= q.gap))[0]
            return [int(w) for w in near if w != u]

        return connected_subsets_containing(
            q.center, prox, max_size=q.size_cap,
            cap=q.count_cap, cap_mode="truncate",
        )
    if mode != SUPPORT:
        raise ConfigurationError(f"unknown enumeration mode {mode!r}")
    if pm is None:
        raise ConfigurationError("support mode needs the own-side multiset")
    cache = _SupportCache(pm, pm, window)
    comp = cache.component_of(q.center, q.gap)
    return [frozenset(int(u) for u in comp)], False


# ---------------------------------------------------------------------------
# The domination constraint
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintResult:
    status: str
    witness: frozenset[int] | None = None
    sets_checked: int = 0


def constraint_holds(
    own: PointMultiset,
    other: PointMultiset,
    window: GraphWindow,
    v: int,
    r: int,
    mode: str = SUPPORT,
    *,
    size_cap: int | None = None,
    count_cap: int = 200_000,
    _cache: _SupportCache | None = None,
) -> ConstraintResult:
    """Check that the opposite process dominates over every enumerated
    4r-connected set containing v: |other on U^{+r}| >= r * |own on U|.

    A set whose right-hand side is zero holds regardless of window
    boundaries; any other set whose r-enlargement leaves the window makes
    the result censored.  A definite violation (complete enlargement,
    counts fail) short-circuits with the witness set.
    """
    if r < 1:
        raise ConfigurationError("constraint radius must be >= 1")
    gap = 4 * r
    cap = size_cap if size_cap is not None else window.n
    q = ConnectedSetQuery(v, gap, cap, max(r, 1), count_cap)

    if mode == SUPPORT and _cache is not None:
        lab = _cache.labels(gap)
        supp = _cache.supp
        pos = np.searchsorted(supp, v)
        if pos < len(supp) and supp[pos] == v:
            complete, own_count, other_count = _cache.evaluate_component(
                r, int(lab[pos])
            )
            return _judge(complete, own_count, other_count, r,
                          lambda: frozenset(int(u) for u in
                                            _cache.component_of(v, gap)))
        members = _cache.component_of(v, gap)
        complete, own_count, other_count = evaluate_set(
            own, other, window, members, r
        )
        return _judge(complete, own_count, other_count, r,
                      lambda: frozenset(int(u) for u in members))

    sets, truncated = enumerate_rconnected(own, window, q, mode)
    censored_any = False
    checked = 0
    for u_set in sets:
        checked += 1
        members = np.fromiter(u_set, dtype=np.int64)
        complete, own_count, other_count = evaluate_set(
            own, other, window, members, r
        )
        rhs = r * own_count
        if rhs == 0:
            continue
        if not complete:
            censored_any = True
            continue
        if other_count < rhs:
            return ConstraintResult(VIOLATED, u_set, checked)
    if censored_any:
        return ConstraintResult(CENSORED_STATUS, None, checked)
    if truncated:
        return ConstraintResult(TRUNCATED, None, checked)
    return ConstraintResult(HOLDS, None, checked)


def _judge(complete, own_count, other_count, r, witness_fn) -> ConstraintResult:
    rhs = r * own_count
    if rhs == 0:
        return ConstraintResult(HOLDS, None, 1)
    if not complete:
        return ConstraintResult(CENSORED_STATUS, None, 1)
    if other_count < rhs:
        return ConstraintResult(VIOLATED, witness_fn(), 1)
    return ConstraintResult(HOLDS, None, 1)


# ---------------------------------------------------------------------------
# Radius fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusField:
    """Per-vertex reach radii with explicit censoring.

    values[v] is the radius, or CENSORED (-1).  clause[v] records which
    rule produced the value: 1 for the quiet-neighborhood base radius,
    2 for the domination search, 0 for censored vertices.
    """

    values: np.ndarray
    censored: np.ndarray
    clause: np.ndarray
    side: str
    mode: str
    r0: int
    radius_cap: int
    size_cap: int | None
    bad: BadSet

    @property
    def n_censored(self) -> int:
        return int(np.count_nonzero(self.censored))


def compute_radius_field(
    own: PointMultiset,
    other: PointMultiset,
    window: GraphWindow,
    r0: int,
    mode: str = SUPPORT,
    *,
    radius_cap: int | None = None,
    size_cap: int | None = None,
    threshold=Fraction(9, 10),
    count_cap: int = 200_000,
    side: str = "left",
) -> RadiusField:
    """Apply the two-clause radius rule to every window vertex.

    Clause 1 gives the base radius r0 where the half-ball around the
    vertex is deficiency-free and the own count is at most r0.  Clause 2
    searches r = r0+1, r0+2, ... for the least radius whose domination
    constraint holds under the configured mode; vertices unresolved at
    radius_cap are censored.
    """
    if r0 < 2 or r0 % 2 != 0:
        raise ConfigurationError(f"r0 must be an even integer >= 2, got {r0}")
    cap = radius_cap if radius_cap is not None else r0 + 8
    if cap <= r0:
        raise ConfigurationError("radius_cap must exceed r0")
    bad = compute_bad_set(other, window, r0, threshold)
    half = r0 // 2

    bad_near = _ball_counts(window, bad.member.astype(np.int64), half) > 0
    cens_near = _ball_counts(window, bad.censored.astype(np.int64), half) > 0
    if window.family.kind == EXPLICIT:
        ball_ok = np.ones(window.n, dtype=bool)
    else:
        ball_ok = (window.depth_from_root.astype(np.int64) + half) <= window.depth

    values = np.full(window.n, CENSORED, dtype=np.int32)
    clause = np.zeros(window.n, dtype=np.int8)
    censored = np.zeros(window.n, dtype=bool)

    clause1 = ball_ok & ~bad_near & ~cens_near & (own.counts <= r0)
    # A definite deficient vertex nearby settles clause 1 negatively even
    # when parts of the ball are censored.
    undecidable = ~bad_near & (~ball_ok | cens_near)
    values[clause1] = r0
    clause[clause1] = 1
    censored[undecidable] = True

    pending = np.nonzero(~clause1 & ~undecidable)[0]
    cache = _SupportCache(own, other, window) if mode == SUPPORT else None
    for v in pending:
        v = int(v)
        resolved = False
        for r in range(r0 + 1, cap + 1):
            res = constraint_holds(
                own, other, window, v, r, mode,
                size_cap=size_cap, count_cap=count_cap, _cache=cache,
            )
            if res.status == HOLDS:
                values[v] = r
                clause[v] = 2
                resolved = True
                break
        if not resolved:
            censored[v] = True

    for a in (values, clause, censored):
        a.setflags(write=False)
    return RadiusField(
        values, censored, clause, side, mode, r0, cap, size_cap, bad
    )


# ---------------------------------------------------------------------------
# Components of high-radius sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    vertices: tuple[int, ...]
    size: int
    diameter: int
    n_censored: int


def components_above(
    field: RadiusField,
    window: GraphWindow,
    r: int,
) -> list[Component]:
    """4r-connected components of {v : R_v > r}, censored vertices
    included pessimistically (their count is reported per component)."""
    members = np.nonzero((field.values > r) | field.censored)[0]
    if len(members) == 0:
        return []
    gap = 4 * r
    lab = np.full(len(members), -1, dtype=np.int64)
    nxt = 0
    for s in range(len(members)):
        if lab[s] >= 0:
            continue
        lab[s] = nxt
        stack = [s]
        while stack:
            u = stack.pop()
            row = window.dist_row(int(members[u]))[members]
            close = np.nonzero((row >= 0) & (row <= gap) & (lab == -1))[0]
            lab[close] = nxt
            stack.extend(int(c) for c in close)
        nxt += 1
    out = []
    for cid in range(nxt):
        verts = members[lab == cid]
        diam = 0
        for u in verts:
            row = window.dist_row(int(u))[verts]
            diam = max(diam, int(row.max()))
        out.append(
            Component(
                tuple(int(v) for v in verts),
                len(verts),
                diam,
                int(np.count_nonzero(field.censored[verts])),
            )
        )
    out.sort(key=lambda c: c.vertices[0])
    return out


def dump_radius_field(fieldobj: RadiusField) -> list[str]:
    """Lines "vertex_id R_v mode flags"."""
    flag_names = {0: "censored", 1: "clause1", 2: "clause2"}
    return [
        f"{v} {int(fieldobj.values[v])} {fieldobj.mode} "
        f"{flag_names[int(fieldobj.clause[v])]}"
        for v in range(len(fieldobj.values))
    ]
