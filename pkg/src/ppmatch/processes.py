"""Seeded point processes on graph windows.

Two process kinds are supported: unit-intensity Poisson counts per
vertex, and perturbed vertex sets where every window vertex emits one
point that is displaced by an i.i.d. distance law and lands uniformly
on the corresponding sphere.

All randomness derives from per-vertex hash streams keyed by the
canonical vertex label, so counts at a shared vertex do not depend on
the window size, and resampling with the same seed is bit-for-bit
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import CensoringError, ConfigurationError
from .graphs import (
    EXPLICIT,
    GraphWindow,
    sphere_point,
    sphere_size_infinite,
)
from .seeds import derive_seed, hash_u64, uniform_stream, unit_uniform

POISSON = "poisson"
PERTURBED = "perturbed"

_POISSON_KMAX = 35
_POISSON_CDF: np.ndarray | None = None


def _poisson_cdf() -> np.ndarray:
    """CDF table of Poisson(1); the tail mass beyond the table is below
    the resolution of a 64-bit uniform, so inversion never overflows it."""
    global _POISSON_CDF
    if _POISSON_CDF is None:
        table = stats.poisson.cdf(np.arange(_POISSON_KMAX + 1), 1.0)
        table.setflags(write=False)
        _POISSON_CDF = table
    return _POISSON_CDF


@dataclass(frozen=True)
class ProcessSpec:
    """Either unit-intensity Poisson counts or a perturbed vertex set.

    ``distance_law`` is a probability mass function over displacement
    distances with finite support; it is only meaningful for the
    perturbed kind.
    """

    kind: str
    distance_law: tuple[tuple[int, float], ...] = ()

    @staticmethod
    def poisson() -> "ProcessSpec":
        return ProcessSpec(POISSON)

    @staticmethod
    def perturbed(law: Mapping[int, float]) -> "ProcessSpec":
        if not law:
            raise ConfigurationError("perturbed process needs a distance law")
        items = []
        total = 0.0
        for dist in sorted(law):
            w = float(law[dist])
            if dist < 0 or int(dist) != dist:
                raise ConfigurationError(f"distance {dist!r} is not a natural number")
            if w < 0 or not math.isfinite(w):
                raise ConfigurationError(f"weight {w!r} at distance {dist} invalid")
            if w > 0.0:
                items.append((int(dist), w))
                total += w
        if not items:
            raise ConfigurationError("distance law has no positive mass")
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"distance law sums to {total}, expected 1")
        return ProcessSpec(PERTURBED, tuple(items))

    @staticmethod
    def degenerate() -> "ProcessSpec":
        """The identity perturbation: every point stays at its vertex."""
        return ProcessSpec.perturbed({0: 1.0})

    @property
    def max_displacement(self) -> int:
        if self.kind != PERTURBED:
            return 0
        return self.distance_law[-1][0]

    @property
    def is_degenerate(self) -> bool:
        return self.kind == PERTURBED and self.distance_law == ((0, 1.0),)


@dataclass(frozen=True)
class PointMultiset:
    """An immutable multiset of points on a window.

    counts[v] is the number of points at vertex v.  Points are listed
    grouped by vertex in ascending vertex order; ``point_slot`` carries
    the 1-based index of a point within its vertex, so a point is the
    pair (point_vertex[p], point_slot[p]).  For perturbed sets
    ``origin_vertex`` records where each point was emitted; it is None
    for Poisson samples.
    """

    counts: np.ndarray
    point_vertex: np.ndarray
    point_slot: np.ndarray
    offsets: np.ndarray
    origin_vertex: np.ndarray | None = None
    discarded: int = 0

    @property
    def total(self) -> int:
        return int(len(self.point_vertex))

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.counts)[0]

    def point_ids_at(self, v: int) -> range:
        return range(int(self.offsets[v]), int(self.offsets[v + 1]))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _from_counts(
    counts: np.ndarray,
    origin_vertex: np.ndarray | None = None,
    discarded: int = 0,
) -> PointMultiset:
    offsets = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
    point_vertex = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    slot = np.arange(len(point_vertex), dtype=np.int64) - offsets[point_vertex] + 1
    return PointMultiset(
        counts=_freeze(counts.astype(np.int64)),
        point_vertex=_freeze(point_vertex),
        point_slot=_freeze(slot),
        offsets=_freeze(offsets),
        origin_vertex=None if origin_vertex is None else _freeze(origin_vertex),
        discarded=discarded,
    )


def multiset_from_counts(
    counts: np.ndarray | list[int],
    origin_vertex: np.ndarray | None = None,
    discarded: int = 0,
) -> PointMultiset:
    """Build a multiset directly from per-vertex counts."""
    arr = np.asarray(counts, dtype=np.int64).copy()
    if arr.ndim != 1 or (arr < 0).any():
        raise ValueError("counts must be a 1-d nonnegative array")
    return _from_counts(arr, origin_vertex=origin_vertex, discarded=discarded)


def sample(spec: ProcessSpec, window: GraphWindow, seed: int) -> PointMultiset:
    """Sample a process on a window, deterministically in (spec, seed).

    Poisson counts come from one uniform per vertex inverted through the
    Poisson(1) CDF.  Perturbed sets emit one point per window vertex,
    draw a displacement distance from the law, and land uniformly on the
    infinite-graph sphere at that distance (the exact in-graph sphere
    for explicit families); landings outside the window are discarded
    and counted, which keeps core counts unbiased as long as the core
    margin is at least the maximum displacement.
    """
    if spec.kind == POISSON:
        cdf = _poisson_cdf()
        counts = np.empty(window.n, dtype=np.int64)
        for i, lab in enumerate(window.labels):
            u = unit_uniform(seed, "count", lab)
            counts[i] = int(np.searchsorted(cdf, u, side="right"))
        return _from_counts(counts)

    if spec.kind != PERTURBED:
        raise ConfigurationError(f"unknown process kind {spec.kind!r}")
    if spec.max_displacement > window.core_margin:
        raise ConfigurationError(
            f"max displacement {spec.max_displacement} exceeds core margin "
            f"{window.core_margin}: core counts would be biased"
        )

    distances = np.array([d for d, _ in spec.distance_law], dtype=np.int64)
    cum = np.cumsum([w for _, w in spec.distance_law])
    cum[-1] = 1.0
    explicit = window.family.kind == EXPLICIT

    landings: list[int] = []
    origins: list[int] = []
    discarded = 0
    for i, lab in enumerate(window.labels):
        u = unit_uniform(seed, "disp", lab)
        d = int(distances[np.searchsorted(cum, u, side="right")])
        if d == 0:
            landings.append(i)
            origins.append(i)
            continue
        if explicit:
            members, _ = window.sphere(i, d)
            if len(members) == 0:
                discarded += 1
                continue
            j = hash_u64(seed, "land", lab) % len(members)
            landings.append(int(members[j]))
            origins.append(i)
            continue
        s = sphere_size_infinite(window.family, d)
        j = hash_u64(seed, "land", lab) % s
        target = sphere_point(window.family, lab, d, j)
        idx = window.label_to_index.get(target)
        if idx is None:
            discarded += 1
        else:
            landings.append(idx)
            origins.append(i)

    land = np.asarray(landings, dtype=np.int64)
    orig = np.asarray(origins, dtype=np.int64)
    order = np.argsort(land, kind="stable")
    counts = np.bincount(land, minlength=window.n).astype(np.int64)
    pm = _from_counts(counts, origin_vertex=orig[order], discarded=discarded)
    return pm


def count_in(pm: PointMultiset, vertex_set) -> int:
    """Number of points of pm on the given window vertices."""
    idx = np.asarray(vertex_set, dtype=np.int64)
    if idx.size == 0:
        return 0
    return int(pm.counts[idx].sum())


def poisson_count_samples(seed: int, trials: int, *parts) -> np.ndarray:
    """A block of independent Poisson(1) counts from one derived stream."""
    u = uniform_stream(seed, trials, *parts)
    return np.searchsorted(_poisson_cdf(), u, side="right").astype(np.int64)


@dataclass(frozen=True)
class HoleEstimate:
    """Empirical probability that B_r(probe) contains no points."""

    value: float
    stderr: float
    trials: int
    analytic: float | None


def hole_probability(
    spec: ProcessSpec,
    window: GraphWindow,
    r: int,
    trials: int,
    seed: int,
) -> HoleEstimate:
    """Monte Carlo hole probability at the window root.

    For Poisson input the analytic value exp(-b_r) is attached and the
    trials use one blocked uniform stream per ball vertex.  For
    perturbed input each trial replays the displacement of every origin
    close enough to reach the probe ball.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if r > window.core_margin and window.family.kind != EXPLICIT:
        raise CensoringError(
            f"hole radius {r} exceeds core margin {window.core_margin}"
        )
    if not window.ball_complete(0, r):
        raise CensoringError(f"probe ball of radius {r} is incomplete")
    ball_idx, _ = window.ball(0, r)

    if spec.kind == POISSON:
        total = np.zeros(trials, dtype=np.int64)
        for i in ball_idx:
            lab = window.labels[int(i)]
            total += poisson_count_samples(seed, trials, "hole", lab)
        hits = int(np.count_nonzero(total == 0))
        p = hits / trials
        se = math.sqrt(p * (1.0 - p) / trials)
        return HoleEstimate(p, se, trials, math.exp(-len(ball_idx)))

    dmax = spec.max_displacement
    if r + dmax > window.depth and window.family.kind != EXPLICIT:
        raise CensoringError(
            f"origins within {r + dmax} of the probe do not all fit in the window"
        )
    relevant, _ = window.ball(0, min(r + dmax, window.depth))
    root_dist = window.dist_row(0)
    distances = np.array([d for d, _ in spec.distance_law], dtype=np.int64)
    cum = np.cumsum([w for _, w in spec.distance_law])
    cum[-1] = 1.0
    explicit = window.family.kind == EXPLICIT

    hits = 0
    for t in range(trials):
        seed_t = derive_seed(seed, "hole", t)
        occupied = False
        for i in relevant:
            i = int(i)
            lab = window.labels[i]
            u = unit_uniform(seed_t, "disp", lab)
            d = int(distances[np.searchsorted(cum, u, side="right")])
            if d == 0:
                target = i
            elif explicit:
                members, _ = window.sphere(i, d)
                if len(members) == 0:
                    continue
                target = int(members[hash_u64(seed_t, "land", lab) % len(members)])
            else:
                s = sphere_size_infinite(window.family, d)
                j = hash_u64(seed_t, "land", lab) % s
                t_lab = sphere_point(window.family, lab, d, j)
                idx = window.label_to_index.get(t_lab)
                if idx is None:
                    continue
                target = idx
            if root_dist[target] >= 0 and root_dist[target] <= r:
                occupied = True
                break
        if not occupied:
            hits += 1
    p = hits / trials
    se = math.sqrt(p * (1.0 - p) / trials)
    analytic = 0.0 if spec.is_degenerate else None
    return HoleEstimate(p, se, trials, analytic)


# ---------------------------------------------------------------------------
# Dump / load
# ---------------------------------------------------------------------------

ORIGIN_HEADER = "[origins]"


def dump_multiset(pm: PointMultiset) -> list[str]:
    """Lines "vertex_id count", then origin/landing pairs for perturbed sets."""
    lines = [f"{v} {int(c)}" for v, c in enumerate(pm.counts)]
    if pm.origin_vertex is not None:
        lines.append(ORIGIN_HEADER)
        for p in range(pm.total):
            lines.append(f"{int(pm.origin_vertex[p])} {int(pm.point_vertex[p])}")
    return lines


def load_multiset(lines: Iterable[str]) -> PointMultiset:
    counts: list[int] = []
    origins: list[tuple[int, int]] = []
    in_origins = False
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == ORIGIN_HEADER:
            in_origins = True
            continue
        a, b = line.split()
        if in_origins:
            origins.append((int(a), int(b)))
        else:
            v, c = int(a), int(b)
            if v != len(counts):
                raise ConfigurationError(f"count lines out of order at vertex {v}")
            counts.append(c)
    arr = np.asarray(counts, dtype=np.int64)
    if not origins:
        return _from_counts(arr)
    pairs = np.asarray(origins, dtype=np.int64)
    if np.any(np.diff(pairs[:, 1]) < 0):
        raise ConfigurationError("origin pairs must be grouped by landing vertex")
    counted = np.bincount(pairs[:, 1], minlength=len(arr))
    if not np.array_equal(counted, arr):
        raise ConfigurationError("origin pairs disagree with count lines")
    return _from_counts(arr, origin_vertex=pairs[:, 0])
