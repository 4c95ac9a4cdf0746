"""Lattice graphs, percolation thresholds and cluster bookkeeping.

Sites are indexed row-major over the lattice extents, bonds are stored as
``(i, j)`` pairs with ``i < j`` in lexicographic order.  That ordering is the
bond iteration order used by the samplers, so seeded runs are reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

KINDS = ("chain", "honeycomb", "square", "triangular", "cubic", "bcc", "custom")
BOUNDARIES = ("open", "periodic")

_COORDINATION = {
    "chain": 2,
    "honeycomb": 3,
    "square": 4,
    "triangular": 6,
    "cubic": 6,
    "bcc": 8,
}

_NDIM = {"chain": 1, "honeycomb": 2, "square": 2, "triangular": 2, "cubic": 3, "bcc": 3}


class LatticeError(ValueError):
    """Unsupported lattice kind, extents or boundary combination."""


@dataclass(frozen=True)
class LatticeGraph:
    kind: str
    dims: tuple[int, ...]
    boundary: str
    n_sites: int
    bonds: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        seen = set()
        for i, j in self.bonds:
            if not (0 <= i < j < self.n_sites):
                raise LatticeError(f"bond ({i}, {j}) is not a valid ordered site pair")
            if (i, j) in seen:
                raise LatticeError(f"duplicate bond ({i}, {j})")
            seen.add((i, j))
        if list(self.bonds) != sorted(self.bonds):
            raise LatticeError("bonds must be in lexicographic order")

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_sites, dtype=int)
        for i, j in self.bonds:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, site: int) -> list[int]:
        out = []
        for i, j in self.bonds:
            if i == site:
                out.append(j)
            elif j == site:
                out.append(i)
        return out

    def incident_bonds(self) -> list[list[int]]:
        """Bond indices touching each site, in bond order."""
        inc: list[list[int]] = [[] for _ in range(self.n_sites)]
        for b, (i, j) in enumerate(self.bonds):
            inc[i].append(b)
            inc[j].append(b)
        return inc

    def to_spec(self) -> dict:
        if self.kind == "custom":
            return {"kind": "custom", "n_sites": self.n_sites, "bonds": [list(b) for b in self.bonds]}
        return {"kind": self.kind, "dims": list(self.dims), "boundary": self.boundary}


@dataclass
class ThresholdTable:
    """Percolation thresholds per lattice kind.

    Defaults are literature values; they are configuration, not derived here.
    """

    bond_threshold: dict[str, float] = field(
        default_factory=lambda: {
            "honeycomb": 1.0 - 2.0 * math.sin(math.pi / 18.0),
            "square": 0.5,
            "triangular": 2.0 * math.sin(math.pi / 18.0),
            "cubic": 0.2488,
            "bcc": 0.1803,
        }
    )
    site_threshold: dict[str, float] = field(
        default_factory=lambda: {
            "honeycomb": 0.6970,
            "square": 0.5927,
            "triangular": 0.5,
            "cubic": 0.3116,
            "bcc": 0.2460,
        }
    )

    def __post_init__(self) -> None:
        for table in (self.bond_threshold, self.site_threshold):
            for kind, value in table.items():
                if not 0.0 < value < 1.0:
                    raise ValueError(f"threshold for {kind!r} must lie in (0, 1), got {value}")

    def with_overrides(self, bond: dict[str, float] | None = None,
                       site: dict[str, float] | None = None) -> "ThresholdTable":
        return ThresholdTable({**self.bond_threshold, **(bond or {})},
                              {**self.site_threshold, **(site or {})})


DEFAULT_THRESHOLDS = ThresholdTable()


def threshold(kind: str, mode: str = "bond", table: ThresholdTable | None = None) -> float:
    table = DEFAULT_THRESHOLDS if table is None else table
    if mode == "bond":
        values = table.bond_threshold
    elif mode == "site":
        values = table.site_threshold
    else:
        raise ValueError(f"mode must be 'bond' or 'site', got {mode!r}")
    try:
        return values[kind]
    except KeyError:
        raise KeyError(f"no {mode} percolation threshold configured for {kind!r}") from None


def coordination(kind: str) -> int:
    try:
        return _COORDINATION[kind]
    except KeyError:
        raise LatticeError(f"{kind!r} has no single coordination number") from None


def _wrap(coord: Sequence[int], dims: Sequence[int], periodic: bool) -> tuple[int, ...] | None:
    out = []
    for c, n in zip(coord, dims):
        if 0 <= c < n:
            out.append(c)
        elif periodic:
            out.append(c % n)
        else:
            return None
    return tuple(out)


def _grid_bonds(dims: Sequence[int], offsets: Iterable[Sequence[int]], periodic: bool,
                keep=None) -> set[tuple[int, int]]:
    bonds = set()
    for coord in np.ndindex(*dims):
        i = int(np.ravel_multi_index(coord, dims))
        for off in offsets:
            if keep is not None and not keep(coord, off):
                continue
            other = _wrap([c + o for c, o in zip(coord, off)], dims, periodic)
            if other is None:
                continue
            j = int(np.ravel_multi_index(other, dims))
            if i != j:
                bonds.add((min(i, j), max(i, j)))
    return bonds


def build_lattice(kind: str, dims: Sequence[int], boundary: str = "periodic") -> LatticeGraph:
    """Build one of the named lattice families.

    ``honeycomb`` uses the brick-wall embedding on an ``Lx x Ly`` grid; ``bcc``
    extents count unit cells, each cell contributing a corner and a body
    centre site (open boundaries keep only the centres of complete cells).
    """
    if kind not in _NDIM:
        raise LatticeError(f"unsupported lattice kind {kind!r}")
    if boundary not in BOUNDARIES:
        raise LatticeError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    dims = tuple(int(d) for d in dims)
    if len(dims) != _NDIM[kind]:
        raise LatticeError(f"{kind} needs {_NDIM[kind]} extents, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise LatticeError(f"all extents must be >= 1, got {dims}")
    periodic = boundary == "periodic"
    if periodic:
        # smaller periodic extents fold bonds onto each other
        minimum = 4 if kind == "honeycomb" else 3
        if kind == "bcc":
            minimum = 2
        if any(d < minimum for d in dims):
            raise LatticeError(f"periodic {kind} needs extents >= {minimum}, got {dims}")
        if kind == "honeycomb" and any(d % 2 for d in dims):
            raise LatticeError("periodic honeycomb needs even extents")

    if kind == "chain":
        bonds = _grid_bonds(dims, [(1,)], periodic)
        n = dims[0]
    elif kind == "square":
        bonds = _grid_bonds(dims, [(1, 0), (0, 1)], periodic)
        n = dims[0] * dims[1]
    elif kind == "triangular":
        bonds = _grid_bonds(dims, [(1, 0), (0, 1), (1, 1)], periodic)
        n = dims[0] * dims[1]
    elif kind == "honeycomb":
        bonds = _grid_bonds(dims, [(1, 0), (0, 1)], periodic,
                            keep=lambda c, off: off[1] == 0 or (c[0] + c[1]) % 2 == 0)
        n = dims[0] * dims[1]
    elif kind == "cubic":
        bonds = _grid_bonds(dims, [(1, 0, 0), (0, 1, 0), (0, 0, 1)], periodic)
        n = dims[0] * dims[1] * dims[2]
    else:
        n_corner = int(np.prod(dims))
        cells = dims if periodic else tuple(d - 1 for d in dims)
        if any(c < 1 for c in cells):
            raise LatticeError(f"open bcc needs extents >= 2, got {dims}")
        bonds = set()
        for k, cell in enumerate(np.ndindex(*cells)):
            centre = n_corner + k
            for off in np.ndindex(2, 2, 2):
                corner = _wrap([c + o for c, o in zip(cell, off)], dims, periodic)
                bonds.add((int(np.ravel_multi_index(corner, dims)), centre))
        n = n_corner + int(np.prod(cells))

    graph = LatticeGraph(kind, dims, boundary, n, tuple(sorted(bonds)))
    if periodic:
        deg = graph.degrees
        if not np.all(deg == _COORDINATION[kind]):
            raise LatticeError(f"periodic {kind} {dims} is not regular (degrees {sorted(set(deg))})")
    return graph


def custom_graph(n_sites: int, edges: Iterable[Sequence[int]]) -> LatticeGraph:
    bonds = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise LatticeError(f"self-loop at site {i}")
        bonds.add((min(i, j), max(i, j)))
    return LatticeGraph("custom", (n_sites,), "open", n_sites, tuple(sorted(bonds)))


def star_graph(d: int) -> LatticeGraph:
    """Site 0 joined to ``d`` leaves."""
    return custom_graph(d + 1, [(0, k) for k in range(1, d + 1)])


def read_edge_list(path: str | Path) -> LatticeGraph:
    """Parse a custom graph: one ``i j`` pair per line, ``#`` comments allowed."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise LatticeError(f"{path}:{lineno}: expected 'i j', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    n = 1 + max((max(e) for e in edges), default=-1)
    return custom_graph(n, edges)


def lattice_from_spec(spec: dict | str) -> LatticeGraph:
    """Build a lattice from ``{kind, dims, boundary}`` (or a JSON string of it).

    Custom graphs take either ``edges`` inline (with optional ``n_sites``) or
    ``edge_file`` pointing at an edge list.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("kind")
    if kind == "custom":
        if "edge_file" in spec:
            return read_edge_list(spec["edge_file"])
        edges = spec.get("edges", spec.get("bonds", []))
        n = spec.get("n_sites", 1 + max((max(e) for e in edges), default=-1))
        return custom_graph(n, edges)
    if "dims" not in spec:
        raise LatticeError("lattice spec needs 'dims'")
    return build_lattice(kind, spec["dims"], spec.get("boundary", "periodic"))


@dataclass(frozen=True)
class ClusterPartition:
    labels: np.ndarray  # site -> cluster id
    sizes: np.ndarray   # cluster id -> site count

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    @property
    def largest(self) -> int:
        return int(self.sizes.max()) if len(self.sizes) else 0

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def groups(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        splits = np.cumsum(self.sizes)[:-1]
        return np.split(order, splits)


class UnionFind:
    """Disjoint sets over ``0..n-1`` with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.n_sets = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_sets -= 1
        return True

    def partition(self) -> ClusterPartition:
        roots = [self.find(x) for x in range(len(self.parent))]
        ids: dict[int, int] = {}
        labels = np.empty(len(roots), dtype=np.int64)
        for site, r in enumerate(roots):
            labels[site] = ids.setdefault(r, len(ids))
        return ClusterPartition(labels, np.bincount(labels, minlength=len(ids)))


def _bond_arrays(graph: LatticeGraph) -> tuple[np.ndarray, np.ndarray]:
    if not graph.bonds:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    arr = np.asarray(graph.bonds, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def connected_clusters(graph: LatticeGraph, active: Sequence[bool] | np.ndarray) -> ClusterPartition:
    """Partition sites into clusters joined by active bonds.

    Cluster ids are assigned in order of each cluster's lowest site index.
    """
    active = np.asarray(active, dtype=bool)
    if active.shape != (graph.n_bonds,):
        raise ValueError(f"expected {graph.n_bonds} bond flags, got shape {active.shape}")
    src, dst = _bond_arrays(graph)
    src, dst = src[active], dst[active]
    adj = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)),
                     shape=(graph.n_sites, graph.n_sites))
    _, raw = connected_components(adj, directed=False)
    # relabel by first appearance so ids do not depend on the solver internals
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    labels = rank[inverse]
    return ClusterPartition(labels, np.bincount(labels, minlength=len(first)))
