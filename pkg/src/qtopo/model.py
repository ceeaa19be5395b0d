"""Ground structures and the per-edge conduction system built from them.

A ground structure is a graph whose edges each take one of two materials,
conductivity ``lam`` (bit 1) or ``epsilon * lam`` (bit 0).  Assembly removes
the base (heat-sink) node, whose temperature is pinned to zero, and pads the
remaining system to a power-of-two dimension so it fits a qubit register.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class ModelError(ValueError):
    """Invalid ground-structure definition."""


class AssemblyError(ModelError):
    """The structure cannot be reduced to a positive-definite system."""


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    length: float = 1.0


@dataclass(frozen=True)
class GroundStructure:
    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]
    lam: float
    epsilon: float
    source: int
    target: int
    base: int
    coords: Mapping[int, tuple[float, float]] | None = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))
        object.__setattr__(
            self, "edges",
            tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges),
        )
        if self.coords is not None:
            object.__setattr__(
                self, "coords",
                {int(k): (float(v[0]), float(v[1])) for k, v in self.coords.items()},
            )
        if sorted(self.nodes) != list(range(len(self.nodes))):
            raise ModelError("node ids must be exactly 0..N_total-1")
        known = set(self.nodes)
        if not self.edges:
            raise ModelError("ground structure has no edges")
        for j, e in enumerate(self.edges, start=1):
            if e.a not in known or e.b not in known:
                raise ModelError(f"edge {j} ({e.a}, {e.b}) references an unknown node")
            if e.a == e.b:
                raise ModelError(f"edge {j} ({e.a}, {e.b}) is a self-loop")
            if not e.length > 0:
                raise ModelError(f"edge {j} ({e.a}, {e.b}) has non-positive length {e.length}")
        roles = (self.source, self.target, self.base)
        for name, v in zip(("source", "target", "base"), roles):
            if v not in known:
                raise ModelError(f"{name} node {v} is not a node of the structure")
        if len(set(roles)) != 3:
            raise ModelError("source, target and base must be distinct nodes")
        if not 0.0 < self.epsilon < 1.0:
            raise ModelError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.lam > 0:
            raise ModelError(f"lambda must be positive, got {self.lam}")

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Boundary-reduced, padded stiffness data.

    ``K`` has shape ``(m, 2**n, 2**n)``; ``K[j]`` is the padded stiffness of
    edge ``j`` (identity on padding rows).  ``free_index`` maps node ids to
    rows of the reduced system.
    """

    m: int
    n: int
    num_free: int
    K: np.ndarray
    F: np.ndarray
    free_index: Mapping[int, int]
    epsilon: float
    lam: float
    source_index: int
    target_index: int
    edge_ends: tuple[tuple[int | None, int | None], ...]
    lengths: tuple[float, ...]

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def num_qubits(self) -> int:
        return self.m + self.n

    def conductivities(self, x) -> np.ndarray:
        bits = np.asarray(as_bits(x, self.m), dtype=float)
        return (1.0 - self.epsilon) * bits + self.epsilon


def as_bits(x, m: int) -> tuple[int, ...]:
    """Normalise a structure given as bit string, integer or bit sequence.

    Integers use x_1 as the most significant bit.
    """
    if isinstance(x, str):
        if len(x) != m or set(x) - {"0", "1"}:
            raise ValueError(f"structure {x!r} is not a {m}-bit string")
        return tuple(int(c) for c in x)
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < (1 << m):
            raise ValueError(f"structure index {x} out of range for m={m}")
        return tuple((int(x) >> (m - 1 - j)) & 1 for j in range(m))
    bits = tuple(int(b) for b in x)
    if len(bits) != m or set(bits) - {0, 1}:
        raise ValueError(f"structure {x!r} is not {m} bits")
    return bits


def bitstring(x: int, m: int) -> str:
    return format(x, f"0{m}b") if m else ""


def element_stiffness(edge: Edge, lam: float, free_index: Mapping[int, int],
                      size: int | None = None) -> np.ndarray:
    """Fourier-law conduction matrix of one edge over the free nodes.

    Rows and columns of a node missing from ``free_index`` (the base node)
    are dropped, which pins its temperature to zero.
    """
    if edge.a == edge.b:
        raise ModelError(f"degenerate edge ({edge.a}, {edge.b})")
    if not edge.length > 0:
        raise ModelError(f"edge ({edge.a}, {edge.b}) has non-positive length")
    if size is None:
        size = len(free_index)
    k = lam / edge.length
    out = np.zeros((size, size))
    i = free_index.get(edge.a)
    i2 = free_index.get(edge.b)
    if i is not None:
        out[i, i] += k
    if i2 is not None:
        out[i2, i2] += k
    if i is not None and i2 is not None:
        out[i, i2] -= k
        out[i2, i] -= k
    return out


def _check_connected(structure: GroundStructure) -> None:
    n_tot = len(structure.nodes)
    rows = [e.a for e in structure.edges]
    cols = [e.b for e in structure.edges]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_tot, n_tot))
    ncomp, labels = connected_components(graph, directed=False)
    if ncomp == 1:
        return
    base_label = labels[structure.base]
    if np.count_nonzero(labels == base_label) == 1:
        raise AssemblyError(f"base node {structure.base} is not attached to any edge")
    stray = sorted(int(v) for v in np.flatnonzero(labels != base_label))
    raise AssemblyError(f"nodes {stray} are disconnected from the base node {structure.base}")


def assemble(structure: GroundStructure) -> AssembledSystem:
    _check_connected(structure)
    free_nodes = [v for v in structure.nodes if v != structure.base]
    free_index = {v: i for i, v in enumerate(free_nodes)}
    N = len(free_nodes)
    n = max(1, math.ceil(math.log2(N)))
    dim = 1 << n
    K = np.zeros((structure.num_edges, dim, dim))
    for j, e in enumerate(structure.edges):
        K[j, :N, :N] = element_stiffness(e, structure.lam, free_index)
        K[j, N:, N:] = np.eye(dim - N)
    F = np.zeros(dim)
    F[free_index[structure.source]] = 1.0
    ends = tuple((free_index.get(e.a), free_index.get(e.b)) for e in structure.edges)
    return AssembledSystem(
        m=structure.num_edges, n=n, num_free=N, K=K, F=F,
        free_index=free_index, epsilon=structure.epsilon, lam=structure.lam,
        source_index=free_index[structure.source],
        target_index=free_index[structure.target],
        edge_ends=ends, lengths=tuple(e.length for e in structure.edges),
    )


def structure_stiffness(sys: AssembledSystem, x) -> np.ndarray:
    c = sys.conductivities(x)
    return np.tensordot(c, sys.K, axes=1)


def all_stiffness(sys: AssembledSystem) -> np.ndarray:
    """Stack of K(x) for every structure, indexed by x as an integer."""
    m = sys.m
    idx = np.arange(1 << m)
    bits = (idx[:, None] >> (m - 1 - np.arange(m))[None, :]) & 1
    c = (1.0 - sys.epsilon) * bits + sys.epsilon
    return np.tensordot(c, sys.K, axes=1)


def make_structure(edges: Sequence[tuple], *, source: int, target: int, base: int,
                   lam: float = 1.0, epsilon: float = 0.1, num_nodes: int | None = None,
                   coords=None) -> GroundStructure:
    edges = tuple(Edge(*e) for e in edges)
    if num_nodes is None:
        num_nodes = 1 + max(max(e.a, e.b) for e in edges)
    return GroundStructure(tuple(range(num_nodes)), edges, lam, epsilon,
                           source, target, base, coords)


def tri3() -> GroundStructure:
    """Three-edge triangle: source 0, target 1, base 2."""
    return make_structure(
        [(0, 2, 1.0), (0, 1, 1.0), (1, 2, 1.0)], source=0, target=1, base=2,
        coords={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (0.5, 0.8660254037844386)},
    )


def five_edge() -> GroundStructure:
    """Five-edge, five-node instance (four free nodes, two node qubits)."""
    return make_structure(
        [(0, 1, 1.0), (1, 4, 1.0), (0, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)],
        source=0, target=3, base=4,
        coords={0: (0.0, 1.0), 1: (1.0, 1.0), 2: (0.0, 0.0), 3: (1.0, 0.0), 4: (2.0, 0.5)},
    )


CANONICAL = {"tri3": tri3, "five_edge": five_edge}
