"""Toric lattice geometry, Pauli chains, syndromes and Z2 homology.

Coordinates: vertex and face ``(x, y)`` with ``x, y`` taken mod ``k``.
Horizontal edge ``(x, y, h)`` joins vertices ``(x, y)`` and ``(x+1, y)``;
vertical edge ``(x, y, v)`` joins ``(x, y)`` and ``(x, y+1)``.  Face
``(x, y)`` is bounded by ``(x, y, h)``, ``(x, y+1, h)``, ``(x, y, v)`` and
``(x+1, y, v)``.

Indices: vertex/face ``y*k + x``; edge ``(x, y, h)`` is ``y*k + x`` and
``(x, y, v)`` is ``k*k + y*k + x``.

Homology reference cuts.  Z-chains live on the primal lattice and are read
against ``seam_v = {(0, y, h)}`` (crossed by horizontal transport) and
``seam_h = {(x, 0, v)}``.  X-chains live on the dual lattice and are read
against the dual cuts along the same lines ``x = 0`` and ``y = 0``:
``dual_seam_v = {(0, y, v)}`` and ``dual_seam_h = {(x, 0, h)}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

H, V = 0, 1


class LatticeError(ValueError):
    pass


class InvalidSizeError(LatticeError):
    pass


class OpenChainError(LatticeError):
    pass


class PauliChain:
    """Pair of Z2 vectors over the edges: X-type part and Z-type part."""

    __slots__ = ("x", "z")

    def __init__(self, x, z):
        self.x = np.asarray(x, dtype=bool).copy()
        self.z = np.asarray(z, dtype=bool).copy()
        if self.x.shape != self.z.shape or self.x.ndim != 1:
            raise ValueError("x and z parts must be 1-d vectors of equal length")

    @classmethod
    def zeros(cls, n_edges: int) -> "PauliChain":
        return cls(np.zeros(n_edges, bool), np.zeros(n_edges, bool))

    @classmethod
    def from_edges(cls, n_edges: int, x_edges=(), z_edges=()) -> "PauliChain":
        c = cls.zeros(n_edges)
        for e in x_edges:
            c.x[e] ^= True
        for e in z_edges:
            c.z[e] ^= True
        return c

    def __xor__(self, other: "PauliChain") -> "PauliChain":
        return PauliChain(self.x ^ other.x, self.z ^ other.z)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliChain):
            return NotImplemented
        return bool(np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z))

    def __hash__(self):
        return hash((self.x.tobytes(), self.z.tobytes()))

    def is_identity(self) -> bool:
        return not (self.x.any() or self.z.any())

    def __repr__(self) -> str:
        return f"PauliChain(x={np.flatnonzero(self.x).tolist()}, z={np.flatnonzero(self.z).tolist()})"


class DefectSet(NamedTuple):
    vertex_defects: frozenset
    face_defects: frozenset

    def is_empty(self) -> bool:
        return not self.vertex_defects and not self.face_defects


class HomologyClass(NamedTuple):
    wz_v: int
    wz_h: int
    wx_v: int
    wx_h: int

    def is_trivial(self) -> bool:
        return not any(self)


@dataclass(frozen=True, eq=False)
class ToricLattice:
    """Immutable ``k x k`` torus with incidence tables (index arrays, read-only)."""

    k: int
    stars: np.ndarray = field(repr=False)       # (k*k, 4) edge indices per vertex
    bounds: np.ndarray = field(repr=False)      # (k*k, 4) edge indices per face
    edge_vertices: np.ndarray = field(repr=False)  # (2k*k, 2)
    edge_faces: np.ndarray = field(repr=False)     # (2k*k, 2)
    seam_v: np.ndarray = field(repr=False)
    seam_h: np.ndarray = field(repr=False)
    dual_seam_v: np.ndarray = field(repr=False)
    dual_seam_h: np.ndarray = field(repr=False)

    @property
    def n_edges(self) -> int:
        return 2 * self.k * self.k

    @property
    def n_vertices(self) -> int:
        return self.k * self.k

    @property
    def n_faces(self) -> int:
        return self.k * self.k

    # index helpers -------------------------------------------------------
    def site(self, x: int, y: int) -> int:
        k = self.k
        return (y % k) * k + (x % k)

    def coords(self, site: int) -> tuple[int, int]:
        return site % self.k, site // self.k

    def edge(self, x: int, y: int, orientation) -> int:
        k = self.k
        o = _orientation(orientation)
        return o * k * k + (y % k) * k + (x % k)

    def edge_coords(self, e: int) -> tuple[int, int, str]:
        k = self.k
        if not 0 <= e < self.n_edges:
            raise IndexError(f"edge {e} out of range for k={k}")
        o, r = divmod(e, k * k)
        return r % k, r // k, "hv"[o]

    def torus_distance(self, a: int, b: int) -> int:
        k = self.k
        ax, ay = a % k, a // k
        bx, by = b % k, b // k
        dx = abs(ax - bx)
        dy = abs(ay - by)
        return min(dx, k - dx) + min(dy, k - dy)

    # operations ----------------------------------------------------------
    def star(self, s) -> frozenset:
        return frozenset(int(e) for e in self.stars[self._site_index(s, self.n_vertices, "vertex")])

    def bound(self, p) -> frozenset:
        return frozenset(int(e) for e in self.bounds[self._site_index(p, self.n_faces, "face")])

    def indicator(self, edges) -> np.ndarray:
        v = np.zeros(self.n_edges, dtype=bool)
        for e in edges:
            v[e] ^= True
        return v

    def syndrome(self, chain: PauliChain) -> DefectSet:
        self._check_chain(chain)
        vz = np.flatnonzero(chain.z[self.stars].sum(axis=1) % 2)
        fx = np.flatnonzero(chain.x[self.bounds].sum(axis=1) % 2)
        return DefectSet(frozenset(int(v) for v in vz), frozenset(int(f) for f in fx))

    def homology_class(self, chain: PauliChain) -> HomologyClass:
        if not self.syndrome(chain).is_empty():
            raise OpenChainError("homology class is defined for closed chains only")
        z, x = chain.z, chain.x
        return HomologyClass(
            int(z[self.seam_v].sum() % 2),
            int(z[self.seam_h].sum() % 2),
            int(x[self.dual_seam_v].sum() % 2),
            int(x[self.dual_seam_h].sum() % 2),
        )

    def _site_index(self, s, n: int, kind: str) -> int:
        if isinstance(s, tuple):
            x, y = s
            if not (0 <= x < self.k and 0 <= y < self.k):
                raise IndexError(f"invalid {kind} {s} for k={self.k}")
            return y * self.k + x
        s = int(s)
        if not 0 <= s < n:
            raise IndexError(f"invalid {kind} index {s} for k={self.k}")
        return s

    def _check_chain(self, chain: PauliChain) -> None:
        if chain.x.shape[0] != self.n_edges:
            raise LatticeError(f"chain has {chain.x.shape[0]} edges, lattice has {self.n_edges}")


def _orientation(o) -> int:
    if o in (H, "h", "H"):
        return H
    if o in (V, "v", "V"):
        return V
    raise ValueError(f"orientation must be 'h' or 'v', got {o!r}")


def build_lattice(k: int) -> ToricLattice:
    if int(k) != k or k < 2:
        raise InvalidSizeError(f"lattice size must be an integer >= 2, got {k}")
    k = int(k)
    kk = k * k
    xs, ys = np.meshgrid(np.arange(k), np.arange(k))
    xs, ys = xs.ravel(), ys.ravel()   # site order y*k + x

    def hid(x, y):
        return (y % k) * k + (x % k)

    def vid(x, y):
        return kk + (y % k) * k + (x % k)

    stars = np.stack([hid(xs, ys), hid(xs - 1, ys), vid(xs, ys), vid(xs, ys - 1)], axis=1)
    bounds = np.stack([hid(xs, ys), hid(xs, ys + 1), vid(xs, ys), vid(xs + 1, ys)], axis=1)

    edge_vertices = np.empty((2 * kk, 2), dtype=np.int64)
    edge_vertices[:kk, 0] = hid(xs, ys)
    edge_vertices[:kk, 1] = hid(xs + 1, ys)
    edge_vertices[kk:, 0] = hid(xs, ys)
    edge_vertices[kk:, 1] = hid(xs, ys + 1)
    # h-edge (x,y) borders faces (x,y) and (x,y-1); v-edge (x,y) borders (x,y) and (x-1,y)
    edge_faces = np.empty((2 * kk, 2), dtype=np.int64)
    edge_faces[:kk, 0] = hid(xs, ys)
    edge_faces[:kk, 1] = hid(xs, ys - 1)
    edge_faces[kk:, 0] = hid(xs, ys)
    edge_faces[kk:, 1] = hid(xs - 1, ys)

    line = np.arange(k)
    arrays = dict(
        stars=stars, bounds=bounds, edge_vertices=edge_vertices, edge_faces=edge_faces,
        seam_v=hid(0, line), seam_h=vid(line, 0),
        dual_seam_v=vid(0, line), dual_seam_h=hid(line, 0),
    )
    for a in arrays.values():
        a.setflags(write=False)
    return ToricLattice(k=k, **arrays)
