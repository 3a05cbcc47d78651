"""Conforming triangular meshes under tagged newest-vertex bisection.

All meshes generated from one root triangulation share a :class:`MasterTree`,
the (lazily materialized) binary forest of every triangle reachable by
bisection.  Element ids are canonical within that forest: root ``r`` of ``n0``
roots has heap index 1, the children of heap index ``k`` have heap indices
``2k`` and ``2k + 1``, and the element id is ``(k - 1) * n0 + r``.  Ids are
therefore independent of the order in which triangles were created, and
ascending id order lists parents before children.

A :class:`Mesh` is an immutable snapshot: the master tree plus the set of
leaves.  Every mutation returns a new snapshot.
"""

from __future__ import annotations

import hashlib
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from . import geometry
from .errors import ClosureError, DegenerateGeometryError, MeshError

FaceKey = tuple[int, int]
FaceId = Union[FaceKey, int]

# Cascade budget per root element for a single conforming closure.
CLOSURE_CASCADES_PER_ROOT = 64


def face_key(a: int, b: int) -> FaceKey:
    return (a, b) if a < b else (b, a)


def _split(items: Sequence, r: int, mid):
    """Bisect a triangle given as 3 items (vertex ids or coordinates).

    The refinement edge is opposite item ``r``.  The new vertex ``m`` becomes
    item 0 of both children and the children's refinement edge is the one
    opposite ``m``.
    """
    a, b, c = items[r], items[(r + 1) % 3], items[(r + 2) % 3]
    m = mid(b, c)
    return (m, a, b), (m, c, a)


@dataclass(frozen=True)
class Element:
    """A node of the master tree."""

    id: int
    vertices: tuple[int, int, int]
    refinement_edge: int
    parent: int | None
    depth: int

    def edge(self, i: int) -> FaceKey:
        """Vertex pair of the edge opposite local vertex ``i``."""
        return face_key(self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3])

    @property
    def edges(self) -> tuple[FaceKey, FaceKey, FaceKey]:
        return (self.edge(0), self.edge(1), self.edge(2))

    @property
    def refinement_face(self) -> FaceKey:
        return self.edge(self.refinement_edge)


class MasterTree:
    """Append-only store of vertices and bisection genealogy.

    Shared by every mesh snapshot derived from the same root triangulation.
    Creation of children and midpoints is serialized by a lock; everything
    already materialized is never modified.
    """

    def __init__(self, points, triangles, refinement_edges):
        pts = np.asarray(points, dtype=float)
        tris = np.asarray(triangles, dtype=int)
        refs = np.asarray(refinement_edges, dtype=int)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise MeshError("points must be an (n, 2) array")
        if tris.ndim != 2 or tris.shape[1] != 3 or len(tris) == 0:
            raise MeshError("triangles must be a non-empty (n, 3) array")
        if refs.shape != (len(tris),):
            raise MeshError("one refinement-edge index per triangle required")
        if tris.min() < 0 or tris.max() >= len(pts):
            raise MeshError("triangle references an unknown vertex")
        if refs.min() < 0 or refs.max() > 2:
            raise MeshError("refinement-edge index must be 0, 1 or 2")

        self._lock = threading.RLock()
        self._points: list[tuple[float, float]] = [tuple(map(float, p)) for p in pts]
        self._points_array: np.ndarray | None = None
        self._midpoints: dict[FaceKey, int] = {}
        self.n_root_vertices = len(pts)
        self.n_roots = len(tris)
        self.diameter = float(np.ptp(pts, axis=0).max())
        self._elements: dict[int, Element] = {}
        for r, (tri, ref) in enumerate(zip(tris, refs)):
            verts = tuple(int(v) for v in tri)
            a = geometry.signed_area(pts[list(verts)])
            if abs(a) < 1e-14 * self.diameter**2:
                raise DegenerateGeometryError(f"root triangle {r} is degenerate")
            ref = int(ref)
            if a < 0:
                # Reorient counter-clockwise; keep the same refinement edge.
                opposite = verts[ref]
                verts = (verts[0], verts[2], verts[1])
                ref = verts.index(opposite)
            self._elements[r] = Element(r, verts, ref, None, 0)
        self.root_boundary = self._root_boundary_faces()

    # -- id arithmetic ----------------------------------------------------
    def _heap(self, eid: int) -> tuple[int, int]:
        return eid % self.n_roots, eid // self.n_roots + 1

    def _id(self, root: int, heap: int) -> int:
        return (heap - 1) * self.n_roots + root

    def child_ids(self, eid: int) -> tuple[int, int]:
        root, heap = self._heap(eid)
        return self._id(root, 2 * heap), self._id(root, 2 * heap + 1)

    def parent_id(self, eid: int) -> int | None:
        root, heap = self._heap(eid)
        return None if heap == 1 else self._id(root, heap // 2)

    # -- materialization --------------------------------------------------
    @property
    def points(self) -> np.ndarray:
        arr = self._points_array
        if arr is None or len(arr) != len(self._points):
            with self._lock:
                arr = np.array(self._points, dtype=float)
                self._points_array = arr
        return arr

    def point(self, vid: int) -> np.ndarray:
        return np.array(self._points[vid])

    def midpoint(self, a: int, b: int) -> int:
        key = face_key(a, b)
        vid = self._midpoints.get(key)
        if vid is None:
            with self._lock:
                vid = self._midpoints.get(key)
                if vid is None:
                    m = geometry.midpoint(self._points[a], self._points[b])
                    vid = len(self._points)
                    self._points.append((float(m[0]), float(m[1])))
                    self._midpoints[key] = vid
        return vid

    def has_midpoint(self, key: FaceKey) -> int | None:
        return self._midpoints.get(key)

    def element(self, eid: int) -> Element:
        el = self._elements.get(eid)
        if el is not None:
            return el
        if eid < 0:
            raise MeshError(f"unknown element id {eid}")
        parent = self.parent_id(eid)
        if parent is None:
            raise MeshError(f"unknown element id {eid}")
        self.children(parent)
        return self._elements[eid]

    def children(self, eid: int) -> tuple[Element, Element]:
        c0, c1 = self.child_ids(eid)
        if c0 in self._elements:
            return self._elements[c0], self._elements[c1]
        parent = self.element(eid)
        with self._lock:
            if c0 not in self._elements:
                v0, v1 = _split(parent.vertices, parent.refinement_edge, self.midpoint)
                self._elements[c1] = Element(c1, v1, 0, eid, parent.depth + 1)
                self._elements[c0] = Element(c0, v0, 0, eid, parent.depth + 1)
        return self._elements[c0], self._elements[c1]

    def coords(self, eid: int) -> np.ndarray:
        el = self.element(eid)
        return np.array([self._points[v] for v in el.vertices])

    def _root_boundary_faces(self) -> list[tuple[np.ndarray, np.ndarray]]:
        count: dict[FaceKey, int] = defaultdict(int)
        for r in range(self.n_roots):
            for key in self._elements[r].edges:
                count[key] += 1
        return [(self.point(a), self.point(b)) for (a, b), n in sorted(count.items()) if n == 1]

    def on_root_boundary(self, p: np.ndarray) -> bool:
        tol = geometry.GEOM_TOL * self.diameter
        for a, b in self.root_boundary:
            d = b - a
            t = float(np.clip((p - a) @ d / (d @ d), 0.0, 1.0))
            if np.hypot(*(a + t * d - p)) <= tol:
                return True
        return False


class Mesh:
    """Immutable snapshot of a conforming mesh: a master tree plus its leaves."""

    def __init__(self, master: MasterTree, leaves: Iterable[int], log: Sequence[int] = (),
                 _faces: dict[FaceKey, tuple[int, ...]] | None = None):
        self.master = master
        self.leaves: tuple[int, ...] = tuple(sorted(leaves))
        self.log: tuple[int, ...] = tuple(log)
        if _faces is not None:
            self.__dict__["faces"] = _faces

    @classmethod
    def from_arrays(cls, points, triangles, refinement_edges) -> "Mesh":
        master = MasterTree(points, triangles, refinement_edges)
        return cls(master, range(master.n_roots))

    def __len__(self) -> int:
        return len(self.leaves)

    def __repr__(self) -> str:
        return f"Mesh({len(self.leaves)} elements, {len(self.faces)} faces)"

    def __eq__(self, other) -> bool:
        return isinstance(other, Mesh) and other.master is self.master and other.leaves == self.leaves

    def __hash__(self) -> int:
        return hash((id(self.master), self.leaves))

    # -- element access ---------------------------------------------------
    def element(self, eid: int) -> Element:
        return self.master.element(eid)

    @property
    def elements(self) -> list[Element]:
        return [self.master.element(e) for e in self.leaves]

    def coords(self, eid: int) -> np.ndarray:
        return self.master.coords(eid)

    def area(self, eid: int) -> float:
        return float(geometry.area(self.coords(eid)))

    @cached_property
    def leaf_set(self) -> frozenset[int]:
        return frozenset(self.leaves)

    @property
    def points(self) -> np.ndarray:
        return self.master.points

    @cached_property
    def vertex_ids(self) -> tuple[int, ...]:
        return tuple(sorted({v for e in self.elements for v in e.vertices}))

    @cached_property
    def cells(self) -> np.ndarray:
        """(n, 3) vertex ids of the leaves in ascending id order."""
        return np.array([e.vertices for e in self.elements], dtype=int)

    # -- faces --------------------------------------------------------------
    @cached_property
    def faces(self) -> dict[FaceKey, tuple[int, ...]]:
        table: dict[FaceKey, list[int]] = defaultdict(list)
        for el in self.elements:
            for key in el.edges:
                table[key].append(el.id)
        return {k: tuple(sorted(v)) for k, v in table.items()}

    @cached_property
    def face_list(self) -> list[FaceKey]:
        return sorted(self.faces)

    @cached_property
    def face_index(self) -> dict[FaceKey, int]:
        return {k: i for i, k in enumerate(self.face_list)}

    @cached_property
    def interior_faces(self) -> list[FaceKey]:
        return [k for k in self.face_list if len(self.faces[k]) == 2]

    @cached_property
    def boundary_faces(self) -> list[FaceKey]:
        return [k for k in self.face_list if len(self.faces[k]) == 1]

    @cached_property
    def boundary_face_set(self) -> frozenset[FaceKey]:
        return frozenset(self.boundary_faces)

    @cached_property
    def boundary_vertices(self) -> frozenset[int]:
        return frozenset(v for k in self.boundary_faces for v in k)

    def resolve_face(self, face: FaceId) -> FaceKey:
        if isinstance(face, (int, np.integer)) and not isinstance(face, bool):
            if not 0 <= face < len(self.face_list):
                raise MeshError(f"unknown face index {face}")
            return self.face_list[int(face)]
        key = face_key(*face)
        if key not in self.faces:
            raise MeshError(f"unknown face {face}")
        return key

    def face_length(self, face: FaceId) -> float:
        a, b = self.resolve_face(face)
        return float(np.hypot(*(self.master.point(a) - self.master.point(b))))

    @cached_property
    def vertex_elements(self) -> dict[int, tuple[int, ...]]:
        table: dict[int, list[int]] = defaultdict(list)
        for el in self.elements:
            for v in el.vertices:
                table[v].append(el.id)
        return {v: tuple(ids) for v, ids in table.items()}

    def neighbor(self, eid: int, face: FaceKey) -> int | None:
        inc = self.faces[face]
        for other in inc:
            if other != eid:
                return other
        return None

    # -- convenience --------------------------------------------------------
    def hash(self) -> str:
        h = hashlib.sha256()
        for el in self.elements:
            h.update(self.coords(el.id).tobytes())
            h.update(bytes([el.refinement_edge]))
        return h.hexdigest()[:16]

    def total_area(self) -> float:
        return float(sum(self.area(e) for e in self.leaves))

    def bisect(self, eid: int) -> "Mesh":
        return bisect_conforming(self, eid)


# ---------------------------------------------------------------------------
# refinement


class _Refiner:
    """Mutable working copy used while computing one conforming closure."""

    def __init__(self, mesh: Mesh, cap: int):
        self.master = mesh.master
        self.leaves = set(mesh.leaves)
        self.faces = {k: set(v) for k, v in mesh.faces.items()}
        self.cap = cap
        self.count = 0

    def bisect(self, eid: int) -> None:
        el = self.master.element(eid)
        for key in el.edges:
            s = self.faces[key]
            s.discard(eid)
            if not s:
                del self.faces[key]
        self.leaves.discard(eid)
        for child in self.master.children(eid):
            self.leaves.add(child.id)
            for key in child.edges:
                self.faces.setdefault(key, set()).add(child.id)

    def refine(self, eid: int) -> None:
        self.count += 1
        if self.count > self.cap:
            raise ClosureError(
                f"conforming closure exceeded {self.cap} cascades; "
                "the root mesh probably violates the matching condition")
        while eid in self.leaves:
            el = self.master.element(eid)
            key = el.refinement_face
            others = [k for k in self.faces[key] if k != eid]
            if not others:
                self.bisect(eid)
            else:
                nb = others[0]
                if self.master.element(nb).refinement_face == key:
                    self.bisect(eid)
                    self.bisect(nb)
                else:
                    self.refine(nb)

    def snapshot(self, log) -> Mesh:
        faces = {k: tuple(sorted(v)) for k, v in self.faces.items()}
        return Mesh(self.master, self.leaves, log, _faces=faces)


def _cap(mesh: Mesh) -> int:
    return CLOSURE_CASCADES_PER_ROOT * mesh.master.n_roots


def bisect_conforming(mesh: Mesh, element_id: int) -> Mesh:
    """Bisect a leaf and close the result conformingly (recursive NVB closure)."""
    if element_id not in mesh.leaf_set:
        if element_id in mesh.master._elements or element_id >= 0:
            raise MeshError(f"element {element_id} is not a leaf of this mesh")
        raise MeshError(f"unknown element {element_id}")
    work = _Refiner(mesh, _cap(mesh))
    work.refine(element_id)
    return work.snapshot(mesh.log + (element_id,))


def refine_elements(mesh: Mesh, element_ids: Iterable[int]) -> Mesh:
    """Bisect several leaves (skipping ones already bisected by earlier closures)."""
    work = _Refiner(mesh, _cap(mesh))
    log = list(mesh.log)
    for eid in element_ids:
        if eid in work.leaves:
            work.count = 0
            work.refine(eid)
            log.append(eid)
    return work.snapshot(log)


def uniform_refine(mesh: Mesh, rounds: int) -> Mesh:
    """Bisect every element ``rounds`` times, with conforming closure."""
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    for _ in range(rounds):
        mesh = refine_elements(mesh, mesh.leaves)
    return mesh


def validate_matching(mesh: Mesh) -> bool:
    """True if single-element closure terminates within budget for every leaf."""
    for eid in mesh.leaves:
        try:
            bisect_conforming(mesh, eid)
        except ClosureError:
            return False
    return True


def audit_conformity(mesh: Mesh) -> None:
    """Raise :class:`MeshError` if the mesh has a hanging node or a bad edge."""
    active = set(mesh.vertex_ids)
    for key, inc in mesh.faces.items():
        if len(inc) > 2:
            raise MeshError(f"edge {key} shared by {len(inc)} elements")
        mid = mesh.master.has_midpoint(key)
        if mid is not None and mid in active:
            raise MeshError(f"hanging node {mid} on edge {key}")
        if len(inc) == 1:
            a, b = key
            m = geometry.midpoint(mesh.master.point(a), mesh.master.point(b))
            if not mesh.master.on_root_boundary(m):
                raise MeshError(f"edge {key} has one neighbor but is not on the boundary")
    for eid in mesh.leaves:
        if geometry.signed_area(mesh.coords(eid)) <= 0:
            raise MeshError(f"element {eid} is not positively oriented")


def is_conforming(mesh: Mesh) -> bool:
    try:
        audit_conformity(mesh)
    except MeshError:
        return False
    return True


# ---------------------------------------------------------------------------
# patches


@dataclass(frozen=True)
class Patch:
    """Triangles forming an element, a pair, or a minimal pair.

    ``boundary_edges[i][j]`` flags the edge of triangle ``i`` opposite its
    vertex ``j`` as lying on the domain boundary; ``boundary_vertices`` flags
    vertices on the boundary.
    """

    triangles: tuple[np.ndarray, ...]
    hosts: tuple[int, ...]
    boundary_edges: tuple[tuple[bool, bool, bool], ...]
    boundary_vertices: tuple[tuple[bool, bool, bool], ...]
    kind: str
    face: FaceKey | None = None
    shared: tuple[tuple[int, int], tuple[int, int]] | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ("single-element", "pair", "minimal-pair"):
            raise ValueError(f"unknown patch kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def area(self) -> float:
        return float(sum(geometry.area(t) for t in self.triangles))

    @property
    def has_boundary_face(self) -> bool:
        return any(any(flags) for flags in self.boundary_edges)

    @cached_property
    def local_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Glued vertex list and (n, 3) local connectivity."""
        scale = max(geometry.diameter(t) for t in self.triangles)
        tol = geometry.GEOM_TOL * max(scale, 1.0)
        pts: list[np.ndarray] = []
        cells = []
        for tri in self.triangles:
            ids = []
            for p in tri:
                for i, q in enumerate(pts):
                    if abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol:
                        ids.append(i)
                        break
                else:
                    pts.append(p)
                    ids.append(len(pts) - 1)
            cells.append(ids)
        return np.array(pts), np.array(cells, dtype=int)

    def point_set_key(self) -> tuple:
        return tuple(sorted(tuple(np.round(t, 12).ravel()) for t in self.triangles))


def _shared_descriptor(tris: Sequence[np.ndarray]):
    if len(tris) != 2:
        return None
    tol = geometry.GEOM_TOL * max(geometry.diameter(t) for t in tris)

    def match(p, tri):
        for i, q in enumerate(tri):
            if np.abs(p - q).max() <= tol:
                return i
        return None

    common0 = [i for i, p in enumerate(tris[0]) if match(p, tris[1]) is not None]
    if len(common0) != 2:
        raise MeshError("pair triangles do not share exactly one edge")
    common1 = [match(tris[0][i], tris[1]) for i in common0]
    e0 = 3 - sum(common0)
    e1 = 3 - sum(common1)
    return (0, e0), (1, e1)


def _element_flags(mesh: Mesh, el: Element):
    edges = tuple(el.edge(i) in mesh.boundary_face_set for i in range(3))
    verts = tuple(v in mesh.boundary_vertices for v in el.vertices)
    return edges, verts


def element_patch(mesh: Mesh, element_id: int) -> Patch:
    el = mesh.element(element_id)
    edges, verts = _element_flags(mesh, el)
    return Patch((mesh.coords(element_id),), (element_id,), (edges,), (verts,), "single-element")


def pair(mesh: Mesh, face: FaceId) -> Patch:
    """The union of the (one or two) leaves sharing ``face``."""
    key = mesh.resolve_face(face)
    tris, hosts, bedges, bverts = [], [], [], []
    for eid in mesh.faces[key]:
        el = mesh.element(eid)
        edges, verts = _element_flags(mesh, el)
        tris.append(mesh.coords(eid))
        hosts.append(eid)
        bedges.append(edges)
        bverts.append(verts)
    kind = "pair" if len(tris) == 2 else "single-element"
    return Patch(tuple(tris), tuple(hosts), tuple(bedges), tuple(bverts), kind, key,
                 _shared_descriptor(tris))


def _sort_key(tri: np.ndarray) -> tuple:
    return tuple(np.round(tri, 12).ravel())


def minimal_pair(mesh: Mesh, face: FaceId) -> Patch:
    """The minimal pair of ``face``: the smallest pair over all refinements.

    An incident leaf contributes itself when ``face`` is its refinement edge,
    and otherwise its (virtual) bisection child adjacent to ``face``.  Virtual
    children are never inserted into the mesh.
    """
    key = mesh.resolve_face(face)
    bset = mesh.boundary_face_set
    parts = []
    for eid in mesh.faces[key]:
        el = mesh.element(eid)
        coords = mesh.coords(eid)
        if el.refinement_face == key:
            edges, verts = _element_flags(mesh, el)
            parts.append((coords, eid, edges, verts))
            continue
        r = el.refinement_edge
        a, b, c = (el.vertices[(r + k) % 3] for k in range(3))
        child_pts = _split(list(coords), r, geometry.midpoint)
        s_on_boundary = el.refinement_face in bset
        bv = mesh.boundary_vertices
        if face_key(a, b) == key:
            # child (m, a, b): edges opposite m, a, b are (a,b), (b,m), (m,a)
            tri = np.array(child_pts[0])
            edges = (key in bset, s_on_boundary, False)
            verts = (s_on_boundary, a in bv, b in bv)
        elif face_key(c, a) == key:
            # child (m, c, a): edges opposite m, c, a are (c,a), (a,m), (m,c)
            tri = np.array(child_pts[1])
            edges = (key in bset, False, s_on_boundary)
            verts = (s_on_boundary, c in bv, a in bv)
        else:  # pragma: no cover - refinement face handled above
            raise MeshError("face is not an edge of its incident element")
        parts.append((tri, eid, edges, verts))
    parts.sort(key=lambda p: _sort_key(p[0]))
    tris = tuple(p[0] for p in parts)
    kind = "minimal-pair"
    return Patch(tris, tuple(p[1] for p in parts), tuple(p[2] for p in parts),
                 tuple(p[3] for p in parts), kind, key, _shared_descriptor(tris))


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class MeshStats:
    mu: float
    sigma: float
    nbar: int
    face_connected: bool


def face_connected(mesh: Mesh) -> bool:
    """Per vertex, the elements around it must be linked through faces at it."""
    for z, elems in mesh.vertex_elements.items():
        if len(elems) == 1:
            continue
        adj: dict[int, list[int]] = {e: [] for e in elems}
        for e in elems:
            for key in mesh.element(e).edges:
                if z in key:
                    nb = mesh.neighbor(e, key)
                    if nb is not None:
                        adj[e].append(nb)
        seen = {elems[0]}
        stack = [elems[0]]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(elems):
            return False
    return True


def mesh_stats(mesh: Mesh) -> MeshStats:
    areas = {e: mesh.area(e) for e in mesh.leaves}
    diam = {e: geometry.diameter(mesh.coords(e)) for e in mesh.leaves}
    rho = {e: geometry.inball_diameter(mesh.coords(e)) for e in mesh.leaves}
    mu = 1.0
    sigma = 0.0
    for el in mesh.elements:
        touching = {t for v in el.vertices for t in mesh.vertex_elements[v]}
        for t in touching:
            mu = max(mu, (areas[el.id] / areas[t]) ** 0.5)
            sigma = max(sigma, diam[t] / rho[el.id])
    nbar = max(len(v) for v in mesh.vertex_elements.values())
    return MeshStats(mu=float(mu), sigma=float(sigma), nbar=nbar, face_connected=face_connected(mesh))


# ---------------------------------------------------------------------------
# builders and text format


def rectangle_mesh(x0: float, x1: float, y0: float, y1: float, nx: int = 1, ny: int = 1,
                   flip: bool = False) -> Mesh:
    """Structured mesh of ``nx * ny`` cells, each split along a diagonal.

    The diagonal is the refinement edge of both triangles in a cell, which
    satisfies the matching condition.
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    pts = np.array([(x, y) for y in ys for x in xs])

    def vid(i, j):
        return j * (nx + 1) + i

    tris, refs = [], []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if flip ^ ((i + j) % 2 == 1):
                tris += [(a, b, d), (b, c, d)]
                refs += [0, 1]
            else:
                tris += [(a, b, c), (a, c, d)]
                refs += [1, 2]
    return Mesh.from_arrays(pts, tris, refs)


def unit_square_mesh() -> Mesh:
    """Unit square split along the diagonal (0,0)-(1,1); diagonal is the refinement edge."""
    return rectangle_mesh(0.0, 1.0, 0.0, 1.0, 1, 1)


def counterexample_mesh(nx: int = 6, ny: int = 3, rounds: int = 0) -> Mesh:
    """Mesh of (-2, 2) x (-1, 1) subordinate to the line x = 0."""
    if nx % 2:
        raise MeshError("nx must be even so that x = 0 is a mesh line")
    return uniform_refine(rectangle_mesh(-2.0, 2.0, -1.0, 1.0, nx, ny), rounds)


def write_mesh(mesh: Mesh) -> str:
    master = mesh.master
    lines = ["rdmesh 1"]
    for p in master.points[: master.n_root_vertices]:
        lines.append(f"v {float(p[0])!r} {float(p[1])!r}")
    for r in range(master.n_roots):
        el = master.element(r)
        lines.append("t {} {} {} {}".format(*el.vertices, el.refinement_edge))
    for eid in mesh.log:
        lines.append(f"b {eid}")
    return "\n".join(lines) + "\n"


def read_mesh(text: str) -> Mesh:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0].split() != ["rdmesh", "1"]:
        raise MeshError("missing 'rdmesh 1' header")
    pts, tris, refs, log = [], [], [], []
    for n, ln in enumerate(lines[1:], start=2):
        tag, *rest = ln.split()
        try:
            if tag == "v":
                pts.append((float(rest[0]), float(rest[1])))
            elif tag == "t":
                i, j, k, r = (int(x) for x in rest)
                tris.append((i, j, k))
                refs.append(r)
            elif tag == "b":
                log.append(int(rest[0]))
            else:
                raise MeshError(f"line {n}: unknown record {tag!r}")
        except (IndexError, ValueError) as exc:
            raise MeshError(f"line {n}: malformed record {ln!r}") from exc
    mesh = Mesh.from_arrays(pts, tris, refs)
    for eid in log:
        if eid in mesh.leaf_set:
            mesh = bisect_conforming(mesh, eid)
        else:
            mesh = Mesh(mesh.master, mesh.leaves, mesh.log + (eid,), _faces=mesh.faces)
    return mesh


def load_mesh(path) -> Mesh:
    with open(path) as fh:
        return read_mesh(fh.read())


def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(write_mesh(mesh))
