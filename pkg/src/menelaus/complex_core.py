"""Combinatorial Delta-complexes in dimensions 0..2 and M-complex validation.

A complex is a triple of cell name lists plus face maps: every triangle has
three edges (d0, d1, d2) and every edge two vertices (d0, d1), subject to the
simplicial identities.  An M-complex is a finite, homogeneous, regular,
connected complex in which every edge bounds exactly two triangles, every
vertex link is linked, and the complex is orientable; validation produces
either a certificate carrying an explicit orientation 2-chain or a report
naming the first violated axiom with a witness.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional


class ComplexError(Exception):
    """Base class for structural errors on complexes and chains."""


class DanglingFace(ComplexError):
    pass


class SimplicialIdentityViolated(ComplexError):
    def __init__(self, cell: str, j: int, l: int):
        super().__init__(f"d_{j} d_{l} != d_{l-1} d_{j} on 2-cell {cell!r}")
        self.cell = cell
        self.j = j
        self.l = l


class DuplicateCell(ComplexError):
    pass


class UnknownCell(ComplexError):
    pass


class NotACycle(ComplexError):
    pass


class IrregularCell(ComplexError):
    pass


class InvalidPairing(ComplexError):
    pass


class OddCharacteristic(ComplexError):
    pass


class InternalInconsistency(ComplexError):
    """Axioms (0)-(4) passed but the link circle could not be extracted.

    This would contradict the camembert property of M-complexes and hence
    indicates a bug, never a property of the input.
    """


@dataclass(frozen=True)
class CellId:
    """A cell reference: dimension in {0,1,2} plus its interned name."""

    dim: int
    name: str

    def __post_init__(self):
        if self.dim not in (0, 1, 2):
            raise ValueError(f"bad cell dimension {self.dim}")


# Chains are plain dicts from cell name to a nonzero integer coefficient.
Chain1 = dict
Chain2 = dict


def normalize_chain(c: Mapping[str, int]) -> dict:
    """Drop zero coefficients; chains never store them."""
    return {cell: k for cell, k in c.items() if k != 0}


@dataclass(frozen=True)
class DeltaComplex:
    """Cells and face maps of a 2-dimensional Delta-complex.

    ``edge_faces[e] == (d0, d1)`` gives the two vertices of edge ``e`` and
    ``triangle_faces[t] == (d0, d1, d2)`` the three edges of triangle ``t``.
    Instances are immutable after construction; every operation in this
    module is a pure function.
    """

    vertices: tuple
    edges: tuple
    triangles: tuple
    edge_faces: dict
    triangle_faces: dict

    # -- convenience accessors -------------------------------------------

    def triangle_vertices(self, t: str) -> tuple:
        """The vertex triple (v0, v1, v2) of triangle ``t``.

        v0 = d1d2, v1 = d0d2, v2 = d0d0, which the simplicial identities
        make well defined.
        """
        e0, e1, e2 = self.triangle_faces[t]
        return (
            self.edge_faces[e2][1],
            self.edge_faces[e2][0],
            self.edge_faces[e0][0],
        )

    def cells(self, dim: int) -> tuple:
        return (self.vertices, self.edges, self.triangles)[dim]

    def is_empty(self) -> bool:
        return not (self.vertices or self.edges or self.triangles)


def new_complex(spec: Mapping) -> DeltaComplex:
    """Build and validate a complex from a raw description.

    ``spec`` uses the JSON shape: ``{"v": [names], "e": [{"id", "d0", "d1"}],
    "t": [{"id", "d0", "d1", "d2"}]}``.  Raises DanglingFace when a face
    reference does not resolve and SimplicialIdentityViolated (reporting the
    offending (cell, j, l)) when the identities fail on some triangle.
    """
    vertices = tuple(spec.get("v", ()))
    edge_rows = list(spec.get("e", ()))
    tri_rows = list(spec.get("t", ()))
    for dim, names in ((0, vertices), (1, [r["id"] for r in edge_rows]),
                       (2, [r["id"] for r in tri_rows])):
        seen = set()
        for name in names:
            if name in seen:
                raise DuplicateCell(f"duplicate dim-{dim} cell {name!r}")
            seen.add(name)

    vset = set(vertices)
    edge_faces = {}
    for row in edge_rows:
        for key in ("d0", "d1"):
            if row[key] not in vset:
                raise DanglingFace(f"edge {row['id']!r}: {key}={row[key]!r} is not a 0-cell")
        edge_faces[row["id"]] = (row["d0"], row["d1"])

    eset = set(edge_faces)
    triangle_faces = {}
    for row in tri_rows:
        for key in ("d0", "d1", "d2"):
            if row[key] not in eset:
                raise DanglingFace(f"triangle {row['id']!r}: {key}={row[key]!r} is not a 1-cell")
        triangle_faces[row["id"]] = (row["d0"], row["d1"], row["d2"])

    complex_ = DeltaComplex(
        vertices=vertices,
        edges=tuple(r["id"] for r in edge_rows),
        triangles=tuple(r["id"] for r in tri_rows),
        edge_faces=edge_faces,
        triangle_faces=triangle_faces,
    )
    _check_simplicial_identities(complex_)
    return complex_


def _check_simplicial_identities(K: DeltaComplex) -> None:
    # For dimension 2 the admissible (j, l) with l-1 >= j are (0,1), (0,2), (1,2):
    #   d0 d1 = d0 d0,  d0 d2 = d1 d0,  d1 d2 = d1 d1.
    for t, (e0, e1, e2) in K.triangle_faces.items():
        f0, f1, f2 = K.edge_faces[e0], K.edge_faces[e1], K.edge_faces[e2]
        if f1[0] != f0[0]:
            raise SimplicialIdentityViolated(t, 0, 1)
        if f2[0] != f0[1]:
            raise SimplicialIdentityViolated(t, 0, 2)
        if f2[1] != f1[1]:
            raise SimplicialIdentityViolated(t, 1, 2)


def complex_from_triangle_rows(rows: Iterable[tuple]) -> DeltaComplex:
    """Assemble a complex from (name, v0, v1, v2, e0, e1, e2) rows.

    Edge/vertex cells are collected from the rows; each edge's vertex pair is
    forced by the incidences e0=(v2,v1), e1=(v2,v0), e2=(v1,v0) and must be
    consistent across rows.
    """
    edge_faces = {}
    vertices = []
    tri_rows = []
    for name, v0, v1, v2, e0, e1, e2 in rows:
        for v in (v0, v1, v2):
            if v not in vertices:
                vertices.append(v)
        for edge, pair in ((e0, (v2, v1)), (e1, (v2, v0)), (e2, (v1, v0))):
            if edge in edge_faces and edge_faces[edge] != pair:
                raise InvalidPairing(
                    f"edge {edge!r} gets vertex pairs {edge_faces[edge]} and {pair}")
            edge_faces[edge] = pair
        tri_rows.append({"id": name, "d0": e0, "d1": e1, "d2": e2})
    return new_complex({
        "v": vertices,
        "e": [{"id": e, "d0": p[0], "d1": p[1]} for e, p in edge_faces.items()],
        "t": tri_rows,
    })


# -- chains and boundaries ------------------------------------------------


def boundary2(c: Mapping[str, int], K: DeltaComplex) -> Chain1:
    """Linear extension of the boundary d0 - d1 + d2 of a 2-chain."""
    out: dict = {}
    for t, k in c.items():
        if t not in K.triangle_faces:
            raise UnknownCell(f"2-cell {t!r} not in complex")
        e0, e1, e2 = K.triangle_faces[t]
        out[e0] = out.get(e0, 0) + k
        out[e1] = out.get(e1, 0) - k
        out[e2] = out.get(e2, 0) + k
    return normalize_chain(out)


def boundary1(c: Mapping[str, int], K: DeltaComplex) -> dict:
    out: dict = {}
    for e, k in c.items():
        if e not in K.edge_faces:
            raise UnknownCell(f"1-cell {e!r} not in complex")
        d0, d1 = K.edge_faces[e]
        out[d0] = out.get(d0, 0) + k
        out[d1] = out.get(d1, 0) - k
    return normalize_chain(out)


def is_cycle(c: Mapping[str, int], K: DeltaComplex) -> bool:
    return not boundary2(c, K)


# -- connectivity ----------------------------------------------------------


def connected_components(K: DeltaComplex) -> list:
    """Components as dicts with 'vertices', 'edges', 'triangles' frozensets.

    Components are computed by vertex-edge walks; edges and triangles join
    the component of their vertices.
    """
    parent = {v: v for v in K.vertices}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for d0, d1 in K.edge_faces.values():
        union(d0, d1)

    groups: dict = {}
    for v in K.vertices:
        groups.setdefault(find(v), {"vertices": set(), "edges": set(), "triangles": set()})
        groups[find(v)]["vertices"].add(v)
    for e, (d0, _) in K.edge_faces.items():
        groups[find(d0)]["edges"].add(e)
    for t in K.triangles:
        v0 = K.triangle_vertices(t)[0]
        groups[find(v0)]["triangles"].add(t)
    out = []
    for root in sorted(groups, key=str):
        g = groups[root]
        out.append({k: frozenset(v) for k, v in g.items()})
    return out


# -- M-complex validation ---------------------------------------------------


@dataclass(frozen=True)
class ViolationReport:
    """Names the first violated M-complex axiom, with witnesses."""

    code: str          # NotConnected | NotHomogeneous | NotRegular |
                       # EdgeDegreeNotTwo | LinkNotLinked | NotOrientable
    axiom: str
    witness: object = None

    def __bool__(self):
        return False


@dataclass(frozen=True)
class MComplexCert:
    """Certificate that a complex satisfies all M-complex axioms.

    ``orientation`` is a 2-chain with all coefficients +-1 and zero boundary;
    on a connected complex it generates all 2-cycles and is unique up to a
    global sign (the lexicographically least triangle gets +1).
    """

    complex: DeltaComplex
    orientation: dict
    component_count: int = 1

    def __bool__(self):
        return True


def edge_degrees(K: DeltaComplex) -> dict:
    deg: dict = {e: 0 for e in K.edges}
    for e0, e1, e2 in K.triangle_faces.values():
        for e in (e0, e1, e2):
            deg[e] += 1
    return deg


def validate_mcomplex(K: DeltaComplex):
    """Check axioms (0)-(5) in order; return MComplexCert or ViolationReport."""
    components = connected_components(K)
    if len(components) != 1:
        return ViolationReport("NotConnected", "connected",
                               witness=len(components))

    # (1) homogeneous 2-dimensional: every vertex is a face of an edge and
    # every edge a face of a triangle.
    used_vertices = set()
    for d0, d1 in K.edge_faces.values():
        used_vertices.update((d0, d1))
    for v in K.vertices:
        if v not in used_vertices:
            return ViolationReport("NotHomogeneous", "homogeneous", witness=CellId(0, v))
    used_edges = set()
    for faces in K.triangle_faces.values():
        used_edges.update(faces)
    for e in K.edges:
        if e not in used_edges:
            return ViolationReport("NotHomogeneous", "homogeneous", witness=CellId(1, e))

    # (2) regular: distinct faces everywhere.
    for t, faces in K.triangle_faces.items():
        if len(set(faces)) != 3:
            return ViolationReport("NotRegular", "regular", witness=CellId(2, t))
    for e, (d0, d1) in K.edge_faces.items():
        if d0 == d1:
            return ViolationReport("NotRegular", "regular", witness=CellId(1, e))

    # (3) every edge bounds exactly two triangles.
    for e, deg in edge_degrees(K).items():
        if deg != 2:
            return ViolationReport("EdgeDegreeNotTwo", "edge degree two",
                                   witness=(e, deg))

    # (4) links are linked.
    for w in K.vertices:
        if not _link_is_linked(K, w):
            return ViolationReport("LinkNotLinked", "linked links", witness=w)

    # (5) orientable, via sign propagation on the dual graph.
    orientation = _propagate_orientation(K)
    if isinstance(orientation, ViolationReport):
        return orientation

    cert = MComplexCert(complex=K, orientation=orientation, component_count=1)
    if boundary2(orientation, K):
        raise InternalInconsistency("orientation chain has nonzero boundary")
    for w in K.vertices:
        link_cycle(cert, w)   # raises InternalInconsistency on failure
    return cert


def _vertex_link(K: DeltaComplex, w: str) -> list:
    return [t for t in K.triangles if w in K.triangle_vertices(t)]


def _edges_at(K: DeltaComplex, t: str, w: str) -> list:
    return [e for e in K.triangle_faces[t] if w in K.edge_faces[e]]


def _link_is_linked(K: DeltaComplex, w: str) -> bool:
    link = _vertex_link(K, w)
    if not link:
        return True
    by_edge: dict = {}
    for t in link:
        for e in _edges_at(K, t, w):
            by_edge.setdefault(e, []).append(t)
    seen = {link[0]}
    stack = [link[0]]
    while stack:
        t = stack.pop()
        for e in _edges_at(K, t, w):
            for u in by_edge.get(e, ()):
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
    return len(seen) == len(link)


def _propagate_orientation(K: DeltaComplex):
    """BFS signs over the dual graph so paired edge slots cancel.

    Two slots (t, i) and (t', i') of an edge cancel when
    eps_t * (-1)^i == -eps_t' * (-1)^i'.  Returns the orientation chain, or a
    NotOrientable report whose witness is an odd dual cycle (a triangle path
    whose forced sign contradicts the assigned one).
    """
    slots: dict = {}
    for t, faces in K.triangle_faces.items():
        for i, e in enumerate(faces):
            slots.setdefault(e, []).append((t, i))

    eps: dict = {}
    parent: dict = {}
    for start in sorted(K.triangles):
        if start in eps:
            continue
        eps[start] = 1
        parent[start] = None
        queue = [start]
        while queue:
            t = queue.pop(0)
            for i, e in enumerate(K.triangle_faces[t]):
                for (u, j) in slots[e]:
                    if u == t and j == i:
                        continue
                    forced = -eps[t] * (-1) ** i * (-1) ** j
                    if u not in eps:
                        eps[u] = forced
                        parent[u] = t
                        queue.append(u)
                    elif eps[u] != forced:
                        return ViolationReport(
                            "NotOrientable", "orientable",
                            witness=_dual_cycle_witness(parent, t, u))
    return {t: eps[t] for t in K.triangles}


def _dual_cycle_witness(parent: dict, a: str, b: str) -> tuple:
    def chain(x):
        out = []
        while x is not None:
            out.append(x)
            x = parent.get(x)
        return out
    ca, cb = chain(a), chain(b)
    shared = set(ca) & set(cb)
    cut_a = next(i for i, x in enumerate(ca) if x in shared)
    cut_b = next(i for i, x in enumerate(cb) if x in shared)
    return tuple(ca[:cut_a + 1] + cb[:cut_b][::-1])


def euler_characteristic(K: DeltaComplex) -> int:
    return len(K.triangles) - len(K.edges) + len(K.vertices)


def genus(cert: MComplexCert) -> int:
    chi = euler_characteristic(cert.complex)
    if chi % 2:
        raise OddCharacteristic(f"chi = {chi} is odd on a certified complex")
    return (2 - chi) // 2


def link_cycle(cert: MComplexCert, w: str) -> tuple:
    """Cyclic order on the triangles around ``w``; consecutive ones share an
    edge through ``w`` and every triangle of the link appears exactly once."""
    K = cert.complex
    if w not in K.vertices:
        raise UnknownCell(f"0-cell {w!r} not in complex")
    link = sorted(_vertex_link(K, w))
    if not link:
        raise InternalInconsistency(f"vertex {w!r} has empty link on certified complex")
    by_edge: dict = {}
    for t in link:
        for e in _edges_at(K, t, w):
            by_edge.setdefault(e, []).append(t)

    start = link[0]
    first_edges = sorted(_edges_at(K, start, w))
    if len(first_edges) != 2:
        raise InternalInconsistency(f"triangle {start!r} has {len(first_edges)} edges at {w!r}")
    cycle = [start]
    enter = first_edges[0]
    current = start
    while True:
        leave = next(e for e in _edges_at(K, current, w) if e != enter)
        peers = [u for u in by_edge[leave] if u != current]
        if len(peers) != 1:
            raise InternalInconsistency(f"edge {leave!r} is not shared by two link triangles")
        nxt = peers[0]
        if nxt == start:
            # The walk left ``start`` by first_edges[1]; a complete circle
            # returns through the other edge.
            if leave != first_edges[0]:
                raise InternalInconsistency(f"link walk at {w!r} closes early")
            break
        if nxt in cycle:
            raise InternalInconsistency(f"link walk at {w!r} revisits {nxt!r}")
        cycle.append(nxt)
        enter = leave
        current = nxt
    if len(cycle) != len(link):
        raise InternalInconsistency(f"link walk at {w!r} misses triangles")
    return tuple(cycle)


# -- the complex built from a 2-cycle ---------------------------------------


@dataclass(frozen=True)
class ComplexMorphism:
    """Dimension-wise maps commuting with the face maps."""

    map0: dict
    map1: dict
    map2: dict


def cycle_to_mcomplex(K: DeltaComplex, c: Mapping[str, int],
                      pairing: Optional[list] = None):
    """Unfold a 2-cycle of ``K`` into a complex satisfying the M-complex
    axioms componentwise, together with the morphism back to ``K``.

    Occurrences of the cycle (a coefficient k contributes |k| occurrences of
    sign sgn k) become fresh triangles; the 3n boundary slots are matched in
    cancelling pairs, each pair becoming one edge; vertices are the quotient
    of the edge-end symbols under the incidences the triangles force.  When
    ``pairing`` is omitted, slots of each repeated edge are matched greedily
    in slot order, positive sign to negative.

    ``pairing``, when given, is a list of 2-element slot collections; a slot
    is (occurrence_index, face_index).
    """
    c = normalize_chain(c)
    for t in c:
        if t not in K.triangle_faces:
            raise UnknownCell(f"2-cell {t!r} not in complex")
    if boundary2(c, K):
        raise NotACycle("chain has nonzero boundary")

    occurrences = []   # (source triangle, sign)
    for t in sorted(c):
        k = c[t]
        for _ in range(abs(k)):
            occurrences.append((t, 1 if k > 0 else -1))

    for t in c:
        faces = K.triangle_faces[t]
        if len(set(faces)) != 3:
            raise IrregularCell(f"2-cell {t!r} has repeated edges")
        for e in faces:
            d0, d1 = K.edge_faces[e]
            if d0 == d1:
                raise IrregularCell(f"edge {e!r} of {t!r} has equal vertices")

    slots = []   # (occurrence index, face index, edge of K, sign in boundary)
    for idx, (t, sign) in enumerate(occurrences):
        for i, e in enumerate(K.triangle_faces[t]):
            slots.append((idx, i, e, sign * (-1) ** i))

    if pairing is None:
        pairing = _canonical_pairing(slots)
    matched = _check_pairing(slots, pairing)

    # Fresh names: keep the source name when the occurrence is unique.
    multiple = {t for t in c if abs(c[t]) > 1}
    seen_count: dict = {}
    tri_names = []
    for t, _sign in occurrences:
        if t in multiple:
            seen_count[t] = seen_count.get(t, 0) + 1
            tri_names.append(f"{t}#{seen_count[t]}")
        else:
            tri_names.append(t)

    edge_of_slot: dict = {}
    edge_names = []
    edge_source = {}
    for n, pair in enumerate(matched):
        name = f"s{n + 1}"
        edge_names.append(name)
        for (idx, i) in pair:
            edge_of_slot[(idx, i)] = name
        edge_source[name] = next(e for (a, b, e, s) in slots if (a, b) in pair)

    # Vertex quotient: ends (edge, 0) and (edge, 1), glued by the incidences
    # (d1 u, 0) ~ (d0 u, 0), (d2 u, 0) ~ (d0 u, 1), (d2 u, 1) ~ (d1 u, 1).
    parent: dict = {}

    def find(a):
        parent.setdefault(a, a)
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for idx in range(len(occurrences)):
        e0 = edge_of_slot[(idx, 0)]
        e1 = edge_of_slot[(idx, 1)]
        e2 = edge_of_slot[(idx, 2)]
        union((e1, 0), (e0, 0))
        union((e2, 0), (e0, 1))
        union((e2, 1), (e1, 1))

    ends = sorted({(e, l) for e in edge_names for l in (0, 1)})
    class_name: dict = {}
    for end in ends:
        root = find(end)
        if root not in class_name:
            class_name[root] = f"w{len(class_name) + 1}"
    vertex_of_end = {end: class_name[find(end)] for end in ends}

    L = new_complex({
        "v": sorted(set(class_name.values()), key=lambda s: int(s[1:])),
        "e": [{"id": e, "d0": vertex_of_end[(e, 0)], "d1": vertex_of_end[(e, 1)]}
              for e in edge_names],
        "t": [{"id": tri_names[idx], "d0": edge_of_slot[(idx, 0)],
               "d1": edge_of_slot[(idx, 1)], "d2": edge_of_slot[(idx, 2)]}
              for idx in range(len(occurrences))],
    })

    map2 = {tri_names[idx]: occurrences[idx][0] for idx in range(len(occurrences))}
    map1 = dict(edge_source)
    map0 = {}
    for e in edge_names:
        src = edge_source[e]
        for l in (0, 1):
            v = vertex_of_end[(e, l)]
            want = K.edge_faces[src][l]
            if map0.setdefault(v, want) != want:
                raise InternalInconsistency("vertex map is not well defined")
    morphism = ComplexMorphism(map0=map0, map1=map1, map2=map2)

    for comp in connected_components(L):
        sub = _restrict(L, comp)
        result = validate_mcomplex(sub)
        if not result:
            raise InternalInconsistency(
                f"unfolded component violates axiom: {result.code}")
    return L, morphism


def _canonical_pairing(slots: list) -> list:
    by_edge: dict = {}
    for (idx, i, e, sign) in slots:
        by_edge.setdefault(e, []).append((idx, i, sign))
    pairing = []
    for e in sorted(by_edge, key=str):
        entries = sorted(by_edge[e])
        pos = [(idx, i) for (idx, i, s) in entries if s > 0]
        neg = [(idx, i) for (idx, i, s) in entries if s < 0]
        if len(pos) != len(neg):
            raise NotACycle(f"edge {e!r} has unbalanced signs")
        pairing.extend([a, b] for a, b in zip(pos, neg))
    return pairing


def _check_pairing(slots: list, pairing: list) -> list:
    info = {(idx, i): (e, sign) for (idx, i, e, sign) in slots}
    seen = set()
    matched = []
    for pair in pairing:
        pair = tuple(pair)
        if len(pair) != 2:
            raise InvalidPairing("pairing classes must have exactly two slots")
        (a, b) = pair
        for slot in pair:
            if tuple(slot) not in info:
                raise InvalidPairing(f"unknown slot {slot!r}")
            if tuple(slot) in seen:
                raise InvalidPairing(f"slot {slot!r} used twice")
            seen.add(tuple(slot))
        ea, sa = info[tuple(a)]
        eb, sb = info[tuple(b)]
        if ea != eb:
            raise InvalidPairing(f"slots {a!r}, {b!r} name different edges")
        if sa != -sb:
            raise InvalidPairing(f"slots {a!r}, {b!r} have equal signs")
        matched.append((tuple(a), tuple(b)))
    if len(seen) != len(slots):
        raise InvalidPairing("pairing does not cover all slots")
    return matched


def _restrict(K: DeltaComplex, comp: Mapping) -> DeltaComplex:
    return DeltaComplex(
        vertices=tuple(v for v in K.vertices if v in comp["vertices"]),
        edges=tuple(e for e in K.edges if e in comp["edges"]),
        triangles=tuple(t for t in K.triangles if t in comp["triangles"]),
        edge_faces={e: K.edge_faces[e] for e in K.edges if e in comp["edges"]},
        triangle_faces={t: K.triangle_faces[t] for t in K.triangles
                        if t in comp["triangles"]},
    )


# -- <2-isomorphism ----------------------------------------------------------


@dataclass(frozen=True)
class Sub2Iso:
    """Bijections on 0- and 1-cells (identity on 2-cells) commuting with faces."""

    map0: dict
    map1: dict


def is_sub2_isomorphic(K: DeltaComplex, L: DeltaComplex) -> Optional[Sub2Iso]:
    """Find a <2-isomorphism witness, or None when none exists.

    The 2-component is the identity, so both complexes must carry the same
    2-cell names; faces of triangles then force the edge map wherever an edge
    bounds a triangle, and edge faces force the vertex map.  Cells not
    reachable from a triangle are matched by backtracking.
    """
    if set(K.triangles) != set(L.triangles):
        return None
    if len(K.edges) != len(L.edges) or len(K.vertices) != len(L.vertices):
        return None

    map1: dict = {}
    for t in K.triangles:
        for a, b in zip(K.triangle_faces[t], L.triangle_faces[t]):
            if map1.setdefault(a, b) != b:
                return None
    if len(set(map1.values())) != len(map1):
        return None

    map0: dict = {}
    for a, b in map1.items():
        for va, vb in zip(K.edge_faces[a], L.edge_faces[b]):
            if map0.setdefault(va, vb) != vb:
                return None
    if len(set(map0.values())) != len(map0):
        return None

    # Leftovers: edges of K not bounding any triangle, then isolated vertices.
    free_edges = [e for e in K.edges if e not in map1]
    free_targets = [e for e in L.edges if e not in set(map1.values())]
    solution = _match_free(K, L, free_edges, free_targets, map0, map1)
    if solution is None:
        return None
    map0, map1 = solution

    free_vs = [v for v in K.vertices if v not in map0]
    free_vt = [v for v in L.vertices if v not in set(map0.values())]
    if len(free_vs) != len(free_vt):
        return None
    for a, b in zip(sorted(free_vs), sorted(free_vt)):
        map0[a] = b
    return Sub2Iso(map0=map0, map1=map1)


def _match_free(K, L, free_edges, free_targets, map0, map1):
    if len(free_edges) != len(free_targets):
        return None
    if not free_edges:
        return dict(map0), dict(map1)
    # Order candidates cheapest-first: edges whose endpoints are already
    # pinned have at most a couple of matches.
    e = free_edges[0]
    for f in free_targets:
        new0 = dict(map0)
        ok = True
        for va, vb in zip(K.edge_faces[e], L.edge_faces[f]):
            if new0.setdefault(va, vb) != vb:
                ok = False
                break
        if not ok or len(set(new0.values())) != len(new0):
            continue
        new1 = dict(map1)
        new1[e] = f
        rest = [g for g in free_targets if g != f]
        solution = _match_free(K, L, free_edges[1:], rest, new0, new1)
        if solution is not None:
            return solution
    return None


# -- serialization -----------------------------------------------------------


def complex_to_data(K: DeltaComplex) -> dict:
    """The JSON-compatible dict form (field order fixed: v, e, t)."""
    return {
        "v": list(K.vertices),
        "e": [{"id": e, "d0": K.edge_faces[e][0], "d1": K.edge_faces[e][1]}
              for e in K.edges],
        "t": [{"id": t, "d0": K.triangle_faces[t][0], "d1": K.triangle_faces[t][1],
               "d2": K.triangle_faces[t][2]} for t in K.triangles],
    }


def complex_from_data(data: Mapping) -> DeltaComplex:
    return new_complex(data)


def canonical_encoding(K: DeltaComplex) -> tuple:
    """A <2-isomorphism invariant encoding for homogeneous complexes.

    Edges are keyed by their sorted (triangle, face-index) slot sets; vertices
    by the sorted set of incident edge keys with the end index.  Two
    homogeneous complexes are <2-isomorphic iff their encodings are equal.
    """
    slot_key: dict = {}
    for t in sorted(K.triangles):
        for i, e in enumerate(K.triangle_faces[t]):
            slot_key.setdefault(e, []).append((t, i))
    edge_key = {e: tuple(sorted(v)) for e, v in slot_key.items()}
    vertex_key: dict = {}
    for e in K.edges:
        if e not in edge_key:
            edge_key[e] = ("free", e)   # outside any triangle: keep the name
        d0, d1 = K.edge_faces[e]
        vertex_key.setdefault(d0, []).append((edge_key[e], 0))
        vertex_key.setdefault(d1, []).append((edge_key[e], 1))
    vkey = {v: tuple(sorted(vertex_key.get(v, [("isolated", v)]))) for v in K.vertices}
    rows = []
    for t in sorted(K.triangles):
        rows.append((t, tuple(edge_key[e] for e in K.triangle_faces[t])))
    eds = tuple(sorted((edge_key[e], vkey[K.edge_faces[e][0]], vkey[K.edge_faces[e][1]])
                       for e in K.edges))
    return (tuple(rows), eds, tuple(sorted(vkey.values())))
