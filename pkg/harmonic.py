#!/usr/bin/env python3
"""
Harmonic Morphisms

Harmonic morphisms of graphs, double covers and towers of covers.

Supports:
- Validation of harmonicity and metric compatibility
- Global degree, fibers, composition and metrization of sources
- Double covers with their covering involution, signed-graph covers
- Towers (double cover over a degree-n map), fiber types I/II/III
- Contraction of morphisms and towers, tower isomorphism, quotients by an involution
- Random generic towers over trees
"""

import enum
import logging
import random
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from errors import DisconnectedTarget, InvalidTower
from symgraph import (Graph, LinearForm, MetricGraph, Point, components,
                      contraction_map, contract_edges, graph_isomorphic, is_vertex, mate)

logger = logging.getLogger(__name__)


class ValidationReport(NamedTuple):
    ok: bool
    violations: List[str]


class HarmonicMorphism:
    """A map of graphs sending vertices to vertices and half-edges to half-edges.

    Args:
        source: Source graph
        target: Target graph
        point_map: Image of every vertex and half-edge of the source
        deg: Positive local degree of every source point
    """

    def __init__(self, source: Graph, target: Graph,
                 point_map: Mapping[Point, Point], deg: Mapping[Point, int]):
        self.source = source
        self.target = target
        self._map = dict(point_map)
        self._deg = dict(deg)
        self._fibers: Dict[Point, List[Point]] = {p: [] for p in target.points}
        for point in source.points:
            image = self._map.get(point)
            if image in self._fibers:
                self._fibers[image].append(point)

    @classmethod
    def from_edges(cls, source: Graph, target: Graph,
                   vertex_map: Mapping[str, str],
                   edge_map: Mapping[str, Tuple[str, bool, int]],
                   vertex_deg: Mapping[str, int] = None) -> 'HarmonicMorphism':
        """Build a morphism from edge images given as (target edge, flipped, degree).

        Vertex degrees that are not given are read off the first target
        half-edge at the image vertex; isolated vertices default to 1.
        """
        point_map: Dict[Point, Point] = dict(vertex_map)
        deg: Dict[Point, int] = {}
        for name, (image, flipped, degree) in edge_map.items():
            for end in (0, 1):
                point_map[(name, end)] = (image, 1 - end if flipped else end)
                deg[(name, end)] = degree
        for vertex in source.vertices:
            if vertex_deg and vertex in vertex_deg:
                deg[vertex] = vertex_deg[vertex]
                continue
            image = vertex_map.get(vertex)
            star = target.star(image) if image is not None and target.has_point(image) else []
            if star:
                deg[vertex] = sum(deg.get(h, 0) for h in source.star(vertex)
                                  if point_map.get(h) == star[0])
            else:
                deg[vertex] = 1
        return cls(source, target, point_map, deg)

    def __call__(self, point: Point) -> Point:
        return self._map[point]

    @property
    def point_map(self) -> Dict[Point, Point]:
        return dict(self._map)

    @property
    def degrees(self) -> Dict[Point, int]:
        return dict(self._deg)

    def deg(self, point: Point) -> int:
        return self._deg[point]

    def fiber(self, point: Point) -> List[Point]:
        """Preimages of a target point in source order."""
        return list(self._fibers[point])

    def pullback(self, point: Point) -> Dict[Point, int]:
        return {p: self._deg[p] for p in self._fibers[point]}

    def validate(self) -> ValidationReport:
        """Check the morphism, harmonicity, degree constancy and metric compatibility."""
        violations = []
        src, tgt = self.source, self.target
        for point in src.points:
            if point not in self._map:
                violations.append(f"{point!r} has no image")
            elif not tgt.has_point(self._map[point]) or is_vertex(point) != is_vertex(self._map[point]):
                violations.append(f"{point!r} maps to invalid point {self._map[point]!r}")
            degree = self._deg.get(point)
            if not isinstance(degree, int):
                violations.append(f"{point!r} has no integer degree, got {degree!r}")
        if violations:
            return ValidationReport(False, violations)
        for point in src.points:
            if self._deg[point] <= 0:
                violations.append(f"{point!r} has non-positive degree {self._deg[point]!r}")

        for h in src.half_edges:
            if self._map[src.root(h)] != tgt.root(self._map[h]):
                violations.append(f"{h!r} does not commute with the root map")
            if self._map[mate(h)] != mate(self._map[h]):
                violations.append(f"{h!r} does not commute with the mate")
            if self._deg[h] != self._deg[mate(h)]:
                violations.append(f"edge {h[0]!r} has different degrees at its ends")

        for v in src.vertices:
            for h in tgt.star(self._map[v]):
                total = sum(self._deg[g] for g in src.star(v) if self._map[g] == h)
                if total != self._deg[v]:
                    violations.append(f"not harmonic at ({v!r}, {h!r}): degree {self._deg[v]} but {total} over {h!r}")

        if len(components(tgt)) == 1:
            sums = {p: sum(self._deg[q] for q in self._fibers[p]) for p in tgt.points}
            if len(set(sums.values())) > 1:
                violations.append(f"fiber sums are not constant: {sorted(set(sums.values()))}")

        if isinstance(src, MetricGraph) and isinstance(tgt, MetricGraph):
            for name in src.edges:
                image = self._map[(name, 0)][0]
                if src.length(name) * self._deg[(name, 0)] != tgt.length(image):
                    violations.append(f"edge {name!r}: length times degree differs from the length of {image!r}")
        return ValidationReport(not violations, violations)

    def degree(self) -> int:
        """Global degree of a morphism onto a connected target.

        Raises:
            DisconnectedTarget: If the target is not connected
        """
        if len(components(self.target)) != 1:
            raise DisconnectedTarget("degree is only defined over a connected target")
        first = self.target.vertices[0]
        return sum(self._deg[p] for p in self._fibers[first])

    def __repr__(self) -> str:
        return f"HarmonicMorphism({self.source!r} -> {self.target!r})"


def identity_morphism(g: Graph) -> HarmonicMorphism:
    return HarmonicMorphism(g, g, {p: p for p in g.points}, {p: 1 for p in g.points})


def composite(outer: HarmonicMorphism, inner: HarmonicMorphism) -> HarmonicMorphism:
    """outer after inner, with multiplied local degrees."""
    return HarmonicMorphism(inner.source, outer.target,
                            {p: outer(inner(p)) for p in inner.source.points},
                            {p: inner.deg(p) * outer.deg(inner(p)) for p in inner.source.points})


def metrize_source(m: HarmonicMorphism) -> MetricGraph:
    """The unique edge lengths on the source making m metric: l(e) = l(f(e)) / deg(e)."""
    if not isinstance(m.target, MetricGraph):
        raise InvalidTower("metrize_source needs a metric target")
    lengths = {name: m.target.length(m((name, 0))[0]) / m.deg((name, 0)) for name in m.source.edges}
    return MetricGraph.from_graph(m.source, lengths)


def with_source(m: HarmonicMorphism, source: Graph) -> HarmonicMorphism:
    return HarmonicMorphism(source, m.target, m.point_map, m.degrees)


class DoubleCover:
    """A degree-2 morphism together with its covering involution."""

    def __init__(self, morphism: HarmonicMorphism, iota: Mapping[Point, Point]):
        self.morphism = morphism
        self.iota = dict(iota)

    @classmethod
    def from_morphism(cls, m: HarmonicMorphism) -> 'DoubleCover':
        """Swap the two points of each free fiber and fix dilated points."""
        iota = {}
        for point in m.target.points:
            fiber = m.fiber(point)
            if len(fiber) == 2:
                iota[fiber[0]], iota[fiber[1]] = fiber[1], fiber[0]
            elif len(fiber) == 1:
                iota[fiber[0]] = fiber[0]
            else:
                raise InvalidTower(f"fiber over {point!r} has {len(fiber)} points, not a double cover")
        return cls(m, iota)

    @property
    def source(self) -> Graph:
        return self.morphism.source

    @property
    def target(self) -> Graph:
        return self.morphism.target

    def is_free(self) -> bool:
        return all(self.iota[p] != p for p in self.source.points)

    def validate(self) -> ValidationReport:
        report = self.morphism.validate()
        violations = list(report.violations)
        src = self.source
        for p in src.points:
            q = self.iota.get(p)
            if q is None or self.iota.get(q) != p:
                violations.append(f"iota is not an involution at {p!r}")
                continue
            if self.morphism(q) != self.morphism(p):
                violations.append(f"iota does not commute with the cover at {p!r}")
            if not is_vertex(p) and (self.iota[mate(p)] != mate(q) or self.iota[src.root(p)] != src.root(q)):
                violations.append(f"iota is not a graph map at {p!r}")
        for y in self.target.points:
            fiber = self.morphism.fiber(y)
            orbit = {fiber[0], self.iota.get(fiber[0])} if fiber else set()
            if set(fiber) != orbit:
                violations.append(f"fiber over {y!r} is not an iota orbit")
            elif len(fiber) == 1 and self.morphism.deg(fiber[0]) != 2:
                violations.append(f"dilated point {fiber[0]!r} must have degree 2")
        return ValidationReport(not violations, violations)


class Tower:
    """A double cover Gamma~ -> Gamma over a degree-n map Gamma -> K.

    Attributes:
        top: The double cover
        bottom: The map to the base
        divisors: For towers produced by the n-gonal construction, the
            divisor behind every top point; None otherwise
    """

    def __init__(self, top: DoubleCover, bottom: HarmonicMorphism, divisors: Mapping[Point, object] = None):
        self.top = top
        self.bottom = bottom
        self.divisors = dict(divisors) if divisors is not None else None
        self._composite = None

    @property
    def cover_graph(self) -> Graph:
        return self.top.source

    @property
    def mid(self) -> Graph:
        return self.bottom.source

    @property
    def base(self) -> Graph:
        return self.bottom.target

    @property
    def iota(self) -> Dict[Point, Point]:
        return self.top.iota

    @property
    def composite(self) -> HarmonicMorphism:
        if self._composite is None:
            self._composite = composite(self.bottom, self.top.morphism)
        return self._composite

    def degree(self) -> int:
        return self.bottom.degree()

    def validate(self) -> None:
        """Raise InvalidTower listing every violation found."""
        problems = []
        if self.top.target != self.bottom.source:
            problems.append("the double cover does not land on the source of the bottom map")
        if len(components(self.base)) != 1:
            problems.append("the base graph is not connected")
        problems += [f"top: {v}" for v in self.top.validate().violations]
        problems += [f"bottom: {v}" for v in self.bottom.validate().violations]
        if not problems:
            for y in self.mid.points:
                if sum(self.top.morphism.deg(p) for p in self.top.morphism.fiber(y)) != 2:
                    problems.append(f"the top map does not have degree 2 over {y!r}")
                    break
        if problems:
            raise InvalidTower("; ".join(problems[:10]))

    def __repr__(self) -> str:
        return f"Tower({self.cover_graph!r} -> {self.mid!r} -> {self.base!r})"


class FiberType(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    OTHER = "Other"


class FiberClass(NamedTuple):
    type: FiberType
    profile: Tuple[int, ...]


_NAMED_PROFILES = {(3, 1): FiberType.I, (2, 1, 1): FiberType.II, (1, 1, 1, 1): FiberType.III}


def classify_fiber(t: Tower, x: Point) -> FiberClass:
    """Dilation profile of the bottom map over x and its type name."""
    profile = tuple(sorted((t.bottom.deg(y) for y in t.bottom.fiber(x)), reverse=True))
    if sum(profile) != 4:
        return FiberClass(FiberType.OTHER, profile)
    return FiberClass(_NAMED_PROFILES.get(profile, FiberType.OTHER), profile)


class GenericReport(NamedTuple):
    generic: bool
    point: Optional[Point]
    reason: str


def is_generic(t: Tower) -> GenericReport:
    """Every point of K is of type I, II or III and the double cover is free."""
    for x in t.base.points:
        fiber_class = classify_fiber(t, x)
        if fiber_class.type is FiberType.OTHER:
            return GenericReport(False, x, f"dilation profile {fiber_class.profile} over {x!r}")
    for p in t.cover_graph.points:
        if t.iota[p] == p:
            return GenericReport(False, t.top.morphism(p), f"double cover is dilated at {p!r}")
    return GenericReport(True, None, "")


def signed_cover(base: Graph, dashed: Iterable[str] = ()) -> DoubleCover:
    """Two sheets of base; dashed edges cross from one sheet to the other."""
    dashed = set(dashed)
    unknown = dashed - set(base.edges)
    if unknown:
        raise InvalidTower(f"dashed edges not in the graph: {sorted(unknown)}")

    vertices = [f"{v}{sign}" for v in base.vertices for sign in "+-"]
    ends = {}
    for name in base.edges:
        start, end = base.ends(name)
        crossed = name in dashed
        ends[f"{name}+"] = (f"{start}+", f"{end}-" if crossed else f"{end}+")
        ends[f"{name}-"] = (f"{start}-", f"{end}+" if crossed else f"{end}-")
    if isinstance(base, MetricGraph):
        top = MetricGraph(vertices, ends, {f"{e}{s}": base.length(e) for e in base.edges for s in "+-"})
    else:
        top = Graph(vertices, ends)

    point_map, iota = {}, {}
    for v in base.vertices:
        point_map[f"{v}+"] = point_map[f"{v}-"] = v
        iota[f"{v}+"], iota[f"{v}-"] = f"{v}-", f"{v}+"
    for name in base.edges:
        for end in (0, 1):
            point_map[(f"{name}+", end)] = point_map[(f"{name}-", end)] = (name, end)
            iota[(f"{name}+", end)], iota[(f"{name}-", end)] = (f"{name}-", end), (f"{name}+", end)
    morphism = HarmonicMorphism(top, base, point_map, {p: 1 for p in top.points})
    return DoubleCover(morphism, iota)


def dashed_edges(cover: DoubleCover) -> List[str]:
    """Edges of the target whose lifts leave the sheet of their first preimage."""
    result = []
    for name in cover.target.edges:
        start, end = cover.target.ends(name)
        lift = cover.morphism.fiber((name, 0))[0]
        first_start = cover.morphism.fiber(start)[0]
        first_end = cover.morphism.fiber(end)[0]
        src = cover.source
        if (src.root(lift) == first_start) != (src.root(mate(lift)) == first_end):
            result.append(name)
    return result


def contract_morphism(m: HarmonicMorphism, target_edges: Iterable[str]) -> HarmonicMorphism:
    """Contract target edges together with all their preimages.

    The degree of a merged source vertex is the sum of the degrees of its
    members lying over the representative of the merged target vertex.
    """
    target_edges = set(target_edges)
    source_edges = {h[0] for e in target_edges for h in m.fiber((e, 0))}
    target_rep = contraction_map(m.target, target_edges)
    source_rep = contraction_map(m.source, source_edges)
    source = contract_edges(m.source, source_edges)
    target = contract_edges(m.target, target_edges)

    point_map, deg = {}, {}
    for h in source.half_edges:
        point_map[h] = m(h)
        deg[h] = m.deg(h)
    for v in source.vertices:
        image = target_rep[m(v)]
        point_map[v] = image
        deg[v] = sum(m.deg(u) for u in m.source.vertices if source_rep[u] == v and m(u) == image)
    return HarmonicMorphism(source, target, point_map, deg)


def covers_isomorphic(m1: HarmonicMorphism, iota1: Mapping[Point, Point],
                      m2: HarmonicMorphism, iota2: Mapping[Point, Point]) -> Optional[Dict[Point, Point]]:
    """An iota-equivariant isomorphism of sources over the identity of a shared base."""
    if m1.target != m2.target:
        return None
    labels1 = {p: (m1(p), m1.deg(p)) for p in m1.source.points}
    labels2 = {p: (m2(p), m2.deg(p)) for p in m2.source.points}
    return graph_isomorphic(m1.source, m2.source, labels1, labels2, iota1, iota2)


def towers_isomorphic(t1: Tower, t2: Tower) -> Optional[Dict[Point, Point]]:
    """Tower isomorphism: the top graphs match over K, commuting with the involutions."""
    return covers_isomorphic(t1.composite, t1.iota, t2.composite, t2.iota)


def quotient_tower(top: Graph, iota: Mapping[Point, Point], to_base: HarmonicMorphism,
                   divisors: Mapping[Point, object] = None) -> Tower:
    """Build top -> top/iota -> K from an involution commuting with a map to K.

    Quotient points are named after the first member of their orbit.
    """
    rep: Dict[Point, Point] = {}
    for v in top.vertices:
        rep.setdefault(v, v)
        rep.setdefault(iota[v], v)
    edge_rep: Dict[str, str] = {}
    for name in top.edges:
        if name not in edge_rep:
            edge_rep[name] = name
            edge_rep.setdefault(iota[(name, 0)][0], name)
    for h in top.half_edges:
        name = edge_rep[h[0]]
        if name == h[0]:
            rep[h] = h
        else:
            partner = iota[h]
            if partner[0] != name:
                raise InvalidTower(f"involution does not pair {h!r} with an edge")
            rep[h] = partner

    vertices = [v for v in top.vertices if rep[v] == v]
    ends = {name: (rep[top.root((name, 0))], rep[top.root((name, 1))])
            for name in top.edges if edge_rep[name] == name}
    quotient = Graph(vertices, ends)

    cover_map = {p: rep[p] for p in top.points}
    cover_deg = {p: 1 if iota[p] != p else 2 for p in top.points}
    bottom_map = {q: to_base(q) for q in quotient.points}
    bottom_deg = {q: to_base.deg(q) // cover_deg[q] for q in quotient.points}

    if isinstance(to_base.target, MetricGraph):
        bottom = HarmonicMorphism(quotient, to_base.target, bottom_map, bottom_deg)
        quotient = metrize_source(bottom)
        bottom = with_source(bottom, quotient)
        cover = HarmonicMorphism(top, quotient, cover_map, cover_deg)
        top_metric = metrize_source(cover)
        cover = with_source(cover, top_metric)
    else:
        bottom = HarmonicMorphism(quotient, to_base.target, bottom_map, bottom_deg)
        cover = HarmonicMorphism(top, quotient, cover_map, cover_deg)
    return Tower(DoubleCover(cover, {p: iota[p] for p in top.points}), bottom, divisors)


def _random_profile(rng: random.Random, types: Sequence[str]) -> Tuple[int, ...]:
    return {"I": (3, 1), "II": (2, 1, 1), "III": (1, 1, 1, 1)}[rng.choice(list(types))]


def random_generic_tower(rng: random.Random, max_edges: int = 6, types: Sequence[str] = ("I", "II", "III"),
                         dashed_probability: float = 0.5, metric: bool = True) -> Tower:
    """A random tower over a random tree whose fibers are all of type I, II or III.

    Edge fibers are of type III, or of type II or I when parallel edges
    over the same base edge are merged into one edge of degree 2 or 3.
    Between two vertices of type I the slots stay aligned half of the time
    so that the sheets of degree 3 can meet.
    """
    size = rng.randint(1, max_edges)
    base_vertices = [f"y{i}" for i in range(size + 1)]
    base_ends = {}
    for i in range(1, size + 1):
        base_ends[f"a{i}"] = (f"y{rng.randrange(i)}", f"y{i}")
    if metric:
        base = MetricGraph(base_vertices, base_ends, {e: LinearForm.var(f"l{e[1:]}") for e in base_ends})
    else:
        base = Graph(base_vertices, base_ends)

    profiles = {x: _random_profile(rng, types) for x in base_vertices}
    mid_vertices, vertex_map, vertex_deg = [], {}, {}
    for x in base_vertices:
        for j, d in enumerate(profiles[x]):
            name = f"{x}.{j}"
            mid_vertices.append(name)
            vertex_map[name] = x
            vertex_deg[name] = d

    mid_ends, edge_map = {}, {}
    for e, (x, y) in base_ends.items():
        slots_x = [f"{x}.{j}" for j, d in enumerate(profiles[x]) for _ in range(d)]
        slots_y = [f"{y}.{j}" for j, d in enumerate(profiles[y]) for _ in range(d)]
        if not (profiles[x][0] == profiles[y][0] == 3 and rng.random() < 0.5):
            rng.shuffle(slots_y)
        pairs = list(zip(slots_x, slots_y))
        merged, merged_degree = None, 1
        repeated = [p for p in dict.fromkeys(pairs) if pairs.count(p) >= 2]
        if repeated and rng.random() < 0.5:
            merged = repeated[0]
            merged_degree = rng.randint(2, pairs.count(merged))
        count = 0
        for pair in dict.fromkeys(pairs):
            copies = pairs.count(pair)
            degrees = [1] * copies
            if pair == merged:
                degrees = [merged_degree] + [1] * (copies - merged_degree)
            for degree in degrees:
                name = f"{e}.{count}"
                count += 1
                mid_ends[name] = pair
                edge_map[name] = (e, False, degree)

    mid = Graph(mid_vertices, mid_ends)
    bottom = HarmonicMorphism.from_edges(mid, base, vertex_map, edge_map, vertex_deg)
    if metric:
        mid = metrize_source(bottom)
        bottom = with_source(bottom, mid)
    dashed = [name for name in mid.edges if rng.random() < dashed_probability]
    tower = Tower(signed_cover(mid, dashed), bottom)
    tower.validate()
    return tower
