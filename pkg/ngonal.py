#!/usr/bin/env python3
"""
The n-gonal Construction

Builds the graph of fiber divisors of a tower and everything derived from it.

Supports:
- Pullback and pushforward of point vectors
- The n-gonal construction with binomial local degrees and its involution
- The orientation double cover, orientability and splitting into two towers
- The signed permutation group WD4, sheet labelings and connectivity prediction
- Canonical triality maps and the triality check
- Contraction of towers and the dimension and connectivity checks
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import networkx as nx
from sympy.combinatorics import Permutation, PermutationGroup

from errors import (InvalidTower, NotGeneric, NotOrientable, NoWitnessLabeling,
                    TrialityFailure, UnsupportedDilatedTop)
from harmonic import (DoubleCover, HarmonicMorphism, Tower, contract_morphism, is_generic, metrize_source,
                      quotient_tower, signed_cover, towers_isomorphic, with_source)
from symgraph import Graph, MetricGraph, Point, components, contraction_map, is_vertex, mate

logger = logging.getLogger(__name__)

PointVector = Dict[Point, int]


def pullback(m: HarmonicMorphism, x: Point) -> PointVector:
    """f^*(x) = sum of d_f(y) y over the fiber of x."""
    return m.pullback(x)


def pushforward(m: HarmonicMorphism, vector: Mapping[Point, int]) -> PointVector:
    """Linear extension of the point map (no multiplicities)."""
    result: PointVector = {}
    for point, coeff in vector.items():
        image = m(point)
        result[image] = result.get(image, 0) + coeff
    return {p: c for p, c in result.items() if c != 0}


@dataclass(frozen=True)
class DonagiPoint:
    """A divisor D >= 0 on the fiber of the double cover with pi_*(D) = f^*(base_point).

    Attributes:
        base_point: Point of K
        coeffs: (point of the top graph, coefficient) over the whole fiber, in fiber order
        local_degree: Product of binomials C(d_f(y), a_y+) and 2^d_f(y) at dilated y
        signs: One letter per unit of degree: p/m for the two preimages, o when dilated
    """
    base_point: Point
    coeffs: Tuple[Tuple[Point, int], ...]
    local_degree: int
    signs: str

    @property
    def key(self) -> Tuple[int, ...]:
        return tuple(c for _, c in self.coeffs)

    def as_vector(self) -> PointVector:
        return {p: c for p, c in self.coeffs if c}


def _fiber_options(t: Tower, x: Point) -> List[List[Tuple[Dict[Point, int], str, int]]]:
    """Per Gamma point over x: the admissible (coefficients, signs, factor) choices."""
    options = []
    for y in t.bottom.fiber(x):
        d = t.bottom.deg(y)
        lifts = t.top.morphism.fiber(y)
        choices = []
        if len(lifts) == 2:
            plus, minus = lifts
            for a in range(d, -1, -1):
                choices.append(({plus: a, minus: d - a}, "p" * a + "m" * (d - a), math.comb(d, a)))
        else:
            choices.append(({lifts[0]: d}, "o" * d, 2 ** d))
        options.append(choices)
    return options


def _enumerate_fiber(t: Tower, x: Point) -> List[DonagiPoint]:
    fiber_points = [p for y in t.bottom.fiber(x) for p in t.top.morphism.fiber(y)]
    points = []
    for combo in itertools.product(*_fiber_options(t, x)):
        coeffs: Dict[Point, int] = {}
        signs, degree = "", 1
        for part, part_signs, factor in combo:
            coeffs.update(part)
            signs += part_signs
            degree *= factor
        points.append(DonagiPoint(x, tuple((p, coeffs[p]) for p in fiber_points), degree, signs))
    return points


@dataclass
class DonagiOutput:
    """The graph of fiber divisors with its map to K and its involution.

    Attributes:
        graph: The divisor graph (metric when K is)
        map_to_K: Harmonic morphism of degree 2^n
        iota: Coordinatewise involution
        points: Divisor behind every vertex and half-edge
        tower: The tower it was built from
    """
    graph: Graph
    map_to_K: HarmonicMorphism
    iota: Dict[Point, Point]
    points: Dict[Point, DonagiPoint]
    tower: Tower
    index: Dict[Tuple[Point, Tuple[int, ...]], Point] = field(default_factory=dict)

    def lookup(self, base_point: Point, key: Sequence[int]) -> Point:
        return self.index[(base_point, tuple(key))]

    def as_tower(self) -> Tower:
        return quotient_tower(self.graph, self.iota, self.map_to_K, self.points)

    def component_towers(self) -> List[Tower]:
        """One tower per iota-orbit of connected components of the divisor graph."""
        towers, seen = [], set()
        for part in components(self.graph):
            if part.vertices[0] in seen:
                continue
            orbit = set(part.vertices) | {self.iota[v] for v in part.vertices}
            seen |= orbit
            sub = self.graph.restrict(orbit)
            keep = set(sub.points)
            to_base = HarmonicMorphism(sub, self.map_to_K.target, {p: self.map_to_K(p) for p in keep},
                                       {p: self.map_to_K.deg(p) for p in keep})
            towers.append(quotient_tower(sub, self.iota, to_base, {p: self.points[p] for p in keep}))
        return towers

    def contract(self, edges: Iterable[str]) -> Tuple[HarmonicMorphism, Dict[Point, Point]]:
        """Contract base edges and their preimages; returns the map to K and the involution."""
        return _contract_cover(self.map_to_K, self.iota, edges)


def _contract_cover(m: HarmonicMorphism, iota: Mapping[Point, Point],
                    edges: Iterable[str]) -> Tuple[HarmonicMorphism, Dict[Point, Point]]:
    edges = list(edges)
    contracted = contract_morphism(m, edges)
    source_edges = {h[0] for e in edges for h in m.fiber((e, 0))}
    rep = contraction_map(m.source, source_edges)
    new_iota = {}
    for v in m.source.vertices:
        new_iota[rep[v]] = rep[iota[v]]
    for h in contracted.source.half_edges:
        new_iota[h] = iota[h]
    return contracted, new_iota


def donagi_construct(t: Tower, n: int = None, allow_dilated: bool = False) -> DonagiOutput:
    """The n-gonal construction of a tower.

    Args:
        t: Tower whose bottom map has degree n
        n: Expected degree of the bottom map; read from the tower if omitted
        allow_dilated: Accept a dilated double cover (factor 2^d at dilated points)

    Raises:
        InvalidTower: If the tower or the resulting map fails validation
        UnsupportedDilatedTop: If the double cover is dilated and allow_dilated is False
    """
    t.validate()
    degree = t.degree()
    if n is not None and n != degree:
        raise InvalidTower(f"bottom map has degree {degree}, not {n}")
    if not allow_dilated and not t.top.is_free():
        raise UnsupportedDilatedTop("the n-gonal construction here needs a free double cover")

    base = t.base
    points: Dict[Point, DonagiPoint] = {}
    index: Dict[Tuple[Point, Tuple[int, ...]], Point] = {}
    vertices = []
    for x in base.vertices:
        for point in _enumerate_fiber(t, x):
            name = f"{x}.{point.signs}"
            vertices.append(name)
            points[name] = point
            index[(x, point.key)] = name
    logger.debug("n-gonal construction: %d vertices over %d base vertices", len(vertices), len(base.vertices))

    top_graph = t.cover_graph
    ends = {}
    for e in base.edges:
        start, end = base.ends(e)
        far_fiber = [p for y in t.bottom.fiber((e, 1)) for p in t.top.morphism.fiber(y)]
        for point in _enumerate_fiber(t, (e, 0)):
            name = f"{e}.{point.signs}"
            far = {mate(h): c for h, c in point.coeffs}
            far_point = DonagiPoint((e, 1), tuple((h, far[h]) for h in far_fiber), point.local_degree,
                                    point.signs)
            points[(name, 0)] = point
            points[(name, 1)] = far_point
            index[((e, 0), point.key)] = (name, 0)
            index[((e, 1), far_point.key)] = (name, 1)
            roots = []
            for half, vertex in ((point, start), (far_point, end)):
                vertex_fiber = [p for y in t.bottom.fiber(vertex) for p in t.top.morphism.fiber(y)]
                total = {p: 0 for p in vertex_fiber}
                for h, c in half.coeffs:
                    total[top_graph.root(h)] += c
                key = (vertex, tuple(total[p] for p in vertex_fiber))
                if key not in index:
                    raise InvalidTower(f"root of {name} is not a divisor in the fiber over {vertex!r}")
                roots.append(index[key])
            ends[name] = tuple(roots)

    graph = Graph(vertices, ends)
    point_map = {p: points[p].base_point for p in graph.points}
    deg = {p: points[p].local_degree for p in graph.points}
    map_to_K = HarmonicMorphism(graph, base, point_map, deg)
    if isinstance(base, MetricGraph):
        graph = metrize_source(map_to_K)
        map_to_K = with_source(map_to_K, graph)

    iota = {}
    for p in graph.points:
        divisor = points[p]
        image = {t.iota[q]: c for q, c in divisor.coeffs}
        iota[p] = index[(divisor.base_point, tuple(image[q] for q, _ in divisor.coeffs))]

    report = map_to_K.validate()
    if not report.ok:
        raise InvalidTower("n-gonal map is not harmonic: " + "; ".join(report.violations[:5]))
    for p in graph.points:
        if map_to_K(iota[p]) != map_to_K(p) or iota[iota[p]] != p:
            raise InvalidTower(f"involution does not commute with the map to K at {p!r}")
    logger.info("n-gonal construction: %d vertices, %d edges, degree %d",
                len(graph.vertices), len(graph.edges), map_to_K.degree())
    return DonagiOutput(graph, map_to_K, iota, points, t, index)


def output_involution(o: DonagiOutput) -> Dict[Point, Point]:
    return dict(o.iota)


def _require_free(t: Tower) -> None:
    if not t.top.is_free():
        raise UnsupportedDilatedTop("orientation is only defined for free double covers")


def divisor_parity(t: Tower, divisor: DonagiPoint) -> int:
    """Parity of the total coefficient on first preimages."""
    _require_free(t)
    first = {t.top.morphism.fiber(y)[0] for y in t.bottom.fiber(divisor.base_point)}
    return sum(c for p, c in divisor.coeffs if p in first) % 2


def _shifts(t: Tower, h: Point) -> Tuple[int, int]:
    """Parity changes from a half-edge fiber to its root fiber and to its mate fiber."""
    cover, src = t.top.morphism, t.cover_graph
    root_shift = mate_shift = 0
    for g in t.bottom.fiber(h):
        lift = cover.fiber(g)[0]
        if src.root(lift) != cover.fiber(t.mid.root(g))[0]:
            root_shift += t.bottom.deg(g)
        if mate(lift) != cover.fiber(mate(g))[0]:
            mate_shift += t.bottom.deg(g)
    return root_shift % 2, mate_shift % 2


def orientation_dashed_edges(t: Tower) -> List[str]:
    _require_free(t)
    dashed = []
    for e in t.base.edges:
        root0, mate0 = _shifts(t, (e, 0))
        root1, _ = _shifts(t, (e, 1))
        if (mate0 + root1 - root0) % 2:
            dashed.append(e)
    return dashed


def orientation_cover(t: Tower) -> DoubleCover:
    """The double cover of K by parity classes; the '+' sheet is the even class.

    Raises:
        UnsupportedDilatedTop: If the double cover of the tower is dilated
    """
    return signed_cover(t.base, orientation_dashed_edges(t))


def is_orientable(t: Tower) -> bool:
    return len(components(orientation_cover(t).source)) == 2


def _class_of(t: Tower, divisor: DonagiPoint, sheet_component: Dict[str, int]) -> int:
    x = divisor.base_point
    sign = "+" if divisor_parity(t, divisor) == 0 else "-"
    return sheet_component[f"{x}{sign}"]


def split(t: Tower, output: DonagiOutput = None) -> Tuple[Tower, Tower]:
    """Split the tetragonal construction of a generic orientable tower into two towers.

    Outputs are ordered by their serialized `twr 1` text.

    Raises:
        NotGeneric: If the bottom degree is not 4 or a fiber is not of type I/II/III
        NotOrientable: If the orientation double cover is connected
    """
    if t.degree() != 4:
        raise NotGeneric(f"split needs a tetragonal tower, got degree {t.degree()}")
    report = is_generic(t)
    if not report.generic:
        raise NotGeneric(report.reason)
    cover = orientation_cover(t)
    parts = components(cover.source)
    if len(parts) != 2:
        raise NotOrientable("the orientation double cover is connected")
    sheet_component = {v: i for i, part in enumerate(parts) for v in part.vertices}

    output = output or donagi_construct(t, 4)
    classes: Tuple[List[str], List[str]] = ([], [])
    for v in output.graph.vertices:
        classes[_class_of(t, output.points[v], sheet_component)].append(v)

    towers = []
    for members in classes:
        sub = output.graph.restrict(members)
        keep = set(sub.points)
        if any(output.iota[p] not in keep for p in keep):
            raise InvalidTower("involution does not preserve the parity classes")
        to_base = HarmonicMorphism(sub, t.base, {p: output.map_to_K(p) for p in keep},
                                   {p: output.map_to_K.deg(p) for p in keep})
        towers.append(quotient_tower(sub, output.iota, to_base, {p: output.points[p] for p in keep}))
    if sum(len(tower.cover_graph.edges) for tower in towers) != len(output.graph.edges):
        raise InvalidTower("an edge of the divisor graph joins the two parity classes")
    # towerio imports this module
    from towerio import serialize_tower
    towers.sort(key=serialize_tower)
    logger.info("split into towers with %d and %d top vertices",
                len(towers[0].cover_graph.vertices), len(towers[1].cover_graph.vertices))
    return towers[0], towers[1]


# Signed points 1..4, -1..-4 are encoded as 0..7.
SIGNED_POINTS = (1, 2, 3, 4, -1, -2, -3, -4)


def signed_index(s: int) -> int:
    return s - 1 if s > 0 else -s + 3


def signed_permutation(*pairs: Tuple[int, int]) -> Permutation:
    """Product of disjoint transpositions given on signed points."""
    return Permutation([[signed_index(a), signed_index(b)] for a, b in pairs], size=8)


WD4_GENERATORS = (
    ((1, 2), (-1, -2)),
    ((1, 3), (-1, -3)),
    ((1, 4), (-1, -4)),
    ((1, -1), (2, -2)),
)


def wd4() -> PermutationGroup:
    """The even signed permutations of {+-1, ..., +-4}; order 192."""
    return PermutationGroup([signed_permutation(*pairs) for pairs in WD4_GENERATORS])


def bitranspositions() -> List[Permutation]:
    result = []
    for i, j in itertools.combinations(range(1, 5), 2):
        result.append(signed_permutation((i, j), (-i, -j)))
        result.append(signed_permutation((i, -j), (-i, j)))
        result.append(signed_permutation((i, -i), (j, -j)))
    return result


def _closure(generators: Sequence[Tuple[int, ...]]) -> FrozenSet[Tuple[int, ...]]:
    identity = tuple(range(8))
    elements = {identity}
    frontier = [identity]
    while frontier:
        g = frontier.pop()
        for s in generators:
            product = tuple(s[g[i]] for i in range(8))
            if product not in elements:
                elements.add(product)
                frontier.append(product)
    return frozenset(elements)


def bitransposition_subgroups() -> Dict[FrozenSet[Tuple[int, ...]], Tuple[Tuple[int, ...], ...]]:
    """All subgroups generated by sets of bitranspositions, with generators."""
    bits = [tuple(p.array_form) for p in bitranspositions()]
    trivial = _closure([])
    found = {trivial: ()}
    queue = [trivial]
    while queue:
        group = queue.pop()
        gens = found[group]
        for b in bits:
            if b in group:
                continue
            bigger = _closure(gens + (b,))
            if bigger not in found:
                found[bigger] = gens + (b,)
                queue.append(bigger)
    logger.debug("%d subgroups generated by bitranspositions", len(found))
    return found


def transitive_bitransposition_subgroups() -> List[FrozenSet[Tuple[int, ...]]]:
    return [group for group in bitransposition_subgroups()
            if len({g[0] for g in group}) == 8]


SheetLabeling = Dict[Point, FrozenSet[int]]


def _fiber_points(t: Tower, x: Point) -> List[Point]:
    return [p for y in t.bottom.fiber(x) for p in t.top.morphism.fiber(y)]


def _ordered_partitions(labels: FrozenSet[int], sizes: Sequence[int]) -> Iterable[Tuple[FrozenSet[int], ...]]:
    if not sizes:
        if not labels:
            yield ()
        return
    ordered = sorted(labels, key=signed_index)
    for chosen in itertools.combinations(ordered, sizes[0]):
        rest = labels - frozenset(chosen)
        for tail in _ordered_partitions(rest, sizes[1:]):
            yield (frozenset(chosen),) + tail


def octuple_quotient_witness(t: Tower) -> Optional[SheetLabeling]:
    """Label every top point by the sheets of the trivial octuple cover lying over it.

    The first base vertex gets a fixed labeling; labels then propagate
    along base edges, branching where a point has several half-edges over
    the same base half-edge. Returns None when no labeling exists.
    """
    if t.degree() != 4:
        raise NotGeneric("sheet labelings are defined for tetragonal towers")
    cover, src, composite = t.top.morphism, t.cover_graph, t.composite
    base = t.base

    start = base.vertices[0]
    labeling: SheetLabeling = {}
    next_label = 1
    for y in t.bottom.fiber(start):
        d = t.bottom.deg(y)
        lifts = cover.fiber(y)
        sheets = frozenset(range(next_label, next_label + d))
        next_label += d
        if len(lifts) == 2:
            labeling[lifts[0]] = sheets
            labeling[lifts[1]] = frozenset(-s for s in sheets)
        else:
            labeling[lifts[0]] = sheets | frozenset(-s for s in sheets)

    order = []
    reached = {start}
    remaining = list(base.edges)
    while remaining:
        for e in remaining:
            start_v, end_v = base.ends(e)
            if start_v in reached or end_v in reached:
                order.append((e, 0) if start_v in reached else (e, 1))
                reached.update((start_v, end_v))
                remaining.remove(e)
                break
        else:
            raise InvalidTower("base graph is not connected")

    def consistent(labels: SheetLabeling, points: Iterable[Point]) -> bool:
        for p in points:
            if p in labels and t.iota[p] in labels:
                if labels[t.iota[p]] != frozenset(-s for s in labels[p]):
                    return False
            if p in labels and t.iota[p] != p and labels[p] & frozenset(-s for s in labels[p]):
                return False
        return True

    branches = [0]

    def extend(step: int, labels: SheetLabeling) -> Optional[SheetLabeling]:
        branches[0] += 1
        if step == len(order):
            return labels
        h = order[step]
        x, x_far = base.root(h), base.root(mate(h))
        per_point = []
        for p in _fiber_points(t, x):
            halves = [g for g in src.star(p) if composite(g) == h]
            sizes = [composite.deg(g) for g in halves]
            per_point.append([(halves, parts) for parts in _ordered_partitions(labels[p], sizes)])
        for combo in itertools.product(*per_point):
            trial = dict(labels)
            for halves, parts in combo:
                for g, part in zip(halves, parts):
                    trial[g] = part
                    trial[mate(g)] = part
            halves_all = [g for halves, _ in combo for g in halves]
            if not consistent(trial, halves_all):
                continue
            far_labels: Dict[Point, FrozenSet[int]] = {}
            for g in halves_all:
                far = src.root(mate(g))
                far_labels[far] = far_labels.get(far, frozenset()) | trial[g]
            clash = False
            for p, sheets in far_labels.items():
                if p in trial and trial[p] != sheets:
                    clash = True
                    break
                trial[p] = sheets
            if clash or not consistent(trial, _fiber_points(t, x_far)):
                continue
            found = extend(step + 1, trial)
            if found is not None:
                return found
        return None

    result = extend(0, labeling)
    logger.debug("sheet labeling search: %d branches, %s", branches[0], "found" if result else "none")
    if result is None:
        logger.warning("tower is not a fiberwise quotient of the trivial octuple cover")
    return result


def fiber_stabilizer(t: Tower, labeling: SheetLabeling, x: Point) -> List[Permutation]:
    """Bitranspositions gluing the sheets that meet at a point over x."""
    generators = []
    seen = set()
    for p in _fiber_points(t, x):
        sheets = sorted(labeling[p], key=signed_index)
        first = sheets[0]
        for other in sheets[1:]:
            if other == -first:
                continue
            perm = signed_permutation((first, other), (-first, -other))
            key = tuple(perm.array_form)
            if key not in seen:
                seen.add(key)
                generators.append(perm)
    return generators


def _sign_choices() -> List[FrozenSet[int]]:
    return [frozenset(s * i for s, i in zip(signs, range(1, 5)))
            for signs in itertools.product((1, -1), repeat=4)]


class ConnectivityPrediction(NamedTuple):
    group_order: int
    predicted_cover_components: int
    actual_cover_components: int
    predicted_donagi_components: int
    actual_donagi_components: int

    @property
    def matches(self) -> bool:
        return (self.predicted_cover_components == self.actual_cover_components
                and self.predicted_donagi_components == self.actual_donagi_components)


def predict_connectivity(t: Tower) -> ConnectivityPrediction:
    """Predict components of the top graph and of the divisor graph from sheet gluings.

    Raises:
        NoWitnessLabeling: If the tower has no sheet labeling
    """
    _require_free(t)
    labeling = octuple_quotient_witness(t)
    if labeling is None:
        raise NoWitnessLabeling("tower is not a fiberwise quotient of the trivial octuple cover")
    generators = []
    for x in t.base.points:
        generators.extend(fiber_stabilizer(t, labeling, x))

    sheets = nx.Graph()
    sheets.add_nodes_from(range(8))
    choices = nx.Graph()
    choices.add_nodes_from(_sign_choices())
    for perm in generators:
        for i in range(8):
            sheets.add_edge(i, perm(i))
        for choice in _sign_choices():
            image = frozenset(SIGNED_POINTS[perm(signed_index(s))] for s in choice)
            choices.add_edge(choice, image)

    order = PermutationGroup(generators).order() if generators else 1
    output = donagi_construct(t, 4)
    return ConnectivityPrediction(order,
                                  nx.number_connected_components(sheets),
                                  len(components(t.cover_graph)),
                                  nx.number_connected_components(choices),
                                  len(components(output.graph)))


def _expand(outer: Tower, divisor) -> Dict[Point, int]:
    """The divisor on the original top graph behind a divisor of divisors."""
    total: Dict[Point, int] = {}
    for z, c in divisor.coeffs:
        if not c:
            continue
        for p, a in outer.divisors[z].coeffs:
            total[p] = total.get(p, 0) + c * a
    return total


def _rule_to_cover(t: Tower, x: Point, total: Mapping[Point, int]) -> Optional[Point]:
    diffs = {p: total.get(p, 0) - total.get(t.iota[p], 0) for p in _fiber_points(t, x)}
    positive = [p for p, d in diffs.items() if d > 0]
    if len(positive) == 1 and diffs[positive[0]] == 4 and all(d in (0, 4, -4) for d in diffs.values()):
        return positive[0]
    return None


def _rule_to_other(t: Tower, x: Point, total: Mapping[Point, int], output: DonagiOutput) -> Optional[Point]:
    key = []
    for p in _fiber_points(t, x):
        diff = total.get(p, 0) - total.get(t.iota[p], 0)
        numerator = diff + 2 * t.bottom.deg(t.top.morphism(p))
        if numerator % 4:
            return None
        key.append(numerator // 4)
    return output.index.get((x, tuple(key)))


def _is_tower_map(mapping: Mapping[Point, Point], source: Tower, target: Tower) -> bool:
    src, dst = source.cover_graph, target.cover_graph
    if len(set(mapping.values())) != len(mapping) or set(mapping.values()) != set(dst.points):
        return False
    for p, q in mapping.items():
        if source.composite(p) != target.composite(q) or source.composite.deg(p) != target.composite.deg(q):
            return False
        if mapping[source.iota[p]] != target.iota[q]:
            return False
        if not is_vertex(p) and (mapping[mate(p)] != mate(q) or mapping[src.root(p)] != dst.root(q)):
            return False
    return True


class TrialityMaps(NamedTuple):
    to_input: Dict[Point, Point]
    to_other: Dict[Point, Point]
    input_component: int


def canonical_triality_maps(t: Tower, out1: Tower, out2: Tower) -> TrialityMaps:
    """Explicit isomorphisms from the split construction of out1 onto t and out2.

    Points whose expanded divisor has a single point with difference 4
    against its conjugate go to that point of the input; all others go to
    the divisor with coefficients (difference + 2 d_f) / 4, a point of out2.

    Raises:
        TrialityFailure: If the maps are not tower isomorphisms
    """
    output = donagi_construct(t, 4)
    second = split(out1)
    maps: List[Optional[Dict[Point, Point]]] = [None, None]
    kinds: List[Optional[str]] = [None, None]
    for i, tower in enumerate(second):
        to_cover, to_other = {}, {}
        for p in tower.cover_graph.points:
            x = tower.composite(p)
            total = _expand(out1, tower.divisors[p])
            image = _rule_to_cover(t, x, total)
            if image is not None:
                to_cover[p] = image
            other = _rule_to_other(t, x, total, output)
            if other is not None and out2.cover_graph.has_point(other):
                to_other[p] = other
        if len(to_cover) == len(tower.cover_graph.points) and _is_tower_map(to_cover, tower, t):
            maps[i], kinds[i] = to_cover, "input"
        elif len(to_other) == len(tower.cover_graph.points) and _is_tower_map(to_other, tower, out2):
            maps[i], kinds[i] = to_other, "other"
    if sorted(k or "" for k in kinds) != ["input", "other"]:
        raise TrialityFailure(f"canonical maps do not identify the outputs (found {kinds})")
    first = kinds.index("input")
    return TrialityMaps(maps[first], maps[1 - first], first)


@dataclass
class TrialityReport:
    passed: bool
    details: List[str] = field(default_factory=list)


def triality_check(t: Tower) -> TrialityReport:
    """Apply the construction to each output and compare with {input, other output}."""
    report = TrialityReport(True)
    try:
        outputs = split(t)
    except (NotGeneric, NotOrientable, InvalidTower, UnsupportedDilatedTop) as err:
        return TrialityReport(False, [f"input: {err}"])
    for i, out in enumerate(outputs):
        other = outputs[1 - i]
        try:
            again = split(out)
        except (NotGeneric, NotOrientable, InvalidTower, UnsupportedDilatedTop) as err:
            report.passed = False
            report.details.append(f"output {i + 1}: {err}")
            continue
        straight = towers_isomorphic(again[0], t) is not None and towers_isomorphic(again[1], other) is not None
        crossed = (not straight and towers_isomorphic(again[1], t) is not None
                   and towers_isomorphic(again[0], other) is not None)
        if straight or crossed:
            report.details.append(f"output {i + 1}: reproduces the input and output {2 - i}")
        else:
            report.passed = False
            report.details.append(f"output {i + 1}: construction does not reproduce the input and output {2 - i}")
    return report


def contract_tower(t: Tower, edges: Union[str, Iterable[str]]) -> Tower:
    """Contract base edges, their preimages in the middle graph and theirs in the top graph.

    Raises:
        LoopContraction: If a base edge is a loop
        InvalidTower: If a base edge does not exist
    """
    edges = [edges] if isinstance(edges, str) else list(edges)
    unknown = [e for e in edges if e not in t.base.edges]
    if unknown:
        raise InvalidTower(f"unknown base edge(s): {', '.join(unknown)}")
    bottom = contract_morphism(t.bottom, edges)
    mid_edges = sorted({h[0] for e in edges for h in t.bottom.fiber((e, 0))})
    top = contract_morphism(t.top.morphism, mid_edges)
    top = HarmonicMorphism(top.source, bottom.source, top.point_map, top.degrees)
    if isinstance(bottom.target, MetricGraph):
        bottom = with_source(bottom, metrize_source(bottom))
        top = HarmonicMorphism(top.source, bottom.source, top.point_map, top.degrees)
        top = with_source(top, metrize_source(top))
    tower = Tower(DoubleCover.from_morphism(top), bottom)
    tower.validate()
    return tower


def cover_dimension(g_top: Graph, g_bottom: Graph) -> int:
    return (len(g_top.edges) - len(g_top.vertices)) - (len(g_bottom.edges) - len(g_bottom.vertices))


def prym_dimension(t: Tower) -> int:
    """(|E| - |V|) of the top graph minus that of the middle graph."""
    return cover_dimension(t.cover_graph, t.mid)


class DimensionReport(NamedTuple):
    input: int
    outputs: Tuple[int, int]

    @property
    def equal(self) -> bool:
        return self.outputs[0] == self.input == self.outputs[1]


def dimension_check(t: Tower) -> DimensionReport:
    out1, out2 = split(t)
    return DimensionReport(prym_dimension(t), (prym_dimension(out1), prym_dimension(out2)))


def connected_donagi_holds(t: Tower) -> bool:
    """If the top is disconnected but an output is connected, the middle graph is two double covers of K."""
    if len(components(t.cover_graph)) == 1:
        return True
    outputs = split(t)
    if not any(len(components(out.cover_graph)) == 1 for out in outputs):
        return True
    parts = components(t.mid)
    if len(parts) != 2:
        return False
    first = t.base.vertices[0]
    for part in parts:
        members = set(part.vertices)
        if sum(t.bottom.deg(y) for y in t.bottom.fiber(first) if y in members) != 2:
            return False
    return True


def is_good(t: Tower) -> bool:
    """Generic, orientable, connected top and both outputs connected."""
    if t.degree() != 4 or not is_generic(t).generic or not is_orientable(t):
        return False
    if len(components(t.cover_graph)) != 1:
        return False
    return all(len(components(out.cover_graph)) == 1 for out in split(t))
