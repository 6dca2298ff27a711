#!/usr/bin/env python3
"""
Symbolic Graphs

Half-edge graphs with symbolic edge lengths, plus the graph-theoretic
utilities the tower code is built on.

Supports:
- Exact linear forms in named length variables (LinearForm)
- Half-edge graphs with loops and parallel edges (Graph, MetricGraph)
- Genus, Betti number and connected components
- Edge contraction
- Backtracking isomorphism search with optional labels and involutions

A half-edge is the pair (edge_name, 0) or (edge_name, 1); the mate of
(e, i) is (e, 1 - i). Vertices are plain strings.
"""

import logging
import re
from typing import Any, Callable, Dict, Hashable, Iterable, List, Mapping, NamedTuple, Optional, Tuple, Union

import networkx as nx
from networkx.utils import UnionFind
from sympy import Rational, Symbol, sympify
from sympy.parsing.sympy_parser import parse_expr

from errors import DisconnectedGraph, LoopContraction, MalformedExpression, TowerError

logger = logging.getLogger(__name__)

HalfEdge = Tuple[str, int]
Point = Union[str, HalfEdge]

CONSTANT = "1"

_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class LinearForm:
    """An exact rational linear combination of length variables.

    Zero coefficients are never stored, so equality and hashing work on
    the canonical sparse form. The reserved variable "1" holds constants.
    """

    __slots__ = ("_terms",)

    def __init__(self, coefficients: Mapping[str, Any] = None):
        terms = {}
        for var, coeff in (coefficients or {}).items():
            value = Rational(coeff)
            if value != 0:
                terms[str(var)] = value
        self._terms = tuple(sorted(terms.items()))

    @classmethod
    def var(cls, name: str) -> 'LinearForm':
        return cls({name: 1})

    @classmethod
    def constant(cls, value: Any) -> 'LinearForm':
        return cls({CONSTANT: value})

    @classmethod
    def zero(cls) -> 'LinearForm':
        return cls()

    @classmethod
    def parse(cls, text: str, variables: Iterable[str] = None) -> 'LinearForm':
        """Parse text such as '2*l2+2*l3' or '1/2*l1' into a LinearForm.

        Args:
            text: Expression to parse
            variables: Allowed variable names; any identifier if omitted

        Raises:
            MalformedExpression: If the text is not a linear form in the variables
        """
        names = list(variables) if variables is not None else _IDENTIFIER.findall(text)
        local_dict = {name: Symbol(name) for name in names}
        try:
            expr = parse_expr(text, local_dict=local_dict)
        except Exception as err:
            raise MalformedExpression(f"cannot parse linear form '{text}': {err}") from err

        coefficients = {}
        for term, coeff in sympify(expr).expand().as_coefficients_dict().items():
            if term == 1:
                key = CONSTANT
            elif isinstance(term, Symbol) and term.name in local_dict:
                key = term.name
            else:
                raise MalformedExpression(f"'{text}' is not a linear form in {names}")
            if not coeff.is_Rational:
                raise MalformedExpression(f"coefficient {coeff} in '{text}' is not rational")
            coefficients[key] = coefficients.get(key, 0) + coeff
        return cls(coefficients)

    @property
    def terms(self) -> Tuple[Tuple[str, Rational], ...]:
        return self._terms

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(var for var, _ in self._terms)

    def coefficient(self, var: str) -> Rational:
        return dict(self._terms).get(var, Rational(0))

    def is_zero(self) -> bool:
        return not self._terms

    def is_positive(self) -> bool:
        """Positive whenever every variable is positive: nonzero with only positive coefficients."""
        return bool(self._terms) and all(coeff > 0 for _, coeff in self._terms)

    def evaluate(self, assignment: Mapping[str, Any]) -> Rational:
        total = Rational(0)
        for var, coeff in self._terms:
            if var == CONSTANT:
                total += coeff
            else:
                total += coeff * Rational(assignment[var])
        return total

    def format(self, order: Iterable[str] = None) -> str:
        """Render as '2*l2+2*l3', variables in the given order first."""
        if not self._terms:
            return "0"
        coefficients = dict(self._terms)
        ranked = [var for var in (order or []) if var in coefficients]
        ranked += [var for var, _ in self._terms if var not in ranked and var != CONSTANT]
        if CONSTANT in coefficients and CONSTANT not in ranked:
            ranked.append(CONSTANT)

        pieces = []
        for var in ranked:
            coeff = coefficients[var]
            sign = "-" if coeff < 0 else "+"
            magnitude = abs(coeff)
            if var == CONSTANT:
                body = str(magnitude)
            elif magnitude == 1:
                body = var
            else:
                body = f"{magnitude}*{var}"
            pieces.append((sign, body))

        text = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
        for sign, body in pieces[1:]:
            text += sign + body
        return text

    def __add__(self, other: 'LinearForm') -> 'LinearForm':
        if isinstance(other, int) and other == 0:
            return self
        merged = dict(self._terms)
        for var, coeff in other._terms:
            merged[var] = merged.get(var, 0) + coeff
        return LinearForm(merged)

    __radd__ = __add__

    def __neg__(self) -> 'LinearForm':
        return LinearForm({var: -coeff for var, coeff in self._terms})

    def __sub__(self, other: 'LinearForm') -> 'LinearForm':
        return self + (-other)

    def __mul__(self, scalar: Any) -> 'LinearForm':
        factor = Rational(scalar)
        return LinearForm({var: coeff * factor for var, coeff in self._terms})

    __rmul__ = __mul__

    def __truediv__(self, scalar: Any) -> 'LinearForm':
        return self * (Rational(1) / Rational(scalar))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int) and other == 0:
            return not self._terms
        return isinstance(other, LinearForm) and self._terms == other._terms

    def __hash__(self) -> int:
        return hash(self._terms)

    def __repr__(self) -> str:
        return f"LinearForm({self.format()})"


def is_vertex(point: Point) -> bool:
    return isinstance(point, str)


def mate(half_edge: HalfEdge) -> HalfEdge:
    name, end = half_edge
    return (name, 1 - end)


class Graph:
    """A finite half-edge graph.

    Args:
        vertices: Vertex names, in a fixed order
        ends: Edge name -> (root of (e, 0), root of (e, 1)), in a fixed order
    """

    def __init__(self, vertices: Iterable[str], ends: Mapping[str, Tuple[str, str]]):
        self._vertices = tuple(vertices)
        if len(set(self._vertices)) != len(self._vertices):
            raise TowerError("duplicate vertex names")
        known = set(self._vertices)
        self._edges = tuple(ends)
        self._root: Dict[HalfEdge, str] = {}
        for name, (start, end) in ends.items():
            for vertex in (start, end):
                if vertex not in known:
                    raise TowerError(f"edge '{name}' uses unknown vertex '{vertex}'")
            self._root[(name, 0)] = start
            self._root[(name, 1)] = end
        self._star: Dict[str, List[HalfEdge]] = {v: [] for v in self._vertices}
        for half_edge in self.half_edges:
            self._star[self._root[half_edge]].append(half_edge)

    @property
    def vertices(self) -> Tuple[str, ...]:
        return self._vertices

    @property
    def edges(self) -> Tuple[str, ...]:
        return self._edges

    @property
    def half_edges(self) -> Tuple[HalfEdge, ...]:
        return tuple((name, end) for name in self._edges for end in (0, 1))

    @property
    def points(self) -> Tuple[Point, ...]:
        return self._vertices + self.half_edges

    def root(self, half_edge: HalfEdge) -> str:
        return self._root[half_edge]

    def mate(self, half_edge: HalfEdge) -> HalfEdge:
        return mate(half_edge)

    def ends(self, edge: str) -> Tuple[str, str]:
        return self._root[(edge, 0)], self._root[(edge, 1)]

    def is_loop(self, edge: str) -> bool:
        start, end = self.ends(edge)
        return start == end

    def has_point(self, point: Point) -> bool:
        if is_vertex(point):
            return point in self._star
        return point in self._root

    def star(self, vertex: str) -> List[HalfEdge]:
        """Half-edges rooted at a vertex, in graph order."""
        return list(self._star[vertex])

    def valence(self, vertex: str) -> int:
        return len(self._star[vertex])

    def edge_map(self) -> Dict[str, Tuple[str, str]]:
        return {name: self.ends(name) for name in self._edges}

    def restrict(self, vertices: Iterable[str]) -> 'Graph':
        """Induced subgraph on a vertex subset, keeping graph order."""
        keep = set(vertices)
        return Graph([v for v in self._vertices if v in keep],
                     {e: self.ends(e) for e in self._edges
                      if self.ends(e)[0] in keep and self.ends(e)[1] in keep})

    def to_networkx(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(self._vertices)
        for index, name in enumerate(self._edges):
            start, end = self.ends(name)
            graph.add_edge(start, end, key=name, weight=index)
        return graph

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Graph)
                and set(self._vertices) == set(other._vertices)
                and self.edge_map() == other.edge_map())

    def __hash__(self) -> int:
        return hash((frozenset(self._vertices), frozenset(self.edge_map().items())))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(|V|={len(self._vertices)}, |E|={len(self._edges)})"


class MetricGraph(Graph):
    """A graph with a positive symbolic length on every edge."""

    def __init__(self, vertices: Iterable[str], ends: Mapping[str, Tuple[str, str]],
                 lengths: Mapping[str, LinearForm]):
        super().__init__(vertices, ends)
        self._lengths = {}
        for name in self.edges:
            if name not in lengths:
                raise TowerError(f"edge '{name}' has no length")
            length = lengths[name]
            if not length.is_positive():
                raise TowerError(f"edge '{name}' has non-positive length {length.format()}")
            self._lengths[name] = length

    @classmethod
    def from_graph(cls, graph: Graph, lengths: Mapping[str, LinearForm]) -> 'MetricGraph':
        return cls(graph.vertices, graph.edge_map(), lengths)

    @property
    def lengths(self) -> Dict[str, LinearForm]:
        return dict(self._lengths)

    def length(self, edge: str) -> LinearForm:
        return self._lengths[edge]

    def restrict(self, vertices: Iterable[str]) -> 'MetricGraph':
        sub = Graph.restrict(self, vertices)
        return MetricGraph.from_graph(sub, {e: self._lengths[e] for e in sub.edges})

    def __eq__(self, other: object) -> bool:
        if not Graph.__eq__(self, other):
            return False
        return not isinstance(other, MetricGraph) or self._lengths == other._lengths

    __hash__ = Graph.__hash__


class Component(NamedTuple):
    vertices: Tuple[str, ...]
    half_edges: Tuple[HalfEdge, ...]


def components(g: Graph) -> List[Component]:
    """Connected components, ordered by their first vertex in graph order."""
    index = {v: i for i, v in enumerate(g.vertices)}
    result = []
    for nodes in nx.connected_components(g.to_networkx()):
        vertices = tuple(sorted(nodes, key=index.__getitem__))
        members = set(vertices)
        half_edges = tuple(h for h in g.half_edges if g.root(h) in members)
        result.append(Component(vertices, half_edges))
    result.sort(key=lambda c: index[c.vertices[0]])
    return result


def betti_number(g: Graph) -> int:
    return len(g.edges) - len(g.vertices) + len(components(g))


def genus(g: Graph) -> int:
    """Genus |E| - |V| + 1 of a connected graph.

    Raises:
        DisconnectedGraph: If the graph does not have exactly one component
    """
    count = len(components(g))
    if count != 1:
        raise DisconnectedGraph(f"genus needs a connected graph, got {count} components")
    return len(g.edges) - len(g.vertices) + 1


def contraction_map(g: Graph, edges: Iterable[str]) -> Dict[str, str]:
    """Map each vertex to the representative of its class after contraction.

    The representative is the first class member in graph order.
    """
    uf = UnionFind(g.vertices)
    for name in edges:
        if name not in g.edges:
            raise TowerError(f"unknown edge '{name}'")
        if g.is_loop(name):
            raise LoopContraction(f"edge '{name}' is a loop and cannot be contracted")
        uf.union(*g.ends(name))
    representative = {}
    for vertex in g.vertices:
        representative.setdefault(uf[vertex], vertex)
    return {vertex: representative[uf[vertex]] for vertex in g.vertices}


def contract_edges(g: Graph, edges: Iterable[str]) -> Graph:
    """Contract an edge set; endpoints are identified transitively."""
    contracted = set(edges)
    rep = contraction_map(g, contracted)
    vertices = [v for v in g.vertices if rep[v] == v]
    ends = {e: (rep[g.ends(e)[0]], rep[g.ends(e)[1]]) for e in g.edges if e not in contracted}
    logger.debug("contracted %d edges: |V| %d -> %d", len(contracted), len(g.vertices), len(vertices))
    if isinstance(g, MetricGraph):
        return MetricGraph(vertices, ends, {e: g.length(e) for e in ends})
    return Graph(vertices, ends)


def _signature(g: Graph, vertex: str, label: Callable[[Point], Hashable]) -> Tuple:
    items = sorted(repr((label(h), label(mate(h)), label(g.root(mate(h))), g.root(mate(h)) == vertex))
                   for h in g.star(vertex))
    return (repr(label(vertex)), tuple(items))


def graph_isomorphic(a: Graph, b: Graph,
                     labels_a: Mapping[Point, Hashable] = None,
                     labels_b: Mapping[Point, Hashable] = None,
                     involution_a: Mapping[Point, Point] = None,
                     involution_b: Mapping[Point, Point] = None) -> Optional[Dict[Point, Point]]:
    """Search for a root- and mate-preserving bijection from a to b.

    Labels, when given, must be preserved; involutions, when given on both
    sides, must be intertwined. The search is deterministic backtracking
    over vertices in graph order with signature pruning.

    Returns:
        Mapping on vertices and half-edges, or None
    """
    if len(a.vertices) != len(b.vertices) or len(a.edges) != len(b.edges):
        return None
    use_involution = involution_a is not None and involution_b is not None

    def label_a(p):
        return labels_a.get(p) if labels_a else None

    def label_b(p):
        return labels_b.get(p) if labels_b else None

    sig_a = {v: _signature(a, v, label_a) for v in a.vertices}
    sig_b = {v: _signature(b, v, label_b) for v in b.vertices}
    if sorted(sig_a.values()) != sorted(sig_b.values()):
        return None

    def assign(mapping, used, p, q):
        mapping, used = dict(mapping), set(used)
        stack = [(p, q)]
        while stack:
            p, q = stack.pop()
            if p in mapping:
                if mapping[p] != q:
                    return None
                continue
            if q in used or is_vertex(p) != is_vertex(q) or label_a(p) != label_b(q):
                return None
            if is_vertex(p) and sig_a[p] != sig_b[q]:
                return None
            mapping[p] = q
            used.add(q)
            if not is_vertex(p):
                stack.append((mate(p), mate(q)))
                stack.append((a.root(p), b.root(q)))
            if use_involution:
                stack.append((involution_a[p], involution_b[q]))
        return mapping, used

    steps = [0]

    def search(mapping, used):
        steps[0] += 1
        for vertex in a.vertices:
            if vertex not in mapping:
                continue
            pending = [h for h in a.star(vertex) if h not in mapping]
            if pending:
                h = pending[0]
                for candidate in b.star(mapping[vertex]):
                    if candidate in used:
                        continue
                    state = assign(mapping, used, h, candidate)
                    if state is not None:
                        found = search(*state)
                        if found is not None:
                            return found
                return None
        free = [v for v in a.vertices if v not in mapping]
        if not free:
            return mapping
        vertex = free[0]
        for candidate in b.vertices:
            if candidate in used or sig_b[candidate] != sig_a[vertex]:
                continue
            state = assign(mapping, used, vertex, candidate)
            if state is not None:
                found = search(*state)
                if found is not None:
                    return found
        return None

    result = search({}, set())
    logger.debug("isomorphism search: %d nodes, %s", steps[0], "found" if result else "none")
    return result
