#!/usr/bin/env python3
"""
Prym Lattices

Cycle lattices, Prym lattices of free double covers and the correspondence
between a tetragonal tower and one of its split outputs.

Supports:
- Fundamental cycle bases and the integration pairing
- Prym lattices (kernel of the norm on cycles) with symbolic Gram matrices
- The edge and point matrices S and S^t of the correspondence
- Checks of the point identities, of 4 * Id on Prym lattices and of doubled polarizations
- Factoring the restricted correspondence as 2 * psi with psi unimodular
- A bounded brute-force kernel oracle and the divide-by-two block identities
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence, Tuple

import networkx as nx
from sympy import Matrix, Rational, eye, floor, zeros

from errors import (DilatedCover, DisconnectedGraph, DisconnectedInput, InvalidTower,
                    NotDivisible, NotUnimodular, ValidationFailure)
from harmonic import DoubleCover, Tower, ValidationReport
from intlat import GramMatrix, integer_kernel, is_unimodular, lattice_coordinates
from ngonal import split
from symgraph import Graph, LinearForm, MetricGraph, components

logger = logging.getLogger(__name__)


def boundary_matrix(g: Graph) -> Matrix:
    """V x E matrix of the boundary map e -> end - start."""
    row = {v: i for i, v in enumerate(g.vertices)}
    m = zeros(len(g.vertices), len(g.edges))
    for j, name in enumerate(g.edges):
        start, end = g.ends(name)
        m[row[end], j] += 1
        m[row[start], j] -= 1
    return m


def _cycle_basis(g: Graph) -> Matrix:
    """Fundamental cycles of a Kruskal spanning forest, one per non-forest edge in edge order."""
    edges = list(g.edges)
    if not edges:
        return zeros(0, 0)
    multigraph = g.to_networkx()
    forest_edges = {key for _, _, key in nx.minimum_spanning_edges(multigraph, algorithm="kruskal",
                                                                   keys=True, data=False)}
    forest = nx.Graph()
    forest.add_nodes_from(g.vertices)
    for name in forest_edges:
        start, end = g.ends(name)
        forest.add_edge(start, end, name=name)

    column = {name: j for j, name in enumerate(edges)}
    cycles = []
    for name in edges:
        if name in forest_edges:
            continue
        vector = [0] * len(edges)
        vector[column[name]] += 1
        start, end = g.ends(name)
        if start != end:
            path = nx.shortest_path(forest, end, start)
            for a, b in zip(path, path[1:]):
                tree_edge = forest.edges[a, b]["name"]
                vector[column[tree_edge]] += 1 if g.ends(tree_edge) == (a, b) else -1
        cycles.append(vector)
    if not cycles:
        return zeros(len(edges), 0)
    return Matrix(cycles).T


@dataclass
class CycleLattice:
    """H_1 of a graph in edge coordinates; columns of basis are cycles."""
    graph: Graph
    basis: Matrix

    @property
    def edges(self) -> Tuple[str, ...]:
        return self.graph.edges

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def h1_basis(g: Graph) -> CycleLattice:
    """Spanning-tree cycle basis of a connected graph.

    Raises:
        DisconnectedGraph: If the graph is not connected
    """
    count = len(components(g))
    if count != 1:
        raise DisconnectedGraph(f"cycle basis needs a connected graph, got {count} components")
    return CycleLattice(g, _cycle_basis(g))


def integration_pairing(g: MetricGraph, u: Sequence, v: Sequence) -> LinearForm:
    """Sum of u_e * v_e * l(e) over the edges of g."""
    total = LinearForm.zero()
    for j, name in enumerate(g.edges):
        if u[j] and v[j]:
            total = total + g.length(name) * (u[j] * v[j])
    return total


def jacobian_gram(g: MetricGraph) -> GramMatrix:
    basis = h1_basis(g).basis
    columns = [basis[:, j] for j in range(basis.shape[1])]
    return GramMatrix([[integration_pairing(g, a, b) for b in columns] for a in columns])


def _at_unit_lengths(form: LinearForm) -> Rational:
    return sum((coeff for _, coeff in form.terms), Rational(0))


def _norm_at_ones(a: Matrix, units: Sequence[Rational], i: int, j: int) -> Rational:
    return sum((a[e, i] * a[e, j] * unit for e, unit in enumerate(units) if a[e, i] and a[e, j]), Rational(0))


def _reduce_basis(a: Matrix, lengths: Sequence[LinearForm]) -> Matrix:
    """Pairwise size reduction at unit lengths, then a deterministic order and sign."""
    a = Matrix(a)
    rank = a.shape[1]
    units = [_at_unit_lengths(length) for length in lengths]
    changed = True
    while changed:
        changed = False
        for i in range(rank):
            for j in range(rank):
                if i == j:
                    continue
                gij = _norm_at_ones(a, units, i, j)
                gjj = _norm_at_ones(a, units, j, j)
                if 2 * abs(gij) > gjj:
                    q = int(floor(gij / gjj + Rational(1, 2)))
                    a[:, i] = a[:, i] - q * a[:, j]
                    changed = True
    columns = []
    for j in range(rank):
        column = list(a[:, j])
        lead = next(x for x in column if x != 0)
        if lead < 0:
            column = [-x for x in column]
        columns.append(column)
    columns.sort(key=lambda c: (sum(x * x * unit for x, unit in zip(c, units)), [-x for x in c]))
    return Matrix(columns).T


@dataclass
class PrymLattice:
    """Kernel of the norm on cycles of a free double cover.

    Attributes:
        cover: The double cover
        coefficients: E(Gamma) x r matrix; column a stands for sum a_e (e+ - e-)
        basis: Same columns in edge coordinates of the top graph
        gram: Principal polarization sum a_e b_e l(e)
    """
    cover: DoubleCover
    coefficients: Matrix
    basis: Matrix
    gram: GramMatrix

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def antisymmetric_embedding(c: DoubleCover) -> Matrix:
    """E(top) x E(bottom) matrix sending e to e+ - e- with the reference orientations."""
    top, bottom = c.source, c.target
    row = {name: i for i, name in enumerate(top.edges)}
    n = zeros(len(top.edges), len(bottom.edges))
    for j, name in enumerate(bottom.edges):
        plus, minus = c.morphism.fiber((name, 0))
        n[row[plus[0]], j] += 1 if plus[1] == 0 else -1
        n[row[minus[0]], j] -= 1 if minus[1] == 0 else -1
    return n


def prym_lattice(c: DoubleCover) -> PrymLattice:
    """The Prym lattice of a free double cover of a connected metric graph.

    Raises:
        DilatedCover: If the cover has a dilated point
        DisconnectedInput: If the covered graph is disconnected
        InvalidTower: If the covered graph has no edge lengths
    """
    if not c.is_free():
        raise DilatedCover("Prym lattices are only computed for free double covers")
    if len(components(c.target)) != 1:
        raise DisconnectedInput("the covered graph must be connected")
    if not isinstance(c.target, MetricGraph):
        raise InvalidTower("the covered graph has no edge lengths")

    bottom = c.target
    n = antisymmetric_embedding(c)
    kernel = integer_kernel(boundary_matrix(c.source) * n)
    if kernel.shape == (0, 0):
        kernel = zeros(len(bottom.edges), 0)
    lengths = [bottom.length(name) for name in bottom.edges]
    if kernel.shape[1]:
        kernel = _reduce_basis(kernel, lengths)
    columns = [kernel[:, j] for j in range(kernel.shape[1])]
    gram = GramMatrix([[integration_pairing(bottom, a, b) for b in columns] for a in columns])
    logger.debug("Prym lattice of rank %d over %d edges", kernel.shape[1], len(bottom.edges))
    return PrymLattice(c, kernel, n * kernel, gram)


def brute_force_prym_kernel(c: DoubleCover, bound: int = 1) -> List[Tuple[int, ...]]:
    """Every antisymmetric cycle with coefficients in [-bound, bound], in top edge coordinates."""
    if not c.is_free():
        raise DilatedCover("Prym lattices are only computed for free double covers")
    n = antisymmetric_embedding(c)
    boundary = (boundary_matrix(c.source) * n).tolist()
    embedding = n.tolist()
    found = []
    for a in itertools.product(range(-bound, bound + 1), repeat=n.shape[1]):
        if not any(a):
            continue
        if all(sum(r[j] * a[j] for j in range(len(a)) if a[j]) == 0 for r in boundary):
            found.append(tuple(sum(r[j] * a[j] for j in range(len(a))) for r in embedding))
    logger.debug("brute-force kernel: %d vectors within bound %d", len(found), bound)
    return found


@dataclass
class Correspondence:
    """The divisor correspondence between the top graph of a tower and that of a split output.

    Attributes:
        forward: S, E(input top) x E(output top)
        backward: S^t, E(output top) x E(input top)
        vertex_forward: S on vertices
        vertex_backward: S^t on vertices
    """
    tower: Tower
    output: Tower
    forward: Matrix
    backward: Matrix
    vertex_forward: Matrix
    vertex_backward: Matrix

    def restrict(self, p: PrymLattice, p1: PrymLattice) -> Tuple[Matrix, Matrix]:
        """Matrices s (L1 -> L) and s^t (L -> L1) in Prym basis coordinates.

        Raises:
            ValidationFailure: If S or S^t does not map one Prym lattice into the other
        """
        s = lattice_coordinates(p.basis, self.forward * p1.basis)
        if s is None:
            raise ValidationFailure("S does not map the output Prym lattice into the input Prym lattice")
        st = lattice_coordinates(p1.basis, self.backward * p.basis)
        if st is None:
            raise ValidationFailure("S^t does not map the input Prym lattice into the output Prym lattice")
        return s, st


def _ratio(value: int, numerator: int, denominator: int) -> int:
    scaled = Rational(value * numerator, denominator)
    if not scaled.is_integer:
        raise ValidationFailure(f"S^t weight {scaled} is not an integer")
    return int(scaled)


def correspondence(t: Tower, out1: Tower) -> Correspondence:
    """Build S and S^t from the divisors behind the top points of a split output.

    Raises:
        ValidationFailure: If a weight is fractional or cycles do not map to cycles
    """
    if out1.divisors is None:
        raise ValidationFailure("output tower carries no divisors")
    top, other = t.cover_graph, out1.cover_graph
    edge_row = {name: i for i, name in enumerate(top.edges)}
    vertex_row = {v: i for i, v in enumerate(top.vertices)}

    s = zeros(len(top.edges), len(other.edges))
    st = zeros(len(other.edges), len(top.edges))
    for j, u in enumerate(other.edges):
        for h, a in out1.divisors[(u, 0)].coeffs:
            if a:
                s[edge_row[h[0]], j] += a if h[1] == 0 else -a
        for i, name in enumerate(top.edges):
            if s[i, j]:
                st[j, i] = _ratio(s[i, j], out1.composite.deg((u, 0)), t.composite.deg((name, 0)))

    sv = zeros(len(top.vertices), len(other.vertices))
    stv = zeros(len(other.vertices), len(top.vertices))
    for j, z in enumerate(other.vertices):
        for y, a in out1.divisors[z].coeffs:
            if a:
                i = vertex_row[y]
                sv[i, j] += a
                stv[j, i] = _ratio(sv[i, j], out1.composite.deg(z), t.composite.deg(y))

    corr = Correspondence(t, out1, s, st, sv, stv)
    _check_cycles(corr)
    return corr


def _check_cycles(corr: Correspondence) -> None:
    top, other = corr.tower.cover_graph, corr.output.cover_graph
    forward_cycles = corr.forward * _cycle_basis(other) if other.edges else zeros(len(top.edges), 0)
    if top.vertices and any(x != 0 for x in boundary_matrix(top) * forward_cycles):
        raise ValidationFailure("S maps a cycle of the output to a non-cycle")
    backward_cycles = corr.backward * _cycle_basis(top) if top.edges else zeros(len(other.edges), 0)
    if other.vertices and any(x != 0 for x in boundary_matrix(other) * backward_cycles):
        raise ValidationFailure("S^t maps a cycle of the input to a non-cycle")


def point_identity_check(corr: Correspondence) -> ValidationReport:
    """S^t S(z) = 2(p^* p(z) + z - iota z) and S S^t(y) = 2(g^* g(y) + y - iota y) on vertices."""
    violations = []
    for tower, product in ((corr.output, corr.vertex_backward * corr.vertex_forward),
                           (corr.tower, corr.vertex_forward * corr.vertex_backward)):
        graph = tower.cover_graph
        index = {v: i for i, v in enumerate(graph.vertices)}
        for j, z in enumerate(graph.vertices):
            expected = [0] * len(graph.vertices)
            for w in tower.composite.fiber(tower.composite(z)):
                expected[index[w]] += 2 * tower.composite.deg(w)
            expected[j] += 2
            expected[index[tower.iota[z]]] -= 2
            if list(product[:, j]) != expected:
                violations.append(f"point identity fails at {z!r}")
    return ValidationReport(not violations, violations)


@dataclass
class PolarizationReport:
    passed: bool
    details: List[str] = field(default_factory=list)


def verify_polarization_doubling(corr: Correspondence, p: PrymLattice, p1: PrymLattice) -> PolarizationReport:
    """Check s^t s = 4, s s^t = 4 and that s, s^t double the polarizations."""
    try:
        s, st = corr.restrict(p, p1)
    except ValidationFailure as err:
        return PolarizationReport(False, [str(err)])
    report = PolarizationReport(True)
    checks = (
        ("s^t s = 4 Id", st * s == 4 * eye(p1.rank)),
        ("s s^t = 4 Id", s * st == 4 * eye(p.rank)),
        ("s doubles the polarization", p.gram.transform(s) == p1.gram.scale(4)),
        ("s^t doubles the polarization", p1.gram.transform(st) == p.gram.scale(4)),
    )
    for name, ok in checks:
        report.details.append(f"{name}: {'ok' if ok else 'FAILED'}")
        report.passed = report.passed and ok
    return report


def factor_psi(corr: Correspondence, p: PrymLattice, p1: PrymLattice) -> Matrix:
    """psi = s / 2 as a unimodular map from the output Prym lattice to the input one.

    Raises:
        NotDivisible: If s or s^t has an odd entry
        NotUnimodular: If s / 2 is not invertible over the integers
    """
    s, st = corr.restrict(p, p1)
    for direction, matrix in (("s", s), ("s^t", st)):
        for j in range(matrix.shape[1]):
            column = list(matrix[:, j])
            if any(x % 2 for x in column):
                element = [1 if k == j else 0 for k in range(matrix.shape[1])]
                raise NotDivisible(f"{direction} of basis element {j} is not divisible by 2",
                                   direction, element, column)
    psi = s / 2
    if not is_unimodular(psi):
        raise NotUnimodular("s / 2 is not invertible over the integers")
    return psi


class PrymWitness(NamedTuple):
    output: int
    psi: Matrix
    isometry: bool


@dataclass
class PrymIsomorphismReport:
    passed: bool
    base_is_tree: bool
    witnesses: List[PrymWitness] = field(default_factory=list)
    details: List[str] = field(default_factory=list)


def prym_isomorphism_check(t: Tower) -> PrymIsomorphismReport:
    """Factor the correspondence to each split output and check psi^T G psi = G_1.

    Raises:
        NotDivisible: Propagated from factor_psi
    """
    base_is_tree = len(t.base.edges) == len(t.base.vertices) - 1
    p = prym_lattice(t.top)
    report = PrymIsomorphismReport(True, base_is_tree)
    for i, out in enumerate(split(t)):
        p1 = prym_lattice(out.top)
        psi = factor_psi(correspondence(t, out), p, p1)
        isometry = p.gram.transform(psi) == p1.gram
        report.witnesses.append(PrymWitness(i + 1, psi, isometry))
        report.details.append(f"output {i + 1}: psi = {psi.tolist()}, isometry {'ok' if isometry else 'FAILED'}")
        report.passed = report.passed and isometry
    logger.info("Prym isomorphism check %s", "passed" if report.passed else "failed")
    return report


class DivideByTwoCase(NamedTuple):
    fiber_type: str
    u: Matrix
    a: Matrix
    v: Matrix


def divide_by_two_cases() -> List[DivideByTwoCase]:
    """Blocks A, U and V with A U = 2 U V for fibers of type III, II and I."""
    return [
        DivideByTwoCase("III",
                        Matrix([[2, 1, 0, 0], [0, -1, 1, 0], [0, 0, -1, 1], [0, 0, 0, -1]]),
                        Matrix([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]]),
                        Matrix([[2, 1, 0, 0], [-3, -2, 0, 0], [-2, -2, 1, 0], [-1, -1, 0, 1]])),
        DivideByTwoCase("II",
                        Matrix([[2, 1, 0], [0, -1, 1], [0, 0, -1]]),
                        Matrix([[1, 1, 1], [1, 1, -1], [2, -2, 0]]),
                        Matrix([[2, 1, 0], [-3, -2, 0], [-2, -2, 1]])),
        DivideByTwoCase("I",
                        Matrix([[2, 1], [0, -1]]),
                        Matrix([[1, 1], [3, -1]]),
                        Matrix([[2, 1], [-3, -2]])),
    ]


def verify_divide_by_two(u: Matrix, a: Matrix) -> Matrix:
    """Return V = U^-1 A U / 2.

    Raises:
        NotUnimodular: If V is not an integer matrix with determinant +-1
    """
    v = Matrix(u).inv() * Matrix(a) * Matrix(u) / 2
    if not is_unimodular(v):
        raise NotUnimodular(f"U^-1 A U / 2 = {v.tolist()} is not unimodular")
    return v
