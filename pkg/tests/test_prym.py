#!/usr/bin/env python3
"""Tests for cycle lattices, Prym lattices and the correspondence."""

import random

import pytest
from sympy import Matrix, eye

from errors import DilatedCover, DisconnectedGraph, DisconnectedInput, InvalidTower, NotDivisible, NotUnimodular
from harmonic import signed_cover
from intlat import GramMatrix, congruence_search, is_unimodular, lattice_coordinates
from ngonal import contract_tower, split
from prym import (boundary_matrix, brute_force_prym_kernel, correspondence, divide_by_two_cases, factor_psi,
                  h1_basis, integration_pairing, jacobian_gram, point_identity_check, prym_isomorphism_check,
                  prym_lattice, verify_divide_by_two, verify_polarization_doubling)
from symgraph import Graph, LinearForm, MetricGraph, components

EX2_INPUT = "[[2*l1+2*l2+2*l3, l1+2*l2+3*l3], [l1+2*l2+3*l3, 2*l1+4*l2+6*l3]]"
EX2_OUTPUT = "[[2*l1+2*l2+2*l3, l1-l3], [l1-l3, 2*l1+2*l2+2*l3]]"


def metric_triangle():
    return MetricGraph(["p", "q", "r"], {"e": ("p", "q"), "f": ("q", "r"), "g": ("r", "p")},
                       {"e": LinearForm.var("l1"), "f": LinearForm.var("l2"), "g": LinearForm.var("l3")})


class TestCycles:
    """Cycle bases and the integration pairing."""

    def test_theta_graph(self):
        g = MetricGraph(["a", "b"], {"e1": ("a", "b"), "e2": ("a", "b"), "e3": ("a", "b")},
                        {"e1": LinearForm.var("l1"), "e2": LinearForm.var("l2"), "e3": LinearForm.var("l3")})
        lattice = h1_basis(g)
        assert lattice.rank == 2
        assert boundary_matrix(g) * lattice.basis == Matrix.zeros(2, 2)
        gram = jacobian_gram(g)
        assert gram.specialize({"l1": 1, "l2": 1, "l3": 1}).det() == 3

    def test_loop_is_a_cycle(self):
        g = MetricGraph(["v"], {"L": ("v", "v")}, {"L": LinearForm.var("l1")})
        assert h1_basis(g).basis == Matrix([[1]])
        assert jacobian_gram(g) == GramMatrix.parse("[[l1]]")

    def test_tree_has_no_cycles(self):
        g = Graph(["a", "b", "c"], {"x": ("a", "b"), "y": ("b", "c")})
        assert h1_basis(g).rank == 0

    def test_disconnected(self):
        with pytest.raises(DisconnectedGraph):
            h1_basis(Graph(["a", "b"], {}))

    def test_pairing(self):
        g = metric_triangle()
        assert integration_pairing(g, [1, 1, 1], [1, -1, 2]) == LinearForm.parse("l1 - l2 + 2*l3")


class TestPrymLattice:
    """Kernels of the norm map and their Gram matrices."""

    def test_trivial_cover_of_triangle(self):
        cover = signed_cover(metric_triangle())
        p = prym_lattice(cover)
        assert p.rank == 1
        assert p.gram == GramMatrix.parse("[[l1 + l2 + l3]]")
        column = tuple(p.basis[:, 0])
        assert set(brute_force_prym_kernel(cover, 1)) == {column, tuple(-x for x in column)}

    def test_connected_cover_of_triangle(self):
        p = prym_lattice(signed_cover(metric_triangle(), ["f"]))
        assert p.rank == 0
        assert p.gram.dimension == 0

    def test_example_one(self, load_tower):
        p = prym_lattice(load_tower("ex1").top)
        assert p.rank == 1
        assert p.gram == GramMatrix.parse("[[2*l2 + 2*l3]]")

    def test_example_two(self, load_tower):
        p = prym_lattice(load_tower("ex2").top)
        assert p.rank == 2
        assert congruence_search(p.gram, GramMatrix.parse(EX2_INPUT), bound=2) is not None
        assert p.gram.specialize({"l1": 1, "l2": 1, "l3": 1}).det() == 36

    def test_example_two_outputs(self, load_tower):
        expected = GramMatrix.parse(EX2_OUTPUT)
        for out in split(load_tower("ex2")):
            p1 = prym_lattice(out.top)
            assert p1.rank == 2
            witness = congruence_search(p1.gram, expected, bound=2)
            assert witness is not None
            assert p1.gram.transform(witness) == expected

    def test_basis_is_antisymmetric(self, load_tower):
        t = load_tower("ex2")
        p = prym_lattice(t.top)
        edges = t.cover_graph.edges
        for j in range(p.rank):
            column = dict(zip(edges, p.basis[:, j]))
            for name in edges:
                assert column[t.iota[(name, 0)][0]] == -column[name]
        assert boundary_matrix(t.cover_graph) * p.basis == Matrix.zeros(len(t.cover_graph.vertices), p.rank)

    def test_dilated_cover(self, load_tower):
        contracted = contract_tower(load_tower("bigonal"), "k2")
        with pytest.raises(DilatedCover):
            prym_lattice(contracted.top)

    def test_disconnected_input(self):
        g = MetricGraph(["a", "b", "c", "d"], {"x": ("a", "b"), "y": ("c", "d")},
                        {"x": LinearForm.var("l1"), "y": LinearForm.var("l1")})
        with pytest.raises(DisconnectedInput):
            prym_lattice(signed_cover(g))

    def test_needs_lengths(self):
        g = Graph(["p", "q"], {"e": ("p", "q"), "f": ("q", "p")})
        with pytest.raises(InvalidTower):
            prym_lattice(signed_cover(g))


class TestCorrespondence:
    """The correspondence between a tower and its split outputs."""

    @pytest.mark.parametrize("name", ["ex1", "ex2"])
    def test_point_identities(self, load_tower, name):
        t = load_tower(name)
        for out in split(t):
            report = point_identity_check(correspondence(t, out))
            assert report.ok, report.violations

    @pytest.mark.parametrize("name", ["ex1", "ex2"])
    def test_polarization_doubling(self, load_tower, name):
        t = load_tower(name)
        p = prym_lattice(t.top)
        for out in split(t):
            p1 = prym_lattice(out.top)
            corr = correspondence(t, out)
            s, st = corr.restrict(p, p1)
            assert s.shape == (p.rank, p1.rank)
            assert st * s == 4 * eye(p1.rank)
            report = verify_polarization_doubling(corr, p, p1)
            assert report.passed, report.details

    def test_factor_psi(self, load_tower):
        t = load_tower("ex2")
        p = prym_lattice(t.top)
        out1 = split(t)[0]
        p1 = prym_lattice(out1.top)
        psi = factor_psi(correspondence(t, out1), p, p1)
        assert is_unimodular(psi)
        assert p.gram.transform(psi) == p1.gram

    @pytest.mark.parametrize("name", ["ex1", "ex2"])
    def test_isomorphism_check(self, load_tower, name):
        report = prym_isomorphism_check(load_tower(name))
        assert report.base_is_tree
        assert report.passed, report.details
        assert [w.output for w in report.witnesses] == [1, 2]
        assert all(w.isometry for w in report.witnesses)

    def test_not_divisible_over_a_cycle(self, load_tower):
        t = load_tower("nontree")
        with pytest.raises(NotDivisible) as exc_info:
            prym_isomorphism_check(t)
        err = exc_info.value

        # the first odd column, output by output, s before s^t
        p = prym_lattice(t.top)
        odd = []
        for out in split(t):
            p1 = prym_lattice(out.top)
            corr = correspondence(t, out)
            s, st = corr.restrict(p, p1)
            odd = [(direction, matrix, j) for direction, matrix in (("s", s), ("s^t", st))
                   for j in range(matrix.shape[1]) if any(x % 2 for x in matrix[:, j])]
            if odd:
                break
        direction, matrix, j = odd[0]
        assert err.direction == direction
        assert err.element == [1 if k == j else 0 for k in range(matrix.shape[1])]
        assert err.image == list(matrix[:, j])

        source, target, edge_map = (p1, p, corr.forward) if direction == "s" else (p, p1, corr.backward)
        image = edge_map * source.basis * Matrix(err.element)
        assert image == target.basis * Matrix(err.image)
        assert lattice_coordinates(target.basis, image / 2) is None


class TestDivideByTwo:
    """Local block identities behind dividing the correspondence by two."""

    def test_cases(self):
        cases = divide_by_two_cases()
        assert [case.fiber_type for case in cases] == ["III", "II", "I"]
        for case in cases:
            v = verify_divide_by_two(case.u, case.a)
            assert v == case.v
            assert case.a * case.u == 2 * case.u * v

    def test_type_three_determinant(self):
        case = divide_by_two_cases()[0]
        assert verify_divide_by_two(case.u, case.a).det() == -1

    def test_not_divisible(self):
        with pytest.raises(NotUnimodular):
            verify_divide_by_two(eye(2), eye(2))


class TestRandomTowers:
    """Identities on generated towers over trees, and the kernel oracle on small covers."""

    def test_isomorphism_check(self, good_towers):
        for t in good_towers:
            report = prym_isomorphism_check(t)
            assert report.passed, report.details

    def test_polarization_doubling(self, good_towers):
        for t in good_towers:
            p = prym_lattice(t.top)
            for out in split(t):
                report = verify_polarization_doubling(correspondence(t, out), p, prym_lattice(out.top))
                assert report.passed, report.details

    @staticmethod
    def small_covers(count):
        """Double covers of random connected metric graphs with at most ten top edges."""
        covers = []
        for seed in range(10 * count):
            rng = random.Random(seed)
            vertices = [f"v{i}" for i in range(rng.randint(1, 3))]
            ends = {f"e{j}": (rng.choice(vertices), rng.choice(vertices)) for j in range(rng.randint(2, 5))}
            g = MetricGraph(vertices, ends, {e: LinearForm.var(f"l{e[1:]}") for e in ends})
            if len(components(g)) != 1:
                continue
            covers.append(signed_cover(g, [e for e in ends if rng.random() < 0.5]))
            if len(covers) == count:
                break
        return covers

    def test_kernel_matches_enumeration(self):
        covers = self.small_covers(30)
        assert len(covers) == 30
        for cover in covers:
            assert len(cover.source.edges) <= 10
            p = prym_lattice(cover)
            found = brute_force_prym_kernel(cover, 1)
            for vector in found:
                assert lattice_coordinates(p.basis, Matrix(vector)) is not None
            for j in range(p.rank):
                column = tuple(p.basis[:, j])
                if max(abs(x) for x in column) <= 1:
                    assert column in found
            if p.rank == 0:
                assert found == []
