#!/usr/bin/env python3
"""Tests for symbolic lengths and half-edge graphs."""

import random

import pytest
from sympy import Rational

from errors import DisconnectedGraph, LoopContraction, MalformedExpression, TowerError
from symgraph import (Graph, LinearForm, MetricGraph, betti_number, components, contract_edges,
                      contraction_map, genus, graph_isomorphic, mate)


def theta_graph():
    return Graph(["a", "b"], {"e1": ("a", "b"), "e2": ("a", "b"), "e3": ("b", "a")})


class TestLinearForm:
    """Parsing, arithmetic and formatting of length expressions."""

    def test_parse_and_format(self):
        """Variables are printed in the requested order."""
        form = LinearForm.parse("2*l3 + 2*l2")
        assert form.format(["l2", "l3"]) == "2*l2+2*l3"
        assert form.coefficient("l2") == 2
        assert form.variables == ("l2", "l3")

    def test_rational_coefficients(self):
        form = LinearForm.parse("1/2*l1")
        assert form.coefficient("l1") == Rational(1, 2)
        assert form.format() == "1/2*l1"

    def test_zero_terms_are_dropped(self):
        """l1 - l1 is the zero form and compares equal to 0."""
        form = LinearForm.var("l1") - LinearForm.var("l1")
        assert form.is_zero()
        assert form == 0
        assert form.format() == "0"

    def test_arithmetic(self):
        a = LinearForm.parse("l1 + 2*l2")
        b = LinearForm.parse("l1 - l2")
        assert a + b == LinearForm.parse("2*l1 + l2")
        assert 3 * b == LinearForm.parse("3*l1 - 3*l2")
        assert (a * 2) / 4 == LinearForm.parse("1/2*l1 + l2")
        assert sum([a, b]) == a + b

    def test_evaluate(self):
        form = LinearForm.parse("l1 + 3*l2 + 2")
        assert form.evaluate({"l1": 1, "l2": 2}) == 9

    def test_negative_terms_format(self):
        assert LinearForm.parse("l1 - l3").format(["l1", "l3"]) == "l1-l3"
        assert LinearForm.parse("-l1").format() == "-l1"

    def test_nonlinear_rejected(self):
        with pytest.raises(MalformedExpression):
            LinearForm.parse("l1*l2")

    def test_unknown_variable_rejected(self):
        with pytest.raises(MalformedExpression):
            LinearForm.parse("l1 + l9", ["l1"])

    def test_hashable(self):
        assert len({LinearForm.parse("l1+l2"), LinearForm.parse("l2+l1")}) == 1

    def test_is_positive(self):
        assert LinearForm.parse("l1 + 1/2*l2").is_positive()
        assert LinearForm.parse("3").is_positive()
        assert not LinearForm.parse("l1 - l2").is_positive()
        assert not LinearForm.zero().is_positive()

    @pytest.mark.parametrize("seed", range(10))
    def test_addition_laws(self, seed):
        """Sums are associative and commutative over random rational coefficients."""
        rng = random.Random(seed)

        def random_form():
            return LinearForm({name: Rational(rng.randint(-6, 6), rng.randint(1, 5))
                               for name in rng.sample(["l1", "l2", "l3", "1"], rng.randint(0, 4))})

        a, b, c = random_form(), random_form(), random_form()
        assert (a + b) + c == a + (b + c)
        assert a + b == b + a
        assert a + LinearForm.zero() == a
        assert (a - a).is_zero()


class TestGraph:
    """Half-edge structure, components and genus."""

    def test_half_edges_and_star(self):
        g = theta_graph()
        assert g.half_edges[:2] == (("e1", 0), ("e1", 1))
        assert g.root(("e3", 0)) == "b"
        assert mate(("e3", 0)) == ("e3", 1)
        assert g.star("a") == [("e1", 0), ("e2", 0), ("e3", 1)]
        assert g.valence("b") == 3

    def test_loop(self):
        g = Graph(["v"], {"L": ("v", "v")})
        assert g.is_loop("L")
        assert g.valence("v") == 2
        assert genus(g) == 1

    def test_unknown_vertex(self):
        with pytest.raises(TowerError):
            Graph(["a"], {"e": ("a", "b")})

    def test_duplicate_vertex(self):
        with pytest.raises(TowerError):
            Graph(["a", "a"], {})

    def test_genus_and_betti(self):
        g = theta_graph()
        assert genus(g) == 2
        assert betti_number(g) == 2

    def test_genus_of_disconnected_graph(self):
        g = Graph(["a", "b"], {})
        assert len(components(g)) == 2
        assert betti_number(g) == 0
        with pytest.raises(DisconnectedGraph):
            genus(g)

    def test_components_in_graph_order(self):
        g = Graph(["c", "a", "b", "d"], {"x": ("a", "d"), "y": ("b", "c")})
        parts = components(g)
        assert [part.vertices for part in parts] == [("c", "b"), ("a", "d")]
        assert set(parts[1].half_edges) == {("x", 0), ("x", 1)}

    def test_restrict(self):
        g = Graph(["a", "b", "c"], {"x": ("a", "b"), "y": ("b", "c")})
        sub = g.restrict(["b", "c"])
        assert sub.vertices == ("b", "c")
        assert sub.edges == ("y",)

    def test_metric_graph_needs_positive_lengths(self):
        with pytest.raises(TowerError):
            MetricGraph(["a", "b"], {"e": ("a", "b")}, {"e": LinearForm.parse("-l1")})
        with pytest.raises(TowerError):
            MetricGraph(["a", "b"], {"e": ("a", "b")}, {})

    def test_metric_equality_includes_lengths(self):
        ends = {"e": ("a", "b")}
        g1 = MetricGraph(["a", "b"], ends, {"e": LinearForm.var("l1")})
        g2 = MetricGraph(["a", "b"], ends, {"e": LinearForm.var("l2")})
        assert g1 != g2
        assert g1 == MetricGraph(["b", "a"], ends, {"e": LinearForm.var("l1")})


class TestContraction:
    """Edge contraction with transitive identification."""

    def test_contract_path(self):
        g = Graph(["a", "b", "c"], {"x": ("a", "b"), "y": ("b", "c"), "z": ("c", "a")})
        assert contraction_map(g, ["x", "y"]) == {"a": "a", "b": "a", "c": "a"}
        h = contract_edges(g, ["x", "y"])
        assert h.vertices == ("a",)
        assert h.ends("z") == ("a", "a")
        assert h.is_loop("z")

    def test_contract_parallel_edge_makes_loop(self):
        h = contract_edges(theta_graph(), ["e1"])
        assert h.vertices == ("a",)
        assert genus(h) == 2

    def test_contract_keeps_lengths(self):
        g = MetricGraph(["a", "b", "c"], {"x": ("a", "b"), "y": ("b", "c")},
                        {"x": LinearForm.var("l1"), "y": LinearForm.var("l2")})
        h = contract_edges(g, ["x"])
        assert isinstance(h, MetricGraph)
        assert h.length("y") == LinearForm.var("l2")

    def test_loop_contraction_rejected(self):
        g = Graph(["v"], {"L": ("v", "v")})
        with pytest.raises(LoopContraction):
            contract_edges(g, ["L"])

    def test_unknown_edge_rejected(self):
        with pytest.raises(TowerError):
            contract_edges(theta_graph(), ["nope"])


class TestIsomorphism:
    """Backtracking isomorphism search."""

    def test_relabelled_theta(self):
        g = theta_graph()
        h = Graph(["p", "q"], {"f1": ("q", "p"), "f2": ("p", "q"), "f3": ("q", "p")})
        iso = graph_isomorphic(g, h)
        assert iso is not None
        for half_edge in g.half_edges:
            assert h.root(iso[half_edge]) == iso[g.root(half_edge)]
            assert iso[mate(half_edge)] == mate(iso[half_edge])

    def test_different_graphs(self):
        path = Graph(["a", "b", "c"], {"x": ("a", "b"), "y": ("b", "c")})
        star = Graph(["a", "b", "c"], {"x": ("a", "b"), "y": ("a", "c")})
        assert graph_isomorphic(path, star) is not None
        triangle = Graph(["a", "b", "c"], {"x": ("a", "b"), "y": ("b", "c"), "z": ("c", "a")})
        assert graph_isomorphic(path, triangle) is None

    def test_labels_must_match(self):
        g = Graph(["a", "b"], {"x": ("a", "b")})
        h = Graph(["c", "d"], {"y": ("c", "d")})
        assert graph_isomorphic(g, h, {"a": 1, "b": 2}, {"c": 2, "d": 1}) == {
            "a": "d", "b": "c", ("x", 0): ("y", 1), ("x", 1): ("y", 0)}
        assert graph_isomorphic(g, h, {"a": 1, "b": 1}, {"c": 2, "d": 1}) is None

    @staticmethod
    def random_graph(rng):
        vertices = [f"v{i}" for i in range(rng.randint(1, 5))]
        ends = {f"e{j}": (rng.choice(vertices), rng.choice(vertices)) for j in range(rng.randint(0, 7))}
        return Graph(vertices, ends)

    @staticmethod
    def relabel(g, rng):
        """A copy with shuffled names and orders and some edges reversed."""
        names = {v: f"w{i}" for i, v in enumerate(rng.sample(list(g.vertices), len(g.vertices)))}
        edges = rng.sample(list(g.edges), len(g.edges))
        ends = {}
        for j, e in enumerate(edges):
            start, end = g.ends(e)
            ends[f"f{j}"] = (names[end], names[start]) if rng.random() < 0.5 else (names[start], names[end])
        return Graph(sorted(names.values(), key=lambda _: rng.random()), ends)

    def assert_isomorphism(self, a, b, iso):
        assert iso is not None
        assert sorted(iso[v] for v in a.vertices) == sorted(b.vertices)
        assert sorted(iso[h] for h in a.half_edges) == sorted(b.half_edges)
        for h in a.half_edges:
            assert b.root(iso[h]) == iso[a.root(h)]
            assert iso[mate(h)] == mate(iso[h])

    @pytest.mark.parametrize("seed", range(25))
    def test_reflexive(self, seed):
        g = self.random_graph(random.Random(seed))
        self.assert_isomorphism(g, g, graph_isomorphic(g, g))

    @pytest.mark.parametrize("seed", range(25))
    def test_symmetric_under_relabelling(self, seed):
        rng = random.Random(seed)
        g = self.random_graph(rng)
        h = self.relabel(g, rng)
        self.assert_isomorphism(g, h, graph_isomorphic(g, h))
        self.assert_isomorphism(h, g, graph_isomorphic(h, g))

    @pytest.mark.parametrize("seed", range(25))
    def test_agrees_in_both_directions(self, seed):
        """Two unrelated random graphs are isomorphic either both ways or neither way."""
        rng = random.Random(1000 + seed)
        a, b = self.random_graph(rng), self.random_graph(rng)
        assert (graph_isomorphic(a, b) is None) == (graph_isomorphic(b, a) is None)
