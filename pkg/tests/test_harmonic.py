#!/usr/bin/env python3
"""Tests for harmonic morphisms, double covers and towers."""

import random

import pytest

from errors import DisconnectedTarget, InvalidTower
from harmonic import (DoubleCover, FiberType, HarmonicMorphism, Tower, classify_fiber, composite,
                      contract_morphism, dashed_edges, is_generic, metrize_source, quotient_tower,
                      random_generic_tower, signed_cover, towers_isomorphic, with_source)
from symgraph import Graph, LinearForm, MetricGraph, components


def segment():
    return MetricGraph(["x", "y"], {"a": ("x", "y")}, {"a": LinearForm.var("l")})


def double_segment():
    """Two disjoint copies of the segment mapping onto it."""
    base = segment()
    mid = MetricGraph(["u0", "u1", "v0", "v1"], {"b0": ("u0", "v0"), "b1": ("u1", "v1")},
                      {"b0": LinearForm.var("l"), "b1": LinearForm.var("l")})
    return HarmonicMorphism.from_edges(mid, base, {"u0": "x", "u1": "x", "v0": "y", "v1": "y"},
                                       {"b0": ("a", False, 1), "b1": ("a", False, 1)})


class TestHarmonicMorphism:
    """Validation, degree and fibers."""

    def test_valid_map(self):
        m = double_segment()
        assert m.validate().ok
        assert m.degree() == 2
        assert m.fiber("x") == ["u0", "u1"]
        assert m(("b1", 1)) == ("a", 1)
        assert m.pullback(("a", 0)) == {("b0", 0): 1, ("b1", 0): 1}

    def test_not_harmonic(self):
        base = Graph(["x", "y"], {"a": ("x", "y")})
        mid = Graph(["u", "v"], {"b": ("u", "v")})
        m = HarmonicMorphism.from_edges(mid, base, {"u": "x", "v": "y"}, {"b": ("a", False, 1)}, {"u": 2})
        report = m.validate()
        assert not report.ok
        assert any("not harmonic" in v for v in report.violations)
        assert any("fiber sums" in v for v in report.violations)

    def test_flipped_edge(self):
        base = Graph(["x", "y"], {"a": ("x", "y")})
        mid = Graph(["u", "v"], {"b": ("v", "u")})
        m = HarmonicMorphism.from_edges(mid, base, {"u": "x", "v": "y"}, {"b": ("a", True, 1)})
        assert m(("b", 0)) == ("a", 1)
        assert m.validate().ok

    def test_root_map_must_commute(self):
        base = Graph(["x", "y"], {"a": ("x", "y")})
        mid = Graph(["u", "v"], {"b": ("u", "v")})
        m = HarmonicMorphism.from_edges(mid, base, {"u": "x", "v": "y"}, {"b": ("a", True, 1)})
        violations = m.validate().violations
        assert any("non-positive degree" in v for v in violations)
        assert any("root map" in v for v in violations)

    def test_all_violations_reported(self):
        """A zero degree does not hide the other failures."""
        base = Graph(["x", "y"], {"a": ("x", "y")})
        mid = Graph(["u", "v"], {"b": ("u", "v")})
        m = HarmonicMorphism(mid, base, {"u": "x", "v": "y", ("b", 0): ("a", 1), ("b", 1): ("a", 0)},
                             {"u": 0, "v": 1, ("b", 0): 1, ("b", 1): 1})
        report = m.validate()
        assert not report.ok
        assert "'u' has non-positive degree 0" in report.violations
        assert any("does not commute with the root map" in v for v in report.violations)
        assert any("not harmonic at ('v'" in v for v in report.violations)

    def test_missing_image_stops_early(self):
        base = Graph(["x"], {})
        mid = Graph(["u", "v"], {})
        report = HarmonicMorphism(mid, base, {"u": "x"}, {"u": 1, "v": 1}).validate()
        assert report.violations == ["'v' has no image"]

    def test_metric_compatibility(self):
        base = segment()
        mid = MetricGraph(["u", "v"], {"b": ("u", "v")}, {"b": LinearForm.var("l")})
        m = HarmonicMorphism.from_edges(mid, base, {"u": "x", "v": "y"}, {"b": ("a", False, 2)})
        assert any("length times degree" in v for v in m.validate().violations)

        fixed = with_source(m, metrize_source(m))
        assert fixed.source.length("b") == LinearForm.parse("1/2*l")
        assert fixed.validate().ok
        assert fixed.degree() == 2

    def test_degree_needs_connected_target(self):
        target = Graph(["x", "y"], {})
        m = HarmonicMorphism(target, target, {"x": "x", "y": "y"}, {"x": 1, "y": 1})
        with pytest.raises(DisconnectedTarget):
            m.degree()

    def test_composite_multiplies_degrees(self):
        bottom = double_segment()
        cover = signed_cover(bottom.source, ["b0"])
        total = composite(bottom, cover.morphism)
        assert total.validate().ok
        assert total.degree() == 4
        assert total("u0+") == "x"


class TestDoubleCover:
    """Signed covers, involutions and crossing edges."""

    def test_signed_cover(self):
        g = Graph(["p", "q", "r"], {"e": ("p", "q"), "f": ("q", "r"), "g": ("r", "p")})
        cover = signed_cover(g, ["f"])
        assert cover.validate().ok
        assert cover.is_free()
        assert cover.source.ends("f+") == ("q+", "r-")
        assert cover.iota["p+"] == "p-"
        assert dashed_edges(cover) == ["f"]
        assert len(components(cover.source)) == 1

    def test_trivial_cover_has_two_sheets(self):
        g = Graph(["p", "q"], {"e": ("p", "q"), "f": ("q", "p")})
        cover = signed_cover(g)
        assert dashed_edges(cover) == []
        assert len(components(cover.source)) == 2

    def test_unknown_dashed_edge(self):
        with pytest.raises(InvalidTower):
            signed_cover(segment(), ["zz"])

    def test_signed_cover_keeps_lengths(self):
        cover = signed_cover(segment(), ["a"])
        assert cover.source.length("a-") == LinearForm.var("l")

    def test_from_morphism_rejects_large_fibers(self):
        base = Graph(["x"], {})
        three = Graph(["a", "b", "c"], {})
        m = HarmonicMorphism(three, base, {"a": "x", "b": "x", "c": "x"}, {"a": 1, "b": 1, "c": 1})
        with pytest.raises(InvalidTower):
            DoubleCover.from_morphism(m)

    def test_from_morphism_dilated_point(self):
        base = Graph(["x"], {})
        one = Graph(["a"], {})
        cover = DoubleCover.from_morphism(HarmonicMorphism(one, base, {"a": "x"}, {"a": 2}))
        assert cover.iota == {"a": "a"}
        assert not cover.is_free()
        assert cover.validate().ok


class TestTower:
    """Tower validation, fiber types and isomorphism."""

    def test_fixture_fiber_types(self, load_tower):
        t = load_tower("ex1")
        assert t.degree() == 4
        assert classify_fiber(t, "y0").type is FiberType.I
        assert classify_fiber(t, "y0").profile == (3, 1)
        assert classify_fiber(t, "y1").type is FiberType.II
        assert classify_fiber(t, ("e3", 0)).type is FiberType.III
        assert is_generic(t).generic

    def test_bigonal_is_not_generic(self, load_tower):
        t = load_tower("bigonal")
        assert t.degree() == 2
        report = is_generic(t)
        assert not report.generic
        assert "dilation profile" in report.reason

    def test_disconnected_middle_graph(self, load_tower):
        t = load_tower("minimal")
        assert t.degree() == 4
        assert t.composite.degree() == 8
        assert len(components(t.mid)) == 4

    def test_mismatched_layers(self):
        bottom = double_segment()
        with pytest.raises(InvalidTower):
            Tower(signed_cover(segment()), bottom).validate()

    def test_self_isomorphic(self, load_tower):
        assert towers_isomorphic(load_tower("ex1"), load_tower("ex1")) is not None
        assert towers_isomorphic(load_tower("ex1"), load_tower("ex2")) is None

    def test_quotient_recovers_tower(self, load_tower):
        t = load_tower("ex2")
        q = quotient_tower(t.cover_graph, t.iota, t.composite)
        q.validate()
        assert len(q.mid.vertices) == len(t.mid.vertices)
        assert towers_isomorphic(q, t) is not None

    def test_contract_morphism(self):
        m = contract_morphism(double_segment(), ["a"])
        assert m.target.vertices == ("x",)
        assert set(m.source.vertices) == {"u0", "u1"}
        assert m.validate().ok
        assert m.degree() == 2


class TestRandomTowers:
    """Generated towers over trees."""

    @pytest.mark.parametrize("seed", range(8))
    def test_generated_towers_are_generic(self, seed):
        t = random_generic_tower(random.Random(seed), max_edges=4)
        assert t.degree() == 4
        assert is_generic(t).generic
        assert len(t.base.edges) == len(t.base.vertices) - 1

    def test_only_type_three(self):
        t = random_generic_tower(random.Random(3), max_edges=3, types=("III",), metric=False)
        assert not isinstance(t.base, MetricGraph)
        for x in t.base.vertices:
            assert classify_fiber(t, x).type is FiberType.III

    def test_seed_is_reproducible(self):
        first = random_generic_tower(random.Random(11))
        second = random_generic_tower(random.Random(11))
        assert first.mid == second.mid
        assert dashed_edges(first.top) == dashed_edges(second.top)

    def test_type_one_edge_fibers(self):
        """Over type I vertices some edges are merged into a single edge of degree 3."""
        edge_types = set()
        for seed in range(30):
            t = random_generic_tower(random.Random(seed), max_edges=4, types=("I",))
            assert t.bottom.validate().ok
            assert is_generic(t).generic
            for x in t.base.vertices:
                assert classify_fiber(t, x).type is FiberType.I
            edge_types.update(classify_fiber(t, (e, 0)).type for e in t.base.edges)
        assert FiberType.I in edge_types
        assert edge_types <= {FiberType.I, FiberType.II, FiberType.III}
