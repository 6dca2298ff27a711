#!/usr/bin/env python3
"""
Tower Files and Command Line

Reads and writes towers in the line-oriented `twr 1` format and drives
every computation from the `twr` command line.

Supports:
- Parsing with line/column diagnostics (`parse_tower`, `check_tower_text`)
- Serialization with a trailing CRC-32 checksum line (`serialize_tower`)
- DOT export of any layer of a tower
- Settings loaded from a dict, a JSON string or a JSON file
- The `twr` command line with text and JSON output

File format:

    twr 1
    lengths l1 l2
    graph K
      vertex x y
      edge a x -- y len l1
    graph G
      vertex x0 y0
      edge a0 x0 -- y0 len auto
    map f G -> K
      vertex x0 -> x deg 1
      edge a0 -> a deg 1 same
    cover C over G dashed a0
    tower T = C ; f
    checksum 1a2b3c4d
"""

import argparse
import dataclasses
import json
import logging
import os
import random
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import crcmod

from errors import (ConfigError, DimensionMismatch, InvalidTower, MalformedExpression, NotDivisible, NotSymmetric,
                    TowerError, TowerSyntaxError)
from harmonic import (DoubleCover, HarmonicMorphism, Tower, dashed_edges, metrize_source, random_generic_tower,
                      signed_cover)
from intlat import DEFAULT_BOUND, GramMatrix, congruence_search, is_positive_definite
from ngonal import (DonagiOutput, contract_tower, dimension_check, donagi_construct, is_orientable,
                    predict_connectivity, split, triality_check)
from prym import (correspondence, factor_psi, point_identity_check, prym_isomorphism_check, prym_lattice,
                  verify_polarization_doubling)
from symgraph import CONSTANT, Graph, LinearForm, MetricGraph, components

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"

# standard CRC-32; crcmod takes the preset register already xored with xorOut
_crc32 = crcmod.mkCrcFun(0x104C11DB7, initCrc=0, rev=True, xorOut=0xFFFFFFFF)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def checksum(data: Union[str, bytes]) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return f"{_crc32(data):08x}"


def _tokens(raw: str) -> List[Tuple[str, int]]:
    """Words of a line before any comment, with 1-based columns."""
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", raw.split("#", 1)[0])]


class Diagnostic(NamedTuple):
    severity: str
    message: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class ParsedTower(NamedTuple):
    tower: Tower
    name: str
    variables: Tuple[str, ...]
    diagnostics: List[Diagnostic]


@dataclass
class _GraphDecl:
    line: int
    vertices: List[str] = field(default_factory=list)
    ends: Dict[str, Tuple[str, str]] = field(default_factory=dict)
    lengths: Dict[str, Union[LinearForm, str]] = field(default_factory=dict)


@dataclass
class _MapDecl:
    line: int
    source: str
    target: str
    vertices: Dict[str, Tuple[str, Optional[int]]] = field(default_factory=dict)
    edges: Dict[str, Tuple[str, bool, int]] = field(default_factory=dict)


class _TowerParser:
    """Two passes: read statements into declarations, then build and validate."""

    def __init__(self):
        self.diagnostics: List[Diagnostic] = []
        self.variables: List[str] = []
        self.graph_decls: Dict[str, _GraphDecl] = {}
        self.map_decls: Dict[str, _MapDecl] = {}
        self.cover_decls: Dict[str, Tuple[str, List[str], int]] = {}
        self.tower_decls: List[Tuple[str, str, str, int]] = []

    def error(self, message: str, line: int, column: int = 1) -> None:
        self.diagnostics.append(Diagnostic("error", message, line, column))

    def warning(self, message: str, line: int, column: int = 1) -> None:
        logger.warning("line %d: %s", line, message)
        self.diagnostics.append(Diagnostic("warning", message, line, column))

    @property
    def failed(self) -> bool:
        return any(d.severity == "error" for d in self.diagnostics)

    def parse(self, text: str) -> Optional[ParsedTower]:
        lines = text.splitlines(keepends=True)
        body_end = self._check_checksum(lines)
        header_seen = False
        block: Optional[Callable] = None
        for number, raw in enumerate(lines[:body_end], start=1):
            tokens = _tokens(raw)
            if not tokens:
                continue
            if not header_seen:
                header_seen = True
                words = [t for t, _ in tokens]
                if words[0] != "twr":
                    self.error("file must start with 'twr 1'", number, tokens[0][1])
                elif words[1:] != [FORMAT_VERSION]:
                    self.error(f"unsupported format version {' '.join(words[1:]) or '(none)'}", number,
                               tokens[-1][1])
                continue
            if raw[:1] in (" ", "\t"):
                if block is None:
                    self.error("indented line outside a graph or map block", number, tokens[0][1])
                else:
                    block(tokens, number)
                continue
            keyword = tokens[0][0]
            if keyword == "checksum":
                self.warning("checksum line is not the last line; ignored", number, tokens[0][1])
                block = None
                continue
            handler = {"lengths": self._lengths, "graph": self._graph, "map": self._map,
                       "cover": self._cover, "tower": self._tower}.get(keyword)
            if handler is None:
                self.error(f"unknown statement '{keyword}'", number, tokens[0][1])
                block = None
            else:
                block = handler(tokens, number)
        if not header_seen:
            self.error("empty file", 1)
        if self.failed:
            return None
        return self._build()

    def _check_checksum(self, lines: List[str]) -> int:
        last = len(lines) - 1
        while last >= 0 and not lines[last].strip():
            last -= 1
        if last < 0 or not lines[last].lstrip().startswith("checksum"):
            return len(lines)
        tokens = _tokens(lines[last])
        words = [word for word, _ in tokens]
        keyword, start = tokens[0]
        column = tokens[1][1] if len(tokens) > 1 else start + len(keyword)
        expected = checksum("".join(lines[:last]))
        if len(words) != 2 or not re.fullmatch(r"[0-9a-fA-F]{8}", words[1]):
            self.error("checksum must be 8 hex digits", last + 1, column)
        elif words[1].lower() != expected:
            self.error(f"checksum mismatch: file says {words[1].lower()}, content gives {expected}", last + 1, column)
        return last

    def _lengths(self, tokens, number):
        for name, column in tokens[1:]:
            if not _NAME.fullmatch(name) or name == CONSTANT:
                self.error(f"bad length variable '{name}'", number, column)
            elif name in self.variables:
                self.error(f"length variable '{name}' declared twice", number, column)
            else:
                self.variables.append(name)
        return None

    def _graph(self, tokens, number):
        if len(tokens) != 2:
            self.error("expected 'graph <Name>'", number, tokens[0][1])
            return None
        name, column = tokens[1]
        if name in self.graph_decls:
            self.error(f"graph '{name}' declared twice", number, column)
            return None
        decl = self.graph_decls[name] = _GraphDecl(number)

        def statement(tokens, number):
            keyword = tokens[0][0]
            if keyword == "vertex":
                for vertex, column in tokens[1:]:
                    if vertex in decl.vertices:
                        self.error(f"vertex '{vertex}' declared twice", number, column)
                    else:
                        decl.vertices.append(vertex)
            elif keyword == "edge":
                self._graph_edge(decl, tokens, number)
            else:
                self.error(f"unknown graph statement '{keyword}'", number, tokens[0][1])
        return statement

    def _graph_edge(self, decl: _GraphDecl, tokens, number) -> None:
        words = [t for t, _ in tokens]
        if len(words) not in (5, 7) or words[3] != "--" or (len(words) == 7 and words[5] != "len"):
            self.error("expected 'edge <id> <v1> -- <v2> [len <length>]'", number, tokens[0][1])
            return
        name = words[1]
        if name in decl.ends:
            self.error(f"edge '{name}' declared twice", number, tokens[1][1])
            return
        for index in (2, 4):
            if words[index] not in decl.vertices:
                self.error(f"unknown vertex '{words[index]}'", number, tokens[index][1])
                return
        decl.ends[name] = (words[2], words[4])
        if len(words) == 7:
            text, column = tokens[6]
            if text == "auto":
                decl.lengths[name] = "auto"
                return
            try:
                length = LinearForm.parse(text, self.variables)
            except MalformedExpression as err:
                self.error(f"bad length: {err}", number, column)
                return
            if not length.is_positive():
                self.error(f"length must be positive, got {length.format()}", number, column)
                return
            decl.lengths[name] = length

    def _map(self, tokens, number):
        words = [t for t, _ in tokens]
        if len(words) != 5 or words[3] != "->":
            self.error("expected 'map <name> <Src> -> <Dst>'", number, tokens[0][1])
            return None
        name = words[1]
        if name in self.map_decls or name in self.cover_decls:
            self.error(f"'{name}' declared twice", number, tokens[1][1])
            return None
        for index in (2, 4):
            if words[index] not in self.graph_decls:
                self.error(f"unknown graph '{words[index]}'", number, tokens[index][1])
                return None
        decl = self.map_decls[name] = _MapDecl(number, words[2], words[4])
        source, target = self.graph_decls[decl.source], self.graph_decls[decl.target]

        def statement(tokens, number):
            words = [t for t, _ in tokens]
            if words[0] == "vertex":
                if len(words) not in (4, 6) or words[2] != "->" or (len(words) == 6 and words[4] != "deg"):
                    self.error("expected 'vertex <id> -> <id> [deg <k>]'", number, tokens[0][1])
                    return
                if words[1] not in source.vertices:
                    self.error(f"unknown vertex '{words[1]}' of {decl.source}", number, tokens[1][1])
                elif words[3] not in target.vertices:
                    self.error(f"unknown vertex '{words[3]}' of {decl.target}", number, tokens[3][1])
                else:
                    degree = self._degree(tokens[5], number) if len(words) == 6 else None
                    decl.vertices[words[1]] = (words[3], degree)
            elif words[0] == "edge":
                if len(words) == 6 and words[2] == "->" and words[4] == "deg":
                    self.error("ambiguous orientation: add 'same' or 'flip'", number, tokens[-1][1])
                    return
                if len(words) != 7 or words[2] != "->" or words[4] != "deg":
                    self.error("expected 'edge <id> -> <id> deg <k> <same|flip>'", number, tokens[0][1])
                    return
                if words[6] not in ("same", "flip"):
                    self.error("edge orientation must be 'same' or 'flip'", number, tokens[6][1])
                elif words[1] not in source.ends:
                    self.error(f"unknown edge '{words[1]}' of {decl.source}", number, tokens[1][1])
                elif words[3] not in target.ends:
                    self.error(f"unknown edge '{words[3]}' of {decl.target}", number, tokens[3][1])
                else:
                    degree = self._degree(tokens[5], number)
                    if degree is not None:
                        decl.edges[words[1]] = (words[3], words[6] == "flip", degree)
            else:
                self.error(f"unknown map statement '{words[0]}'", number, tokens[0][1])
        return statement

    def _degree(self, token, number) -> Optional[int]:
        text, column = token
        if not re.fullmatch(r"-?[0-9]+", text):
            self.error(f"degree must be an integer, got '{text}'", number, column)
            return None
        if int(text) <= 0:
            self.error("degree must be positive", number, column)
            return None
        return int(text)

    def _cover(self, tokens, number):
        words = [t for t, _ in tokens]
        if len(words) < 4 or words[2] != "over" or (len(words) > 4 and words[4] != "dashed"):
            self.error("expected 'cover <name> over <Graph> [dashed <edge>...]'", number, tokens[0][1])
            return None
        name, graph = words[1], words[3]
        if name in self.map_decls or name in self.cover_decls:
            self.error(f"'{name}' declared twice", number, tokens[1][1])
        elif graph not in self.graph_decls:
            self.error(f"unknown graph '{graph}'", number, tokens[3][1])
        else:
            dashed = []
            for edge, column in tokens[5:]:
                if edge not in self.graph_decls[graph].ends:
                    self.error(f"unknown edge '{edge}' of {graph}", number, column)
                dashed.append(edge)
            self.cover_decls[name] = (graph, dashed, number)
        return None

    def _tower(self, tokens, number):
        words = [t for t, _ in tokens]
        if len(words) != 6 or words[2] != "=" or words[4] != ";":
            self.error("expected 'tower <name> = <cover-or-map> ; <map>'", number, tokens[0][1])
            return None
        if words[3] not in self.cover_decls and words[3] not in self.map_decls:
            self.error(f"unknown cover or map '{words[3]}'", number, tokens[3][1])
        elif words[5] not in self.map_decls:
            self.error(f"unknown map '{words[5]}'", number, tokens[5][1])
        else:
            self.tower_decls.append((words[1], words[3], words[5], number))
        return None

    def _build(self) -> Optional[ParsedTower]:
        if len(self.tower_decls) != 1:
            self.error(f"expected exactly one tower statement, found {len(self.tower_decls)}", 1)
            return None
        graphs = self._build_graphs()
        if graphs is None:
            return None

        maps: Dict[str, HarmonicMorphism] = {}
        for name, decl in self.map_decls.items():
            source, target = graphs[decl.source], graphs[decl.target]
            morphism = self._build_map(name, decl, source, target)
            if morphism is None:
                continue
            report = morphism.validate()
            for violation in report.violations:
                self.error(f"map {name}: {violation}", decl.line)
            maps[name] = morphism

        covers: Dict[str, DoubleCover] = {}
        for name, (graph, dashed, line) in self.cover_decls.items():
            covers[name] = signed_cover(graphs[graph], dashed)
        if self.failed:
            return None

        name, top_name, bottom_name, line = self.tower_decls[0]
        try:
            top = covers[top_name] if top_name in covers else DoubleCover.from_morphism(maps[top_name])
            tower = Tower(top, maps[bottom_name])
            tower.validate()
        except InvalidTower as err:
            self.error(f"tower {name}: {err}", line)
            return None
        logger.debug("parsed tower %s: %r", name, tower)
        return ParsedTower(tower, name, tuple(self.variables), list(self.diagnostics))

    def _build_map(self, name: str, decl: _MapDecl, source: Graph, target: Graph) -> Optional[HarmonicMorphism]:
        missing = [v for v in source.vertices if v not in decl.vertices]
        missing += [e for e in source.edges if e not in decl.edges]
        if missing:
            self.error(f"map {name} does not map {', '.join(missing)}", decl.line)
            return None
        vertex_map = {v: image for v, (image, _) in decl.vertices.items()}
        vertex_deg = {v: degree for v, (_, degree) in decl.vertices.items() if degree is not None}
        return HarmonicMorphism.from_edges(source, target, vertex_map, decl.edges, vertex_deg)

    def _build_graphs(self) -> Optional[Dict[str, Graph]]:
        graphs: Dict[str, Graph] = {}
        pending = []
        for name, decl in self.graph_decls.items():
            try:
                plain = Graph(decl.vertices, decl.ends)
            except TowerError as err:
                self.error(f"graph {name}: {err}", decl.line)
                continue
            kinds = {"auto" if value == "auto" else "explicit" for value in decl.lengths.values()}
            if decl.lengths and len(decl.lengths) != len(decl.ends):
                self.error(f"graph {name}: every edge needs a length once one has", decl.line)
            elif len(kinds) > 1:
                self.error(f"graph {name}: lengths must be all explicit or all auto", decl.line)
            elif not decl.ends:
                graphs[name] = MetricGraph.from_graph(plain, {})
            elif kinds == {"explicit"}:
                graphs[name] = MetricGraph.from_graph(plain, decl.lengths)
            elif kinds == {"auto"}:
                graphs[name] = plain
                pending.append(name)
            else:
                graphs[name] = plain
        if self.failed:
            return None

        while pending:
            progress = False
            for name in list(pending):
                for map_name, decl in self.map_decls.items():
                    target = graphs[decl.target]
                    if decl.source != name or decl.target in pending or not isinstance(target, MetricGraph):
                        continue
                    morphism = self._build_map(map_name, decl, graphs[name], target)
                    if morphism is None:
                        return None
                    graphs[name] = metrize_source(morphism)
                    pending.remove(name)
                    progress = True
                    break
            if not progress:
                for name in pending:
                    self.error(f"graph {name}: 'len auto' needs a map from {name} to a metric graph",
                               self.graph_decls[name].line)
                return None
        return graphs


def check_tower_text(text: str) -> List[Diagnostic]:
    """Every diagnostic the parser finds, without raising."""
    parser = _TowerParser()
    parser.parse(text)
    return parser.diagnostics


def parse_tower_file(text: str) -> ParsedTower:
    """Parse tower text, keeping its name, declared variables and warnings.

    Raises:
        TowerSyntaxError: If the text has errors; carries every diagnostic
    """
    parser = _TowerParser()
    parsed = parser.parse(text)
    if parsed is None:
        errors = [d for d in parser.diagnostics if d.severity == "error"]
        raise TowerSyntaxError("; ".join(str(d) for d in errors[:5]), parser.diagnostics)
    return parsed


def parse_tower(text: str) -> Tower:
    return parse_tower_file(text).tower


def read_tower(path: str) -> ParsedTower:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as err:
        raise TowerSyntaxError(f"cannot read tower file {path}: {err}") from err
    return parse_tower_file(text)


def _length_variables(t: Tower) -> List[str]:
    names = set()
    if isinstance(t.base, MetricGraph):
        for length in t.base.lengths.values():
            names.update(var for var in length.variables if var != CONSTANT)
    return sorted(names)


def _graph_lines(name: str, g: Graph, order: Sequence[str]) -> List[str]:
    lines = [f"graph {name}\n"]
    if g.vertices:
        lines.append("  vertex " + " ".join(g.vertices) + "\n")
    for edge in g.edges:
        start, end = g.ends(edge)
        length = f" len {g.length(edge).format(order)}" if isinstance(g, MetricGraph) else ""
        lines.append(f"  edge {edge} {start} -- {end}{length}\n")
    return lines


def _map_lines(name: str, m: HarmonicMorphism, source: str, target: str) -> List[str]:
    lines = [f"map {name} {source} -> {target}\n"]
    for v in m.source.vertices:
        lines.append(f"  vertex {v} -> {m(v)} deg {m.deg(v)}\n")
    for edge in m.source.edges:
        image, end = m((edge, 0))
        lines.append(f"  edge {edge} -> {image} deg {m.deg((edge, 0))} {'flip' if end else 'same'}\n")
    return lines


def serialize_tower(t: Tower, name: str = "T", variables: Sequence[str] = None) -> str:
    """Write a tower as `twr 1` text ending in a checksum line."""
    order = list(variables) if variables is not None else _length_variables(t)
    lines = [f"twr {FORMAT_VERSION}\n"]
    if order:
        lines.append("lengths " + " ".join(order) + "\n")
    lines += _graph_lines("K", t.base, order)
    lines += _graph_lines("G", t.mid, order)
    lines += _graph_lines("GT", t.cover_graph, order)
    lines += _map_lines("f", t.bottom, "G", "K")
    lines += _map_lines("pi", t.top.morphism, "GT", "G")
    lines.append(f"tower {name} = pi ; f\n")
    body = "".join(lines)
    return body + f"checksum {checksum(body)}\n"


def write_tower(t: Tower, path: str, name: str = "T", variables: Sequence[str] = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_tower(t, name, variables))


LAYERS = ("base", "mid", "top")


def export_dot(obj: Union[Tower, DonagiOutput], layer: str = "mid") -> str:
    """DOT text for one layer; pen width is the local degree down to the next layer."""
    t = obj.as_tower() if isinstance(obj, DonagiOutput) else obj
    if layer == "base":
        g, degree, dashed = t.base, (lambda p: 1), set()
    elif layer == "mid":
        g, degree, dashed = t.mid, t.bottom.deg, set(dashed_edges(t.top)) if t.top.is_free() else set()
    elif layer == "top":
        crossing = set(dashed_edges(t.top)) if t.top.is_free() else set()
        g, degree = t.cover_graph, t.top.morphism.deg
        dashed = {e for e in g.edges if t.top.morphism((e, 0))[0] in crossing}
    else:
        raise TowerError(f"unknown layer '{layer}', expected one of {', '.join(LAYERS)}")

    lines = [f"graph {layer} {{", "  node [shape=circle];"]
    for v in g.vertices:
        lines.append(f"  {json.dumps(v)} [penwidth={degree(v)}];")
    for e in g.edges:
        start, end = g.ends(e)
        attributes = [f"label={json.dumps(e)}", f"penwidth={degree((e, 0))}"]
        if e in dashed:
            attributes.append("style=dashed")
        lines.append(f"  {json.dumps(start)} -- {json.dumps(end)} [{', '.join(attributes)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass
class Settings:
    """Run settings.

    Attributes:
        congruence_bound: Entry bound for unimodular congruence searches
        random_seed: Seed for generated towers
        positivity_assignment: Lengths used for definiteness checks; missing variables are 1
        log_level: Logging level name when neither --verbose nor --quiet is given
    """
    congruence_bound: int = DEFAULT_BOUND
    random_seed: int = 0
    positivity_assignment: Dict[str, Any] = field(default_factory=dict)
    log_level: str = "WARNING"


def load_settings(source: Union[str, Dict[str, Any], None] = None) -> Settings:
    """Load settings from a dict, a JSON string or the path of a JSON file.

    Raises:
        ConfigError: If the source cannot be read or has unknown keys
    """
    if source is None:
        return Settings()
    try:
        if isinstance(source, dict):
            values = source
        elif isinstance(source, str):
            source = source.strip()
            if source.startswith("{") and source.endswith("}"):
                values = json.loads(source)
            else:
                with open(source, "r", encoding="utf-8") as f:
                    values = json.load(f)
        else:
            raise ConfigError(f"Unsupported settings source type: {type(source)}")
    except FileNotFoundError as err:
        raise ConfigError(f"Settings file not found: {source}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"Invalid JSON in settings: {err}") from err
    if not isinstance(values, dict):
        raise ConfigError("Settings must be a JSON object")
    known = {f.name for f in dataclasses.fields(Settings)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown settings: {', '.join(unknown)}")
    settings = Settings(**values)
    if not isinstance(settings.congruence_bound, int) or settings.congruence_bound < 0:
        raise ConfigError("congruence_bound must be a non-negative integer")
    return settings


class CommandResult(NamedTuple):
    status: str
    lines: List[str]
    data: Dict[str, Any]

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "ok" else 1


def _matrix(m) -> List[List[int]]:
    return [[int(x) for x in row] for row in m.tolist()]


def _unit_assignment(settings: Settings, variables: Sequence[str]) -> Dict[str, Any]:
    return {var: settings.positivity_assignment.get(var, 1) for var in variables}


def _cmd_validate(args, settings) -> CommandResult:
    parsed = read_tower(args.file)
    t = parsed.tower
    lines = [f"valid tower {parsed.name}: degree {t.degree()}, "
             f"|V| {len(t.base.vertices)}/{len(t.mid.vertices)}/{len(t.cover_graph.vertices)}"]
    return CommandResult("ok", lines, {"name": parsed.name, "degree": t.degree()})


def _cmd_construct(args, settings) -> CommandResult:
    parsed = read_tower(args.file)
    output = donagi_construct(parsed.tower, args.n)
    os.makedirs(args.out, exist_ok=True)
    written = []
    if args.split:
        for i, tower in enumerate(split(parsed.tower, output)):
            path = os.path.join(args.out, f"out{i + 1}.twr")
            write_tower(tower, path, f"out{i + 1}", parsed.variables)
            written.append(path)
    else:
        path = os.path.join(args.out, "p.twr")
        write_tower(output.as_tower(), path, "P", parsed.variables)
        written.append(path)
    lines = [f"wrote {path}" for path in written]
    return CommandResult("ok", lines, {"files": written, "vertices": len(output.graph.vertices),
                                       "components": len(components(output.graph))})


def _cmd_orientable(args, settings) -> CommandResult:
    orientable = is_orientable(read_tower(args.file).tower)
    return CommandResult("ok", ["orientable" if orientable else "non-orientable"], {"orientable": orientable})


def _cmd_triality(args, settings) -> CommandResult:
    report = triality_check(read_tower(args.file).tower)
    status = "ok" if report.passed else "failed"
    return CommandResult(status, report.details + [f"triality {'passed' if report.passed else 'failed'}"],
                         {"passed": report.passed, "details": report.details})


def _cmd_gram(args, settings) -> CommandResult:
    parsed = read_tower(args.file)
    t = parsed.tower
    if args.of != "input":
        t = split(t)[int(args.of[-1]) - 1]
    gram = prym_lattice(t.top).gram
    text = gram.format(parsed.variables)
    return CommandResult("ok", [text], {"gram": text, "rank": gram.dimension})


def _read_gram(path: str) -> GramMatrix:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return GramMatrix.parse(f.read())
    except OSError as err:
        raise TowerSyntaxError(f"cannot read Gram matrix {path}: {err}") from err
    except (DimensionMismatch, MalformedExpression, NotSymmetric) as err:
        raise TowerSyntaxError(f"bad Gram matrix in {path}: {err}") from err


def _cmd_congruent(args, settings) -> CommandResult:
    bound = args.bound if args.bound is not None else settings.congruence_bound
    witness = congruence_search(_read_gram(args.g1), _read_gram(args.g2), bound)
    if witness is None:
        return CommandResult("failed", [f"none within bound {bound}"], {"witness": None, "bound": bound})
    return CommandResult("ok", [str(_matrix(witness))], {"witness": _matrix(witness), "bound": bound})


def _cmd_psi(args, settings) -> CommandResult:
    try:
        report = prym_isomorphism_check(read_tower(args.file).tower)
    except NotDivisible as err:
        lines = [f"NotDivisible: {err}", f"direction {err.direction}, element {err.element}, image {err.image}"]
        return CommandResult("failed", lines, {"divisible": False, "direction": err.direction,
                                               "element": [int(x) for x in err.element],
                                               "image": [int(x) for x in err.image]})
    status = "ok" if report.passed else "failed"
    return CommandResult(status, report.details, {
        "divisible": True, "base_is_tree": report.base_is_tree,
        "psi": [_matrix(w.psi) for w in report.witnesses],
        "isometry": [w.isometry for w in report.witnesses]})


def _cmd_contract(args, settings) -> CommandResult:
    parsed = read_tower(args.file)
    tower = contract_tower(parsed.tower, args.edge)
    write_tower(tower, args.out, parsed.name, parsed.variables)
    return CommandResult("ok", [f"wrote {args.out}"], {"file": args.out, "free": tower.top.is_free()})


def _cmd_predict(args, settings) -> CommandResult:
    prediction = predict_connectivity(read_tower(args.file).tower)
    lines = [f"group order {prediction.group_order}",
             f"top components: predicted {prediction.predicted_cover_components}, "
             f"actual {prediction.actual_cover_components}",
             f"divisor graph components: predicted {prediction.predicted_donagi_components}, "
             f"actual {prediction.actual_donagi_components}"]
    return CommandResult("ok" if prediction.matches else "failed", lines, prediction._asdict())


def _cmd_dot(args, settings) -> CommandResult:
    text = export_dot(read_tower(args.file).tower, args.layer)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        return CommandResult("ok", [f"wrote {args.out}"], {"file": args.out})
    return CommandResult("ok", [text.rstrip("\n")], {"dot": text})


def _cmd_check(args, settings) -> CommandResult:
    parsed = read_tower(args.file)
    t = parsed.tower
    p = prym_lattice(t.top)
    results: Dict[str, bool] = {}
    results["input gram positive definite"] = (
        p.rank == 0 or is_positive_definite(p.gram.specialize(_unit_assignment(settings, parsed.variables))))
    dimensions = dimension_check(t)
    results["dimensions equal"] = dimensions.equal
    base_is_tree = len(t.base.edges) == len(t.base.vertices) - 1
    for i, out in enumerate(split(t)):
        prefix = f"output {i + 1}"
        p1 = prym_lattice(out.top)
        corr = correspondence(t, out)
        results[f"{prefix}: point identities"] = point_identity_check(corr).ok
        results[f"{prefix}: 4 Id and doubled polarization"] = verify_polarization_doubling(corr, p, p1).passed
        if base_is_tree:
            psi = factor_psi(corr, p, p1)
            results[f"{prefix}: psi isometry"] = p.gram.transform(psi) == p1.gram
    lines = [f"{name}: {'ok' if ok else 'FAILED'}" for name, ok in results.items()]
    if not base_is_tree:
        lines.append("psi: skipped, base is not a tree")
    passed = all(results.values())
    return CommandResult("ok" if passed else "failed", lines, {"checks": results, "passed": passed})


def _cmd_sample(args, settings) -> CommandResult:
    seed = args.seed if args.seed is not None else settings.random_seed
    tower = random_generic_tower(random.Random(seed), max_edges=args.max_edges)
    write_tower(tower, args.out, "T")
    return CommandResult("ok", [f"wrote {args.out}"], {"file": args.out, "seed": seed})


COMMANDS = {
    "validate": _cmd_validate,
    "construct": _cmd_construct,
    "orientable": _cmd_orientable,
    "triality": _cmd_triality,
    "gram": _cmd_gram,
    "congruent": _cmd_congruent,
    "psi": _cmd_psi,
    "contract": _cmd_contract,
    "predict": _cmd_predict,
    "dot": _cmd_dot,
    "check": _cmd_check,
    "sample": _cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twr", description="Tetragonal towers of graph covers")
    parser.add_argument("--json", action="store_true", help="print one JSON object")
    parser.add_argument("--config", help="settings as a JSON file")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="parse and validate a tower").add_argument("file")
    construct = sub.add_parser("construct", help="n-gonal construction")
    construct.add_argument("file")
    construct.add_argument("--n", type=int, default=None)
    construct.add_argument("--out", required=True, help="output directory")
    construct.add_argument("--split", action="store_true", help="write the two split towers")
    sub.add_parser("orientable", help="orientability of the construction").add_argument("file")
    sub.add_parser("triality", help="verify triality").add_argument("file")
    gram = sub.add_parser("gram", help="Prym Gram matrix")
    gram.add_argument("file")
    gram.add_argument("--of", choices=("input", "out1", "out2"), default="input")
    congruent = sub.add_parser("congruent", help="unimodular congruence of two Gram matrices")
    congruent.add_argument("g1")
    congruent.add_argument("g2")
    congruent.add_argument("--bound", type=int, default=None)
    sub.add_parser("psi", help="Prym isomorphisms to both outputs").add_argument("file")
    contract = sub.add_parser("contract", help="contract a base edge")
    contract.add_argument("file")
    contract.add_argument("--edge", required=True)
    contract.add_argument("--out", required=True)
    sub.add_parser("predict", help="connectivity prediction from sheet gluings").add_argument("file")
    dot = sub.add_parser("dot", help="DOT export")
    dot.add_argument("file")
    dot.add_argument("--layer", choices=LAYERS, default="mid")
    dot.add_argument("--out")
    sub.add_parser("check", help="correspondence identities and dimensions").add_argument("file")
    sample = sub.add_parser("sample", help="write a random generic tower over a tree")
    sample.add_argument("--out", required=True)
    sample.add_argument("--seed", type=int, default=None)
    sample.add_argument("--max-edges", type=int, default=6)
    return parser


def _configure_logging(args, settings: Settings) -> None:
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    else:
        level = getattr(logging, str(settings.log_level).upper(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _emit_json(args, result: CommandResult, diagnostics: List[str]) -> None:
    data = result.data
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    payload = {
        "command": args.command,
        "input": getattr(args, "file", None) or [getattr(args, "g1", None), getattr(args, "g2", None)],
        "status": result.status,
        "data": data,
        "diagnostics": diagnostics,
        "checksum": checksum(canonical),
    }
    print(json.dumps(payload, sort_keys=True, default=str))


def main(argv: Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.config)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    _configure_logging(args, settings)

    try:
        result = COMMANDS[args.command](args, settings)
        diagnostics = []
    except TowerError as err:
        found = getattr(err, "diagnostics", None) or []
        diagnostics = [str(d) for d in found] or [f"{type(err).__name__}: {err}"]
        result = CommandResult("error", [], {})
        if not args.json:
            for line in diagnostics:
                print(line, file=sys.stderr)

    if args.json:
        _emit_json(args, result, diagnostics)
    else:
        for line in result.lines:
            print(line)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
