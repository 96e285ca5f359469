"""System-definition files (YAML). Every error names the field and line.

Layout::

    name: my_system                     # optional
    graph:
      vertex_count: 2
      edges: [[1, 2], [1, 1], [2, 1]]   # (initial, terminal), 1-based; edge ids 0..|E|-1
    space:
      dimension: 2
      metric: L1                        # L1 | L2 | Linf
    regions:                            # one per vertex
      - {vertex: 1, shape: halfspace, normal: [0, 1], offset: 1/2, orientation: ge}
      - {vertex: 2, shape: box, lower: [-4, -4], upper: [4, -1/2]}
      # or {vertex: k, shape: full}
    maps:                               # one per edge
      - {edge: 0, linear: [a11, a12, a21, a22], offset: [b1, b2], pre_abs: [true, false]}
    probabilities:                      # one per edge
      - {edge: 0, form: constant, value: 1/2}
      - {edge: 1, form: sin2, scale: 1/15, value: 53/105}   # scale*sin^2|x| + value
    anchors: [[0, 1], [0, -1]]
    declared_rate: 209/210
    bbox: {lower: [-8, -8], upper: [8, 8]}  # optional sampling box

Numbers may be written as fractions in strings (``1/3``, ``-3/2``).
``linear`` is row-major, either flat or nested; ``pre_abs`` is a bool or one
bool per coordinate.
"""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .graph import DirectedMultigraph, StructuralError
from .system import (
    Box,
    EdgeMap,
    FullSpace,
    HalfSpace,
    MarkovSystem,
    MetricSpace,
    ProbabilityFunction,
)


class ConfigError(ValueError):
    def __init__(self, field: str, line: int | None, message: str, source: str = "<config>"):
        where = f" line {line}:" if line is not None else ""
        super().__init__(f"{source}:{where} field '{field}': {message}")
        self.field = field
        self.line = line


class _Node:
    """YAML node with its dotted field path and 1-based line number."""

    def __init__(self, node, path: str, source: str):
        self.node = node
        self.path = path
        self.source = source

    @property
    def line(self) -> int:
        return self.node.start_mark.line + 1

    def fail(self, message: str):
        raise ConfigError(self.path or "<root>", self.line, message, self.source)

    def _is(self, kind) -> bool:
        return isinstance(self.node, kind)

    def keys(self) -> list[str]:
        if not self._is(yaml.MappingNode):
            self.fail("expected a mapping")
        return [k.value for k, _ in self.node.value]

    def get(self, key: str, required: bool = True):
        if not self._is(yaml.MappingNode):
            self.fail("expected a mapping")
        for k, v in self.node.value:
            if k.value == key:
                return _Node(v, f"{self.path}.{key}" if self.path else key, self.source)
        if required:
            raise ConfigError(f"{self.path}.{key}" if self.path else key, self.line, "missing required field", self.source)
        return None

    def items(self) -> list["_Node"]:
        if not self._is(yaml.SequenceNode):
            self.fail("expected a list")
        return [_Node(v, f"{self.path}[{i}]", self.source) for i, v in enumerate(self.node.value)]

    def text(self) -> str:
        if not self._is(yaml.ScalarNode):
            self.fail("expected a scalar")
        return str(self.node.value)

    def number(self) -> float:
        raw = self.text().strip()
        try:
            return float(Fraction(raw))
        except (ValueError, ZeroDivisionError):
            try:
                return float(raw)
            except ValueError:
                self.fail(f"not a number: {raw!r}")

    def integer(self) -> int:
        raw = self.text().strip()
        try:
            return int(raw)
        except ValueError:
            self.fail(f"not an integer: {raw!r}")

    def boolean(self) -> bool:
        raw = self.text().strip().lower()
        if raw in ("true", "yes", "1"):
            return True
        if raw in ("false", "no", "0"):
            return False
        self.fail(f"not a boolean: {raw!r}")

    def vector(self, length: int | None = None) -> list[float]:
        if self._is(yaml.ScalarNode):
            out = [self.number()]
        else:
            out = []
            for it in self.items():
                if it._is(yaml.SequenceNode):
                    out.extend(it.vector())
                else:
                    out.append(it.number())
        if length is not None and len(out) != length:
            self.fail(f"expected {length} numbers, got {len(out)}")
        return out


def _indexed(parent: _Node, key: str, index_key: str, count: int) -> list[_Node]:
    """Entries of a list keyed by ``index_key``; each index exactly once."""
    entries = parent.get(key).items()
    slots: list = [None] * count
    offset = 1 if index_key == "vertex" else 0
    for ent in entries:
        idx = ent.get(index_key).integer()
        if not 0 <= idx - offset < count:
            ent.get(index_key).fail(f"{index_key} {idx} out of range")
        if slots[idx - offset] is not None:
            ent.get(index_key).fail(f"duplicate {index_key} {idx}")
        slots[idx - offset] = ent
    for i, sl in enumerate(slots):
        if sl is None:
            parent.get(key).fail(f"no entry for {index_key} {i + offset}")
    return slots


def _region(n: _Node, d: int):
    shape = n.get("shape").text()
    if shape == "full":
        return FullSpace()
    if shape == "box":
        lo, hi = n.get("lower").vector(d), n.get("upper").vector(d)
        if any(a > b for a, b in zip(lo, hi)):
            n.get("upper").fail("box needs lower <= upper")
        return Box(lo, hi)
    if shape == "halfspace":
        normal = n.get("normal").vector(d)
        if not any(normal):
            n.get("normal").fail("normal must be nonzero")
        o = n.get("orientation", required=False)
        orient = o.text() if o is not None else "ge"
        if orient not in ("ge", "le"):
            o.fail("orientation must be 'ge' or 'le'")
        return HalfSpace(normal, n.get("offset").number(), orient)
    n.get("shape").fail(f"unknown shape {shape!r} (box, halfspace, full)")


def _map(n: _Node, d: int) -> EdgeMap:
    linear = n.get("linear").vector(d * d)
    offset = n.get("offset").vector(d)
    pa = n.get("pre_abs", required=False)
    if pa is None:
        flags = [False] * d
    elif pa._is(yaml.ScalarNode):
        flags = [pa.boolean()] * d
    else:
        items = pa.items()
        if len(items) != d:
            pa.fail(f"expected {d} flags")
        flags = [it.boolean() for it in items]
    return EdgeMap(np.array(linear).reshape(d, d), offset, tuple(flags))


def _probability(n: _Node) -> ProbabilityFunction:
    form = n.get("form").text()
    if form not in ("constant", "sin2", "cos2"):
        n.get("form").fail(f"unknown form {form!r} (constant, sin2, cos2)")
    value = n.get("value").number()
    scale = n.get("scale").number() if form != "constant" else 0.0
    try:
        return ProbabilityFunction(form, value, scale)
    except ValueError as exc:
        n.fail(str(exc))


def parse_system(text: str, source: str = "<config>") -> MarkovSystem:
    try:
        root_node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<syntax>", mark.line + 1 if mark else None, str(exc).splitlines()[0], source)
    if root_node is None:
        raise ConfigError("<root>", 1, "empty config", source)
    root = _Node(root_node, "", source)

    g = root.get("graph")
    vc = g.get("vertex_count")
    edges_node = g.get("edges")
    edges = []
    for it in edges_node.items():
        pair = it.vector(2)
        edges.append((int(pair[0]), int(pair[1])))
    try:
        graph = DirectedMultigraph(vc.integer(), tuple(edges))
    except StructuralError as exc:
        edges_node.fail(str(exc))

    sp = root.get("space")
    dim = sp.get("dimension").integer()
    if dim < 1:
        sp.get("dimension").fail("dimension must be positive")
    metric_node = sp.get("metric", required=False)
    metric = metric_node.text() if metric_node is not None else "L2"
    if metric not in ("L1", "L2", "Linf"):
        metric_node.fail("metric must be L1, L2 or Linf")
    space = MetricSpace(dim, metric)

    regions = [_region(n, dim) for n in _indexed(root, "regions", "vertex", graph.vertex_count)]
    maps = [_map(n, dim) for n in _indexed(root, "maps", "edge", graph.edge_count)]
    probs = [_probability(n) for n in _indexed(root, "probabilities", "edge", graph.edge_count)]

    anchors_node = root.get("anchors")
    anchor_items = anchors_node.items()
    if len(anchor_items) != graph.vertex_count:
        anchors_node.fail(f"need {graph.vertex_count} anchors, got {len(anchor_items)}")
    anchors = [it.vector(dim) for it in anchor_items]
    for v, (a, it) in enumerate(zip(anchors, anchor_items), start=1):
        if not regions[v - 1].contains(np.array([a]))[0]:
            it.fail(f"anchor {a} is not inside K_{v}")

    rate_node = root.get("declared_rate")
    rate = rate_node.number()
    if not 0 < rate < 1:
        rate_node.fail("declared_rate must lie in (0, 1)")

    bbox = None
    bb = root.get("bbox", required=False)
    if bb is not None:
        lo, hi = bb.get("lower").vector(dim), bb.get("upper").vector(dim)
        if any(a > b for a, b in zip(lo, hi)):
            bb.get("upper").fail("bbox needs lower <= upper")
        bbox = (lo, hi)

    name_node = root.get("name", required=False)
    name = name_node.text() if name_node is not None else Path(source).stem
    try:
        return MarkovSystem(graph, space, tuple(regions), tuple(maps), tuple(probs), anchors, rate, bbox, name)
    except ValueError as exc:
        root.fail(str(exc))


def load_system(path) -> MarkovSystem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", None, f"cannot read: {exc}", str(path))
    return parse_system(text, str(path))
