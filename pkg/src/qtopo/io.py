"""Problem and run-config files (YAML).

Problem file layout::

    nodes:                       # ids 0..N-1, optional coordinates
      - {id: 0, xy: [0.0, 0.0]}
    edges:
      - {a: 0, b: 2, length: 1.0}
    materials: {lambda: 1.0, epsilon: 0.1}
    roles: {source: 0, target: 1, base: 2}
"""
from __future__ import annotations

import json
from pathlib import Path

import yaml
from yaml.constructor import SafeConstructor
from yaml.nodes import MappingNode, Node, ScalarNode, SequenceNode

from .model import CANONICAL, Edge, GroundStructure, ModelError

PACKAGED = Path(__file__).with_name("problems")


class ProblemParseError(ValueError):
    def __init__(self, message: str, source: str = "<problem>", line: int | None = None,
                 column: int | None = None):
        self.source, self.line, self.column = source, line, column
        where = source if line is None else f"{source}:{line}:{column}"
        super().__init__(f"{where}: {message}")


class _Reader:
    def __init__(self, source: str):
        self.source = source
        self._ctor = SafeConstructor()

    def fail(self, node: Node | None, message: str):
        if node is None:
            raise ProblemParseError(message, self.source)
        mark = node.start_mark
        raise ProblemParseError(message, self.source, mark.line + 1, mark.column + 1)

    def value(self, node: Node):
        return self._ctor.construct_object(node, deep=True)

    def mapping(self, node: Node, what: str, allowed: set[str], required: set[str] = frozenset()):
        if not isinstance(node, MappingNode):
            self.fail(node, f"{what} must be a mapping")
        out = {}
        for k, v in node.value:
            key = self.value(k)
            if key not in allowed:
                self.fail(k, f"unknown field {key!r} in {what}")
            if key in out:
                self.fail(k, f"duplicate field {key!r} in {what}")
            out[key] = v
        for key in sorted(required - out.keys()):
            self.fail(node, f"{what} is missing field {key!r}")
        return out

    def number(self, node: Node, what: str, kind=float):
        v = self.value(node) if isinstance(node, ScalarNode) else None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)):
            self.fail(node, f"{what} must be {'an integer' if kind is int else 'a number'}")
        return kind(v)


def parse_problem(text: str, source: str = "<problem>") -> GroundStructure:
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ProblemParseError(f"YAML syntax error: {exc.problem}", source, line, col) from exc
    r = _Reader(source)
    if root is None:
        r.fail(None, "empty problem file")
    top = r.mapping(root, "problem", {"name", "nodes", "edges", "materials", "roles"},
                    {"nodes", "edges", "materials", "roles"})

    if not isinstance(top["nodes"], SequenceNode):
        r.fail(top["nodes"], "nodes must be a list")
    ids, coords = [], {}
    for item in top["nodes"].value:
        if isinstance(item, MappingNode):
            f = r.mapping(item, "node", {"id", "xy"}, {"id"})
            nid = r.number(f["id"], "node id", int)
            if "xy" in f:
                xy = f["xy"]
                if not isinstance(xy, SequenceNode) or len(xy.value) != 2:
                    r.fail(xy, "xy must be a two-element list")
                coords[nid] = tuple(r.number(c, "coordinate") for c in xy.value)
        else:
            nid = r.number(item, "node id", int)
        if nid in ids:
            r.fail(item, f"duplicate node id {nid}")
        ids.append(nid)
    if sorted(ids) != list(range(len(ids))):
        r.fail(top["nodes"], "node ids must be exactly 0..N-1")

    if not isinstance(top["edges"], SequenceNode) or not top["edges"].value:
        r.fail(top["edges"], "edges must be a non-empty list")
    edges = []
    for j, item in enumerate(top["edges"].value, start=1):
        if isinstance(item, MappingNode):
            f = r.mapping(item, f"edge {j}", {"a", "b", "length"}, {"a", "b"})
            a, b = r.number(f["a"], "edge endpoint", int), r.number(f["b"], "edge endpoint", int)
            length = r.number(f["length"], "edge length") if "length" in f else 1.0
        elif isinstance(item, SequenceNode) and len(item.value) in (2, 3):
            a = r.number(item.value[0], "edge endpoint", int)
            b = r.number(item.value[1], "edge endpoint", int)
            length = r.number(item.value[2], "edge length") if len(item.value) == 3 else 1.0
        else:
            r.fail(item, f"edge {j} must be a mapping {{a, b, length}} or a list [a, b, length]")
        if a == b:
            r.fail(item, f"edge {j} ({a}, {b}) is a self-loop")
        for v in (a, b):
            if v not in ids:
                r.fail(item, f"edge {j} ({a}, {b}) references unknown node {v}")
        if not length > 0:
            r.fail(item, f"edge {j} ({a}, {b}) has non-positive length {length}")
        edges.append(Edge(a, b, length))

    mat = r.mapping(top["materials"], "materials", {"lambda", "epsilon"}, {"lambda", "epsilon"})
    lam = r.number(mat["lambda"], "lambda")
    eps = r.number(mat["epsilon"], "epsilon")
    roles = r.mapping(top["roles"], "roles", {"source", "target", "base"}, {"source", "target", "base"})
    role_ids = {k: r.number(v, f"{k} node", int) for k, v in roles.items()}
    try:
        return GroundStructure(tuple(range(len(ids))), tuple(edges), lam, eps,
                               role_ids["source"], role_ids["target"], role_ids["base"],
                               coords or None)
    except ModelError as exc:
        node = top["materials"] if "epsilon" in str(exc) or "lambda" in str(exc) else top["roles"]
        r.fail(node, str(exc))


def load_problem(path: str | Path) -> GroundStructure:
    p = Path(path)
    if not p.exists() and str(path) in CANONICAL:
        p = PACKAGED / f"{path}.yaml"
    try:
        text = p.read_text()
    except OSError as exc:
        raise ProblemParseError(f"cannot read problem file: {exc.strerror}", str(path)) from exc
    return parse_problem(text, str(path))


def dump_problem(structure: GroundStructure, name: str | None = None) -> str:
    lines = []
    if name:
        lines.append(f"name: {json.dumps(name)}")
    lines.append("nodes:")
    for v in structure.nodes:
        if structure.coords and v in structure.coords:
            x, y = structure.coords[v]
            lines.append(f"  - {{id: {v}, xy: [{x!r}, {y!r}]}}")
        else:
            lines.append(f"  - {{id: {v}}}")
    lines.append("edges:")
    for e in structure.edges:
        lines.append(f"  - {{a: {e.a}, b: {e.b}, length: {float(e.length)!r}}}")
    lines.append(f"materials: {{lambda: {float(structure.lam)!r}, epsilon: {float(structure.epsilon)!r}}}")
    lines.append(f"roles: {{source: {structure.source}, target: {structure.target}, base: {structure.base}}}")
    return "\n".join(lines) + "\n"


RUN_CONFIG_FIELDS = {
    "mode": str, "shots": int, "seed": int, "iterations": int, "learning_rate": float,
    "beta1": float, "beta2": float, "eps_hat": float, "layers_psi": int, "layers_phi": int,
    "out": str,
}


def load_run_config(path: str | Path) -> dict:
    """Run-config overrides from a YAML mapping; unknown keys are rejected."""
    source = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemParseError(f"cannot read config file: {exc.strerror}", source) from exc
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ProblemParseError(f"YAML syntax error: {exc.problem}", source,
                                mark.line + 1 if mark else None,
                                mark.column + 1 if mark else None) from exc
    if root is None:
        return {}
    r = _Reader(source)
    fields = r.mapping(root, "run config", set(RUN_CONFIG_FIELDS))
    out = {}
    for key, node in fields.items():
        kind = RUN_CONFIG_FIELDS[key]
        if kind is str:
            val = r.value(node)
            if not isinstance(val, str):
                r.fail(node, f"{key} must be a string")
            out[key] = val
        else:
            out[key] = r.number(node, key, kind)
    return out
