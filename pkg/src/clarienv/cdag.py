"""Clarification-DAG data model, validation, and JSON (de)serialization.

The wire schema uses the field names root_node, start_node_ids, nodes, id,
text, options, next_node_id. Internally those map to root_query and
next_node_ids. Option lists with an empty next_node_id are leaves; there is no
separate leaf flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ParseError, ReferenceError_, SchemaError, UsageError

MAX_NODES = 20
MIN_OPTIONS = 2
MAX_OPTIONS = 3


@dataclass(frozen=True)
class CDagOption:
    text: str
    next_node_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class QuestionNode:
    id: str
    text: str
    options: tuple[CDagOption, ...] = ()


@dataclass(frozen=True)
class CDag:
    root_query: str
    start_node_ids: tuple[str, ...]
    nodes: dict[str, QuestionNode] = field(default_factory=dict)

    def node(self, node_id: str) -> QuestionNode:
        return self.nodes[node_id]


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    rule: str
    message: str
    node_id: str | None = None


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors


def _reject_duplicate_keys(pairs):
    seen = set()
    out = {}
    for key, value in pairs:
        if key in seen:
            raise ParseError(f"duplicate key {key!r} in JSON object")
        seen.add(key)
        out[key] = value
    return out


def _require(mapping: dict, key: str, path: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SchemaError(f"missing required field at {path}.{key}", path=f"{path}.{key}")
    return mapping[key]


def parse_cdag(document: str) -> CDag:
    """Parse the JSON wire format into a CDag.

    Option-count violations are deliberately not rejected here (validate_cdag
    reports them), so repair tooling can load non-conforming model output.
    Dangling node references and duplicate node ids are parse-time errors.
    """
    try:
        data = json.loads(document, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at byte {exc.pos}: {exc.msg}", offset=exc.pos)
    if not isinstance(data, dict):
        raise SchemaError("document root must be a JSON object", path="$")

    root_query = _require(data, "root_node", "$")
    start_ids = _require(data, "start_node_ids", "$")
    raw_nodes = _require(data, "nodes", "$")
    if not isinstance(start_ids, list) or not start_ids:
        raise SchemaError("start_node_ids must be a non-empty list", path="$.start_node_ids")
    if not isinstance(raw_nodes, dict):
        raise SchemaError("nodes must be an object", path="$.nodes")

    nodes: dict[str, QuestionNode] = {}
    for key, raw in raw_nodes.items():
        path = f"$.nodes.{key}"
        node_id = _require(raw, "id", path)
        if node_id != key:
            raise SchemaError(
                f"node key {key!r} disagrees with its id field {node_id!r}", path=path
            )
        text = _require(raw, "text", path)
        options = []
        for i, raw_opt in enumerate(_require(raw, "options", path)):
            opt_path = f"{path}.options[{i}]"
            opt_text = _require(raw_opt, "text", opt_path)
            next_ids = _require(raw_opt, "next_node_id", opt_path)
            if not isinstance(next_ids, list):
                raise SchemaError("next_node_id must be a list", path=f"{opt_path}.next_node_id")
            options.append(CDagOption(opt_text, tuple(next_ids)))
        nodes[node_id] = QuestionNode(node_id, text, tuple(options))

    for node in nodes.values():
        for opt in node.options:
            for target in opt.next_node_ids:
                if target not in nodes:
                    raise ReferenceError_(
                        f"node {node.id!r} has an option referencing "
                        f"absent node {target!r}",
                        source_id=node.id,
                        target_id=target,
                    )
    for start in start_ids:
        if start not in nodes:
            raise ReferenceError_(
                f"start node {start!r} is not defined in nodes",
                source_id="start_node_ids",
                target_id=start,
            )
    return CDag(root_query=root_query, start_node_ids=tuple(start_ids), nodes=nodes)


def _find_cycle(graph: CDag) -> list[str] | None:
    """Return one representative cycle as an id sequence, or None."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in graph.nodes}
    stack: list[str] = []

    def children(nid: str) -> list[str]:
        out = []
        for opt in graph.nodes[nid].options:
            for t in opt.next_node_ids:
                if t in graph.nodes:
                    out.append(t)
        return out

    def dfs(nid: str) -> list[str] | None:
        color[nid] = GRAY
        stack.append(nid)
        for child in children(nid):
            if color[child] == GRAY:
                return stack[stack.index(child):]
            if color[child] == WHITE:
                cycle = dfs(child)
                if cycle is not None:
                    return cycle
        stack.pop()
        color[nid] = BLACK
        return None

    for nid in graph.nodes:
        if color[nid] == WHITE:
            cycle = dfs(nid)
            if cycle is not None:
                return cycle
    return None


def validate_cdag(graph: CDag) -> ValidationReport:
    """Check every graph invariant; findings are data, validation never aborts."""
    report = ValidationReport()

    for start in graph.start_node_ids:
        if start not in graph.nodes:
            report.findings.append(Finding(
                "error", "start-node-exists",
                f"start node {start!r} is not defined", node_id=start,
            ))
    if not graph.start_node_ids:
        report.findings.append(Finding(
            "error", "start-nodes-nonempty", "start_node_ids is empty"))

    for node in graph.nodes.values():
        if not (MIN_OPTIONS <= len(node.options) <= MAX_OPTIONS):
            report.findings.append(Finding(
                "error", "option-count",
                f"node {node.id!r} has {len(node.options)} options "
                f"(must be {MIN_OPTIONS}-{MAX_OPTIONS})",
                node_id=node.id,
            ))
        for opt in node.options:
            for target in opt.next_node_ids:
                if target not in graph.nodes:
                    report.findings.append(Finding(
                        "error", "edge-reference",
                        f"node {node.id!r} references absent node {target!r}",
                        node_id=node.id,
                    ))

    if len(graph.nodes) > MAX_NODES:
        report.findings.append(Finding(
            "error", "node-cap",
            f"graph has {len(graph.nodes)} nodes (cap {MAX_NODES})",
        ))

    cycle = _find_cycle(graph)
    if cycle is not None:
        report.findings.append(Finding(
            "error", "acyclic",
            "cycle detected: " + " -> ".join(cycle + [cycle[0]]),
            node_id=cycle[0],
        ))
        return report  # reachability is not meaningful on cyclic graphs

    reachable: set[str] = set()
    frontier = [s for s in graph.start_node_ids if s in graph.nodes]
    while frontier:
        nid = frontier.pop()
        if nid in reachable:
            continue
        reachable.add(nid)
        for opt in graph.nodes[nid].options:
            frontier.extend(t for t in opt.next_node_ids if t in graph.nodes)
    for nid in graph.nodes:
        if nid not in reachable:
            report.findings.append(Finding(
                "warning", "reachable",
                f"node {nid!r} is unreachable from every start node",
                node_id=nid,
            ))
    return report


def serialize_cdag(graph: CDag) -> str:
    """Serialize a valid graph back to the wire format.

    Key order is fixed (root_node, start_node_ids, nodes; id, text, options;
    text, next_node_id) with two-space indentation, so parse-serialize
    round-trips are byte-stable.
    """
    report = validate_cdag(graph)
    if not report.ok:
        raise UsageError(
            "cannot serialize an invalid graph: "
            + "; ".join(f.message for f in report.errors)
        )
    doc = {
        "root_node": graph.root_query,
        "start_node_ids": list(graph.start_node_ids),
        "nodes": {
            nid: {
                "id": node.id,
                "text": node.text,
                "options": [
                    {"text": opt.text, "next_node_id": list(opt.next_node_ids)}
                    for opt in node.options
                ],
            }
            for nid, node in graph.nodes.items()
        },
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)
