"""On-disk tree-definition format: parser, validator, and serializer.

Mission trees are data, not code. A document bundles named trees with the
blackboard key declarations and the behavior manifest they are checked
against. Files use the ``.tree.xml`` extension with a versioned root
attribute ``format="1"``. Unknown elements and attributes are errors, never
ignored: typos in mission files must not pass silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.parsers import expat
from xml.sax.saxutils import quoteattr

from .bt.blackboard import TYPE_CHECKERS
from .bt.core import (
    ACTION,
    CONDITION,
    DECORATOR,
    DECORATOR_KINDS,
    FALLBACK,
    LEAF_KINDS,
    PARALLEL,
    RETRY,
    SEQUENCE,
    TreeNode,
)

FORMAT_VERSION = 1

EXIT_CLEAN = 0
EXIT_WARNINGS = 1
EXIT_ERRORS = 2


class DslError(Exception):
    """Parse-time failure, located by line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})" if line else message)
        self.message = message
        self.line = line
        self.column = column


class TreeSyntaxError(DslError):
    pass


class DuplicateTreeName(DslError):
    pass


class DuplicateNodeId(DslError):
    pass


@dataclass(frozen=True)
class BehaviorSpec:
    """Manifest entry: what kind a behavior is and which ports it requires."""

    name: str
    kind: str  # Action | Condition
    ports: dict[str, str] = field(default_factory=dict)  # port name -> blackboard type


@dataclass
class TreeDocument:
    format_version: int = FORMAT_VERSION
    blackboard: dict[str, str] = field(default_factory=dict)  # key -> type name
    behaviors: dict[str, BehaviorSpec] = field(default_factory=dict)
    trees: dict[str, TreeNode] = field(default_factory=dict)
    # source positions for diagnostics; not part of structural identity
    positions: dict[tuple[str, str], tuple[int, int]] = field(default_factory=dict, compare=False)

    def position(self, tree: str, node_id: str) -> tuple[int, int]:
        return self.positions.get((tree, node_id), (0, 0))


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    rule: str
    message: str
    tree: str = ""
    node_id: str = ""
    line: int = 0
    column: int = 0

    def __str__(self) -> str:
        where = f"{self.tree}:{self.node_id}" if self.node_id else self.tree
        locus = f" (line {self.line}, column {self.column})" if self.line else ""
        return f"{self.severity}[{self.rule}] {where}: {self.message}{locus}"


# -- low-level XML loading ---------------------------------------------------


class _XEl:
    __slots__ = ("tag", "attrib", "children", "line", "column")

    def __init__(self, tag, attrib, line, column):
        self.tag = tag
        self.attrib = attrib
        self.children: list[_XEl] = []
        self.line = line
        self.column = column


def _load_xml(text: str) -> _XEl:
    parser = expat.ParserCreate()
    root: list[_XEl] = []
    stack: list[_XEl] = []

    def start(tag, attrs):
        el = _XEl(tag, dict(attrs), parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)
        if stack:
            stack[-1].children.append(el)
        else:
            root.append(el)
        stack.append(el)

    def end(tag):
        stack.pop()

    def chardata(data):
        if data.strip():
            raise TreeSyntaxError(
                f"unexpected text {data.strip()[:30]!r}",
                parser.CurrentLineNumber,
                parser.CurrentColumnNumber + 1,
            )

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chardata
    try:
        parser.Parse(text, True)
    except expat.ExpatError as err:
        raise TreeSyntaxError(
            expat.errors.messages[err.code], err.lineno, err.offset + 1
        ) from None
    return root[0]


def _take(el: _XEl, name: str, *, required: bool = False, default: str | None = None) -> str | None:
    if name in el.attrib:
        return el.attrib.pop(name)
    if required:
        raise TreeSyntaxError(f"<{el.tag}> requires attribute {name!r}", el.line, el.column)
    return default


def _no_leftover(el: _XEl) -> None:
    if el.attrib:
        name = next(iter(el.attrib))
        raise TreeSyntaxError(f"unknown attribute {name!r} on <{el.tag}>", el.line, el.column)


def _parse_pairs(spec: str, sep: str, el: _XEl) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for item in filter(None, (part.strip() for part in spec.split(","))):
        if sep not in item:
            raise TreeSyntaxError(
                f"malformed entry {item!r} on <{el.tag}>, expected name{sep}value",
                el.line,
                el.column,
            )
        name, value = (s.strip() for s in item.split(sep, 1))
        if not name or not value or name in pairs:
            raise TreeSyntaxError(f"bad or duplicate entry {item!r} on <{el.tag}>", el.line, el.column)
        pairs[name] = value
    return pairs


# -- parse -------------------------------------------------------------------

_NODE_TAGS = (SEQUENCE, FALLBACK, PARALLEL, DECORATOR, ACTION, CONDITION)


def parse(text: str) -> TreeDocument:
    """Parse a tree-definition document; raises a DslError with line/column on failure."""
    root = _load_xml(text)
    if root.tag != "TreeDocument":
        raise TreeSyntaxError(f"root element must be <TreeDocument>, got <{root.tag}>", root.line, root.column)
    version = _take(root, "format", required=True)
    if version != str(FORMAT_VERSION):
        raise TreeSyntaxError(f"unsupported format version {version!r}", root.line, root.column)
    _no_leftover(root)

    doc = TreeDocument()
    for section in root.children:
        if section.tag == "Blackboard":
            _no_leftover(section)
            _parse_blackboard(section, doc)
        elif section.tag == "Behaviors":
            _no_leftover(section)
            _parse_behaviors(section, doc)
        elif section.tag == "Tree":
            _parse_tree(section, doc)
        else:
            raise TreeSyntaxError(f"unknown element <{section.tag}>", section.line, section.column)
    return doc


def _parse_blackboard(section: _XEl, doc: TreeDocument) -> None:
    for el in section.children:
        if el.tag != "Key":
            raise TreeSyntaxError(f"unknown element <{el.tag}> in <Blackboard>", el.line, el.column)
        name = _take(el, "name", required=True)
        type_name = _take(el, "type", required=True)
        _no_leftover(el)
        if el.children:
            raise TreeSyntaxError("<Key> does not allow children", el.line, el.column)
        if name in doc.blackboard:
            raise TreeSyntaxError(f"duplicate blackboard key {name!r}", el.line, el.column)
        if type_name not in TYPE_CHECKERS:
            raise TreeSyntaxError(f"unknown blackboard type {type_name!r}", el.line, el.column)
        doc.blackboard[name] = type_name


def _parse_behaviors(section: _XEl, doc: TreeDocument) -> None:
    for el in section.children:
        if el.tag != "Behavior":
            raise TreeSyntaxError(f"unknown element <{el.tag}> in <Behaviors>", el.line, el.column)
        name = _take(el, "name", required=True)
        kind = _take(el, "kind", required=True)
        ports_spec = _take(el, "ports", default="")
        _no_leftover(el)
        if el.children:
            raise TreeSyntaxError("<Behavior> does not allow children", el.line, el.column)
        if kind not in LEAF_KINDS:
            raise TreeSyntaxError(f"behavior kind must be Action or Condition, got {kind!r}", el.line, el.column)
        if name in doc.behaviors:
            raise TreeSyntaxError(f"duplicate behavior {name!r}", el.line, el.column)
        ports = _parse_pairs(ports_spec, ":", el)
        for port, type_name in ports.items():
            if type_name not in TYPE_CHECKERS:
                raise TreeSyntaxError(
                    f"unknown type {type_name!r} for port {port!r}", el.line, el.column
                )
        doc.behaviors[name] = BehaviorSpec(name, kind, ports)


def _parse_tree(section: _XEl, doc: TreeDocument) -> None:
    name = _take(section, "name", required=True)
    _no_leftover(section)
    if name in doc.trees:
        raise DuplicateTreeName(f"duplicate tree name {name!r}", section.line, section.column)
    if len(section.children) != 1:
        raise TreeSyntaxError(
            f"<Tree name={name!r}> must have exactly one root node", section.line, section.column
        )
    seen: set[str] = set()
    counter = [0]
    doc.trees[name] = _parse_node(section.children[0], name, doc, seen, counter)


def _auto_id(tree_name: str, seen: set[str], counter: list[int]) -> str:
    while True:
        counter[0] += 1
        candidate = f"{tree_name.lower()}_n{counter[0]}"
        if candidate not in seen:
            return candidate


def _parse_node(el: _XEl, tree_name: str, doc: TreeDocument, seen: set[str], counter: list[int]) -> TreeNode:
    if el.tag not in _NODE_TAGS:
        raise TreeSyntaxError(f"unknown node element <{el.tag}>", el.line, el.column)
    node_id = _take(el, "id") or _auto_id(tree_name, seen, counter)
    if node_id in seen:
        raise DuplicateNodeId(f"duplicate node id {node_id!r} in tree {tree_name!r}", el.line, el.column)
    seen.add(node_id)
    label = _take(el, "label", default="") or ""

    if el.tag in (SEQUENCE, FALLBACK):
        memory_spec = _take(el, "memory", default="false")
        if memory_spec not in ("true", "false"):
            raise TreeSyntaxError(f"memory must be true or false, got {memory_spec!r}", el.line, el.column)
        node = TreeNode(el.tag, node_id, label, memory=memory_spec == "true")
    elif el.tag == PARALLEL:
        threshold_spec = _take(el, "success_threshold", default="all")
        if threshold_spec == "all":
            threshold: int | str = "all"
        else:
            try:
                threshold = int(threshold_spec)
            except ValueError:
                raise TreeSyntaxError(
                    f"success_threshold must be a count or 'all', got {threshold_spec!r}",
                    el.line,
                    el.column,
                ) from None
            if threshold < 1:
                raise TreeSyntaxError("success_threshold must be >= 1", el.line, el.column)
        node = TreeNode(PARALLEL, node_id, label, success_threshold=threshold)
    elif el.tag == DECORATOR:
        deco = _take(el, "type", required=True)
        if deco not in DECORATOR_KINDS:
            raise TreeSyntaxError(f"unknown decorator type {deco!r}", el.line, el.column)
        max_attempts = 1
        if deco == RETRY:
            attempts_spec = _take(el, "max_attempts", required=True)
            try:
                max_attempts = int(attempts_spec)
            except ValueError:
                raise TreeSyntaxError(
                    f"max_attempts must be an integer, got {attempts_spec!r}", el.line, el.column
                ) from None
            if max_attempts < 1:
                raise TreeSyntaxError("max_attempts must be >= 1", el.line, el.column)
        node = TreeNode(DECORATOR, node_id, label, decorator=deco, max_attempts=max_attempts)
    else:  # Action / Condition
        behavior = _take(el, "name", required=True)
        ports = _parse_pairs(_take(el, "ports", default="") or "", "=", el)
        node = TreeNode(el.tag, node_id, label, behavior=behavior, ports=ports)

    _no_leftover(el)
    children = tuple(_parse_node(child, tree_name, doc, seen, counter) for child in el.children)
    doc.positions[(tree_name, node_id)] = (el.line, el.column)
    if children:
        node = TreeNode(
            node.kind,
            node.node_id,
            node.label,
            children,
            memory=node.memory,
            success_threshold=node.success_threshold,
            decorator=node.decorator,
            max_attempts=node.max_attempts,
            behavior=node.behavior,
            ports=node.ports,
        )
    return node


def parse_file(path) -> TreeDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


# -- validate ----------------------------------------------------------------


def validate(doc: TreeDocument) -> list[Diagnostic]:
    """Semantic checks over a parsed document. Diagnostics are the output;
    an empty list means the document is clean."""
    out: list[Diagnostic] = []

    def report(severity, rule, message, tree, node):
        line, column = doc.position(tree, node.node_id)
        out.append(Diagnostic(severity, rule, message, tree, node.node_id, line, column))

    for tree_name, root in doc.trees.items():
        for node in root.walk():
            _check_structure(doc, tree_name, node, report)
        _check_style(doc, tree_name, root, report)
    return out


def _check_structure(doc, tree_name, node, report):
    n = len(node.children)
    if node.kind in LEAF_KINDS:
        if n:
            report("error", "leaf-children", f"{node.kind} must have no children", tree_name, node)
        spec = doc.behaviors.get(node.behavior)
        if spec is None:
            report(
                "error",
                "unknown-behavior",
                f"behavior {node.behavior!r} is not in the manifest",
                tree_name,
                node,
            )
        else:
            if spec.kind != node.kind:
                report(
                    "error",
                    "behavior-kind",
                    f"behavior {node.behavior!r} is declared as {spec.kind}, used as {node.kind}",
                    tree_name,
                    node,
                )
            for port in spec.ports:
                if port not in node.ports:
                    report(
                        "error",
                        "missing-port",
                        f"required port {port!r} of {node.behavior!r} is not bound",
                        tree_name,
                        node,
                    )
            for port, key in node.ports.items():
                if port not in spec.ports:
                    report(
                        "error",
                        "unknown-port",
                        f"behavior {node.behavior!r} declares no port {port!r}",
                        tree_name,
                        node,
                    )
                    continue
                if key not in doc.blackboard:
                    report(
                        "error",
                        "undeclared-key",
                        f"port {port!r} bound to undeclared blackboard key {key!r}",
                        tree_name,
                        node,
                    )
                elif doc.blackboard[key] != spec.ports[port]:
                    report(
                        "error",
                        "port-type",
                        f"port {port!r} wants {spec.ports[port]!r} but key {key!r} is {doc.blackboard[key]!r}",
                        tree_name,
                        node,
                    )
    elif node.kind == DECORATOR:
        if n != 1:
            report("error", "decorator-arity", "Decorator must have exactly one child", tree_name, node)
    else:
        if n < 1:
            report("error", "empty-composite", f"{node.kind} must have children", tree_name, node)
        if node.kind == PARALLEL and node.success_threshold != "all":
            if int(node.success_threshold) > n:
                report(
                    "error",
                    "threshold-range",
                    f"success_threshold {node.success_threshold} exceeds {n} children",
                    tree_name,
                    node,
                )


def _check_style(doc, tree_name, root, report):
    # memory nodes under a Parallel defeat per-tick re-evaluation of the
    # sibling workflow; flag every occurrence
    for node in root.walk():
        if node.kind == PARALLEL:
            for sub in node.walk():
                if sub.kind in (SEQUENCE, FALLBACK) and sub.memory:
                    report(
                        "warning",
                        "memory-under-parallel",
                        "memory node under a Parallel hides resumption state and"
                        " weakens reactivity; prefer goal conditions",
                        tree_name,
                        sub,
                    )
    # goal-condition-first hint: a Fallback that has a Condition child placed
    # after an Action child has its goal in the wrong position
    for node in root.walk():
        if node.kind != FALLBACK:
            continue
        saw_action = False
        for child in node.children:
            if child.kind == ACTION:
                saw_action = True
            elif child.kind == CONDITION and saw_action:
                report(
                    "warning",
                    "goal-condition-first",
                    "goal condition appears after an achieving action; place it first",
                    tree_name,
                    child,
                )


def exit_code(diagnostics: list[Diagnostic]) -> int:
    if any(d.severity == "error" for d in diagnostics):
        return EXIT_ERRORS
    if diagnostics:
        return EXIT_WARNINGS
    return EXIT_CLEAN


# -- serialize ---------------------------------------------------------------


def serialize(doc: TreeDocument) -> str:
    """Render a document to text such that parse(serialize(doc)) == doc."""
    lines = [f'<TreeDocument format="{doc.format_version}">']
    if doc.blackboard:
        lines.append("  <Blackboard>")
        for key, type_name in doc.blackboard.items():
            lines.append(f"    <Key name={quoteattr(key)} type={quoteattr(type_name)}/>")
        lines.append("  </Blackboard>")
    if doc.behaviors:
        lines.append("  <Behaviors>")
        for spec in doc.behaviors.values():
            ports = ",".join(f"{p}:{t}" for p, t in spec.ports.items())
            ports_attr = f" ports={quoteattr(ports)}" if ports else ""
            lines.append(
                f"    <Behavior name={quoteattr(spec.name)} kind={quoteattr(spec.kind)}{ports_attr}/>"
            )
        lines.append("  </Behaviors>")
    for name, root in doc.trees.items():
        lines.append(f"  <Tree name={quoteattr(name)}>")
        _write_node(root, lines, indent=2)
        lines.append("  </Tree>")
    lines.append("</TreeDocument>")
    return "\n".join(lines) + "\n"


def _write_node(node: TreeNode, lines: list[str], indent: int) -> None:
    pad = "  " * indent
    attrs = [f"id={quoteattr(node.node_id)}"]
    if node.label:
        attrs.append(f"label={quoteattr(node.label)}")
    if node.kind in (SEQUENCE, FALLBACK):
        if node.memory:
            attrs.append('memory="true"')
    elif node.kind == PARALLEL:
        attrs.append(f'success_threshold="{node.success_threshold}"')
    elif node.kind == DECORATOR:
        attrs.append(f"type={quoteattr(node.decorator)}")
        if node.decorator == RETRY:
            attrs.append(f'max_attempts="{node.max_attempts}"')
    else:
        attrs.append(f"name={quoteattr(node.behavior)}")
        if node.ports:
            ports = ",".join(f"{p}={k}" for p, k in node.ports.items())
            attrs.append(f"ports={quoteattr(ports)}")
    head = f"{pad}<{node.kind} {' '.join(attrs)}"
    if node.children:
        lines.append(head + ">")
        for child in node.children:
            _write_node(child, lines, indent + 1)
        lines.append(f"{pad}</{node.kind}>")
    else:
        lines.append(head + "/>")


def serialize_to_file(doc: TreeDocument, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(doc))
