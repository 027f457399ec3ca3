"""Concrete syntax trees, syntactic signatures, and position grouping.

Trees are immutable after construction.  Signatures are the kind-paths used
to group byte positions into syntactic categories: two positions share a
group exactly when the smallest nodes containing them have the same kind
and the same chain of ancestor kinds up to the configured level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

ERROR_KIND = "ERROR"


@dataclass(eq=False)
class TreeNode:
    """One node of a concrete syntax tree.

    ``byte_range`` is half-open in document bytes.  ``is_required`` records
    whether the grammar marks this child slot required under its parent.
    ``is_missing`` marks a zero-width node inserted where a required child
    was absent; ``has_error`` is true when the subtree contains any missing
    node or error region.
    """

    kind: str
    byte_range: tuple[int, int]
    children: list["TreeNode"] = field(default_factory=list)
    is_terminal: bool = False
    is_named: bool = True
    is_required: bool = False
    is_missing: bool = False
    has_error: bool = False
    parent: Optional["TreeNode"] = field(default=None, repr=False)

    @property
    def start(self) -> int:
        return self.byte_range[0]

    @property
    def end(self) -> int:
        return self.byte_range[1]

    @property
    def is_error_node(self) -> bool:
        """True when this node itself is a damage point (not merely contains one)."""
        return self.is_missing or self.kind == ERROR_KIND

    def walk(self) -> Iterator["TreeNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def ancestors(self) -> Iterator["TreeNode"]:
        node = self.parent
        while node is not None:
            yield node
            node = node.parent

    def depth_below(self) -> int:
        """Height of this subtree (a leaf has height 1)."""
        stack = [(self, 1)]
        best = 1
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            for child in node.children:
                stack.append((child, d + 1))
        return best

    def contains_byte(self, offset: int) -> bool:
        return self.start <= offset < self.end

    def __repr__(self) -> str:  # keep the default repr from recursing through parents
        flags = "".join(
            f
            for f, on in (
                ("T", self.is_terminal),
                ("M", self.is_missing),
                ("E", self.has_error),
            )
            if on
        )
        return f"TreeNode({self.kind!r}, {self.byte_range}, {len(self.children)} children{', ' + flags if flags else ''})"


def finalize(node: TreeNode) -> TreeNode:
    """Set parent links and propagate has_error bottom-up. Returns the node."""
    for child in node.children:
        finalize(child)
        child.parent = node
    node.has_error = node.is_error_node or any(c.has_error for c in node.children)
    return node


@dataclass
class ParseTree:
    """A syntax tree plus the text it was parsed from."""

    root: TreeNode
    source: str
    language_id: str

    @property
    def source_bytes(self) -> bytes:
        return self.source.encode("utf-8")

    @property
    def has_error(self) -> bool:
        return self.root.has_error

    def walk(self) -> Iterator[TreeNode]:
        return self.root.walk()

    def text_of(self, node: TreeNode) -> str:
        return self.source_bytes[node.start : node.end].decode("utf-8")

    def node_at_byte(self, offset: int) -> TreeNode:
        """Smallest node containing ``offset``; ties break toward the later sibling.

        Positions outside every leaf (whitespace gaps) resolve to the
        nearest enclosing node.  Offsets outside the root resolve to the
        root itself.
        """
        node = self.root
        while True:
            advanced = False
            for child in reversed(node.children):
                if child.contains_byte(offset):
                    node = child
                    advanced = True
                    break
            if not advanced:
                return node

    def depth(self) -> int:
        return self.root.depth_below()

    def error_nodes(self) -> list[TreeNode]:
        return [n for n in self.walk() if n.is_error_node]


@dataclass(frozen=True)
class SyntacticSignature:
    """Kind path from a node up through its ancestors, truncated at the root."""

    kinds: tuple[str, ...]

    @property
    def level(self) -> int:
        return len(self.kinds) - 1

    def __str__(self) -> str:
        return "/".join(self.kinds)


def signature_of(node: TreeNode, level: int) -> SyntacticSignature:
    """Signature ⟨own kind, parent kind, ...⟩ with up to ``level`` ancestors."""
    if level < 0:
        raise ValueError("signature level must be >= 0")
    kinds = [node.kind]
    current = node.parent
    while current is not None and len(kinds) < level + 1:
        kinds.append(current.kind)
        current = current.parent
    return SyntacticSignature(tuple(kinds))


def group_positions(tree: ParseTree, level: int) -> dict[SyntacticSignature, list[int]]:
    """Partition every byte position of the document by syntactic signature.

    Each position belongs to the signature of the smallest node containing
    it; gaps between children (whitespace) belong to the enclosing node.
    An empty document yields a single root-signature group holding
    position 0.
    """
    total = len(tree.source_bytes)
    groups: dict[SyntacticSignature, list[int]] = {}
    if total == 0:
        groups.setdefault(signature_of(tree.root, level), []).append(0)
        return groups

    def assign(sig: SyntacticSignature, start: int, end: int) -> None:
        if start >= end:
            return
        groups.setdefault(sig, []).extend(range(start, end))

    def visit(node: TreeNode, lo: int, hi: int) -> None:
        sig = signature_of(node, level)
        cursor = lo
        for child in node.children:
            if child.end <= child.start:
                continue
            assign(sig, cursor, child.start)
            visit(child, child.start, child.end)
            cursor = child.end
        assign(sig, cursor, hi)

    # Positions outside the root's span (possible only for subtree parses)
    # still belong to the root's signature.
    visit(tree.root, 0, total)
    return groups
