"""Error-tolerant, grammar-driven parsing.

Any UTF-8 input yields a tree covering every byte: unparseable token runs
become ERROR nodes, absent required children become zero-width missing
nodes, so damage stays localized inside otherwise well-formed structure
instead of failing the parse.

The parser is a packrat interpreter over the grammar's productions with
two recovery devices:

* a production that has already consumed real tokens may insert one
  zero-width missing node where a required child cannot be parsed;
* repetition slots skip unmatchable tokens into an ERROR node, stopping
  at the repetition's closing literal (or any closing literal of the
  grammar) so damage cannot leak past its container.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .grammar import GrammarMeta, Slot
from .tree import ERROR_KIND, ParseTree, TreeNode, finalize

GARBAGE_KIND = "<garbage>"

# One inserted missing node per production instance; more would let wildly
# wrong alternatives "succeed" on insertions alone.
MAX_INSERTIONS = 1

# Beyond this nesting the parser stops opening non-terminals and lets
# recovery absorb the rest; keeps pathological inputs ("(((((...") from
# exhausting the interpreter stack while staying total and deterministic.
MAX_PARSE_DEPTH = 160


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    byte_start: int
    byte_end: int
    named: bool


def lex(source: str, grammar: GrammarMeta) -> list[Token]:
    """Longest-match tokenization; unknown bytes become 1-char garbage tokens."""
    literals = sorted(
        ((t.literal, t.kind) for t in grammar.terminals.values() if t.literal is not None),
        key=lambda pair: -len(pair[0]),
    )
    patterns = [(t.pattern, t.kind, t.named) for t in grammar.terminals.values() if t.pattern is not None]

    tokens: list[Token] = []
    pos = 0
    byte_pos = 0
    n = len(source)
    while pos < n:
        skipped = True
        while skipped:
            skipped = False
            for extra in grammar.extras:
                m = extra.match(source, pos)
                if m and m.end() > pos:
                    byte_pos += len(source[pos : m.end()].encode("utf-8"))
                    pos = m.end()
                    skipped = True
        if pos >= n:
            break

        best_text: Optional[str] = None
        best_kind = GARBAGE_KIND
        best_named = False
        for literal, kind in literals:
            if source.startswith(literal, pos):
                best_text, best_kind, best_named = literal, kind, grammar.terminals[kind].named
                break
        for pattern, kind, named in patterns:
            m = pattern.match(source, pos)
            if m and m.end() > pos:
                text = m.group()
                if best_text is None or len(text) > len(best_text):
                    best_text, best_kind, best_named = text, kind, named
        if best_text is None:
            best_text = source[pos]
            best_kind = GARBAGE_KIND
            best_named = False
        byte_len = len(best_text.encode("utf-8"))
        tokens.append(Token(best_kind, best_text, byte_pos, byte_pos + byte_len, best_named))
        pos += len(best_text)
        byte_pos += byte_len
    return tokens


@dataclass
class _Draft:
    kind: str
    children: list["_Draft"] = field(default_factory=list)
    token: Optional[Token] = None
    is_missing: bool = False
    is_required: bool = False
    named: bool = True
    at_byte: int = 0  # anchor for zero-width nodes


_Result = tuple[_Draft, int, int]  # draft, next token index, error weight


class _Parser:
    def __init__(self, grammar: GrammarMeta, tokens: list[Token], total_bytes: int):
        self.grammar = grammar
        self.tokens = tokens
        self.total_bytes = total_bytes
        self.memo: dict[tuple[str, int], Optional[_Result]] = {}
        self.in_progress: set[tuple[str, int]] = set()
        self.depth = 0
        self.closers = {
            t.kind
            for t in grammar.terminals.values()
            if t.literal in (")", "}", "]", "end")
        }

    # -- helpers ------------------------------------------------------------

    def _anchor_byte(self, i: int) -> int:
        """Zero-width nodes sit at the end of the last consumed token."""
        if i > 0:
            return self.tokens[i - 1].byte_end
        if self.tokens:
            return self.tokens[0].byte_start
        return 0

    def _missing(self, kind: str, i: int, required: bool) -> _Draft:
        return _Draft(
            kind=kind,
            is_missing=True,
            is_required=required,
            named=self.grammar.is_named(kind),
            at_byte=self._anchor_byte(i),
        )

    def _error_node(self, skipped: list[Token]) -> _Draft:
        children = [
            _Draft(kind=t.kind, token=t, named=t.named) for t in skipped
        ]
        return _Draft(kind=ERROR_KIND, children=children, named=True)

    @staticmethod
    def _better(a: Optional[_Result], b: Optional[_Result]) -> Optional[_Result]:
        if a is None:
            return b
        if b is None:
            return a
        if b[1] != a[1]:
            return b if b[1] > a[1] else a
        return b if b[2] < a[2] else a

    # -- core ---------------------------------------------------------------

    def parse_kind(self, kind: str, i: int) -> Optional[_Result]:
        if kind in self.grammar.terminals:
            if i < len(self.tokens) and self.tokens[i].kind == kind:
                tok = self.tokens[i]
                return _Draft(kind=kind, token=tok, named=tok.named), i + 1, 0
            return None

        key = (kind, i)
        if key in self.memo:
            return self.memo[key]
        if key in self.in_progress or self.depth > MAX_PARSE_DEPTH:
            return None

        self.in_progress.add(key)
        self.depth += 1
        try:
            best: Optional[_Result] = None
            if kind in self.grammar.supertypes:
                for member in self.grammar.supertypes[kind]:
                    best = self._better(best, self.parse_kind(member, i))
            else:
                for seq in self.grammar.productions[kind]:
                    best = self._better(best, self._parse_seq(kind, seq, i))
        finally:
            self.depth -= 1
            self.in_progress.discard(key)
        self.memo[key] = best
        return best

    def _parse_seq(self, kind: str, seq: list[Slot], i0: int) -> Optional[_Result]:
        children: list[_Draft] = []
        i = i0
        errors = 0
        insertions = 0
        for si, slot in enumerate(seq):
            if slot.repeat:
                i, errors = self._parse_repeat(slot, seq, si, i, children, errors)
                continue
            result = self.parse_kind(slot.kind, i)
            if result is not None:
                draft, i, sub_errors = result
                draft.is_required = slot.required
                children.append(draft)
                errors += sub_errors
                continue
            if not slot.required:
                continue
            anchored = i > i0
            if anchored and insertions < MAX_INSERTIONS:
                children.append(self._missing(slot.kind, i, slot.required))
                errors += 1
                insertions += 1
                continue
            return None
        at = self.tokens[i0].byte_start if i0 < len(self.tokens) else self.total_bytes
        node = _Draft(kind=kind, children=children, named=self.grammar.is_named(kind), at_byte=at)
        return node, i, errors

    def _parse_repeat(
        self,
        slot: Slot,
        seq: list[Slot],
        si: int,
        i: int,
        children: list[_Draft],
        errors: int,
    ) -> tuple[int, int]:
        stop_kind: Optional[str] = None
        recovery = si == len(seq) - 1
        for later in seq[si + 1 :]:
            terminal = self.grammar.terminals.get(later.kind)
            if terminal is not None and terminal.literal is not None:
                stop_kind = later.kind
                recovery = True
                break

        skipped: list[Token] = []

        def flush() -> int:
            nonlocal skipped
            if skipped:
                children.append(self._error_node(skipped))
                weight = len(skipped)
                skipped = []
                return weight
            return 0

        while i < len(self.tokens):
            tok_kind = self.tokens[i].kind
            if stop_kind is not None and tok_kind == stop_kind:
                break
            if tok_kind in self.closers and tok_kind != stop_kind:
                break
            result = self.parse_kind(slot.kind, i)
            if result is not None and result[1] > i:
                errors += flush()
                draft, i, sub_errors = result
                draft.is_required = slot.required
                children.append(draft)
                errors += sub_errors
                continue
            if not recovery:
                break
            skipped.append(self.tokens[i])
            i += 1
        errors += flush()
        return i, errors


def parse(source: str, grammar: GrammarMeta) -> ParseTree:
    """Parse any UTF-8 text into a full-coverage tree; never raises on content."""
    total_bytes = len(source.encode("utf-8"))
    tokens = lex(source, grammar)
    parser = _Parser(grammar, tokens, total_bytes)
    result = parser.parse_kind(grammar.root_kind, 0)
    if result is None:
        root_draft = _Draft(kind=grammar.root_kind, named=True)
        consumed = 0
    else:
        root_draft, consumed, _ = result
    if consumed < len(tokens):
        root_draft.children.append(parser._error_node(tokens[consumed:]))
    root = _to_node(root_draft)
    root.byte_range = (0, total_bytes)
    finalize(root)
    return ParseTree(root=root, source=source, language_id=grammar.language_id)


def parse_as(source: str, kind: str, grammar: GrammarMeta) -> Optional[ParseTree]:
    """Parse ``source`` as one ``kind`` node: full consumption, zero errors, else None."""
    total_bytes = len(source.encode("utf-8"))
    tokens = lex(source, grammar)
    parser = _Parser(grammar, tokens, total_bytes)
    result = parser.parse_kind(kind, 0)
    if result is None:
        return None
    draft, consumed, errors = result
    if consumed != len(tokens) or errors != 0:
        return None
    root = finalize(_to_node(draft))
    if root.has_error:
        return None
    return ParseTree(root=root, source=source, language_id=grammar.language_id)


def _to_node(draft: _Draft) -> TreeNode:
    children = [_to_node(c) for c in draft.children]
    start, end = draft.byte_span()
    return TreeNode(
        kind=draft.kind,
        byte_range=(start, end),
        children=children,
        is_terminal=draft.token is not None or draft.is_missing,
        is_named=draft.named,
        is_required=draft.is_required,
        is_missing=draft.is_missing,
    )
