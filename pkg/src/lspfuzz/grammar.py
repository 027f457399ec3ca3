"""Grammar metadata: node kinds, productions, terminals, supertypes.

A grammar is described by a JSON file so that any error-tolerant parser
can back the tree machinery; two fixture grammars (a C subset and a Ruby
subset) ship with the package.  The file lists, per non-terminal kind,
alternative child sequences; each slot names a kind or supertype and
carries required/repeat flags.  Terminals either have a fixed literal
spelling or a lexing pattern plus a generation recipe.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

INFINITE = float("inf")


class GrammarError(ValueError):
    """The grammar file is malformed or violates a structural invariant."""


@dataclass(frozen=True)
class Slot:
    """One position in a production: a child kind (or supertype) plus flags."""

    kind: str
    required: bool = True
    repeat: bool = False
    named: bool = True


@dataclass
class TerminalDef:
    kind: str
    literal: Optional[str] = None
    pattern: Optional[re.Pattern] = None
    reserved: frozenset[str] = frozenset()
    generate: dict = field(default_factory=dict)
    named: bool = True

    @property
    def is_fixed(self) -> bool:
        return self.literal is not None


@dataclass
class GrammarMeta:
    """Parsed grammar description for one language."""

    language_id: str
    root_kind: str
    node_kinds: frozenset[str]
    productions: dict[str, list[list[Slot]]]
    terminals: dict[str, TerminalDef]
    supertypes: dict[str, list[str]]
    extras: list[re.Pattern]
    # Minimum expansion depth per kind/supertype, used to steer generation
    # toward terminating productions once the depth budget runs out.
    min_depth: dict[str, float] = field(default_factory=dict)

    @property
    def terminal_literals(self) -> dict[str, str]:
        """Map from terminal kind to its spelling, for fixed-spelling terminals."""
        return {k: t.literal for k, t in self.terminals.items() if t.literal is not None}

    def is_terminal(self, kind: str) -> bool:
        return kind in self.terminals

    def is_supertype(self, kind: str) -> bool:
        return kind in self.supertypes

    def is_named(self, kind: str) -> bool:
        if kind in self.terminals:
            return self.terminals[kind].named
        if kind in self.productions:
            return not kind.startswith("_")
        return True

    def members_of(self, supertype: str) -> list[str]:
        return self.supertypes[supertype]

    def expand_kind(self, kind: str) -> list[str]:
        """Concrete kinds a slot naming ``kind`` can match (supertypes flattened)."""
        if kind in self.supertypes:
            out: list[str] = []
            for member in self.supertypes[kind]:
                out.extend(self.expand_kind(member))
            return out
        return [kind]

    def supertypes_of(self, kind: str) -> set[str]:
        return {s for s, members in self.supertypes.items() if kind in self.expand_kind_set(s)}

    def expand_kind_set(self, kind: str) -> set[str]:
        return set(self.expand_kind(kind))

    def compatible_kinds(self, kind: str) -> set[str]:
        """Kinds acceptable where ``kind`` is: itself plus any sibling under a shared supertype."""
        out = {kind}
        for members in self.supertypes.values():
            flat = set()
            for m in members:
                flat |= self.expand_kind_set(m)
            if kind in flat:
                out |= flat
        return out


def _compile_extra(spec) -> re.Pattern:
    if isinstance(spec, str):
        return re.compile(spec, re.DOTALL)
    return re.compile(spec["pattern"], re.DOTALL if spec.get("dotall") else 0)


def load_grammar(path_or_obj) -> GrammarMeta:
    """Load and validate a grammar description from a JSON file or parsed dict."""
    if isinstance(path_or_obj, (str, Path)):
        with open(path_or_obj, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    else:
        obj = path_or_obj

    try:
        language_id = obj["language_id"]
        root_kind = obj["root"]
        raw_nodes = obj["nodes"]
        raw_terminals = obj["terminals"]
    except KeyError as exc:
        raise GrammarError(f"grammar file missing key {exc}")

    supertypes: dict[str, list[str]] = dict(obj.get("supertypes", {}))

    terminals: dict[str, TerminalDef] = {}
    for kind, spec in raw_terminals.items():
        literal = spec.get("literal")
        pattern = re.compile(spec["pattern"]) if "pattern" in spec else None
        if literal is None and pattern is None:
            raise GrammarError(f"terminal {kind!r} needs a literal or a pattern")
        terminals[kind] = TerminalDef(
            kind=kind,
            literal=literal,
            pattern=pattern,
            reserved=frozenset(spec.get("reserved", [])),
            generate=spec.get("generate", {}),
            named=spec.get("named", literal is None),
        )

    productions: dict[str, list[list[Slot]]] = {}
    for kind, alternatives in raw_nodes.items():
        alts: list[list[Slot]] = []
        for seq in alternatives:
            slots = []
            for raw in seq:
                slots.append(
                    Slot(
                        kind=raw["kind"],
                        required=raw.get("required", True),
                        repeat=raw.get("repeat", False),
                        named=raw.get("named", True),
                    )
                )
            alts.append(slots)
        if not alts:
            raise GrammarError(f"non-terminal {kind!r} has no productions")
        productions[kind] = alts

    node_kinds = frozenset(productions) | frozenset(terminals) | frozenset(supertypes)

    meta = GrammarMeta(
        language_id=language_id,
        root_kind=root_kind,
        node_kinds=node_kinds,
        productions=productions,
        terminals=terminals,
        supertypes=supertypes,
        extras=[_compile_extra(e) for e in obj.get("extras", [])],
    )
    _validate(meta)
    meta.min_depth = _compute_min_depths(meta)
    return meta


def _validate(meta: GrammarMeta) -> None:
    if meta.root_kind not in meta.node_kinds:
        raise GrammarError(f"root kind {meta.root_kind!r} not defined")
    for kind, alts in meta.productions.items():
        for seq in alts:
            for slot in seq:
                if slot.kind not in meta.node_kinds:
                    raise GrammarError(f"production of {kind!r} references unknown kind {slot.kind!r}")
    for supertype, members in meta.supertypes.items():
        for member in members:
            if member not in meta.node_kinds:
                raise GrammarError(f"supertype {supertype!r} references unknown kind {member!r}")
        if supertype in meta.productions or supertype in meta.terminals:
            raise GrammarError(f"supertype {supertype!r} collides with a concrete kind")


def _compute_min_depths(meta: GrammarMeta) -> dict[str, float]:
    """Minimum derivation depth per kind; fixpoint over the production graph."""
    depths: dict[str, float] = {k: (1.0 if k in meta.terminals else INFINITE) for k in meta.node_kinds}

    def production_depth(seq: list[Slot]) -> float:
        worst = 0.0
        for slot in seq:
            if not slot.required:
                continue
            worst = max(worst, depths[slot.kind])
        return worst + 1.0

    changed = True
    while changed:
        changed = False
        for supertype, members in meta.supertypes.items():
            value = min((depths[m] for m in members), default=INFINITE)
            if value < depths[supertype]:
                depths[supertype] = value
                changed = True
        for kind, alts in meta.productions.items():
            value = min(production_depth(seq) for seq in alts)
            if value < depths[kind]:
                depths[kind] = value
                changed = True

    for kind, value in depths.items():
        if value == INFINITE:
            raise GrammarError(f"kind {kind!r} has no terminating derivation")
    # Per-production depths, for budget-aware choices during generation.
    for kind, alts in meta.productions.items():
        for idx, seq in enumerate(alts):
            depths[f"{kind}#{idx}"] = production_depth(seq)
    return depths


def production_min_depth(meta: GrammarMeta, kind: str, index: int) -> float:
    return meta.min_depth[f"{kind}#{index}"]


def shipped_grammar_path(name: str) -> Path:
    """Path of a grammar description bundled with the package."""
    base = resources.files("lspfuzz.data.grammars")
    candidate = base / f"{name}.json"
    with resources.as_file(candidate) as p:
        if not p.exists():
            raise GrammarError(f"no shipped grammar named {name!r}")
        return Path(p)


def load_shipped_grammar(name: str) -> GrammarMeta:
    return load_grammar(shipped_grammar_path(name))
