"""Online log template mining with a fixed-depth similarity tree.

Messages are routed by token count, then by their first few tokens, to a
leaf holding candidate templates. The best-matching template absorbs the
message (diverging positions become the wildcard ``<*>``); if nothing is
similar enough a new template is created. Event ids are dense integers in
first-seen order and form the model vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

WILDCARD = "<*>"


@dataclass(frozen=True)
class ParserConfig:
    tree_depth: int = 4
    similarity_threshold: float = 0.4
    max_children: int = 100
    mask_numeric_tokens: bool = True

    def __post_init__(self) -> None:
        if self.tree_depth < 2:
            raise ValueError("tree_depth must be >= 2")
        if not (0.0 < self.similarity_threshold <= 1.0):
            raise ValueError("similarity_threshold must be in (0, 1]")
        if self.max_children < 1:
            raise ValueError("max_children must be >= 1")


@dataclass
class LogTemplate:
    event_id: int
    tokens: list[str]
    occurrence_count: int = 0

    def render(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class LogRecord:
    timestamp: int
    node_id: str
    is_anomalous: bool
    event_id: int
    raw_content_hash: int


class _Node:
    __slots__ = ("children", "templates")

    def __init__(self) -> None:
        self.children: dict[str, _Node] = {}
        self.templates: list[LogTemplate] = []


def preprocess_line(raw_line: str, config: ParserConfig) -> list[str]:
    """Split a message into tokens, masking digit-bearing tokens if configured."""
    tokens = raw_line.split()
    if config.mask_numeric_tokens:
        tokens = [WILDCARD if any(c.isdigit() for c in t) else t for t in tokens]
    return tokens


def seq_similarity(a: list[str], b: list[str]) -> float:
    """Position-wise match ratio; a wildcard in ``b`` matches any token in ``a``."""
    if len(a) != len(b):
        raise ValueError(f"token lists must have equal length ({len(a)} vs {len(b)})")
    hits = sum(1 for ta, tb in zip(a, b) if ta == tb or tb == WILDCARD)
    return hits / len(a)


class DrainParser:
    """Mutable parser state. Single-writer: one thread ingests at a time."""

    def __init__(self, config: ParserConfig | None = None) -> None:
        self.config = config or ParserConfig()
        self._root = _Node()
        self._templates: dict[int, LogTemplate] = {}
        self._next_id = 0

    @property
    def templates(self) -> dict[int, LogTemplate]:
        return self._templates

    def parse_line(self, tokens: list[str]) -> tuple[int, LogTemplate]:
        """Route the tokens to a leaf, merge into the best template or mint a new one."""
        if not tokens:
            raise ValueError("parse_line requires a non-empty token list")
        leaf = self._descend(tokens)
        best, best_sim = None, -1.0
        for tpl in leaf.templates:
            sim = seq_similarity(tokens, tpl.tokens)
            if sim > best_sim:
                best, best_sim = tpl, sim
        if best is not None and best_sim >= self.config.similarity_threshold:
            best.tokens = [
                t if t == u else WILDCARD for t, u in zip(best.tokens, tokens)
            ]
            best.occurrence_count += 1
            return best.event_id, best
        tpl = LogTemplate(event_id=self._next_id, tokens=list(tokens), occurrence_count=1)
        self._next_id += 1
        self._templates[tpl.event_id] = tpl
        leaf.templates.append(tpl)
        return tpl.event_id, tpl

    def parse_message(self, raw_line: str) -> int | None:
        """Convenience: preprocess then parse; returns None for empty messages."""
        tokens = preprocess_line(raw_line, self.config)
        if not tokens:
            return None
        event_id, _ = self.parse_line(tokens)
        return event_id

    def _descend(self, tokens: list[str]) -> _Node:
        node = self._child(self._root, str(len(tokens)))
        # Route by the leading tokens, at most tree_depth - 2 levels.
        n_levels = min(self.config.tree_depth - 2, len(tokens))
        for i in range(n_levels):
            node = self._child(node, tokens[i])
        return node

    def _child(self, node: _Node, key: str) -> _Node:
        child = node.children.get(key)
        if child is None:
            if len(node.children) >= self.config.max_children:
                # Full internal node: route through the shared overflow child.
                key = WILDCARD
                child = node.children.get(key)
                if child is None:
                    # max_children counts concrete keys; the overflow slot is extra.
                    child = node.children[key] = _Node()
            else:
                child = node.children[key] = _Node()
        return child

    def export_templates(self) -> list[tuple[int, str, int]]:
        """Immutable snapshot: (event_id, template string, occurrence count), by id."""
        return [
            (eid, tpl.render(), tpl.occurrence_count)
            for eid, tpl in sorted(self._templates.items())
        ]


def write_template_table(rows: list[tuple[int, str, int]], path) -> None:
    """Tab-separated template export with a header row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("event_id\ttemplate\tcount\n")
        for eid, template, count in rows:
            fh.write(f"{eid}\t{template}\t{count}\n")
