"""Interned triple store: vocabularies, relation/type indexes, TSV I/O and statistics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

DEFAULT_TYPE_RELATION = "type"


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Vocab:
    """Dense label <-> id mapping in first-appearance order."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._index: dict[str, int] = {}
        for label in labels:
            self.intern(label)

    def intern(self, label: str) -> int:
        idx = self._index.get(label)
        if idx is not None:
            return idx
        if not label or "\t" in label or "\n" in label or "\r" in label:
            raise ValueError(f"invalid label {label!r}")
        idx = len(self._labels)
        self._labels.append(label)
        self._index[label] = idx
        return idx

    def id(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown label {label!r}") from None

    def get(self, label: str, default=None):
        return self._index.get(label, default)

    def label(self, idx: int) -> str:
        return self._labels[idx]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    def __contains__(self, label) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self):
        return iter(self._labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._labels == other._labels

    def __repr__(self) -> str:
        return f"Vocab({len(self)} labels)"


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass
class KGStats:
    triple_count: int
    entity_count: int
    relation_count: int
    per_relation_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "KGStats":
        return cls(**json.loads(text))


class KnowledgeGraph:
    """A set of triples over interned entity and relation vocabularies.

    Build through :meth:`from_labels` or :func:`parse_triples`; the object is
    treated as immutable afterwards.
    """

    def __init__(
        self,
        entities: Vocab,
        relations: Vocab,
        triples: Iterable[Triple],
        type_relation: str | None = DEFAULT_TYPE_RELATION,
    ):
        self.entities = entities
        self.relations = relations
        seen: set[Triple] = set()
        unique: list[Triple] = []
        n, m = len(entities), len(relations)
        for tr in triples:
            tr = Triple(int(tr[0]), int(tr[1]), int(tr[2]))
            if not (0 <= tr.head < n and 0 <= tr.tail < n and 0 <= tr.relation < m):
                raise ValueError(f"triple {tr} out of vocabulary range")
            if tr not in seen:
                seen.add(tr)
                unique.append(tr)
        self.triples: tuple[Triple, ...] = tuple(unique)
        self.type_relation_id: int | None = (
            relations.get(type_relation) if type_relation is not None else None
        )

        by_relation: dict[int, list[int]] = {}
        types_of: dict[int, set[int]] = {}
        for i, (h, r, t) in enumerate(self.triples):
            by_relation.setdefault(r, []).append(i)
            if r == self.type_relation_id:
                types_of.setdefault(h, set()).add(t)
        self.by_relation = {r: tuple(ix) for r, ix in by_relation.items()}
        self.types_of = {e: frozenset(ts) for e, ts in types_of.items()}

    @classmethod
    def from_labels(
        cls,
        label_triples: Iterable[tuple[str, str, str]],
        type_relation: str | None = DEFAULT_TYPE_RELATION,
    ) -> "KnowledgeGraph":
        entities, relations = Vocab(), Vocab()
        ids = []
        for h, r, t in label_triples:
            ids.append(Triple(entities.intern(h), relations.intern(r), entities.intern(t)))
        return cls(entities, relations, ids, type_relation)

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def type_relation(self) -> str | None:
        if self.type_relation_id is None:
            return None
        return self.relations.label(self.type_relation_id)

    def label_triples(self) -> list[tuple[str, str, str]]:
        e, r = self.entities.label, self.relations.label
        return [(e(h), r(rel), e(t)) for h, rel, t in self.triples]

    def label_set(self) -> set[tuple[str, str, str]]:
        return set(self.label_triples())

    def as_array(self) -> np.ndarray:
        """Triples as an (n_t, 3) int64 array of (head, relation, tail)."""
        if not self.triples:
            return np.zeros((0, 3), dtype=np.int64)
        return np.asarray(self.triples, dtype=np.int64)

    def instances_of(self) -> dict[int, list[int]]:
        """Class entity id -> sorted instance ids (inverse of ``types_of``)."""
        out: dict[int, list[int]] = {}
        for e, classes in self.types_of.items():
            for c in classes:
                out.setdefault(c, []).append(e)
        return {c: sorted(v) for c, v in sorted(out.items())}

    def class_entities(self) -> set[int]:
        return {c for classes in self.types_of.values() for c in classes}

    def reindexed(self, entities: Vocab, relations: Vocab) -> "KnowledgeGraph":
        """Re-express this graph in the given (superset) vocabularies."""
        e_map = [entities.id(lbl) for lbl in self.entities]
        r_map = [relations.id(lbl) for lbl in self.relations]
        triples = [Triple(e_map[h], r_map[r], e_map[t]) for h, r, t in self.triples]
        return KnowledgeGraph(entities, relations, triples, self.type_relation or DEFAULT_TYPE_RELATION)

    def __eq__(self, other) -> bool:
        """Equality up to id renumbering."""
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.label_set() == other.label_set() and self.type_relation == other.type_relation

    def __repr__(self) -> str:
        return (
            f"KnowledgeGraph({len(self.triples)} triples, "
            f"{len(self.entities)} entities, {len(self.relations)} relations)"
        )


def parse_triples(text: str, type_relation: str | None = DEFAULT_TYPE_RELATION) -> KnowledgeGraph:
    label_triples = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", lineno)
        if any(not f for f in fields):
            raise ParseError("empty field", lineno)
        label_triples.append(tuple(fields))
    return KnowledgeGraph.from_labels(label_triples, type_relation)


def write_triples(kg: KnowledgeGraph) -> str:
    for h, _, _ in kg.triples:
        if kg.entities.label(h).startswith("#"):
            raise ValueError(f"head label {kg.entities.label(h)!r} would be read back as a comment")
    lines = sorted("\t".join(t) for t in kg.label_triples())
    return "".join(line + "\n" for line in lines)


def read_kg(path, type_relation: str | None = DEFAULT_TYPE_RELATION) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_triples(fh.read(), type_relation)


def write_kg(kg: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_triples(kg))


def stats(kg: KnowledgeGraph) -> KGStats:
    per_relation = {
        kg.relations.label(r): len(ix) for r, ix in sorted(kg.by_relation.items())
    }
    return KGStats(
        triple_count=len(kg.triples),
        entity_count=len(kg.entities),
        relation_count=len(kg.relations),
        per_relation_counts=per_relation,
    )
