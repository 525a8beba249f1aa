"""Intrinsic embedding quality: categorization, coherence and transitional distance."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .kg import KnowledgeGraph
from .models import EmbeddingModel

DEFAULT_K = 10


class UnsupportedModelError(ValueError):
    pass


def cosine(a, b) -> float:
    """Cosine similarity; 0.0 if either vector is zero."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X, dtype=np.float64), where=norms > 0)


def top_k_by_cosine(vectors: np.ndarray, query: int, candidates: np.ndarray, k: int):
    """Indices (from ``candidates``, ascending ids) of the k most cosine-similar rows.

    ``query`` itself is skipped. Ties are broken by ascending id.
    """
    candidates = candidates[candidates != query]
    U = unit_rows(vectors[candidates])
    q = unit_rows(vectors[query][None, :])[0]
    sims = U @ q
    order = np.lexsort((candidates, -sims))[:k]
    return candidates[order], sims[order]


def categorization(model: EmbeddingModel, kg: KnowledgeGraph, warnings: list | None = None) -> dict[str, float]:
    E = model.entity_vecs
    out = {}
    for cls, inst in kg.instances_of().items():
        mean = E[inst].mean(axis=0)
        label = kg.entities.label(cls)
        if not np.linalg.norm(mean) or not np.linalg.norm(E[cls]):
            if warnings is not None:
                warnings.append(f"zero vector in categorization of class {label!r}")
            out[label] = 0.0
            continue
        out[label] = cosine(mean, E[cls])
    return out


def coherence(model: EmbeddingModel, kg: KnowledgeGraph, k: int = DEFAULT_K) -> dict[str, float]:
    """Mean fraction of each instance's k cosine-nearest neighbours sharing its class.

    Neighbours are searched over every entity except the instance itself and
    the class entities (tails of type triples).
    """
    n = model.n_entities
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}")
    classes = kg.class_entities()
    pool = np.array([e for e in range(n) if e not in classes], dtype=np.int64)
    U = unit_rows(model.entity_vecs)
    Up = U[pool]
    out = {}
    instances = kg.instances_of()
    neighbours_cache: dict[int, np.ndarray] = {}
    for cls, inst in instances.items():
        members = set(inst)
        fracs = []
        for e in inst:
            nb = neighbours_cache.get(e)
            if nb is None:
                sims = Up @ U[e]
                keep = pool != e
                cand, s = pool[keep], sims[keep]
                nb = cand[np.lexsort((cand, -s))[:k]]
                neighbours_cache[e] = nb
            if len(nb) == 0:
                fracs.append(0.0)
            else:
                fracs.append(sum(1 for x in nb if int(x) in members) / len(nb))
        out[kg.entities.label(cls)] = float(np.mean(fracs))
    return out


def transitional_distance(model: EmbeddingModel, kg: KnowledgeGraph) -> dict[str, float]:
    if not model.relation_is_vector:
        raise UnsupportedModelError(
            f"transitional distance needs vector relations; {model.algorithm.value} uses matrices"
        )
    E, R = model.entity_vecs, model.relation_params
    out = {}
    for r, idx in sorted(kg.by_relation.items()):
        tr = kg.as_array()[list(idx)]
        hr = E[tr[:, 0]] + R[r]
        t = E[tr[:, 2]]
        num = (hr * t).sum(axis=1)
        den = np.linalg.norm(hr, axis=1) * np.linalg.norm(t, axis=1)
        cos = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        out[kg.relations.label(r)] = float(np.clip(cos, -1.0, 1.0).mean())
    return out


def _macro(values: dict[str, float]) -> float | None:
    return float(np.mean(list(values.values()))) if values else None


@dataclass
class EvalReport:
    per_class_categorization: dict[str, float]
    per_class_coherence: dict[str, float]
    per_relation_transitional: dict[str, float]
    macro_categorization: float | None
    macro_coherence: float | None
    macro_transitional: float | None
    metadata: dict = field(default_factory=dict)
    transitional_unsupported: str | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))

    def to_table(self) -> str:
        """Fixed-width text rendering, one block per metric."""
        lines = []
        algo = self.metadata.get("algorithm", "?")
        sections = [
            ("Categorization", "class", self.per_class_categorization, self.macro_categorization),
            ("Coherence", "class", self.per_class_coherence, self.macro_coherence),
            ("Semantic transitional distance", "relation", self.per_relation_transitional, self.macro_transitional),
        ]
        for title, key, values, macro in sections:
            lines.append(f"{title} ({algo})")
            if title.startswith("Semantic") and self.transitional_unsupported:
                lines.append(f"  unsupported: {self.transitional_unsupported}")
                lines.append("")
                continue
            width = max([len(key)] + [len(k) for k in values] + [5])
            lines.append(f"  {key:<{width}}  {'score':>8}")
            for name, v in sorted(values.items()):
                lines.append(f"  {name:<{width}}  {v:>8.4f}")
            m = "n/a" if macro is None else f"{macro:.4f}"
            lines.append(f"  {'macro':<{width}}  {m:>8}")
            lines.append("")
        return "\n".join(lines)


def eval_report(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    k: int = DEFAULT_K,
    timestamp: str | None = None,
) -> EvalReport:
    warns: list[str] = []
    cat = categorization(model, kg, warns)
    coh = coherence(model, kg, k)
    unsupported = None
    try:
        trans = transitional_distance(model, kg)
    except UnsupportedModelError as exc:
        trans, unsupported = {}, str(exc)
    if not (np.linalg.norm(model.entity_vecs, axis=1) > 0).all():
        warns.append("zero entity vectors present; their cosines are reported as 0")
    meta = {
        "algorithm": model.algorithm.value,
        "d": model.config.dim,
        "k": k,
        "seed": model.config.seed,
        "timestamp": timestamp,
    }
    for values in (cat, coh, trans):
        for key, v in values.items():
            if not math.isfinite(v):
                raise ValueError(f"non-finite metric value for {key!r}")
    return EvalReport(
        per_class_categorization=cat,
        per_class_coherence=coh,
        per_relation_transitional=trans,
        macro_categorization=_macro(cat),
        macro_coherence=_macro(coh),
        macro_transitional=_macro(trans),
        metadata=meta,
        transitional_unsupported=unsupported,
        warnings=warns,
    )
