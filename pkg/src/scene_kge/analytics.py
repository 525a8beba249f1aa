"""Embedding-space queries: neighbours, scene similarity, 2D projection."""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .evaluate import cosine, top_k_by_cosine
from .kg import KnowledgeGraph
from .models import EmbeddingModel
from .tsne import tsne


def _entity_id(model: EmbeddingModel, label) -> int:
    if isinstance(label, (int, np.integer)):
        if not 0 <= label < model.n_entities:
            raise KeyError(f"entity id {label} out of range")
        return int(label)
    if model.entities is None:
        raise ValueError("model has no entity vocabulary attached")
    if label not in model.entities:
        raise KeyError(f"unknown entity {label!r}")
    return model.entities.id(label)


def _label(model: EmbeddingModel, idx: int) -> str:
    return model.entities.label(idx) if model.entities is not None else str(idx)


def nearest_neighbors(model: EmbeddingModel, entity, k: int) -> list[tuple[str, float]]:
    """Top-k entities by cosine to ``entity`` (itself excluded, ties by ascending id)."""
    e = _entity_id(model, entity)
    n = model.n_entities
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}")
    ids, sims = top_k_by_cosine(model.entity_vecs, e, np.arange(n), k)
    return [(_label(model, int(i)), float(s)) for i, s in zip(ids, sims)]


@dataclass
class SimilarityResult:
    pairs: list[tuple[str, str, float]]

    def to_json(self) -> str:
        doc = {"pairs": [{"a": a, "b": b, "cosine": s} for a, b, s in self.pairs]}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SimilarityResult":
        return cls([(p["a"], p["b"], p["cosine"]) for p in json.loads(text)["pairs"]])

    def to_table(self) -> str:
        if not self.pairs:
            return "(no pairs)\n"
        wa = max(len("scene a"), *(len(a) for a, _, _ in self.pairs))
        wb = max(len("scene b"), *(len(b) for _, b, _ in self.pairs))
        lines = [f"{'rank':>4}  {'scene a':<{wa}}  {'scene b':<{wb}}  {'cosine':>8}"]
        for i, (a, b, s) in enumerate(self.pairs, 1):
            lines.append(f"{i:>4}  {a:<{wa}}  {b:<{wb}}  {s:>8.4f}")
        return "\n".join(lines) + "\n"


def pair_score(model: EmbeddingModel, a, b) -> float:
    i, j = sorted((_entity_id(model, a), _entity_id(model, b)))
    return cosine(model.entity_vecs[i], model.entity_vecs[j])


def most_similar_scene_pairs(model: EmbeddingModel, scene_ids, top_k: int | None = None) -> SimilarityResult:
    """Score every unordered pair of the given scenes by cosine of their entity vectors."""
    ids = sorted({_entity_id(model, s) for s in scene_ids})
    if len(ids) < 2:
        raise ValueError("need at least two distinct scenes")
    scored = [
        (_label(model, i), _label(model, j), cosine(model.entity_vecs[i], model.entity_vecs[j]), i, j)
        for i, j in itertools.combinations(ids, 2)
    ]
    scored.sort(key=lambda p: (-p[2], p[3], p[4]))
    if top_k is not None:
        scored = scored[:top_k]
    return SimilarityResult([(a, b, s) for a, b, s, _, _ in scored])


@dataclass
class Projection2D:
    points: list[tuple[str, float, float, str | None]]
    method: str
    params: dict = field(default_factory=dict)
    kl_history: list[float] = field(default_factory=list, repr=False)

    @property
    def coords(self) -> np.ndarray:
        return np.array([[x, y] for _, x, y, _ in self.points])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "x", "y", "class"])
        for label, x, y, cls in self.points:
            w.writerow([label, repr(float(x)), repr(float(y)), cls or ""])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, method: str = "unknown") -> "Projection2D":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([(r["label"], float(r["x"]), float(r["y"]), r["class"] or None) for r in rows], method)


def pca_2d(X: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    V = Vt[:2].T
    # fix the sign of each component for reproducibility
    signs = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])])
    V = V * np.where(signs == 0, 1.0, signs)
    Y = Xc @ V
    if Y.shape[1] < 2:
        Y = np.hstack([Y, np.zeros((len(Y), 2 - Y.shape[1]))])
    return Y


def _class_label(kg: KnowledgeGraph | None, model: EmbeddingModel, e: int) -> str | None:
    if kg is None:
        return None
    label = _label(model, e)
    if label not in kg.entities:
        return None
    classes = kg.types_of.get(kg.entities.id(label))
    if not classes:
        return None
    return min(kg.entities.label(c) for c in classes)


def project_2d(
    model: EmbeddingModel,
    entities=None,
    method: str = "tsne",
    params: dict | None = None,
    kg: KnowledgeGraph | None = None,
) -> Projection2D:
    """Project entity vectors to 2D with exact t-SNE or PCA.

    ``entities`` defaults to every entity; ``kg`` supplies class labels.
    """
    params = dict(params or {})
    if entities is None:
        ids = list(range(model.n_entities))
    else:
        ids = [_entity_id(model, e) for e in entities]
        ids = sorted(set(ids), key=ids.index)
    X = model.entity_vecs[ids]
    history: list[float] = []
    if method == "pca":
        if len(ids) < 2:
            raise ValueError("PCA projection needs at least 2 entities")
        Y = pca_2d(X)
    elif method == "tsne":
        params.setdefault("perplexity", 30.0)
        params.setdefault("n_iter", 1000)
        params.setdefault("learning_rate", 200.0)
        params.setdefault("early_exaggeration", 12.0)
        params.setdefault("exaggeration_iters", 250)
        params.setdefault("seed", 0)
        Y, history = tsne(X, **params)
    else:
        raise ValueError(f"unknown projection method {method!r}")
    if not np.isfinite(Y).all():
        raise FloatingPointError("projection produced non-finite coordinates")
    points = [
        (_label(model, e), float(x), float(y), _class_label(kg, model, e))
        for e, (x, y) in zip(ids, Y)
    ]
    return Projection2D(points, method, params, history)
