"""TransE, RESCAL and HolE scoring functions with analytic gradients.

All scores follow one orientation: higher means more plausible. TransE is
scored as the negated translation distance ``-||h + r - t||``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .kg import Triple, Vocab


class Algorithm(str, Enum):
    TRANSE = "TransE"
    RESCAL = "RESCAL"
    HOLE = "HolE"

    @classmethod
    def parse(cls, name: str) -> "Algorithm":
        if isinstance(name, cls):
            return name
        for algo in cls:
            if algo.value.lower() == str(name).lower():
                return algo
        raise ValueError(f"unknown algorithm {name!r}; expected one of transe, rescal, hole")


@dataclass(frozen=True)
class ModelConfig:
    algorithm: Algorithm = Algorithm.TRANSE
    dim: int = 100
    transe_norm: str = "L2"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if int(self.dim) < 1:
            raise ValueError("dimension must be >= 1")
        if self.transe_norm not in ("L1", "L2"):
            raise ValueError("transe_norm must be 'L1' or 'L2'")


@dataclass
class EmbeddingModel:
    """Entity vectors plus per-relation vectors (TransE/HolE) or matrices (RESCAL).

    ``entities``/``relations`` carry the label vocabularies when known.
    """

    config: ModelConfig
    entity_vecs: np.ndarray
    relation_params: np.ndarray
    entities: Vocab | None = field(default=None, compare=False)
    relations: Vocab | None = field(default=None, compare=False)

    def __post_init__(self):
        d = self.config.dim
        if self.entity_vecs.ndim != 2 or self.entity_vecs.shape[1] != d:
            raise ValueError(f"entity matrix must be n x {d}, got {self.entity_vecs.shape}")
        expected = (d, d) if self.algorithm is Algorithm.RESCAL else (d,)
        if self.relation_params.shape[1:] != expected:
            raise ValueError(
                f"relation params must be m x {' x '.join(map(str, expected))}, "
                f"got {self.relation_params.shape}"
            )
        if self.entities is not None and len(self.entities) != self.n_entities:
            raise ValueError("entity vocabulary size does not match entity matrix")
        if self.relations is not None and len(self.relations) != self.n_relations:
            raise ValueError("relation vocabulary size does not match relation params")

    @property
    def algorithm(self) -> Algorithm:
        return self.config.algorithm

    @property
    def n_entities(self) -> int:
        return self.entity_vecs.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_params.shape[0]

    @property
    def relation_is_vector(self) -> bool:
        return self.algorithm is not Algorithm.RESCAL

    def parameter_count(self) -> int:
        return self.entity_vecs.size + self.relation_params.size

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.entity_vecs).all() and np.isfinite(self.relation_params).all())

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            self.config, self.entity_vecs.copy(), self.relation_params.copy(),
            self.entities, self.relations,
        )

    def scaled(self, factor: float) -> "EmbeddingModel":
        """Copy with every entity vector and relation parameter multiplied by ``factor``."""
        return EmbeddingModel(
            self.config, self.entity_vecs * factor, self.relation_params * factor,
            self.entities, self.relations,
        )

    def entity_vector(self, label: str) -> np.ndarray:
        if self.entities is None:
            raise ValueError("model has no entity vocabulary attached")
        return self.entity_vecs[self.entities.id(label)]

    def check_triple(self, triple) -> Triple:
        h, r, t = (int(x) for x in triple)
        n, m = self.n_entities, self.n_relations
        if not (0 <= h < n and 0 <= t < n):
            raise IndexError(f"entity id out of range in {triple} (n={n})")
        if not 0 <= r < m:
            raise IndexError(f"relation id out of range in {triple} (m={m})")
        return Triple(h, r, t)


def circular_correlation_naive(a, b) -> np.ndarray:
    """Reference O(d^2) definition: out[k] = sum_i a[i] * b[(k + i) mod d]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    d = a.shape[0]
    out = np.zeros(d)
    for k in range(d):
        s = 0.0
        for i in range(d):
            s += a[i] * b[(k + i) % d]
        out[k] = s
    return out


def circular_correlation(a, b) -> np.ndarray:
    """Circular correlation via FFT; works row-wise on stacked (..., d) inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    d = a.shape[-1]
    return np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(b), n=d)


def circular_convolution(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = a.shape[-1]
    return np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(b), n=d)


# Batched scoring and score gradients. Each takes index arrays (h, r, t) of
# equal length and returns per-row values.

def _transe_residual(model, h, r, t):
    E, R = model.entity_vecs, model.relation_params
    return E[h] + R[r] - E[t]


def score_batch(model: EmbeddingModel, h, r, t) -> np.ndarray:
    E, R = model.entity_vecs, model.relation_params
    algo = model.algorithm
    if algo is Algorithm.TRANSE:
        u = _transe_residual(model, h, r, t)
        if model.config.transe_norm == "L1":
            return -np.abs(u).sum(axis=1)
        return -np.sqrt((u * u).sum(axis=1))
    if algo is Algorithm.RESCAL:
        return np.einsum("bi,bij,bj->b", E[h], R[r], E[t])
    return (R[r] * circular_correlation(E[h], E[t])).sum(axis=1)


def score_grad_batch(model: EmbeddingModel, h, r, t):
    """Gradients of the score wrt (head row, relation params, tail row)."""
    E, R = model.entity_vecs, model.relation_params
    algo = model.algorithm
    if algo is Algorithm.TRANSE:
        u = _transe_residual(model, h, r, t)
        if model.config.transe_norm == "L1":
            g = np.sign(u)
        else:
            norm = np.sqrt((u * u).sum(axis=1, keepdims=True))
            g = u / np.maximum(norm, 1e-12)
        return -g, -g, g
    if algo is Algorithm.RESCAL:
        eh, W, et = E[h], R[r], E[t]
        return (
            np.einsum("bij,bj->bi", W, et),
            eh[:, :, None] * et[:, None, :],
            np.einsum("bij,bi->bj", W, eh),
        )
    eh, rr, et = E[h], R[r], E[t]
    return circular_correlation(rr, et), circular_correlation(eh, et), circular_convolution(rr, eh)


def score(model: EmbeddingModel, triple) -> float:
    h, r, t = model.check_triple(triple)
    return float(score_batch(model, np.array([h]), np.array([r]), np.array([t]))[0])


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def pair_loss_batch(model: EmbeddingModel, pos: np.ndarray, neg: np.ndarray, margin: float, loss: str = "margin"):
    """Per-pair losses and the scalar coefficients dL/dscore for positives and negatives.

    ``pos``/``neg`` are (B, 3) id arrays. Returns ``(losses, active, c_pos, c_neg)``.
    """
    s_pos = score_batch(model, pos[:, 0], pos[:, 1], pos[:, 2])
    s_neg = score_batch(model, neg[:, 0], neg[:, 1], neg[:, 2])
    if loss == "margin":
        raw = margin - s_pos + s_neg
        active = raw > 0
        losses = np.maximum(raw, 0.0)
        c = active.astype(np.float64)
        return losses, active, -c, c
    if loss == "logistic":
        # logistic squashing of the raw score: -log sig(s_pos) - log(1 - sig(s_neg))
        losses = _softplus(-s_pos) + _softplus(s_neg)
        active = s_pos - s_neg < margin
        return losses, active, -_sigmoid(-s_pos), _sigmoid(s_neg)
    raise ValueError(f"unknown loss {loss!r}")


@dataclass
class SparseGradient:
    """Gradient restricted to the parameter rows a training pair touches."""

    entity_rows: dict[int, np.ndarray]
    relation_rows: dict[int, np.ndarray]

    def is_zero(self) -> bool:
        return all(not g.any() for g in self.entity_rows.values()) and all(
            not g.any() for g in self.relation_rows.values()
        )


def accumulate_gradients(model: EmbeddingModel, pos, neg, c_pos, c_neg):
    """Scatter per-pair score gradients into (unique ids, summed rows) for entities and relations."""
    ent_ids, ent_grads, rel_ids, rel_grads = [], [], [], []
    for triples, coef in ((pos, c_pos), (neg, c_neg)):
        mask = coef != 0
        if not mask.any():
            continue
        tr = triples[mask]
        gh, gr, gt = score_grad_batch(model, tr[:, 0], tr[:, 1], tr[:, 2])
        c = coef[mask]
        ent_ids += [tr[:, 0], tr[:, 2]]
        ent_grads += [gh * c[:, None], gt * c[:, None]]
        rel_ids.append(tr[:, 1])
        rel_grads.append(gr * c.reshape((-1,) + (1,) * (gr.ndim - 1)))
    return _reduce(ent_ids, ent_grads, model.entity_vecs.shape[1:]), _reduce(
        rel_ids, rel_grads, model.relation_params.shape[1:]
    )


def _reduce(ids, grads, row_shape):
    if not ids:
        return np.zeros(0, dtype=np.int64), np.zeros((0,) + row_shape)
    ids = np.concatenate(ids)
    grads = np.concatenate(grads)
    uniq, inv = np.unique(ids, return_inverse=True)
    out = np.zeros((len(uniq),) + row_shape)
    np.add.at(out, inv, grads)
    return uniq, out


def loss_and_grad(model: EmbeddingModel, positive, negative, margin: float, loss: str = "margin"):
    """Loss for one (positive, negative) pair and its gradient over touched rows."""
    if not margin > 0:
        raise ValueError("margin must be positive")
    pos = np.array([model.check_triple(positive)], dtype=np.int64)
    neg = np.array([model.check_triple(negative)], dtype=np.int64)
    losses, _, c_pos, c_neg = pair_loss_batch(model, pos, neg, margin, loss)
    (eu, eg), (ru, rg) = accumulate_gradients(model, pos, neg, c_pos, c_neg)
    touched_e = {int(pos[0, 0]), int(pos[0, 2]), int(neg[0, 0]), int(neg[0, 2])}
    touched_r = {int(pos[0, 1]), int(neg[0, 1])}
    ent = {e: np.zeros(model.entity_vecs.shape[1:]) for e in touched_e}
    rel = {r: np.zeros(model.relation_params.shape[1:]) for r in touched_r}
    for i, e in enumerate(eu):
        ent[int(e)] = eg[i]
    for i, r in enumerate(ru):
        rel[int(r)] = rg[i]
    return float(losses[0]), SparseGradient(ent, rel)
