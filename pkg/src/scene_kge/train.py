"""Negative-sampling SGD training for the embedding models."""

from __future__ import annotations

import logging
import threading
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kg import KnowledgeGraph, Triple
from .models import (
    Algorithm,
    EmbeddingModel,
    ModelConfig,
    accumulate_gradients,
    pair_loss_batch,
)

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite parameters after epoch {epoch}, batch {batch}")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 0.01
    margin: float = 1.0
    negatives_per_positive: int = 1
    normalize_entities: bool | None = None
    l2_reg: float | None = None
    seed: int = 0
    threads: int = 1
    loss: str = "margin"
    rescal_param_budget: int = 10_000_000

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolved(self, algorithm: Algorithm) -> "TrainConfig":
        """Fill algorithm-dependent defaults (entity normalization, weight decay)."""
        algorithm = Algorithm.parse(algorithm)
        kw = dict(self.__dict__)
        if kw["normalize_entities"] is None:
            kw["normalize_entities"] = algorithm is Algorithm.TRANSE
        if kw["l2_reg"] is None:
            kw["l2_reg"] = 1e-3 if algorithm is Algorithm.RESCAL else 0.0
        return TrainConfig(**kw)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    violation_rate: float
    wall_time: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)

    @property
    def mean_losses(self) -> list[float]:
        return [e.mean_loss for e in self.epochs]

    @property
    def violation_rates(self) -> list[float]:
        return [e.violation_rate for e in self.epochs]

    def __len__(self) -> int:
        return len(self.epochs)


def init_model(mcfg: ModelConfig, kg: KnowledgeGraph) -> EmbeddingModel:
    n, m, d = len(kg.entities), len(kg.relations), mcfg.dim
    if n == 0 or m == 0:
        raise ValueError("cannot initialise a model for an empty knowledge graph")
    rng = np.random.default_rng(mcfg.seed)
    bound = 6.0 / np.sqrt(d)
    entity_vecs = rng.uniform(-bound, bound, size=(n, d))
    if mcfg.algorithm is Algorithm.RESCAL:
        relation_params = rng.uniform(-bound, bound, size=(m, d, d))
    else:
        relation_params = rng.uniform(-bound, bound, size=(m, d))
        norms = np.linalg.norm(relation_params, axis=1, keepdims=True)
        relation_params /= np.maximum(norms, 1e-12)
    return EmbeddingModel(mcfg, entity_vecs, relation_params, kg.entities, kg.relations)


def corrupt_batch(positives: np.ndarray, n_entities: int, rng: np.random.Generator) -> np.ndarray:
    """Replace head or tail (fair coin) of each row by a different uniform entity."""
    if n_entities < 2:
        raise ValueError("negative sampling needs at least two entities")
    neg = positives.copy()
    b = len(positives)
    replace_head = rng.random(b) < 0.5
    slot = np.where(replace_head, 0, 2)
    original = positives[np.arange(b), slot]
    # a uniform draw over the n - 1 other entities, without rejection loops
    draw = rng.integers(0, n_entities - 1, size=b)
    draw = draw + (draw >= original)
    neg[np.arange(b), slot] = draw
    return neg


def sample_negative(kg: KnowledgeGraph, pos, rng: np.random.Generator) -> Triple:
    arr = np.asarray([tuple(pos)], dtype=np.int64)
    h, r, t = corrupt_batch(arr, len(kg.entities), rng)[0]
    return Triple(int(h), int(r), int(t))


def _project_rows(E: np.ndarray, rows: np.ndarray) -> None:
    norms = np.linalg.norm(E[rows], axis=1)
    over = norms > 1.0
    if over.any():
        E[rows[over]] /= norms[over, None]


def _sgd_batch(model, pos, rng, tcfg: TrainConfig):
    """One minibatch step in place. Returns (loss sum, active count, pair count, touched rows)."""
    k = tcfg.negatives_per_positive
    pos_rep = np.repeat(pos, k, axis=0) if k > 1 else pos
    neg = corrupt_batch(pos_rep, model.n_entities, rng)
    losses, active, c_pos, c_neg = pair_loss_batch(model, pos_rep, neg, tcfg.margin, tcfg.loss)
    (eu, eg), (ru, rg) = accumulate_gradients(model, pos_rep, neg, c_pos, c_neg)
    if tcfg.l2_reg:
        eg += tcfg.l2_reg * model.entity_vecs[eu]
        rg += tcfg.l2_reg * model.relation_params[ru]
    lr = tcfg.learning_rate
    if lr:
        model.entity_vecs[eu] -= lr * eg
        model.relation_params[ru] -= lr * rg
    if tcfg.normalize_entities:
        touched = np.unique(np.concatenate([pos_rep[:, 0], pos_rep[:, 2], neg[:, 0], neg[:, 2]]))
        _project_rows(model.entity_vecs, touched)
        eu = touched
    return float(losses.sum()), int(active.sum()), len(pos_rep), eu, ru


def _finite(model, loss, eu, ru) -> bool:
    return bool(
        np.isfinite(loss)
        and np.isfinite(model.entity_vecs[eu]).all()
        and np.isfinite(model.relation_params[ru]).all()
    )


def train(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    tcfg: TrainConfig,
    on_epoch=None,
) -> tuple[EmbeddingModel, TrainHistory]:
    """Train a copy of ``model`` on ``kg``; the input model is left untouched.

    ``threads > 1`` runs lock-free shards over shared parameters and is not
    reproducible. ``on_epoch`` is called with each :class:`EpochRecord`.
    """
    if model.n_entities != len(kg.entities) or model.n_relations != len(kg.relations):
        raise ValueError("model and knowledge graph vocabulary sizes differ")
    if len(kg) == 0:
        raise ValueError("knowledge graph has no triples")
    tcfg = tcfg.resolved(model.algorithm)
    if model.algorithm is Algorithm.RESCAL:
        rel_params = model.relation_params.size
        if rel_params > tcfg.rescal_param_budget:
            warnings.warn(
                f"RESCAL relation matrices hold {rel_params} parameters "
                f"(budget {tcfg.rescal_param_budget}); training may not scale",
                RuntimeWarning,
                stacklevel=2,
            )

    model = model.copy()
    triples = kg.as_array()
    rng = np.random.default_rng(tcfg.seed)
    history = TrainHistory()
    bs = tcfg.batch_size

    for epoch in range(1, tcfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(triples))
        if tcfg.threads == 1:
            stats = [0.0, 0, 0]
            for b, start in enumerate(range(0, len(order), bs)):
                loss, act, cnt, eu, ru = _sgd_batch(model, triples[order[start:start + bs]], rng, tcfg)
                stats[0] += loss
                stats[1] += act
                stats[2] += cnt
                if not _finite(model, loss, eu, ru):
                    raise TrainingDiverged(epoch, b)
        else:
            stats = _hogwild_epoch(model, triples, order, rng, tcfg, epoch)
        record = EpochRecord(
            epoch=epoch,
            mean_loss=stats[0] / stats[2],
            violation_rate=stats[1] / stats[2],
            wall_time=time.perf_counter() - t0,
        )
        history.epochs.append(record)
        log.debug("epoch %d loss %.6f violations %.4f", epoch, record.mean_loss, record.violation_rate)
        if on_epoch is not None:
            on_epoch(record)
    return model, history


def _hogwild_epoch(model, triples, order, rng, tcfg, epoch):
    shards = np.array_split(order, tcfg.threads)
    seeds = rng.integers(0, 2**63 - 1, size=tcfg.threads)
    totals = [[0.0, 0, 0] for _ in shards]
    failure: list[TrainingDiverged] = []
    bs = tcfg.batch_size

    def worker(i):
        local_rng = np.random.default_rng(int(seeds[i]))
        for b, start in enumerate(range(0, len(shards[i]), bs)):
            if failure:
                return
            loss, act, cnt, eu, ru = _sgd_batch(model, triples[shards[i][start:start + bs]], local_rng, tcfg)
            totals[i][0] += loss
            totals[i][1] += act
            totals[i][2] += cnt
            if not _finite(model, loss, eu, ru):
                failure.append(TrainingDiverged(epoch, b))
                return

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(len(shards))]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if failure:
        raise failure[0]
    return [sum(t[j] for t in totals) for j in range(3)]
