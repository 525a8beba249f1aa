"""Analytic vs finite-difference gradient comparison on random hinge-active pairs."""

import numpy as np
import pytest

from conftest import make_model
from oracles import central_differences, naive_margin_loss
from scene_kge.models import loss_and_grad


def random_active_instance(algo, rng, d=4, n=6, m=2, margin=1.0):
    while True:
        E = rng.normal(size=(n, d))
        R = rng.normal(size=(m, d, d)) if algo == "RESCAL" else rng.normal(size=(m, d))
        pos = tuple(int(x) for x in (rng.integers(n), rng.integers(m), rng.integers(n)))
        slot = 0 if rng.random() < 0.5 else 2
        neg = list(pos)
        neg[slot] = int((pos[slot] + 1 + rng.integers(n - 1)) % n)
        neg = tuple(neg)
        loss = naive_margin_loss(algo, E, R, pos, neg, margin)
        if loss > 1e-2:
            return E, R, pos, neg


def check_gradient(algo, rng, margin=1.0):
    E, R, pos, neg = random_active_instance(algo, rng, margin=margin)
    model = make_model(algo, E, R)
    loss, grad = loss_and_grad(model, pos, neg, margin)
    assert loss == pytest.approx(naive_margin_loss(algo, E, R, pos, neg, margin), rel=1e-10)
    fd_e, fd_r = central_differences(
        lambda Ep, Rp: naive_margin_loss(algo, Ep, Rp, pos, neg, margin),
        E, R, sorted(grad.entity_rows), sorted(grad.relation_rows),
    )
    analytic = np.concatenate([grad.entity_rows[k].ravel() for k in sorted(fd_e)]
                              + [grad.relation_rows[k].ravel() for k in sorted(fd_r)])
    numeric = np.concatenate([fd_e[k].ravel() for k in sorted(fd_e)] + [fd_r[k].ravel() for k in sorted(fd_r)])
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
