"""Reference computations kept independent of the package's vectorised paths."""

import numpy as np


def naive_correlation(a, b):
    d = len(a)
    return np.array([sum(a[i] * b[(k + i) % d] for i in range(d)) for k in range(d)])


def naive_score(algo, E, R, triple, norm="L2"):
    h, r, t = triple
    if algo == "TransE":
        u = E[h] + R[r] - E[t]
        return -(np.abs(u).sum() if norm == "L1" else np.sqrt(np.dot(u, u)))
    if algo == "RESCAL":
        return float(sum(E[h][i] * R[r][i, j] * E[t][j] for i in range(len(E[h])) for j in range(len(E[t]))))
    return float(np.dot(R[r], naive_correlation(E[h], E[t])))


def naive_margin_loss(algo, E, R, pos, neg, margin, norm="L2"):
    return max(0.0, margin - naive_score(algo, E, R, pos, norm) + naive_score(algo, E, R, neg, norm))


def central_differences(fn, E, R, entity_rows, relation_rows, step=1e-5):
    """Central finite-difference gradient of fn(E, R) over the given rows."""
    ent, rel = {}, {}
    for rows, params, out, which in ((entity_rows, E, ent, 0), (relation_rows, R, rel, 1)):
        for row in rows:
            g = np.zeros(params[row].shape)
            for idx in np.ndindex(*params[row].shape):
                Ep, Rp = E.copy(), R.copy()
                Em, Rm = E.copy(), R.copy()
                (Ep, Rp)[which][row][idx] += step
                (Em, Rm)[which][row][idx] -= step
                g[idx] = (fn(Ep, Rp) - fn(Em, Rm)) / (2 * step)
            out[row] = g
    return ent, rel


def brute_force_neighbors(X, query, k, exclude=()):
    """Exhaustive cosine scan with ties broken by ascending id."""
    def cos(a, b):
        na, nb = np.sqrt(np.dot(a, a)), np.sqrt(np.dot(b, b))
        return 0.0 if na == 0 or nb == 0 else np.dot(a, b) / (na * nb)

    cands = [(-cos(X[query], X[j]), j) for j in range(len(X)) if j != query and j not in exclude]
    cands.sort()
    return [j for _, j in cands[:k]]
