"""Independent reference implementations used as test oracles.

None of these import the code paths they check.
"""

from __future__ import annotations

import math

import numpy as np


def floyd_warshall_histogram(n: int, edges) -> tuple[dict[int, int], int]:
    """Unordered-pair shortest-path histogram by dense Floyd-Warshall."""
    inf = math.inf
    dist = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v in edges:
        if u != v:
            dist[u][v] = dist[v][u] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if dist[i][k] + dist[k][j] < dist[i][j]:
                    dist[i][j] = dist[i][k] + dist[k][j]
    counts: dict[int, int] = {}
    unreachable = 0
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i][j] == inf:
                unreachable += 1
            else:
                counts[int(dist[i][j])] = counts.get(int(dist[i][j]), 0) + 1
    return counts, unreachable


def naive_states(w_in, w_rec, neighbors: list[list[int]], features, iterations: int,
                 initial=None) -> np.ndarray:
    """Scalar-by-scalar iteration of the tanh state system (pure Python loops)."""
    w_in = np.asarray(w_in, dtype=float).tolist()
    w_rec = np.asarray(w_rec, dtype=float).tolist()
    x = np.asarray(features, dtype=float).tolist()
    n, h = len(neighbors), len(w_in)
    if initial is None:
        state = [[0.0] * h for _ in range(n)]
    else:
        state = np.asarray(initial, dtype=float).tolist()
    for _ in range(iterations):
        new = []
        for v in range(n):
            row = []
            for i in range(h):
                acc = sum(w_in[i][j] * x[v][j] for j in range(len(x[v])))
                for u in neighbors[v]:
                    acc += sum(w_rec[i][j] * state[u][j] for j in range(h))
                row.append(math.tanh(acc))
            new.append(row)
        state = new
    return np.array(state)


def dense_states(w_in, w_rec, adjacency, features, iterations, initial=None):
    """Dense-matrix iteration (numpy, no sparse structures)."""
    a = np.asarray(adjacency, dtype=float)
    state = np.zeros((a.shape[0], w_in.shape[0])) if initial is None else np.array(initial)
    drive = features @ w_in.T
    for _ in range(iterations):
        state = np.tanh(drive + a @ state @ w_rec.T)
    return state


def fd_jacobian(w_in, w_rec, adjacency, features, iterations, v, u, step=1e-5):
    """Central finite-difference Jacobian of h_v(K) with respect to x_u."""
    features = np.array(features, dtype=float)
    x_dim = features.shape[1]
    jac = np.zeros((w_in.shape[0], x_dim))
    for j in range(x_dim):
        plus, minus = features.copy(), features.copy()
        plus[u, j] += step
        minus[u, j] -= step
        hp = dense_states(w_in, w_rec, adjacency, plus, iterations)[v]
        hm = dense_states(w_in, w_rec, adjacency, minus, iterations)[v]
        jac[:, j] = (hp - hm) / (2 * step)
    return jac


def stacked_ridge(states, targets, lam, bias=True):
    """Ridge solution as ordinary least squares on the stacked system
    [G; sqrt(lam) I] W = [Y; 0]."""
    g = np.hstack([states, np.ones((states.shape[0], 1))]) if bias else states
    d = g.shape[1]
    a = np.vstack([g, math.sqrt(lam) * np.eye(d)])
    b = np.vstack([targets, np.zeros((d, targets.shape[1]))])
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return sol


def all_pairs_bfs_distances(n, edges):
    """Pure-Python BFS distance matrix (inf where unreachable)."""
    from collections import deque

    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    out = np.full((n, n), np.inf)
    for s in range(n):
        out[s, s] = 0
        q = deque([s])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if out[s, y] == np.inf:
                    out[s, y] = out[s, x] + 1
                    q.append(y)
    return out
