"""Pure-Python sampling kernels.

Reference implementation; the compiled core mirrors this file operation by
operation (same uniform-consumption order, same float arithmetic order), so
the two backends produce identical output for identical seeds.
"""

from __future__ import annotations

import numpy as np

from hitlace.errors import InvariantViolation, ZeroDenominator


def _pick(weights, total: float, u: float) -> int:
    # inverse-CDF scan; the fallback clause guards round-off at the top end
    # and must land on a positive-weight index
    target = u * total
    acc = 0.0
    for j, w in enumerate(weights):
        acc += w
        if target < acc:
            return j
    j = len(weights) - 1
    while j > 0 and weights[j] <= 0.0:
        j -= 1
    return j


def sample_path(P: np.ndarray, pi0: np.ndarray, n_steps: int, rng,
                stop_state: int = -1) -> np.ndarray:
    """Sample X_0..X_{n_steps}, stopping early at ``stop_state`` if >= 0.

    Consumes exactly one uniform per sampled state.
    """
    rows = np.asarray(P, dtype=np.float64).tolist()
    init = np.asarray(pi0, dtype=np.float64).tolist()

    total = 0.0
    for w in init:
        total += w
    state = _pick(init, total, rng.random())
    path = [state]
    for _ in range(n_steps):
        if state == stop_state:
            break
        row = rows[state]
        total = 0.0
        for w in row:
            total += w
        state = _pick(row, total, rng.random())
        path.append(state)
    return np.asarray(path, dtype=np.int64)


def _link_weights(lam_col, prev_row, n_hat: int):
    # weights over dual states given the previous dual state row and the
    # link column at the current primary state; tiny negatives are clamped
    w = [0.0] * n_hat
    total = 0.0
    for j in range(n_hat):
        lv = lam_col[j]
        if lv < 0.0:
            lv = 0.0
        wj = prev_row[j] * lv
        w[j] = wj
        total += wj
    return w, total


def link_path(path: np.ndarray, pi0: np.ndarray, Phat: np.ndarray,
              lam: np.ndarray, delta: np.ndarray, pihat0: np.ndarray, rng,
              tol: float = 1e-10) -> np.ndarray:
    """Build the dual path for a given primary path.

    Step weights are Phat(prev, .) * lam(., x_t) normalized by
    delta(prev, x_t) with delta = Phat @ lam; one uniform per dual state.
    """
    path = np.asarray(path, dtype=np.int64)
    n_hat = lam.shape[0]
    lam_cols = np.asarray(lam, dtype=np.float64).T.tolist()   # lam_cols[x][xh]
    phat_rows = np.asarray(Phat, dtype=np.float64).tolist()
    delta_rows = np.asarray(delta, dtype=np.float64).tolist()
    init = np.asarray(pihat0, dtype=np.float64).tolist()
    pi0 = np.asarray(pi0, dtype=np.float64)

    x0 = int(path[0])
    w, total = _link_weights(lam_cols[x0], init, n_hat)
    denom = float(pi0[x0])
    if denom <= 0.0 or total <= 0.0:
        raise ZeroDenominator(f"initial state {x0} has zero mass under the link")
    if abs(total / denom - 1.0) > tol:
        raise InvariantViolation(
            f"linking weights sum to {total / denom:.15f} of the denominator at t=0")
    state = _pick(w, total, rng.random())
    dual = [state]
    for t in range(1, len(path)):
        xt = int(path[t])
        w, total = _link_weights(lam_cols[xt], phat_rows[state], n_hat)
        denom = delta_rows[state][xt]
        if denom <= 0.0 or total <= 0.0:
            raise ZeroDenominator(
                f"one-step law gives zero mass to primary state {xt} at t={t}")
        if abs(total / denom - 1.0) > tol:
            raise InvariantViolation(
                f"linking weights sum to {total / denom:.15f} of the denominator at t={t}")
        state = _pick(w, total, rng.random())
        dual.append(state)
    return np.asarray(dual, dtype=np.int64)


def sample_linked_pairs(P: np.ndarray, pi0: np.ndarray, Phat: np.ndarray,
                        pihat0: np.ndarray, lam: np.ndarray, delta: np.ndarray,
                        target: int, dual_target: int, n_pairs: int,
                        snapshot_times: np.ndarray, rng,
                        max_len: int = 1_000_000, tol: float = 1e-10):
    """Batch Monte Carlo: absorbing primary paths plus linked dual paths.

    Returns (t_primary, t_dual, counts) where counts[s, xh, x] tallies the
    joint state at snapshot_times[s] (absorbed pairs stay at their targets).
    A dual path that never reaches ``dual_target`` records t_dual = path
    length, which callers treat as a mismatch.
    """
    snapshot_times = np.asarray(snapshot_times, dtype=np.int64)
    n = P.shape[0]
    n_hat = lam.shape[0]
    t_primary = np.empty(n_pairs, dtype=np.int64)
    t_dual = np.empty(n_pairs, dtype=np.int64)
    counts = np.zeros((len(snapshot_times), n_hat, n), dtype=np.int64)

    for k in range(n_pairs):
        path = sample_path(P, pi0, max_len, rng, stop_state=target)
        if path[-1] != target:
            raise InvariantViolation(f"no absorption within {max_len} steps (pair {k})")
        dual = link_path(path, pi0, Phat, lam, delta, pihat0, rng, tol=tol)
        t_primary[k] = len(path) - 1
        hits = np.flatnonzero(dual == dual_target)
        t_dual[k] = hits[0] if len(hits) else len(dual)
        last = len(path) - 1
        for s, t in enumerate(snapshot_times):
            i = t if t < last else last
            counts[s, dual[i], path[i]] += 1
    return t_primary, t_dual, counts
