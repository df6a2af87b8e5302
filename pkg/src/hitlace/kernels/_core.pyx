# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels.

Mirrors ``hitlace.kernels._fallback`` operation by operation: uniforms are
consumed in the same order and float arithmetic happens in the same order
(built with FP contraction off), so both backends give identical output for
the same seed.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport fabs
from numpy.random cimport bitgen_t

from hitlace.errors import InvariantViolation, ZeroDenominator

cnp.import_array()


cdef bitgen_t *_bitgen(object rng) except NULL:
    return <bitgen_t *>PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline Py_ssize_t _pick(const double *w, Py_ssize_t n, double total,
                             double u) noexcept nogil:
    # round-off at the top end must still land on a positive-weight index
    cdef double target = u * total
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(n):
        acc += w[j]
        if target < acc:
            return j
    j = n - 1
    while j > 0 and w[j] <= 0.0:
        j -= 1
    return j


cdef Py_ssize_t _sample_path_into(const double[:, ::1] P, const double[::1] pi0,
                                  Py_ssize_t n_steps, long stop_state,
                                  bitgen_t *bg, cnp.int64_t *out) noexcept nogil:
    cdef Py_ssize_t n = P.shape[1]
    cdef Py_ssize_t j, t, state, count
    cdef double total = 0.0
    for j in range(n):
        total += pi0[j]
    state = _pick(&pi0[0], n, total, bg.next_double(bg.state))
    out[0] = state
    count = 1
    for t in range(n_steps):
        if state == stop_state:
            break
        total = 0.0
        for j in range(n):
            total += P[state, j]
        state = _pick(&P[state, 0], n, total, bg.next_double(bg.state))
        out[count] = state
        count += 1
    return count


cdef int _link_path_into(const cnp.int64_t *path, Py_ssize_t plen,
                         const double[::1] pi0, const double[:, ::1] Phat,
                         const double[:, ::1] lam, const double[:, ::1] delta,
                         const double[::1] pihat0, double tol, bitgen_t *bg,
                         double *w, cnp.int64_t *out,
                         Py_ssize_t *err_t) noexcept nogil:
    # status codes: 0 ok, 1 zero denominator, 2 weight-sum violation
    cdef Py_ssize_t n_hat = lam.shape[0]
    cdef Py_ssize_t j, t, state, x
    cdef double total, denom, lv, wj

    x = <Py_ssize_t>path[0]
    total = 0.0
    for j in range(n_hat):
        lv = lam[j, x]
        if lv < 0.0:
            lv = 0.0
        wj = pihat0[j] * lv
        w[j] = wj
        total += wj
    denom = pi0[x]
    if denom <= 0.0 or total <= 0.0:
        err_t[0] = 0
        return 1
    if fabs(total / denom - 1.0) > tol:
        err_t[0] = 0
        return 2
    state = _pick(w, n_hat, total, bg.next_double(bg.state))
    out[0] = state

    for t in range(1, plen):
        x = <Py_ssize_t>path[t]
        total = 0.0
        for j in range(n_hat):
            lv = lam[j, x]
            if lv < 0.0:
                lv = 0.0
            wj = Phat[state, j] * lv
            w[j] = wj
            total += wj
        denom = delta[state, x]
        if denom <= 0.0 or total <= 0.0:
            err_t[0] = t
            return 1
        if fabs(total / denom - 1.0) > tol:
            err_t[0] = t
            return 2
        state = _pick(w, n_hat, total, bg.next_double(bg.state))
        out[t] = state
    return 0


def sample_path(P, pi0, n_steps, rng, stop_state=-1):
    """See hitlace.kernels._fallback.sample_path."""
    cdef const double[:, ::1] Pm = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] p0 = np.ascontiguousarray(pi0, dtype=np.float64)
    cdef bitgen_t *bg = _bitgen(rng)
    out = np.empty(<Py_ssize_t>n_steps + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    cdef Py_ssize_t count = _sample_path_into(Pm, p0, n_steps, stop_state, bg, &ov[0])
    return out[:count].copy()


def link_path(path, pi0, Phat, lam, delta, pihat0, rng, tol=1e-10):
    """See hitlace.kernels._fallback.link_path."""
    p = np.ascontiguousarray(path, dtype=np.int64)
    cdef const cnp.int64_t[::1] pv = p
    cdef const double[::1] p0 = np.ascontiguousarray(pi0, dtype=np.float64)
    cdef const double[:, ::1] Ph = np.ascontiguousarray(Phat, dtype=np.float64)
    cdef const double[:, ::1] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const double[:, ::1] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef const double[::1] ph0 = np.ascontiguousarray(pihat0, dtype=np.float64)
    cdef bitgen_t *bg = _bitgen(rng)
    out = np.empty(len(p), dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    scratch = np.empty(lm.shape[0], dtype=np.float64)
    cdef double[::1] w = scratch
    cdef Py_ssize_t err_t = 0
    cdef int status = _link_path_into(&pv[0], len(p), p0, Ph, lm, dl, ph0,
                                      tol, bg, &w[0], &ov[0], &err_t)
    if status == 1:
        raise ZeroDenominator(f"one-step law gives zero mass to the primary state at t={err_t}")
    if status == 2:
        raise InvariantViolation(f"linking weights do not sum to the denominator at t={err_t}")
    return out


def sample_linked_pairs(P, pi0, Phat, pihat0, lam, delta, target, dual_target,
                        n_pairs, snapshot_times, rng, max_len=1_000_000, tol=1e-10):
    """See hitlace.kernels._fallback.sample_linked_pairs."""
    cdef const double[:, ::1] Pm = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] p0 = np.ascontiguousarray(pi0, dtype=np.float64)
    cdef const double[:, ::1] Ph = np.ascontiguousarray(Phat, dtype=np.float64)
    cdef const double[::1] ph0 = np.ascontiguousarray(pihat0, dtype=np.float64)
    cdef const double[:, ::1] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const double[:, ::1] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef const cnp.int64_t[::1] st = np.ascontiguousarray(snapshot_times, dtype=np.int64)
    cdef bitgen_t *bg = _bitgen(rng)

    cdef Py_ssize_t n = Pm.shape[0]
    cdef Py_ssize_t n_hat = lm.shape[0]
    cdef Py_ssize_t n_snap = st.shape[0]
    cdef Py_ssize_t cap = <Py_ssize_t>max_len
    cdef long tgt = target
    cdef Py_ssize_t dtgt = dual_target

    t_primary = np.empty(n_pairs, dtype=np.int64)
    t_dual = np.empty(n_pairs, dtype=np.int64)
    counts = np.zeros((n_snap, n_hat, n), dtype=np.int64)
    cdef cnp.int64_t[::1] tp = t_primary
    cdef cnp.int64_t[::1] td = t_dual
    cdef cnp.int64_t[:, :, ::1] cnts = counts

    path_buf = np.empty(cap + 1, dtype=np.int64)
    dual_buf = np.empty(cap + 1, dtype=np.int64)
    scratch = np.empty(n_hat, dtype=np.float64)
    cdef cnp.int64_t[::1] pb = path_buf
    cdef cnp.int64_t[::1] db = dual_buf
    cdef double[::1] w = scratch

    cdef Py_ssize_t k, plen, t, i, s, last, hit, err_t
    cdef int status
    for k in range(n_pairs):
        plen = _sample_path_into(Pm, p0, cap, tgt, bg, &pb[0])
        if pb[plen - 1] != tgt:
            raise InvariantViolation(f"no absorption within {max_len} steps (pair {k})")
        err_t = 0
        status = _link_path_into(&pb[0], plen, p0, Ph, lm, dl, ph0, tol, bg,
                                 &w[0], &db[0], &err_t)
        if status == 1:
            raise ZeroDenominator(
                f"one-step law gives zero mass to the primary state at t={err_t} (pair {k})")
        if status == 2:
            raise InvariantViolation(
                f"linking weights do not sum to the denominator at t={err_t} (pair {k})")
        tp[k] = plen - 1
        hit = plen
        for t in range(plen):
            if db[t] == dtgt:
                hit = t
                break
        td[k] = hit
        last = plen - 1
        for s in range(n_snap):
            i = st[s] if st[s] < last else last
            cnts[s, db[i], pb[i]] += 1
    return t_primary, t_dual, counts
