# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels: CSR matvec and fused RK4 loops.

Same call signatures and record/guard semantics as ``pyref``; see there for
the contract.  All loops run without the GIL.
"""

import numpy as np

cimport cython
from libc.math cimport fabs, isfinite, tanh


ctypedef double f64
ctypedef int i32


cdef inline void _mv(const i32* indptr, const i32* indices, const f64* data,
                     int n, const f64* x, f64* out) noexcept nogil:
    cdef int i, j
    cdef f64 acc
    for i in range(n):
        acc = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            acc += data[j] * x[indices[j]]
        out[i] = acc


cdef inline int _bad(const f64* r, int n, f64 guard) noexcept nogil:
    cdef int i
    for i in range(n):
        if not isfinite(r[i]) or fabs(r[i]) > guard:
            return 1
    return 0


def csr_matvec(const i32[::1] indptr, const i32[::1] indices,
               const f64[::1] data, const f64[::1] x):
    cdef int n = indptr.shape[0] - 1
    out = np.empty(n)
    cdef f64[::1] ov = out
    cdef const f64* pd = &data[0] if data.shape[0] > 0 else NULL
    cdef const i32* pi = &indices[0] if indices.shape[0] > 0 else NULL
    if n > 0:
        with nogil:
            _mv(&indptr[0], pi, pd, n, &x[0], &ov[0])
    return out


cdef inline void _open_rhs(const i32* indptr, const i32* indices, const f64* data,
                           const f64* win, int n, int d, f64 gamma,
                           const f64* r, const f64* u, f64* deriv,
                           f64* scratch) noexcept nogil:
    cdef int i, j
    cdef f64 acc
    _mv(indptr, indices, data, n, r, scratch)
    for i in range(n):
        acc = scratch[i]
        for j in range(d):
            acc += win[i * d + j] * u[j]
        deriv[i] = gamma * (tanh(acc) - r[i])


def open_loop_rk4(const i32[::1] indptr, const i32[::1] indices,
                  const f64[::1] data, const f64[:, ::1] win_scaled,
                  f64 gamma, f64 tau, const f64[::1] r0,
                  const f64[:, ::1] u_grid, const f64[:, ::1] u_mid,
                  int record_stride, bint record_states, f64 guard):
    cdef int n = indptr.shape[0] - 1
    cdef int d = win_scaled.shape[1]
    cdef int n_steps = u_mid.shape[0]
    cdef int n_rec = n_steps // record_stride + 1

    r = np.array(r0, dtype=np.float64, copy=True)
    work = np.empty((6, n))
    states = np.empty((n_rec, n)) if record_states else None

    cdef f64[::1] rv = r
    cdef f64[:, ::1] wk = work
    cdef f64[:, ::1] sv = states if record_states else work  # dummy when off
    cdef const f64* pd = &data[0] if data.shape[0] > 0 else NULL
    cdef const i32* pi = &indices[0] if indices.shape[0] > 0 else NULL
    cdef const i32* pp = &indptr[0]
    cdef const f64* pw = &win_scaled[0, 0]
    cdef f64* pr = &rv[0]
    cdef f64* k1 = &wk[0, 0]
    cdef f64* k2 = &wk[1, 0]
    cdef f64* k3 = &wk[2, 0]
    cdef f64* k4 = &wk[3, 0]
    cdef f64* rt = &wk[4, 0]
    cdef f64* sc = &wk[5, 0]
    cdef f64 half = 0.5 * tau
    cdef f64 sixth = tau / 6.0
    cdef int k, i, rec = 1, blowup = -1, done = n_steps

    if record_states:
        states[0] = r

    with nogil:
        for k in range(n_steps):
            _open_rhs(pp, pi, pd, pw, n, d, gamma, pr, &u_grid[k, 0], k1, sc)
            for i in range(n):
                rt[i] = pr[i] + half * k1[i]
            _open_rhs(pp, pi, pd, pw, n, d, gamma, rt, &u_mid[k, 0], k2, sc)
            for i in range(n):
                rt[i] = pr[i] + half * k2[i]
            _open_rhs(pp, pi, pd, pw, n, d, gamma, rt, &u_mid[k, 0], k3, sc)
            for i in range(n):
                rt[i] = pr[i] + tau * k3[i]
            _open_rhs(pp, pi, pd, pw, n, d, gamma, rt, &u_grid[k + 1, 0], k4, sc)
            for i in range(n):
                pr[i] = pr[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if _bad(pr, n, guard):
                blowup = k + 1
                done = k + 1
                break
            if record_states and (k + 1) % record_stride == 0:
                for i in range(n):
                    sv[rec, i] = pr[i]
                rec += 1

    if record_states:
        states = states[:rec] if blowup >= 0 else states
        return states, r, done, blowup
    return None, r, done, blowup


cdef inline void _closed_readout(const f64* wlin, const f64* wsq, int n, int d,
                                 const f64* r, f64* y) noexcept nogil:
    cdef int i, j
    cdef f64 acc
    for j in range(d):
        acc = 0.0
        for i in range(n):
            acc += wlin[j * n + i] * r[i]
        for i in range(n):
            acc += wsq[j * n + i] * r[i] * r[i]
        y[j] = acc


cdef inline void _closed_rhs(const i32* indptr, const i32* indices, const f64* data,
                             const f64* win, const f64* wlin, const f64* wsq,
                             int n, int d, f64 gamma, const f64* r,
                             f64* deriv, f64* scratch, f64* y) noexcept nogil:
    cdef int i, j
    cdef f64 acc
    _closed_readout(wlin, wsq, n, d, r, y)
    _mv(indptr, indices, data, n, r, scratch)
    for i in range(n):
        acc = scratch[i]
        for j in range(d):
            acc += win[i * d + j] * y[j]
        deriv[i] = gamma * (tanh(acc) - r[i])


def closed_loop_rk4(const i32[::1] indptr, const i32[::1] indices,
                    const f64[::1] data, const f64[:, ::1] win_scaled,
                    const f64[:, ::1] w_out, f64 gamma, f64 tau,
                    const f64[::1] r0, int n_steps, int record_stride,
                    bint record_outputs, bint record_states, f64 guard):
    cdef int n = indptr.shape[0] - 1
    cdef int d = win_scaled.shape[1]
    cdef int n_rec = n_steps // record_stride + 1

    # split W_out into the linear and quadratic halves, C-contiguous each
    wlin = np.ascontiguousarray(w_out[:, :n])
    wsq = np.ascontiguousarray(w_out[:, n:])
    r = np.array(r0, dtype=np.float64, copy=True)
    work = np.empty((6, n))
    ybuf = np.empty(d)
    outputs = np.empty((n_rec, d)) if record_outputs else None
    states = np.empty((n_rec, n)) if record_states else None

    cdef f64[::1] rv = r
    cdef f64[::1] yv = ybuf
    cdef f64[:, ::1] wk = work
    cdef f64[:, ::1] wl = wlin
    cdef f64[:, ::1] ws = wsq
    cdef f64[:, ::1] ov = outputs if record_outputs else work
    cdef f64[:, ::1] sv = states if record_states else work
    cdef const f64* pd = &data[0] if data.shape[0] > 0 else NULL
    cdef const i32* pi = &indices[0] if indices.shape[0] > 0 else NULL
    cdef const i32* pp = &indptr[0]
    cdef const f64* pw = &win_scaled[0, 0]
    cdef const f64* plin = &wl[0, 0]
    cdef const f64* psq = &ws[0, 0]
    cdef f64* pr = &rv[0]
    cdef f64* py = &yv[0]
    cdef f64* k1 = &wk[0, 0]
    cdef f64* k2 = &wk[1, 0]
    cdef f64* k3 = &wk[2, 0]
    cdef f64* k4 = &wk[3, 0]
    cdef f64* rt = &wk[4, 0]
    cdef f64* sc = &wk[5, 0]
    cdef f64 half = 0.5 * tau
    cdef f64 sixth = tau / 6.0
    cdef int k, i, rec = 1, blowup = -1, done = n_steps

    if record_outputs:
        _closed_readout(plin, psq, n, d, pr, py)
        for i in range(d):
            ov[0, i] = py[i]
    if record_states:
        states[0] = r

    with nogil:
        for k in range(n_steps):
            _closed_rhs(pp, pi, pd, pw, plin, psq, n, d, gamma, pr, k1, sc, py)
            for i in range(n):
                rt[i] = pr[i] + half * k1[i]
            _closed_rhs(pp, pi, pd, pw, plin, psq, n, d, gamma, rt, k2, sc, py)
            for i in range(n):
                rt[i] = pr[i] + half * k2[i]
            _closed_rhs(pp, pi, pd, pw, plin, psq, n, d, gamma, rt, k3, sc, py)
            for i in range(n):
                rt[i] = pr[i] + tau * k3[i]
            _closed_rhs(pp, pi, pd, pw, plin, psq, n, d, gamma, rt, k4, sc, py)
            for i in range(n):
                pr[i] = pr[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if _bad(pr, n, guard):
                blowup = k + 1
                done = k + 1
                break
            if (k + 1) % record_stride == 0:
                if record_outputs:
                    _closed_readout(plin, psq, n, d, pr, py)
                    for i in range(d):
                        ov[rec, i] = py[i]
                if record_states:
                    for i in range(n):
                        sv[rec, i] = pr[i]
                rec += 1

    if blowup >= 0:
        outputs = outputs[:rec] if record_outputs else None
        states = states[:rec] if record_states else None
    return outputs, states, r, done, blowup
