"""Pure-Python (numpy/scipy) reference implementation of the hot loops.

Mirrors the compiled extension in ``_native.pyx`` call for call.  Results
agree with the extension to floating-point rounding (tanh may differ by a
few ulp between numpy's vectorised implementation and libm), so trajectory
comparisons across backends need a tolerance, not bit equality.  Within one
backend every routine is deterministic.
"""

import numpy as np
import scipy.sparse


def _as_csr(indptr, indices, data, n):
    return scipy.sparse.csr_matrix((data, indices, indptr), shape=(n, n), copy=False)


def csr_matvec(indptr, indices, data, x):
    n = len(indptr) - 1
    return _as_csr(indptr, indices, data, n) @ x


def _guard_tripped(r, guard):
    return not np.all(np.isfinite(r)) or np.abs(r).max() > guard


def open_loop_rk4(indptr, indices, data, win_scaled, gamma, tau, r0,
                  u_grid, u_mid, record_stride, record_states, guard):
    """Integrate the input-driven network with classical fixed-step RK4.

    ``u_grid`` holds the input at the step times (n_steps+1 rows) and
    ``u_mid`` at the half-step times (n_steps rows); both are evaluated
    analytically by the caller so the half-steps are exact.

    Returns ``(states, r_final, n_done, blowup_step)`` where ``states`` is
    the (n_recorded, N) array of states at steps 0, stride, 2*stride, ...
    (or None when ``record_states`` is false) and ``blowup_step`` is -1
    unless the divergence guard tripped after that step.
    """
    n = len(indptr) - 1
    m = _as_csr(indptr, indices, data, n)
    n_steps = u_mid.shape[0]
    r = np.array(r0, dtype=np.float64, copy=True)

    states = None
    if record_states:
        n_rec = n_steps // record_stride + 1
        states = np.empty((n_rec, n))
        states[0] = r

    half = 0.5 * tau
    sixth = tau / 6.0
    rec = 1
    for k in range(n_steps):
        drive0 = win_scaled @ u_grid[k]
        drive_m = win_scaled @ u_mid[k]
        drive1 = win_scaled @ u_grid[k + 1]
        k1 = gamma * (np.tanh(m @ r + drive0) - r)
        rt = r + half * k1
        k2 = gamma * (np.tanh(m @ rt + drive_m) - rt)
        rt = r + half * k2
        k3 = gamma * (np.tanh(m @ rt + drive_m) - rt)
        rt = r + tau * k3
        k4 = gamma * (np.tanh(m @ rt + drive1) - rt)
        r = r + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if _guard_tripped(r, guard):
            if record_states:
                states = states[:rec]
            return states, r, k + 1, k + 1
        if record_states and (k + 1) % record_stride == 0:
            states[rec] = r
            rec += 1
    return states, r, n_steps, -1


def closed_loop_rk4(indptr, indices, data, win_scaled, w_out, gamma, tau, r0,
                    n_steps, record_stride, record_outputs, record_states, guard):
    """Integrate the autonomous (readout-fed-back) network with RK4.

    The drive is ``win_scaled @ (w_out @ q(r))`` with the quadratic feature
    map ``q(r) = (r, r^2)``.  Returns ``(outputs, states, r_final, n_done,
    blowup_step)``; ``outputs`` holds the readout at the recorded steps.
    """
    n = len(indptr) - 1
    m = _as_csr(indptr, indices, data, n)
    w_lin = w_out[:, :n]
    w_sq = w_out[:, n:]
    r = np.array(r0, dtype=np.float64, copy=True)

    def readout(state):
        return w_lin @ state + w_sq @ (state * state)

    def rhs(state):
        drive = win_scaled @ readout(state)
        return gamma * (np.tanh(m @ state + drive) - state)

    outputs = states = None
    n_rec = n_steps // record_stride + 1
    if record_outputs:
        outputs = np.empty((n_rec, w_out.shape[0]))
        outputs[0] = readout(r)
    if record_states:
        states = np.empty((n_rec, n))
        states[0] = r

    half = 0.5 * tau
    sixth = tau / 6.0
    rec = 1
    for k in range(n_steps):
        k1 = rhs(r)
        k2 = rhs(r + half * k1)
        k3 = rhs(r + half * k2)
        k4 = rhs(r + tau * k3)
        r = r + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if _guard_tripped(r, guard):
            if record_outputs:
                outputs = outputs[:rec]
            if record_states:
                states = states[:rec]
            return outputs, states, r, k + 1, k + 1
        if (k + 1) % record_stride == 0:
            if record_outputs:
                outputs[rec] = readout(r)
            if record_states:
                states[rec] = r
            rec += 1
    return outputs, states, r, n_steps, -1
