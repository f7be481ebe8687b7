"""Compiled inner loops for time propagation and the Krotov forward sweep.

States are packed as real arrays of shape ``(M, 2N)``: columns ``0..N-1``
hold real parts and ``N..2N-1`` imaginary parts of the N state vectors.
The Hamiltonian ``H(eps) = diag(h0) - eps * mu`` is real symmetric, so the
real and imaginary halves can be pushed through one real matrix product.

The step propagator ``exp(-i sign H dt)`` is evaluated by a truncated Taylor
series applied to the block of states, terminated once the next term falls
below ``_TERM_TOL``. ``h0`` is passed already shifted by a constant energy;
the matching scalar phase is restored after each step so results equal the
unshifted propagation.
"""
import math

import numpy as np
from numba import njit

_TERM_TOL = 1e-18
_MAX_ORDER = 60
# substep whenever the generator norm bound exceeds this
_MAX_STEP_NORM = 0.5

_FLAGS = {"reassoc", "contract", "arcp", "nsz"}


@njit(cache=True, nogil=True, fastmath=_FLAGS)
def _n_substeps(h0s, mu_norm, eps, dt):
    bound = dt * (np.max(np.abs(h0s)) + abs(eps) * mu_norm)
    if bound <= _MAX_STEP_NORM:
        return 1
    return int(math.ceil(bound / _MAX_STEP_NORM))


@njit(cache=True, nogil=True, fastmath=_FLAGS)
def taylor_step(X, h0s, mu, mu_norm, eps, dt, shift, sign, T, A):
    """Apply exp(-i*sign*(diag(h0s) + shift - eps*mu)*dt) to X in place."""
    M, C = X.shape
    N = C // 2
    nsub = _n_substeps(h0s, mu_norm, eps, dt)
    h = dt / nsub
    for _ in range(nsub):
        for m in range(M):
            for c in range(C):
                T[m, c] = X[m, c]
        for order in range(1, _MAX_ORDER + 1):
            f = sign * h / order
            A[:, :] = np.dot(mu, T)
            biggest = 0.0
            for m in range(M):
                hm = h0s[m]
                for c in range(N):
                    h_re = hm * T[m, c] - eps * A[m, c]
                    h_im = hm * T[m, N + c] - eps * A[m, N + c]
                    # (-i f)(h_re + i h_im) = f h_im - i f h_re
                    re = f * h_im
                    im = -f * h_re
                    T[m, c] = re
                    T[m, N + c] = im
                    X[m, c] += re
                    X[m, N + c] += im
                    mag = abs(re) + abs(im)
                    if mag > biggest:
                        biggest = mag
            if biggest < _TERM_TOL:
                break
        phase = -sign * shift * h
        cs = math.cos(phase)
        sn = math.sin(phase)
        for m in range(M):
            for c in range(N):
                re = X[m, c]
                im = X[m, N + c]
                X[m, c] = re * cs - im * sn
                X[m, N + c] = re * sn + im * cs


@njit(cache=True, nogil=True, fastmath=_FLAGS)
def _column_norms(X, out):
    M, C = X.shape
    N = C // 2
    for c in range(N):
        acc = 0.0
        for m in range(M):
            acc += X[m, c] * X[m, c] + X[m, N + c] * X[m, N + c]
        out[c] = math.sqrt(acc)


@njit(cache=True, nogil=True, fastmath=_FLAGS)
def _norm_drift(X, ref, buf):
    _column_norms(X, buf)
    worst = 0.0
    for c in range(buf.size):
        d = abs(buf[c] - ref[c])
        if d > worst:
            worst = d
    return worst


@njit(cache=True, nogil=True, fastmath=_FLAGS)
def propagate(X, h0s, mu, mu_norm, eps, dt, shift, sign, traj):
    """Propagate X through all field samples; return the worst norm drift.

    ``sign=+1`` marches forward from t=0 using ``eps[0], eps[1], ...``;
    ``sign=-1`` marches backward from t=T using ``eps[-1], eps[-2], ...``.
    If ``traj`` has a nonzero leading dimension, ``traj[j]`` receives the
    state at time ``j*dt`` in both directions.
    """
    n = eps.size
    T = np.empty_like(X)
    A = np.empty_like(X)
    ref = np.empty(X.shape[1] // 2)
    buf = np.empty_like(ref)
    _column_norms(X, ref)
    record = traj.shape[0] > 0
    worst = 0.0
    if sign > 0:
        if record:
            traj[0, :, :] = X
        for j in range(n):
            taylor_step(X, h0s, mu, mu_norm, eps[j], dt, shift, 1.0, T, A)
            d = _norm_drift(X, ref, buf)
            if d > worst:
                worst = d
            if record:
                traj[j + 1, :, :] = X
    else:
        if record:
            traj[n, :, :] = X
        for j in range(n - 1, -1, -1):
            taylor_step(X, h0s, mu, mu_norm, eps[j], dt, shift, -1.0, T, A)
            d = _norm_drift(X, ref, buf)
            if d > worst:
                worst = d
            if record:
                traj[j, :, :] = X
    return worst


@njit(cache=True, nogil=True, fastmath=_FLAGS)
def forward_sweep(X, chi, a_re, a_im, eps_old, shape, lambda0, h0s, mu,
                  mu_norm, dt, shift, update, eps_new, coupling, traj):
    """Forward pass of one Krotov iteration on the interleaved grids.

    At field point j the quantity ``Im sum_k a_k <chi_k(j dt)|mu|phi_k(j dt)>``
    is stored in ``coupling[j]``. With ``update`` set, the field sample
    becomes ``eps_old[j] - shape[j]/lambda0 * coupling[j]`` before the
    states are advanced; otherwise the old sample is used unchanged.

    Returns ``(bad_index, worst_norm_drift)``; ``bad_index`` is -1 unless
    a non-finite field correction was produced at that step.
    """
    M, C = X.shape
    N = C // 2
    n = eps_old.size
    T = np.empty_like(X)
    A = np.empty_like(X)
    Y = np.empty_like(X)
    ref = np.empty(N)
    buf = np.empty(N)
    _column_norms(X, ref)
    record = traj.shape[0] > 0
    if record:
        traj[0, :, :] = X
    worst = 0.0
    for j in range(n):
        Y[:, :] = np.dot(mu, X)
        total = 0.0
        for k in range(N):
            s_re = 0.0
            s_im = 0.0
            for m in range(M):
                cr = chi[j, m, k]
                ci = chi[j, m, N + k]
                yr = Y[m, k]
                yi = Y[m, N + k]
                s_re += cr * yr + ci * yi
                s_im += cr * yi - ci * yr
            total += a_re[k] * s_im + a_im[k] * s_re
        coupling[j] = total
        if update:
            step = -shape[j] / lambda0 * total
            if not math.isfinite(step):
                return j, worst
            eps_new[j] = eps_old[j] + step
        else:
            eps_new[j] = eps_old[j]
        taylor_step(X, h0s, mu, mu_norm, eps_new[j], dt, shift, 1.0, T, A)
        d = _norm_drift(X, ref, buf)
        if d > worst:
            worst = d
        if record:
            traj[j + 1, :, :] = X
    return -1, worst
