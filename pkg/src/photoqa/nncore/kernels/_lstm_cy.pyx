# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython LSTM sequence kernels; drop-in twin of lstm_py.

Same fused gate layout and cache shapes as the numpy backend. Manual loops
avoid per-step numpy dispatch overhead, which dominates for the small hidden
sizes used here.
"""

from libc.math cimport exp, tanh

import numpy as np

BACKEND_NAME = "cython"


cdef inline double _sig(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def lstm_forward(double[:, ::1] W, double[::1] b, double[:, ::1] X, int hidden):
    cdef int steps = X.shape[0]
    cdef int in_dim = X.shape[1]
    cdef int total = in_dim + hidden
    cdef int t, r, j

    H_arr = np.zeros((steps, hidden))
    cat_arr = np.zeros((steps, total))
    gates_arr = np.zeros((steps, 4 * hidden))
    c_arr = np.zeros((steps, hidden))
    ct_arr = np.zeros((steps, hidden))

    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] cat = cat_arr
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] ct = ct_arr

    cdef double z, iv, fv, gv, ov, cv

    with nogil:
        for t in range(steps):
            for j in range(in_dim):
                cat[t, j] = X[t, j]
            if t > 0:
                for j in range(hidden):
                    cat[t, in_dim + j] = H[t - 1, j]
            for r in range(4 * hidden):
                z = b[r]
                for j in range(total):
                    z += W[r, j] * cat[t, j]
                if r >= 2 * hidden and r < 3 * hidden:
                    gates[t, r] = tanh(z)
                else:
                    gates[t, r] = _sig(z)
            for j in range(hidden):
                iv = gates[t, j]
                fv = gates[t, hidden + j]
                gv = gates[t, 2 * hidden + j]
                ov = gates[t, 3 * hidden + j]
                cv = iv * gv
                if t > 0:
                    cv += fv * c[t - 1, j]
                c[t, j] = cv
                ct[t, j] = tanh(cv)
                H[t, j] = ov * ct[t, j]

    return H_arr, (cat_arr, gates_arr, c_arr, ct_arr)


def lstm_backward(double[:, ::1] W, cache, double[:, ::1] dH, int hidden):
    cat_arr, gates_arr, c_arr, ct_arr = cache
    cdef double[:, ::1] cat = cat_arr
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] ct = ct_arr

    cdef int steps = cat.shape[0]
    cdef int total = cat.shape[1]
    cdef int in_dim = total - hidden
    cdef int t, r, j

    dW_arr = np.zeros((4 * hidden, total))
    db_arr = np.zeros(4 * hidden)
    dX_arr = np.zeros((steps, in_dim))
    dh_arr = np.zeros(hidden)
    dc_arr = np.zeros(hidden)
    dz_arr = np.zeros(4 * hidden)
    dcat_arr = np.zeros(total)

    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dX = dX_arr
    cdef double[::1] dh_next = dh_arr
    cdef double[::1] dc_next = dc_arr
    cdef double[::1] dz = dz_arr
    cdef double[::1] dcat = dcat_arr

    cdef double iv, fv, gv, ov, ctv, cprev, dh, dc, di, df, dg, do, dzv

    with nogil:
        for t in range(steps - 1, -1, -1):
            for j in range(hidden):
                iv = gates[t, j]
                fv = gates[t, hidden + j]
                gv = gates[t, 2 * hidden + j]
                ov = gates[t, 3 * hidden + j]
                ctv = ct[t, j]
                cprev = c[t - 1, j] if t > 0 else 0.0

                dh = dH[t, j] + dh_next[j]
                do = dh * ctv
                dc = dh * ov * (1.0 - ctv * ctv) + dc_next[j]
                di = dc * gv
                df = dc * cprev
                dg = dc * iv
                dc_next[j] = dc * fv

                dz[j] = di * iv * (1.0 - iv)
                dz[hidden + j] = df * fv * (1.0 - fv)
                dz[2 * hidden + j] = dg * (1.0 - gv * gv)
                dz[3 * hidden + j] = do * ov * (1.0 - ov)

            for j in range(total):
                dcat[j] = 0.0
            for r in range(4 * hidden):
                dzv = dz[r]
                db[r] += dzv
                for j in range(total):
                    dW[r, j] += dzv * cat[t, j]
                    dcat[j] += W[r, j] * dzv
            for j in range(in_dim):
                dX[t, j] = dcat[j]
            for j in range(hidden):
                dh_next[j] = dcat[in_dim + j]

    return dW_arr, db_arr, dX_arr


def lstm_forward_batch(double[:, ::1] W, double[::1] b, double[:, :, ::1] X, int hidden):
    cdef int batch = X.shape[0]
    cdef int steps = X.shape[1]
    cdef int in_dim = X.shape[2]
    cdef int total = in_dim + hidden
    cdef int bi, t, r, j

    H_arr = np.zeros((batch, steps, hidden))
    cat_arr = np.zeros((batch, steps, total))
    gates_arr = np.zeros((batch, steps, 4 * hidden))
    c_arr = np.zeros((batch, steps, hidden))
    ct_arr = np.zeros((batch, steps, hidden))

    cdef double[:, :, ::1] H = H_arr
    cdef double[:, :, ::1] cat = cat_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] ct = ct_arr

    cdef double z, iv, fv, gv, ov, cv

    with nogil:
        for bi in range(batch):
            for t in range(steps):
                for j in range(in_dim):
                    cat[bi, t, j] = X[bi, t, j]
                if t > 0:
                    for j in range(hidden):
                        cat[bi, t, in_dim + j] = H[bi, t - 1, j]
                for r in range(4 * hidden):
                    z = b[r]
                    for j in range(total):
                        z += W[r, j] * cat[bi, t, j]
                    if r >= 2 * hidden and r < 3 * hidden:
                        gates[bi, t, r] = tanh(z)
                    else:
                        gates[bi, t, r] = _sig(z)
                for j in range(hidden):
                    iv = gates[bi, t, j]
                    fv = gates[bi, t, hidden + j]
                    gv = gates[bi, t, 2 * hidden + j]
                    ov = gates[bi, t, 3 * hidden + j]
                    cv = iv * gv
                    if t > 0:
                        cv += fv * c[bi, t - 1, j]
                    c[bi, t, j] = cv
                    ct[bi, t, j] = tanh(cv)
                    H[bi, t, j] = ov * ct[bi, t, j]

    return H_arr, (cat_arr, gates_arr, c_arr, ct_arr)


def lstm_backward_batch(double[:, ::1] W, cache, double[:, :, ::1] dH, int hidden):
    cat_arr, gates_arr, c_arr, ct_arr = cache
    cdef double[:, :, ::1] cat = cat_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] ct = ct_arr

    cdef int batch = cat.shape[0]
    cdef int steps = cat.shape[1]
    cdef int total = cat.shape[2]
    cdef int in_dim = total - hidden
    cdef int bi, t, r, j

    dW_arr = np.zeros((4 * hidden, total))
    db_arr = np.zeros(4 * hidden)
    dX_arr = np.zeros((batch, steps, in_dim))
    dh_arr = np.zeros(hidden)
    dc_arr = np.zeros(hidden)
    dz_arr = np.zeros(4 * hidden)
    dcat_arr = np.zeros(total)

    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef double[:, :, ::1] dX = dX_arr
    cdef double[::1] dh_next = dh_arr
    cdef double[::1] dc_next = dc_arr
    cdef double[::1] dz = dz_arr
    cdef double[::1] dcat = dcat_arr

    cdef double iv, fv, gv, ov, ctv, cprev, dhv, dcv, di, df, dg, do, dzv

    with nogil:
        for bi in range(batch):
            for j in range(hidden):
                dh_next[j] = 0.0
                dc_next[j] = 0.0
            for t in range(steps - 1, -1, -1):
                for j in range(hidden):
                    iv = gates[bi, t, j]
                    fv = gates[bi, t, hidden + j]
                    gv = gates[bi, t, 2 * hidden + j]
                    ov = gates[bi, t, 3 * hidden + j]
                    ctv = ct[bi, t, j]
                    cprev = c[bi, t - 1, j] if t > 0 else 0.0

                    dhv = dH[bi, t, j] + dh_next[j]
                    do = dhv * ctv
                    dcv = dhv * ov * (1.0 - ctv * ctv) + dc_next[j]
                    di = dcv * gv
                    df = dcv * cprev
                    dg = dcv * iv
                    dc_next[j] = dcv * fv

                    dz[j] = di * iv * (1.0 - iv)
                    dz[hidden + j] = df * fv * (1.0 - fv)
                    dz[2 * hidden + j] = dg * (1.0 - gv * gv)
                    dz[3 * hidden + j] = do * ov * (1.0 - ov)

                for j in range(total):
                    dcat[j] = 0.0
                for r in range(4 * hidden):
                    dzv = dz[r]
                    db[r] += dzv
                    for j in range(total):
                        dW[r, j] += dzv * cat[bi, t, j]
                        dcat[j] += W[r, j] * dzv
                for j in range(in_dim):
                    dX[bi, t, j] = dcat[j]
                for j in range(hidden):
                    dh_next[j] = dcat[in_dim + j]

    return dW_arr, db_arr, dX_arr
