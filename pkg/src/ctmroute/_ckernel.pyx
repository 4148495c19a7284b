# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled multi-commodity CTM relaxation; mirrors :mod:`ctmroute._pykernel`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, fmin

cnp.import_array()


cdef int _relax_one(
    const double[::1] cap, const double[::1] jam, const double[::1] vf,
    const double[::1] w, const double[::1] length,
    const long[:, ::1] nxt, const long[::1] first, const double[::1] nominal,
    double[:, ::1] x, double[:, ::1] out, double[:, ::1] inn,
    double[::1] admitted, double[::1] tot, double[::1] dem, double[::1] sup,
    double[::1] req, double[::1] ratio,
    double dt, double tol, long max_steps, long *steps_done,
) noexcept nogil:
    cdef Py_ssize_t nl = x.shape[0], nr = x.shape[1]
    cdef Py_ssize_t l, r, m
    cdef long step
    cdef double d, delta, dx, xs
    for step in range(max_steps):
        for l in range(nl):
            xs = 0.0
            for r in range(nr):
                xs += x[l, r]
            tot[l] = xs
            dem[l] = fmin(vf[l] * xs, cap[l])
            sup[l] = fmin(cap[l], w[l] * (jam[l] - xs))
            if sup[l] < 0.0:
                sup[l] = 0.0
            req[l] = 0.0
        for l in range(nl):
            for r in range(nr):
                m = nxt[l, r]
                if m >= 0 and tot[l] > 0.0:
                    req[m] += dem[l] * x[l, r] / tot[l]
        for r in range(nr):
            req[first[r]] += nominal[r]
        for l in range(nl):
            if req[l] > sup[l] and req[l] > 0.0:
                ratio[l] = sup[l] / req[l]
            else:
                ratio[l] = 1.0
            for r in range(nr):
                inn[l, r] = 0.0
        for l in range(nl):
            for r in range(nr):
                m = nxt[l, r]
                if m == -2 or tot[l] <= 0.0:
                    out[l, r] = 0.0
                    continue
                d = dem[l] * x[l, r] / tot[l]
                if m >= 0:
                    d = d * ratio[m]
                    inn[m, r] += d
                out[l, r] = d
        for r in range(nr):
            admitted[r] = nominal[r] * ratio[first[r]]
            inn[first[r], r] += admitted[r]
        delta = 0.0
        for l in range(nl):
            for r in range(nr):
                dx = dt / length[l] * (inn[l, r] - out[l, r])
                x[l, r] += dx
                if x[l, r] < 0.0:
                    x[l, r] = 0.0
                dx = fabs(dx) / jam[l]
                if dx > delta:
                    delta = dx
        if delta < tol:
            steps_done[0] = step + 1
            return 1
    steps_done[0] = max_steps
    return 0


def relax(cap, jam, vf, w, length, nxt, first, nominal, double dt, double tol, long max_steps):
    """Relax a batch of demand vectors to steady state; see ``_pykernel.relax``."""
    cdef const double[::1] cap_v = np.ascontiguousarray(cap, dtype=np.float64)
    cdef const double[::1] jam_v = np.ascontiguousarray(jam, dtype=np.float64)
    cdef const double[::1] vf_v = np.ascontiguousarray(vf, dtype=np.float64)
    cdef const double[::1] w_v = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] len_v = np.ascontiguousarray(length, dtype=np.float64)
    cdef const long[:, ::1] nxt_v = np.ascontiguousarray(nxt, dtype=np.int_)
    cdef const long[::1] first_v = np.ascontiguousarray(first, dtype=np.int_)
    nom = np.ascontiguousarray(nominal, dtype=np.float64)
    cdef Py_ssize_t nb = nom.shape[0], nl = nxt_v.shape[0], nr = nxt_v.shape[1]
    xs = np.zeros((nb, nl, nr))
    outs = np.zeros((nb, nl, nr))
    adm = np.zeros((nb, nr))
    steps = np.zeros(nb, dtype=np.int64)
    conv = np.zeros(nb, dtype=bool)
    cdef double[:, ::1] nom_v = nom
    cdef double[:, :, ::1] x_v = xs
    cdef double[:, :, ::1] out_v = outs
    cdef double[:, ::1] adm_v = adm
    cdef double[:, ::1] inn = np.zeros((nl, nr))
    cdef double[::1] tot = np.zeros(nl), dem = np.zeros(nl), sup = np.zeros(nl)
    cdef double[::1] req = np.zeros(nl), ratio = np.zeros(nl)
    cdef long done = 0
    cdef Py_ssize_t b
    cdef int ok
    for b in range(nb):
        with nogil:
            ok = _relax_one(cap_v, jam_v, vf_v, w_v, len_v, nxt_v, first_v, nom_v[b],
                            x_v[b], out_v[b], inn, adm_v[b], tot, dem, sup, req, ratio,
                            dt, tol, max_steps, &done)
        steps[b] = done
        conv[b] = ok == 1
    return xs, outs, adm, steps, conv
