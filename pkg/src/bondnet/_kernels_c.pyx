# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-bond kernels; same contract as ``bondnet._kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


cdef inline void law_eval(double e, const double[::1] p, double* f, double* fp) noexcept nogil:
    # mirrors material.law_response; kinks take the left-limit slope
    cdef double k = p[0], ey = p[1], h = p[2], ef = p[3], r = p[5]
    cdef bint sym = p[4] != 0.0
    cdef double hk = h * k, t, ft, fpt, s
    cdef bint mirror, elastic, fractured

    if e < 0 and not sym:
        f[0] = k * e
        fp[0] = k
        return

    mirror = e < 0
    t = -e if mirror else e
    elastic = t < ey or (t == ey and not mirror)
    fractured = t > ef or (t == ef and mirror)

    if t <= ey:
        ft = k * t
    elif t <= ef:
        ft = k * ey + hk * (t - ey)
    else:
        ft = 0.0
    if elastic:
        fpt = k
    elif fractured:
        fpt = 0.0
    else:
        fpt = hk

    if r > 0 and fabs(t - ey) < r:
        s = t - ey + r
        ft = k * t + (hk - k) * s * s / (4 * r)
        fpt = k + (hk - k) * s / (2 * r)

    f[0] = -ft if mirror else ft
    fp[0] = fpt


def bond_response(const double[:, ::1] y, const double[::1] rest, const double[:, ::1] params,
                  const cnp.intp_t[::1] law_ids, const cnp.uint8_t[::1] broken,
                  double eps_len, bint tangent):
    cdef Py_ssize_t m = y.shape[0], i, a, c
    cdef cnp.ndarray[double, ndim=1] ext_a = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] f_a = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] fp_a = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] coef_a = np.empty(m)
    cdef cnp.ndarray[double, ndim=2] F_a = np.empty((m, 3))
    cdef double[::1] ext = ext_a, f = f_a, fp = fp_a, coef = coef_a
    cdef double[:, ::1] F = F_a
    cdef double[:, :, ::1] K
    cdef double yn, fi, fpi, ci, uu, u[3]
    cdef Py_ssize_t bad = -1
    cdef bint collapsed

    blocks_a = None
    if tangent:
        blocks_a = np.zeros((m, 3, 3))
        K = blocks_a

    with nogil:
        for i in range(m):
            yn = sqrt(y[i, 0] * y[i, 0] + y[i, 1] * y[i, 1] + y[i, 2] * y[i, 2])
            ext[i] = yn - rest[i]
            if broken[i]:
                fi = 0.0
                fpi = 0.0
            else:
                law_eval(ext[i], params[law_ids[i]], &fi, &fpi)
            f[i] = fi
            fp[i] = fpi
            collapsed = yn < eps_len
            if collapsed:
                if bad < 0 and (fi != 0.0 or fpi != 0.0):
                    bad = i
                ci = 0.0
            else:
                ci = fi / yn
            coef[i] = ci
            for a in range(3):
                F[i, a] = ci * y[i, a]
            if tangent and not collapsed:
                for a in range(3):
                    u[a] = y[i, a] / yn
                for a in range(3):
                    for c in range(3):
                        uu = u[a] * u[c]
                        K[i, a, c] = fpi * uu + ci * ((1.0 if a == c else 0.0) - uu)
    return ext_a, f_a, fp_a, coef_a, F_a, blocks_a, bad


def scatter_nodal(const cnp.intp_t[::1] start, const cnp.intp_t[::1] end,
                  const double[:, ::1] F, Py_ssize_t n):
    cdef Py_ssize_t m = F.shape[0], i, a
    out_a = np.zeros((n, 3))
    cdef double[:, ::1] out = out_a
    with nogil:
        # same accumulation order as the NumPy backend
        for i in range(m):
            for a in range(3):
                out[start[i], a] += F[i, a]
        for i in range(m):
            for a in range(3):
                out[end[i], a] -= F[i, a]
    return out_a


def scatter_blocks(const cnp.intp_t[::1] slot, const cnp.intp_t[::1] bond,
                   const double[::1] sign, const double[:, :, ::1] blocks, Py_ssize_t nslots):
    cdef Py_ssize_t nent = slot.shape[0], j, a, c, s, bi
    cdef double sg
    out_a = np.zeros((nslots, 3, 3))
    cdef double[:, :, ::1] out = out_a
    with nogil:
        for j in range(nent):
            s = slot[j]
            bi = bond[j]
            sg = sign[j]
            for a in range(3):
                for c in range(3):
                    out[s, a, c] += sg * blocks[bi, a, c]
    return out_a
