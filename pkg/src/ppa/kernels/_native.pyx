# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors ``numpy_impl`` operation for operation (same order, no fused
multiply-adds).  The tracing loop agrees with the fallback bit for bit;
the elementwise kernels agree to within a couple of ulp (libm vs numpy's
vectorized transcendentals) and the M^T M accumulation differs only in
summation order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, floor, fmod, sin, sqrt

cnp.import_array()

NAME = "native"

cdef double PI = 3.141592653589793238462643383279502884


cdef inline double _mod_pi(double x) nogil:
    cdef double r = fmod(x, PI)
    if r < 0.0:
        r += PI
    return r + 0.0  # normalize -0.0


def ppa_phase_const_normal(double nx, double ny, double nz, vx, vy, vz):
    cdef double[::1] x = np.ascontiguousarray(vx, dtype=np.float64).ravel()
    cdef double[::1] y = np.ascontiguousarray(vy, dtype=np.float64).ravel()
    cdef double[::1] z = np.ascontiguousarray(vz, dtype=np.float64).ravel()
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double ex, ey
    with nogil:
        for i in range(n):
            ex = x[i] * nz - z[i] * nx
            ey = y[i] * nz - z[i] * ny
            out[i] = _mod_pi(-atan2(ey, ex))
    return out_arr.reshape(vx.shape)


def constraint_mtm(phi, vx, vy, vz, bint ppa):
    cdef double[::1] p = np.ascontiguousarray(phi, dtype=np.float64).ravel()
    cdef Py_ssize_t n = p.shape[0]
    cdef double[::1] x, y, z
    if ppa:
        x = np.ascontiguousarray(vx, dtype=np.float64).ravel()
        y = np.ascontiguousarray(vy, dtype=np.float64).ravel()
        z = np.ascontiguousarray(vz, dtype=np.float64).ravel()
    else:
        x = y = z = p  # unused
    out = np.zeros((3, 3), dtype=np.float64)
    cdef double[:, ::1] m = out
    cdef Py_ssize_t i
    cdef double s, c, w, inv
    cdef double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0
    with nogil:
        for i in range(n):
            s = sin(p[i])
            c = cos(p[i])
            if ppa:
                w = -(y[i] * c + x[i] * s) / z[i]
            else:
                w = 0.0
            inv = 1.0 / sqrt(s * s + c * c + w * w)
            s = s * inv
            c = c * inv
            w = w * inv
            a00 += s * s
            a01 += s * c
            a02 += s * w
            a11 += c * c
            a12 += c * w
            a22 += w * w
    m[0, 0] = a00
    m[0, 1] = a01
    m[0, 2] = a02
    m[1, 0] = a01
    m[1, 1] = a11
    m[1, 2] = a12
    m[2, 0] = a02
    m[2, 1] = a12
    m[2, 2] = a22
    return out


cdef inline bint _cell(double u, double v, Py_ssize_t h, Py_ssize_t w,
                       Py_ssize_t *i, Py_ssize_t *j, double *fu, double *fv) nogil:
    if not (0.0 <= u <= w - 1.0 and 0.0 <= v <= h - 1.0):
        return 0
    i[0] = <Py_ssize_t>floor(u)
    j[0] = <Py_ssize_t>floor(v)
    if i[0] > w - 2:
        i[0] = w - 2
    if j[0] > h - 2:
        j[0] = h - 2
    fu[0] = u - i[0]
    fv[0] = v - j[0]
    return 1


def trace_track(cos2_in, sin2_in, valid_in,
                double u0, double v0, double du0, double dv0,
                double step, long max_steps):
    cdef double[:, ::1] cos2 = np.ascontiguousarray(cos2_in, dtype=np.float64)
    cdef double[:, ::1] sin2 = np.ascontiguousarray(sin2_in, dtype=np.float64)
    cdef unsigned char[:, ::1] valid = np.ascontiguousarray(valid_in, dtype=np.uint8)
    cdef Py_ssize_t h = valid.shape[0]
    cdef Py_ssize_t w = valid.shape[1]
    out_arr = np.empty((max_steps + 1, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double u = u0, v = v0, du = du0, dv = dv0
    cdef double fu, fv, w00, w10, w01, w11, c, s, phi, tu, tv
    cdef Py_ssize_t i, j, k, count = 1
    out[0, 0] = u
    out[0, 1] = v
    with nogil:
        for k in range(max_steps):
            if not _cell(u, v, h, w, &i, &j, &fu, &fv):
                break
            if not (valid[j, i] and valid[j, i + 1]
                    and valid[j + 1, i] and valid[j + 1, i + 1]):
                break
            w00 = (1.0 - fu) * (1.0 - fv)
            w10 = fu * (1.0 - fv)
            w01 = (1.0 - fu) * fv
            w11 = fu * fv
            c = (w00 * cos2[j, i] + w10 * cos2[j, i + 1]
                 + w01 * cos2[j + 1, i] + w11 * cos2[j + 1, i + 1])
            s = (w00 * sin2[j, i] + w10 * sin2[j, i + 1]
                 + w01 * sin2[j + 1, i] + w11 * sin2[j + 1, i + 1])
            phi = 0.5 * atan2(s, c)
            tu = sin(phi)
            tv = cos(phi)
            if tu * du + tv * dv < 0.0:
                tu = -tu
                tv = -tv
            u = u + step * tu
            v = v + step * tv
            if not _cell(u, v, h, w, &i, &j, &fu, &fv):
                break
            if not (valid[j, i] and valid[j, i + 1]
                    and valid[j + 1, i] and valid[j + 1, i + 1]):
                break
            out[count, 0] = u
            out[count, 1] = v
            count += 1
            du = tu
            dv = tv
    return out_arr[:count].copy()
