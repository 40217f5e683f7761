# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled mesh kernels: P1 assembly and point location by triangle walk."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def assemble_p1(vertices, triangles):
    cdef double[:, ::1] v = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef int[:, ::1] t = np.ascontiguousarray(triangles, dtype=np.int32)
    cdef Py_ssize_t m = t.shape[0]

    rows_arr = np.empty(9 * m, dtype=np.int64)
    cols_arr = np.empty(9 * m, dtype=np.int64)
    svals_arr = np.empty(9 * m, dtype=np.float64)
    mvals_arr = np.empty(9 * m, dtype=np.float64)
    areas_arr = np.empty(m, dtype=np.float64)
    cdef long[::1] rows = rows_arr
    cdef long[::1] cols = cols_arr
    cdef double[::1] svals = svals_arr
    cdef double[::1] mvals = mvals_arr
    cdef double[::1] areas = areas_arr

    cdef Py_ssize_t k, i, j, q
    cdef int a, b, c
    cdef double ex[3]
    cdef double ey[3]
    cdef double area2, mass_od, mass_d, dot

    for k in range(m):
        a = t[k, 0]
        b = t[k, 1]
        c = t[k, 2]
        ex[0] = v[c, 0] - v[b, 0]
        ey[0] = v[c, 1] - v[b, 1]
        ex[1] = v[a, 0] - v[c, 0]
        ey[1] = v[a, 1] - v[c, 1]
        ex[2] = v[b, 0] - v[a, 0]
        ey[2] = v[b, 1] - v[a, 1]
        area2 = ex[2] * ey[0] - ey[2] * ex[0]
        if area2 <= 0.0:
            raise ValueError("triangulation contains non-CCW or degenerate elements")
        areas[k] = 0.5 * area2
        mass_od = area2 / 24.0
        mass_d = area2 / 12.0
        q = 9 * k
        for i in range(3):
            for j in range(3):
                dot = (ex[i] * ex[j] + ey[i] * ey[j]) / (2.0 * area2)
                rows[q] = t[k, i]
                cols[q] = t[k, j]
                svals[q] = dot
                mvals[q] = mass_d if i == j else mass_od
                q += 1
    return rows_arr, cols_arr, svals_arr, mvals_arr, areas_arr


def locate_points(points, vertices, triangles, neighbors=None, starts=None, double tol=1e-12):
    cdef double[:, ::1] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef double[:, ::1] v = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef int[:, ::1] t = np.ascontiguousarray(triangles, dtype=np.int32)
    cdef int[:, ::1] nb
    cdef long[::1] st

    if neighbors is None:
        raise ValueError("compiled locate_points requires a neighbor table")
    nb = np.ascontiguousarray(neighbors, dtype=np.int32)
    cdef Py_ssize_t np_ = pts.shape[0]
    cdef Py_ssize_t m = t.shape[0]
    if starts is None:
        st = np.zeros(np_, dtype=np.int64)
    else:
        st = np.ascontiguousarray(starts, dtype=np.int64)

    out_tri_arr = np.full(np_, -1, dtype=np.int64)
    out_bary_arr = np.zeros((np_, 3), dtype=np.float64)
    cdef long[::1] out_tri = out_tri_arr
    cdef double[:, ::1] out_bary = out_bary_arr

    cdef Py_ssize_t p, steps
    cdef long cur, nxt
    cdef int a, b, c, worst
    cdef double px, py, b0, b1, b2, tot, wv

    for p in range(np_):
        px = pts[p, 0]
        py = pts[p, 1]
        cur = st[p]
        if cur < 0 or cur >= m:
            cur = 0
        for steps in range(2 * m + 4):
            a = t[cur, 0]
            b = t[cur, 1]
            c = t[cur, 2]
            b0 = (v[b, 0] - px) * (v[c, 1] - py) - (v[b, 1] - py) * (v[c, 0] - px)
            b1 = (v[c, 0] - px) * (v[a, 1] - py) - (v[c, 1] - py) * (v[a, 0] - px)
            b2 = (v[a, 0] - px) * (v[b, 1] - py) - (v[a, 1] - py) * (v[b, 0] - px)
            tot = b0 + b1 + b2
            b0 /= tot
            b1 /= tot
            b2 /= tot
            worst = 0
            wv = b0
            if b1 < wv:
                worst = 1
                wv = b1
            if b2 < wv:
                worst = 2
                wv = b2
            if wv >= -tol:
                out_tri[p] = cur
                out_bary[p, 0] = b0
                out_bary[p, 1] = b1
                out_bary[p, 2] = b2
                break
            nxt = nb[cur, worst]
            if nxt < 0:
                break
            cur = nxt
    return out_tri_arr, out_bary_arr
