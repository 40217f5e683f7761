"""Numpy reference implementations of the hot mesh kernels.

The compiled lane in ``_speedups.pyx`` implements the same two entry
points; either lane can serve the rest of the package.
"""

import numpy as np
from scipy.spatial import cKDTree

BACKEND = "python"


def assemble_p1(vertices, triangles):
    """COO triplets of the P1 stiffness and consistent mass matrix.

    Returns (rows, cols, stiffness_values, mass_values, areas); the
    triplets carry 9 entries per triangle in vertex-pair order.
    """
    tri = np.asarray(triangles, dtype=np.int64)
    v = np.asarray(vertices, dtype=np.float64)[tri]  # (m, 3, 2)
    # e[i] is the edge opposite local vertex i, oriented consistently
    e = v[:, [2, 0, 1], :] - v[:, [1, 2, 0], :]
    area2 = e[:, 2, 0] * e[:, 0, 1] - e[:, 2, 1] * e[:, 0, 0]
    if np.any(area2 <= 0.0):
        raise ValueError("triangulation contains non-CCW or degenerate elements")

    dots = np.einsum("mik,mjk->mij", e, e)
    s_loc = dots / (2.0 * area2)[:, None, None]
    m_loc = (area2 / 24.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return (
        rows,
        cols,
        s_loc.reshape(-1),
        m_loc.reshape(-1),
        0.5 * area2,
    )


def _barycentric(points, corners):
    """Barycentric coordinates of points (k,2) in triangles (k,3,2)."""
    d = corners - points[:, None, :]
    # lambda_i proportional to the signed area of the opposite sub-triangle
    b = np.empty((len(points), 3))
    b[:, 0] = d[:, 1, 0] * d[:, 2, 1] - d[:, 1, 1] * d[:, 2, 0]
    b[:, 1] = d[:, 2, 0] * d[:, 0, 1] - d[:, 2, 1] * d[:, 0, 0]
    b[:, 2] = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
    tot = b.sum(axis=1)
    return b / tot[:, None]


def locate_points(points, vertices, triangles, neighbors=None, starts=None, tol=1e-12):
    """Find the containing triangle and barycentric weights per point.

    Candidate triangles come from a centroid k-d tree with escalating
    neighbourhood size; unresolved points get index -1.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    tri = np.asarray(triangles)
    verts = np.asarray(vertices, dtype=np.float64)
    centroids = verts[tri].mean(axis=1)
    tree = cKDTree(centroids)

    out_tri = np.full(len(pts), -1, dtype=np.int64)
    out_bary = np.zeros((len(pts), 3))
    pending = np.arange(len(pts))

    if starts is not None:
        cand = np.asarray(starts, dtype=np.int64)[pending]
        bary = _barycentric(pts[pending], verts[tri[cand]])
        hit = bary.min(axis=1) >= -tol
        out_tri[pending[hit]] = cand[hit]
        out_bary[pending[hit]] = bary[hit]
        pending = pending[~hit]

    k = 4
    while len(pending) and k <= max(4, len(tri)):
        kk = min(k, len(tri))
        _, cand = tree.query(pts[pending], k=kk)
        cand = np.atleast_2d(cand.reshape(len(pending), kk))
        resolved = np.zeros(len(pending), dtype=bool)
        for j in range(kk):
            rem = ~resolved
            if not rem.any():
                break
            idx = pending[rem]
            c = cand[rem, j]
            bary = _barycentric(pts[idx], verts[tri[c]])
            hit = bary.min(axis=1) >= -tol
            out_tri[idx[hit]] = c[hit]
            out_bary[idx[hit]] = bary[hit]
            sub = np.where(rem)[0]
            resolved[sub[hit]] = True
        pending = pending[~resolved]
        if kk == len(tri):
            break
        k *= 4
    return out_tri, out_bary
