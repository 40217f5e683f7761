"""Triangulation helpers shared by the domain builders.

Meshes are produced from a closed CCW boundary loop (pieces keep their
own tags) plus a deterministic staggered cloud of interior points, run
through Delaunay and filtered to the polygon.
"""

import numpy as np
from scipy.spatial import Delaunay

TAG_S = 1
TAG_B = 2
TAG_ARC = 3


class MeshError(RuntimeError):
    pass


def points_in_polygon(pts, poly):
    """Crossing-number containment test, vectorized over pts."""
    x, y = pts[:, 0], pts[:, 1]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros(len(pts), dtype=bool)
    for a, b, c, d in zip(x0, y0, x1, y1):
        crosses = (b > y) != (d > y)
        if not crosses.any():
            continue
        xi = a + (y[crosses] - b) * (c - a) / (d - b)
        flip = np.where(crosses)[0][x[crosses] < xi]
        inside[flip] = ~inside[flip]
    return inside


def distance_to_polyline(pts, poly, closed=True):
    """Minimal distance from each point to a polyline."""
    seg_a = poly
    seg_b = np.roll(poly, -1, axis=0) if closed else poly[1:]
    if not closed:
        seg_a = poly[:-1]
    d = np.full(len(pts), np.inf)
    for a, b in zip(seg_a, seg_b):
        ab = b - a
        denom = ab @ ab
        if denom == 0.0:
            t = np.zeros(len(pts))
        else:
            t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.minimum(d, np.hypot(*(pts - proj).T))
    return d


def resample_polyline(points, n):
    """n+1 points evenly spaced in arclength along a polyline."""
    points = np.asarray(points, dtype=np.float64)
    seg = np.hypot(*np.diff(points, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0.0, s[-1], n + 1)
    out = np.column_stack(
        [np.interp(target, s, points[:, 0]), np.interp(target, s, points[:, 1])]
    )
    out[0], out[-1] = points[0], points[-1]
    return out


def staggered_interior_points(poly, h, clearance=0.68):
    """Hex-staggered candidate points inside the polygon, away from it."""
    xmin, ymin = poly.min(axis=0)
    xmax, ymax = poly.max(axis=0)
    dy = h * np.sqrt(3.0) / 2.0
    rows = []
    y = ymin + dy
    k = 0
    while y < ymax - 0.25 * dy:
        x0 = xmin + (h / 2.0 if k % 2 else h)
        xs = np.arange(x0, xmax - 0.25 * h, h)
        rows.append(np.column_stack([xs, np.full(len(xs), y)]))
        y += dy
        k += 1
    if not rows:
        return np.empty((0, 2))
    pts = np.concatenate(rows)
    pts = pts[points_in_polygon(pts, poly)]
    if len(pts):
        pts = pts[distance_to_polyline(pts, poly) >= clearance * h]
    return pts


def _orient_ccw(vertices, triangles):
    v = vertices[triangles]
    area2 = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = area2 < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def triangulate_loop(pieces, h, interior=None, clearance=0.68):
    """Mesh the region bounded by a closed CCW loop of tagged pieces.

    pieces: list of (tag, points) where consecutive pieces share their
    junction point and the last closes onto the first.  Returns
    (vertices, triangles, boundary_edges, edge_tags) with boundary edges
    in loop order.
    """
    boundary = []
    edge_tags = []
    for tag, pts in pieces:
        pts = np.asarray(pts, dtype=np.float64)
        boundary.append(pts[:-1])
        edge_tags.extend([tag] * (len(pts) - 1))
    poly = np.concatenate(boundary)
    nb = len(poly)
    if interior is None:
        interior = staggered_interior_points(poly, h, clearance)
    vertices = np.concatenate([poly, interior]) if len(interior) else poly.copy()

    tri = Delaunay(vertices)
    triangles = tri.simplices.astype(np.int32)
    centroids = vertices[triangles].mean(axis=1)
    keep = points_in_polygon(centroids, poly)
    triangles = _orient_ccw(vertices, triangles[keep].copy())

    # drop vertices qhull may have left unused
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles] = True
    if not used[:nb].all():
        raise MeshError("boundary vertex lost during triangulation")
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(used.sum())
    vertices = vertices[used]
    triangles = remap[triangles].astype(np.int32)

    edge_set = set()
    for t in triangles:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            edge_set.add((min(a, b), max(a, b)))
    boundary_edges = np.column_stack(
        [np.arange(nb), np.roll(np.arange(nb), -1)]
    ).astype(np.int32)
    for a, b in boundary_edges:
        if (min(a, b), max(a, b)) not in edge_set:
            raise MeshError(
                f"boundary edge {a}-{b} not recovered; refine h or clearance"
            )
    return vertices, triangles, boundary_edges, np.asarray(edge_tags, dtype=np.int8)
