"""Corner domains: beaches, boxes and model sectors, with their meshes.

A domain is a 2D fluid region whose boundary splits into a free surface
S, a solid bottom B lying on an analytically described curve M, and the
water line L where they meet at the contact angle.  Free surfaces are
graphs over a reference curve through a collar chart: the flow of a unit
field X transverse to the surface and tangent to M at the water line.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._meshgen import (
    TAG_ARC,
    TAG_B,
    TAG_S,
    MeshError,
    resample_polyline,
    staggered_interior_points,
    triangulate_loop,
)

__all__ = [
    "TAG_S",
    "TAG_B",
    "TAG_ARC",
    "MeshError",
    "CollarOverflow",
    "ArcBottom",
    "BoxBottom",
    "LineBottom",
    "CollarChart",
    "ReferenceSurface",
    "SurfaceGraph",
    "Mesh",
    "CornerDomain",
    "build_sector",
    "build_box",
    "build_beach",
    "curvature",
    "neighborhood_distance",
    "advect_surface",
    "polyline_normals",
    "polyline_tangents",
    "domain_to_json",
    "domain_from_json",
]

_J = np.array([[0.0, -1.0], [1.0, 0.0]])  # +90 degree rotation


class CollarOverflow(RuntimeError):
    """Surface displacement left the collar chart."""


# ---------------------------------------------------------------------------
# analytic bottom descriptions


class ArcBottom:
    """Circular-arc bottom; the fluid sits between the chord and the arc.

    The outward normal field extends off M as nu(p) = (p-c)/|p-c|, which
    fixes all its derivatives analytically.
    """

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def normal(self, pts):
        d = np.atleast_2d(pts) - self.center
        return d / np.hypot(*d.T)[:, None]

    def kappa(self, pts):
        # sign convention: Pi_M(v, v) = -kappa |v|^2 for tangent v
        return np.full(len(np.atleast_2d(pts)), 1.0 / self.radius)

    def grad_nu(self, pts, vecs):
        d = np.atleast_2d(pts) - self.center
        rho = np.hypot(*d.T)
        n = d / rho[:, None]
        vn = np.einsum("ij,ij->i", vecs, n)
        return (vecs - n * vn[:, None]) / rho[:, None]

    def d2nu_vv(self, pts, vecs):
        d = np.atleast_2d(pts) - self.center
        rho = np.hypot(*d.T)
        n = d / rho[:, None]
        vn = np.einsum("ij,ij->i", vecs, n)
        v2 = np.einsum("ij,ij->i", vecs, vecs)
        out = -(2.0 * (vecs - n * vn[:, None]) * vn[:, None] + n * (v2 - vn**2)[:, None])
        return out / (rho**2)[:, None]

    def project(self, pts):
        d = np.atleast_2d(pts) - self.center
        return self.center + self.radius * d / np.hypot(*d.T)[:, None]

    def tangent(self, pts):
        """Unit tangent oriented left-to-right along the arc."""
        n = self.normal(pts)
        return n @ _J.T  # J nu

    def to_json(self):
        return {"type": "arc", "center": self.center.tolist(), "radius": self.radius}


class LineBottom:
    """Straight bottom through `point` along `direction` (sector model)."""

    def __init__(self, point, direction, outward):
        self.point = np.asarray(point, dtype=np.float64)
        d = np.asarray(direction, dtype=np.float64)
        self.direction = d / np.hypot(*d)
        self.outward = np.asarray(outward, dtype=np.float64)

    def normal(self, pts):
        return np.tile(self.outward, (len(np.atleast_2d(pts)), 1))

    def kappa(self, pts):
        return np.zeros(len(np.atleast_2d(pts)))

    def grad_nu(self, pts, vecs):
        return np.zeros_like(np.atleast_2d(vecs))

    def d2nu_vv(self, pts, vecs):
        return np.zeros_like(np.atleast_2d(vecs))

    def project(self, pts):
        rel = np.atleast_2d(pts) - self.point
        t = rel @ self.direction
        return self.point + t[:, None] * self.direction

    def tangent(self, pts):
        return np.tile(self.direction, (len(np.atleast_2d(pts)), 1))

    def to_json(self):
        return {
            "type": "line",
            "point": self.point.tolist(),
            "direction": self.direction.tolist(),
            "outward": self.outward.tolist(),
        }


class BoxBottom:
    """Two vertical walls and a flat floor: x in [0, w], y in [-d, 0]."""

    def __init__(self, width, depth):
        self.width = float(width)
        self.depth = float(depth)

    def _piece(self, pts):
        pts = np.atleast_2d(pts)
        d = np.stack(
            [pts[:, 0], pts[:, 1] + self.depth, self.width - pts[:, 0]], axis=1
        )
        return np.argmin(np.abs(d), axis=1)

    def normal(self, pts):
        normals = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])
        return normals[self._piece(pts)]

    def kappa(self, pts):
        return np.zeros(len(np.atleast_2d(pts)))

    def grad_nu(self, pts, vecs):
        return np.zeros_like(np.atleast_2d(vecs))

    def d2nu_vv(self, pts, vecs):
        return np.zeros_like(np.atleast_2d(vecs))

    def project(self, pts):
        pts = np.array(np.atleast_2d(pts), dtype=np.float64)
        piece = self._piece(pts)
        pts[piece == 0, 0] = 0.0
        pts[piece == 1, 1] = -self.depth
        pts[piece == 2, 0] = self.width
        return pts

    def tangent(self, pts):
        # oriented along the CCW bottom chain: down the left wall, right
        # along the floor, up the right wall
        tangents = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return tangents[self._piece(pts)]

    def to_json(self):
        return {"type": "box", "width": self.width, "depth": self.depth}


def bottom_from_json(data):
    kind = data["type"]
    if kind == "arc":
        return ArcBottom(data["center"], data["radius"])
    if kind == "box":
        return BoxBottom(data["width"], data["depth"])
    if kind == "line":
        return LineBottom(data["point"], data["direction"], data["outward"])
    raise ValueError(f"unknown bottom type {kind!r}")


# ---------------------------------------------------------------------------
# collar chart and surface graphs


class CollarChart:
    """Flow chart of a unit transversal field X defined near the surface."""

    def __init__(self, fieldfn: Callable, halfwidth: float, vertical: bool = False):
        self.fieldfn = fieldfn
        self.halfwidth = float(halfwidth)
        self.vertical = vertical

    def field(self, pts):
        return self.fieldfn(np.atleast_2d(pts))

    def flow(self, pts, eta):
        """Move each point along the flow of X for a signed time eta."""
        pts = np.array(np.atleast_2d(pts), dtype=np.float64)
        eta = np.asarray(eta, dtype=np.float64)
        if self.vertical:
            out = pts.copy()
            out[:, 1] += eta
            return out
        nsub = max(2, int(np.ceil(np.abs(eta).max() / (0.2 * self.halfwidth + 1e-30))))
        ds = eta / nsub
        x = pts
        for _ in range(nsub):
            k1 = self.fieldfn(x)
            k2 = self.fieldfn(x + 0.5 * ds[:, None] * k1)
            k3 = self.fieldfn(x + 0.5 * ds[:, None] * k2)
            k4 = self.fieldfn(x + ds[:, None] * k3)
            x = x + (ds / 6.0)[:, None] * (k1 + 2 * k2 + 2 * k3 + k4)
        return x


def _smoothfall(t):
    """C1 bump: 1 at t=0, 0 for t>=1."""
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - (3.0 * t**2 - 2.0 * t**3)


def blended_collar_field(x_left, x_right, tangent_left, tangent_right, blend_width):
    """Glue endpoint bottom-tangent fields to the interior vertical field.

    tangent_* are callables giving the bottom tangent (pointing out of the
    water, up-slope) as a function of position; the blend weight depends
    on the horizontal distance to the reference endpoints.
    """

    def fieldfn(pts):
        pts = np.atleast_2d(pts)
        wl = _smoothfall((pts[:, 0] - x_left) / blend_width)
        wr = _smoothfall((x_right - pts[:, 0]) / blend_width)
        out = (1.0 - wl - wr)[:, None] * np.array([0.0, 1.0])
        if wl.any():
            out += wl[:, None] * tangent_left(pts)
        if wr.any():
            out += wr[:, None] * tangent_right(pts)
        return out / np.hypot(*out.T)[:, None]

    return fieldfn


@dataclass
class ReferenceSurface:
    """Rest curve S_* with the transversal collar field."""

    nodes: np.ndarray
    chart: CollarChart

    @property
    def transversal_field(self):
        return self.chart.field(self.nodes)

    @property
    def length(self):
        return float(np.hypot(*np.diff(self.nodes, axis=0).T).sum())


@dataclass
class SurfaceGraph:
    """Displacement graph eta over the reference surface."""

    ref: ReferenceSurface
    eta: np.ndarray
    bottom: Optional[object] = None

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=np.float64)
        if len(self.eta) != len(self.ref.nodes):
            raise ValueError("eta length does not match the reference surface")

    def physical_nodes(self):
        pts = self.ref.chart.flow(self.ref.nodes, self.eta)
        if self.bottom is not None:
            pts[0] = self.bottom.project(pts[0])[0]
            pts[-1] = self.bottom.project(pts[-1])[0]
        return pts

    def within_collar(self, safety=1.0):
        return np.abs(self.eta).max() < safety * self.ref.chart.halfwidth

    def replaced(self, eta):
        return SurfaceGraph(self.ref, np.asarray(eta, dtype=np.float64), self.bottom)


# ---------------------------------------------------------------------------
# mesh


@dataclass
class Mesh:
    """Conforming P1 triangulation with tagged boundary edges."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray  # loop-ordered (b, 2)
    edge_tags: np.ndarray  # (b,) in {TAG_S, TAG_B, TAG_ARC}
    h: float
    grading: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)

    @property
    def areas(self):
        if "areas" not in self._cache:
            v = self.vertices[self.triangles]
            self._cache["areas"] = 0.5 * np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return self._cache["areas"]

    @property
    def area(self):
        return float(self.areas.sum())

    def edges_with_tag(self, tag):
        return self.boundary_edges[self.edge_tags == tag]

    def nodes_with_tag(self, tag):
        return np.unique(self.edges_with_tag(tag))

    def chain_nodes(self, tag):
        """Loop-ordered node chain of one tagged boundary piece."""
        idx = np.where(self.edge_tags == tag)[0]
        if len(idx) == 0:
            return np.empty(0, dtype=np.int64)
        # pieces are contiguous in loop order except possibly wrapping
        if idx[-1] - idx[0] + 1 != len(idx):
            split = np.where(np.diff(idx) > 1)[0][0] + 1
            idx = np.concatenate([idx[split:], idx[:split]])
        edges = self.boundary_edges[idx]
        return np.concatenate([edges[:, 0], edges[-1:, 1]])

    @property
    def boundary_length(self):
        e = self.boundary_edges
        return float(np.hypot(*(self.vertices[e[:, 1]] - self.vertices[e[:, 0]]).T).sum())

    def validate(self):
        if np.any(self.areas <= 0):
            raise MeshError("inverted element")
        edges = np.sort(
            np.concatenate(
                [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
            ),
            axis=1,
        )
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshError("non-conforming edge")
        boundary = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        mesh_boundary = {tuple(e) for e in uniq[counts == 1].tolist()}
        if boundary != mesh_boundary:
            raise MeshError("boundary tags do not partition the mesh boundary")
        return True


# ---------------------------------------------------------------------------
# domains


@dataclass
class CornerDomain:
    """Fluid region with surface S, bottom B on M, and water line L."""

    mesh: Mesh
    bottom: object
    surface: Optional[SurfaceGraph]
    surface_nodes: np.ndarray  # ordered along S (left to right; sector: corner out)
    contact_nodes: np.ndarray
    contact_angles: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def surface_points(self):
        return self.mesh.vertices[self.surface_nodes]

    @property
    def contact_points(self):
        return self.mesh.vertices[self.contact_nodes]

    @property
    def surface_normals(self):
        sign = -1.0 if self.kind == "sector" else 1.0
        return polyline_normals(self.surface_points, sign)

    @property
    def bottom_nodes(self):
        return self.mesh.chain_nodes(TAG_B)

    def bottom_normals(self, nodes=None):
        nodes = self.bottom_nodes if nodes is None else nodes
        return self.bottom.normal(self.mesh.vertices[nodes])

    def nu_dot_N_at_contacts(self):
        nu = self.bottom.normal(self.contact_points)
        idx = [int(np.where(self.surface_nodes == c)[0][0]) for c in self.contact_nodes]
        N = self.surface_normals[idx]
        return np.einsum("ij,ij->i", nu, N)

    def measured_contact_angles(self):
        """Angle between the surface and the analytic bottom at each L point."""
        pts = self.surface_points
        angles = []
        for c, into in zip(self.contact_points, (pts[1] - pts[0], pts[-2] - pts[-1])):
            u_s = into / np.hypot(*into)
            t_b = self.bottom.tangent(c[None, :])[0]
            # orient the bottom tangent into the wetted side (angles < pi/2)
            if self.kind == "sector":
                u_b = t_b
            else:
                u_b = t_b if np.dot(t_b, u_s) >= np.dot(-t_b, u_s) else -t_b
            angles.append(float(np.arccos(np.clip(np.dot(u_s, u_b), -1.0, 1.0))))
            if self.kind == "sector":
                break
        return np.asarray(angles)


def polyline_tangents(pts):
    d = np.gradient(pts, axis=0)
    return d / np.hypot(*d.T)[:, None]


def polyline_normals(pts, sign=1.0):
    """Outward unit normals of an open polyline (sign flips the side)."""
    t = polyline_tangents(pts)
    return sign * (t @ _J.T)


# ---------------------------------------------------------------------------
# builders


def _make_domain(pieces, h, bottom, surface_graph, kind, params, interior=None,
                 grading=1.0):
    vertices, triangles, bedges, etags = triangulate_loop(pieces, h, interior=interior)
    mesh = Mesh(vertices, triangles, bedges, etags, h=h, grading=grading)
    s_chain = mesh.chain_nodes(TAG_S)
    pts = mesh.vertices[s_chain]
    if kind != "sector" and pts[0, 0] > pts[-1, 0]:
        s_chain = s_chain[::-1]
    elif kind == "sector":
        # order from the corner outwards
        if np.hypot(*pts[0]) > np.hypot(*pts[-1]):
            s_chain = s_chain[::-1]
    if kind == "sector":
        contacts = np.array([s_chain[0]])
    else:
        contacts = np.array([s_chain[0], s_chain[-1]])
    domain = CornerDomain(
        mesh=mesh,
        bottom=bottom,
        surface=surface_graph,
        surface_nodes=np.asarray(s_chain, dtype=np.int64),
        contact_nodes=contacts,
        contact_angles=np.asarray(params.get("angles", [])),
        kind=kind,
        params=params,
    )
    return domain


def build_sector(angle, radius, h, grading=1.0):
    """Model sector: Dirichlet edge S at theta=0, Neumann edge B at
    theta=angle, closed by an auxiliary-Dirichlet arc."""
    if not (0.0 < angle < np.pi):
        raise ValueError(f"sector angle must lie in (0, pi), got {angle}")
    if radius <= 0 or h <= 0:
        raise ValueError("radius and h must be positive")
    beta = float(grading)
    if beta < 1.0:
        raise ValueError("grading exponent must be >= 1")

    n_edge = max(3, int(np.ceil(radius / h)))
    r = radius * (np.arange(n_edge + 1) / n_edge) ** beta
    n_arc = max(4, int(np.ceil(angle * radius / h)))
    thetas = np.linspace(0.0, angle, n_arc + 1)

    s_pts = np.column_stack([r, np.zeros_like(r)])
    arc_pts = radius * np.column_stack([np.cos(thetas), np.sin(thetas)])
    b_pts = np.column_stack([r[::-1] * np.cos(angle), r[::-1] * np.sin(angle)])

    # interior: uniform staggered points, then the radial grading map
    poly = np.concatenate(
        [
            np.column_stack([np.linspace(0, radius, n_edge + 1), np.zeros(n_edge + 1)])[:-1],
            arc_pts[:-1],
            np.column_stack(
                [np.linspace(radius, 0, n_edge + 1) * np.cos(angle),
                 np.linspace(radius, 0, n_edge + 1) * np.sin(angle)]
            )[:-1],
        ]
    )
    interior = staggered_interior_points(poly, h)
    if beta != 1.0 and len(interior):
        from ._meshgen import distance_to_polyline

        rho = np.hypot(*interior.T)
        scale = (rho / radius) ** (beta - 1.0)
        interior = interior * scale[:, None]
        rho = np.hypot(*interior.T)
        graded_poly = np.concatenate(
            [s_pts[:-1], arc_pts[:-1], b_pts[:-1]]
        )
        h_loc = h * np.maximum(rho / radius, 1e-9) ** (1.0 - 1.0 / beta)
        keep = (rho > 1e-12) & (
            distance_to_polyline(interior, graded_poly) >= 0.5 * h_loc
        )
        interior = interior[keep]

    pieces = [(TAG_S, s_pts), (TAG_ARC, arc_pts), (TAG_B, b_pts)]
    u = np.array([np.cos(angle), np.sin(angle)])
    bottom = LineBottom([0.0, 0.0], u, _J @ u)
    params = {"omega": float(angle), "radius": float(radius), "angles": [float(angle)]}
    domain = _make_domain(pieces, h, bottom, None, "sector", params, interior=interior,
                          grading=beta)
    domain.contact_angles = np.array([float(angle)])
    return domain


def build_box(width, depth, h, eta=None):
    """Right-angle tank: x in [0, width], y in [-depth, 0], S on top."""
    if width <= 0 or depth <= 0 or h <= 0:
        raise ValueError("width, depth and h must be positive")
    n_w = max(3, int(np.ceil(width / h)))
    n_d = max(3, int(np.ceil(depth / h)))

    ref_nodes = np.column_stack([np.linspace(0.0, width, n_w + 1), np.zeros(n_w + 1)])
    chart = CollarChart(lambda p: np.tile([0.0, 1.0], (len(p), 1)),
                        halfwidth=0.45 * depth, vertical=True)
    bottom = BoxBottom(width, depth)
    graph = SurfaceGraph(ReferenceSurface(ref_nodes, chart),
                         np.zeros(n_w + 1) if eta is None else eta, bottom)
    if not graph.within_collar():
        raise CollarOverflow("surface displacement exceeds the collar half-width")
    s_phys = graph.physical_nodes()

    wall_l = resample_polyline([[0.0, s_phys[0, 1]], [0.0, -depth]], n_d)
    floor = resample_polyline([[0.0, -depth], [width, -depth]], n_w)
    wall_r = resample_polyline([[width, -depth], [width, s_phys[-1, 1]]], n_d)
    b_pts = np.concatenate([wall_l, floor[1:], wall_r[1:]])
    pieces = [(TAG_B, b_pts), (TAG_S, s_phys[::-1])]
    params = {"width": float(width), "depth": float(depth),
              "angles": [np.pi / 2, np.pi / 2]}
    domain = _make_domain(pieces, h, bottom, graph, "box", params)
    domain.contact_angles = np.array([np.pi / 2, np.pi / 2])
    return domain


def build_beach(bottom_slope, surface_eta=None, h=0.05, width=2.0,
                omega_range=(np.pi / 16, 0.49 * np.pi)):
    """Beach domain: flat-at-rest surface over a circular-arc bottom that
    meets the surface at the contact angle `bottom_slope` on both sides."""
    omega = float(bottom_slope)
    if not (0.0 < omega < np.pi / 2):
        raise ValueError(f"bottom slope must lie in (0, pi/2), got {omega}")
    if h <= 0 or width <= 0:
        raise ValueError("width and h must be positive")
    radius = (width / 2.0) / np.sin(omega)
    center = np.array([0.0, radius * np.cos(omega)])
    depth = radius * (1.0 - np.cos(omega))
    bottom = ArcBottom(center, radius)

    n_s = max(6, int(np.ceil(width / h)))
    ref_nodes = np.column_stack(
        [np.linspace(-width / 2, width / 2, n_s + 1), np.zeros(n_s + 1)]
    )

    def tangent_left(pts):
        return -bottom.tangent(pts)

    def tangent_right(pts):
        return bottom.tangent(pts)

    length = width
    fieldfn = blended_collar_field(-width / 2, width / 2, tangent_left,
                                   tangent_right, 0.1 * length)
    chart = CollarChart(fieldfn, halfwidth=0.35 * depth)
    ref = ReferenceSurface(ref_nodes, chart)

    if surface_eta is None:
        eta = np.zeros(n_s + 1)
    elif isinstance(surface_eta, SurfaceGraph):
        eta = surface_eta.eta
    else:
        eta = np.asarray(surface_eta, dtype=np.float64)
    graph = SurfaceGraph(ref, eta, bottom)
    if not graph.within_collar():
        raise CollarOverflow("surface displacement exceeds the collar half-width")

    s_phys = graph.physical_nodes()
    # bottom arc between (possibly displaced) contact points, CCW
    t_l, t_r = (np.arctan2(p[0] - center[0], center[1] - p[1]) for p in (s_phys[0], s_phys[-1]))
    n_arc = max(8, int(np.ceil((t_r - t_l) * radius / h)))
    ts = np.linspace(t_l, t_r, n_arc + 1)
    arc_pts = center + radius * np.column_stack([np.sin(ts), -np.cos(ts)])
    arc_pts[0], arc_pts[-1] = s_phys[0], s_phys[-1]

    pieces = [(TAG_B, arc_pts), (TAG_S, s_phys[::-1])]
    params = {"omega": omega, "width": float(width), "radius": float(radius),
              "depth": float(depth)}
    domain = _make_domain(pieces, h, bottom, graph, "beach", params)
    measured = domain.measured_contact_angles()
    domain.contact_angles = measured
    lo, hi = omega_range
    if np.any(measured < lo) or np.any(measured > hi):
        raise ValueError(
            f"contact angles {measured} exit the configured range [{lo}, {hi}]"
        )
    return domain


# ---------------------------------------------------------------------------
# surface operations


def curvature(curve):
    """Signed discrete curvature per node; positive on left turns.

    Uses the circumscribed-circle formula on consecutive node triples,
    exact on circular arcs traversed counterclockwise.
    """
    pts = np.asarray(curve, dtype=np.float64)
    if len(pts) < 3:
        raise ValueError("need at least 3 nodes for curvature")
    d1 = pts[1:-1] - pts[:-2]
    d2 = pts[2:] - pts[1:-1]
    a = np.hypot(*d1.T)
    b = np.hypot(*d2.T)
    c = np.hypot(*(pts[2:] - pts[:-2]).T)
    if np.any(a == 0) or np.any(b == 0):
        raise ValueError("duplicate nodes on curve")
    kappa = np.empty(len(pts))
    kappa[1:-1] = 2.0 * np.cross(d1, d2) / (a * b * c)
    kappa[0] = kappa[1]
    kappa[-1] = kappa[-2]
    return kappa


def neighborhood_distance(graph: SurfaceGraph, sobolev_index=2.0):
    """Spectral H^sigma norm of eta over the reference curve.

    Expands eta in cosine modes cos(m pi x / L) and weights mode m by
    (1 + k_m^2)^sigma with k_m = m pi / L, so that sigma = 0 reproduces
    the L^2 norm.
    """
    from scipy.fft import dct

    eta = graph.eta
    n = len(eta)
    length = graph.ref.length
    coeff = dct(eta, type=1)
    coeff[0] /= 2.0
    coeff[-1] /= 2.0
    coeff /= n - 1
    k = np.arange(n) * np.pi / length
    weight = np.full(n, length / 2.0)
    weight[0] = length
    return float(np.sqrt(np.sum((1.0 + k**2) ** sobolev_index * coeff**2 * weight)))


def advect_surface(graph: SurfaceGraph, velocity, dt, outward_sign=1.0):
    """Move the surface by its normal velocity, as an eta update.

    The physical displacement dt*<v,N>N is re-expressed in the collar
    chart: d_eta = dt <v,N> / <X,N>, which keeps the contact points on M
    because X is tangent to M there.
    """
    pts = graph.physical_nodes()
    N = polyline_normals(pts, outward_sign)
    if callable(velocity):
        v = np.atleast_2d(velocity(pts))
    else:
        v = np.atleast_2d(velocity)
    X = graph.ref.chart.field(pts)
    xn = np.einsum("ij,ij->i", X, N)
    if np.any(np.abs(xn) < 1e-6):
        raise CollarOverflow("transversal field nearly tangent to the surface")
    vn = np.einsum("ij,ij->i", v, N)
    eta_new = graph.eta + dt * vn / xn
    out = graph.replaced(eta_new)
    if not out.within_collar():
        raise CollarOverflow(
            f"step rejected: |eta| = {np.abs(eta_new).max():.3g} exceeds collar "
            f"half-width {graph.ref.chart.halfwidth:.3g}"
        )
    return out


# ---------------------------------------------------------------------------
# serialization


def domain_to_json(domain: CornerDomain):
    mesh = domain.mesh
    return {
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "boundary_tags": [
            [int(a), int(b), int(t)]
            for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags)
        ],
        "contact_points": domain.contact_points.tolist(),
        "angles": domain.contact_angles.tolist(),
        "kind": domain.kind,
        "h": mesh.h,
        "grading": mesh.grading,
        "bottom": domain.bottom.to_json(),
        "surface_nodes": domain.surface_nodes.tolist(),
        "params": {k: v for k, v in domain.params.items() if k != "angles"},
    }


def domain_from_json(data):
    edges = np.asarray([[a, b] for a, b, _ in data["boundary_tags"]], dtype=np.int32)
    tags = np.asarray([t for _, _, t in data["boundary_tags"]], dtype=np.int8)
    mesh = Mesh(
        np.asarray(data["vertices"]),
        np.asarray(data["triangles"]),
        edges,
        tags,
        h=data["h"],
        grading=data.get("grading", 1.0),
    )
    surface_nodes = np.asarray(data["surface_nodes"], dtype=np.int64)
    if data["kind"] == "sector":
        contacts = surface_nodes[:1]
    else:
        contacts = surface_nodes[[0, -1]]
    return CornerDomain(
        mesh=mesh,
        bottom=bottom_from_json(data["bottom"]),
        surface=None,
        surface_nodes=surface_nodes,
        contact_nodes=contacts,
        contact_angles=np.asarray(data["angles"]),
        kind=data["kind"],
        params=data.get("params", {}),
    )
