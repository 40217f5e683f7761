"""P1 variational solvers for the mixed problems on corner domains.

Three constraint flavours: Dirichlet-on-S/Neumann-on-B (the pressure
problem), pure Neumann modulo constants, and Dirichlet-Dirichlet.  The
sector model domains carry an auxiliary Dirichlet arc that closes the
truncated cone with exact-solution data.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .geometry import TAG_ARC, TAG_B, TAG_S, CornerDomain, Mesh

__all__ = [
    "BoundaryDataTriple",
    "DiscreteSystem",
    "ConvergenceStudy",
    "P1System",
    "SolverError",
    "assemble",
    "solve_mixed",
    "harmonic_extension",
    "poisson_dirichlet",
    "solve_neumann_neumann",
    "weak_surface_flux",
    "surface_mass_matrix",
    "elementwise_gradient",
    "nodal_gradient",
    "convergence_study",
    "min_constrained_eigenvalue",
]

DIRECT_SOLVER_LIMIT = 200_000


class SolverError(RuntimeError):
    pass


FieldData = Union[np.ndarray, Callable, float, None]


@dataclass
class BoundaryDataTriple:
    """Right-hand side (f on S, g in Omega, h on B) of the mixed problem."""

    f: FieldData = None
    g: FieldData = None
    h: FieldData = None
    compatibility_residual: Optional[float] = None

    def attach_compatibility(self, domain, system):
        gi = volume_integral(domain, system, self.g)
        fi = boundary_integral(domain, TAG_S, self.f)
        hi = boundary_integral(domain, TAG_B, self.h)
        self.compatibility_residual = float(gi - fi - hi)
        return self.compatibility_residual


class P1System:
    """Assembled stiffness/mass pair plus cached element geometry."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        rows, cols, svals, mvals, areas = _kernels.assemble_p1(
            mesh.vertices, mesh.triangles
        )
        n = len(mesh.vertices)
        self.stiffness = sp.csr_matrix((svals, (rows, cols)), shape=(n, n))
        self.mass = sp.csr_matrix((mvals, (rows, cols)), shape=(n, n))
        self.areas = areas
        self.lumped = np.asarray(self.mass.sum(axis=1)).ravel()
        self._factor = {}
        # elementwise P1 basis gradients: grad lambda_i = perp(e_i) / (2A)
        v = mesh.vertices[mesh.triangles]
        e = v[:, [2, 0, 1], :] - v[:, [1, 2, 0], :]
        self.basis_grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (
            2.0 * areas
        )[:, None, None]

    @property
    def n(self):
        return len(self.mesh.vertices)

    def factorized(self, key, matrix):
        if key not in self._factor:
            if matrix.shape[0] > DIRECT_SOLVER_LIMIT:
                diag = matrix.diagonal()
                pre = spla.LinearOperator(
                    matrix.shape, matvec=lambda x: x / diag
                )

                def solve(b, m=matrix.tocsr(), pre=pre):
                    x, info = spla.cg(m, b, rtol=1e-10, maxiter=10_000, M=pre)
                    if info != 0:
                        raise SolverError(f"CG did not converge (info={info})")
                    return x

                self._factor[key] = solve
            else:
                lu = spla.splu(matrix.tocsc())
                self._factor[key] = lu.solve
        return self._factor[key]


_SYSTEMS: dict = {}


def assemble(domain_or_mesh) -> P1System:
    mesh = domain_or_mesh.mesh if isinstance(domain_or_mesh, CornerDomain) else domain_or_mesh
    key = id(mesh)
    sys_ = _SYSTEMS.get(key)
    if sys_ is None or sys_.mesh is not mesh:
        if len(_SYSTEMS) > 64:
            _SYSTEMS.clear()
        sys_ = P1System(mesh)
        _SYSTEMS[key] = sys_
    return sys_


# ---------------------------------------------------------------------------
# data evaluation


def _nodal_values(domain, nodes, data):
    pts = domain.mesh.vertices[nodes]
    if data is None:
        return np.zeros(len(nodes))
    if callable(data):
        return np.asarray(data(pts), dtype=np.float64)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(len(nodes), float(arr))
    if len(arr) == len(domain.mesh.vertices):
        return arr[nodes]
    if len(arr) == len(nodes):
        return arr
    raise ValueError("boundary data length matches neither mesh nor chain")


def _edge_normals(domain, edges, tag):
    verts = domain.mesh.vertices
    d = verts[edges[:, 1]] - verts[edges[:, 0]]
    length = np.hypot(*d.T)
    geom = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    return geom, length


def neumann_load(domain, tag, data):
    """Load vector of the natural boundary term on one tagged piece.

    Callables receive (points, outward_normals); on B the normals come
    from the analytic bottom description.
    """
    mesh = domain.mesh
    out = np.zeros(len(mesh.vertices))
    if data is None:
        return out
    edges = mesh.edges_with_tag(tag)
    if len(edges) == 0:
        return out
    geom_nu, length = _edge_normals(domain, edges, tag)
    if callable(data):
        gauss = 0.5 * (1.0 - 1.0 / np.sqrt(3.0)), 0.5 * (1.0 + 1.0 / np.sqrt(3.0))
        a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
        for t in gauss:
            pts = a + t * (b - a)
            nu = domain.bottom.normal(pts) if tag == TAG_B else geom_nu
            vals = np.asarray(data(pts, nu), dtype=np.float64)
            w = 0.5 * length * vals
            np.add.at(out, edges[:, 0], w * (1.0 - t))
            np.add.at(out, edges[:, 1], w * t)
        return out
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        ha = hb = np.full(len(edges), float(arr))
    elif len(arr) == len(mesh.vertices):
        ha, hb = arr[edges[:, 0]], arr[edges[:, 1]]
    else:
        chain = domain.mesh.chain_nodes(tag) if tag != TAG_S else domain.surface_nodes
        lookup = dict(zip(chain.tolist(), arr))
        ha = np.array([lookup[i] for i in edges[:, 0]])
        hb = np.array([lookup[i] for i in edges[:, 1]])
    np.add.at(out, edges[:, 0], length * (2.0 * ha + hb) / 6.0)
    np.add.at(out, edges[:, 1], length * (ha + 2.0 * hb) / 6.0)
    return out


def volume_load(domain, system, data):
    if data is None:
        return np.zeros(system.n)
    if callable(data):
        mesh = system.mesh
        v = mesh.vertices[mesh.triangles]
        mids = 0.5 * (v + np.roll(v, -1, axis=1))  # opposite midpoints order
        out = np.zeros(system.n)
        for q in range(3):
            vals = np.asarray(data(mids[:, q]), dtype=np.float64)
            w = system.areas / 3.0 * vals
            # midpoint q lies between local vertices q and q+1
            np.add.at(out, mesh.triangles[:, q], 0.5 * w)
            np.add.at(out, mesh.triangles[:, (q + 1) % 3], 0.5 * w)
        return out
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(system.n, float(arr))
    return system.mass @ arr


def volume_integral(domain, system, data):
    return float(volume_load(domain, system, data).sum())


def boundary_integral(domain, tag, data):
    return float(neumann_load(domain, tag, data).sum())


# ---------------------------------------------------------------------------
# constrained solves


@dataclass
class DiscreteSystem:
    """One constrained linear system ready to solve."""

    system: P1System
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    load: np.ndarray
    mean_zero: bool = False
    label: str = ""

    def solve(self):
        sys_ = self.system
        A = sys_.stiffness
        n = sys_.n
        if self.mean_zero:
            # single Lagrange multiplier row enforcing the weighted mean
            m = sp.csr_matrix(sys_.lumped[:, None])
            aug = sp.bmat([[A, m], [m.T, None]], format="csc")
            rhs = np.concatenate([self.load, [0.0]])
            lu = spla.splu(aug)
            x = lu.solve(rhs)
            u = x[:-1]
            residual = np.abs(A @ u + sys_.lumped * x[-1] - self.load).max()
            if not np.isfinite(residual) or residual > 1e-8 * max(
                1.0, np.abs(self.load).max()
            ):
                raise SolverError(f"{self.label}: singular Neumann system")
            return u
        fixed = self.dirichlet_nodes
        free = np.setdiff1d(np.arange(n), fixed, assume_unique=False)
        u = np.zeros(n)
        u[fixed] = self.dirichlet_values
        rhs = self.load[free] - A[free][:, fixed] @ self.dirichlet_values
        solve = self.system.factorized(("dir", fixed.tobytes()), A[free][:, free])
        try:
            u[free] = solve(rhs)
        except RuntimeError as exc:  # pragma: no cover - coercivity guards this
            raise SolverError(f"{self.label}: {exc}") from exc
        return u


def _dirichlet_sets(domain, data: BoundaryDataTriple, arc_data):
    mesh = domain.mesh
    s_nodes = domain.surface_nodes
    vals = _nodal_values(domain, s_nodes, data.f)
    nodes, values = [s_nodes], [vals]
    arc_nodes = np.setdiff1d(mesh.nodes_with_tag(TAG_ARC), s_nodes)
    if len(arc_nodes):
        values.append(_nodal_values(domain, arc_nodes, arc_data))
        nodes.append(arc_nodes)
    return np.concatenate(nodes), np.concatenate(values)


def mixed_load(domain, data: BoundaryDataTriple):
    """Load of the weak form of Delta u = g, d_nu u = h on B:
    a(u, v) = -(g, v) + <h, v>_B for v vanishing on the Dirichlet part."""
    system = assemble(domain)
    return -volume_load(domain, system, data.g) + neumann_load(domain, TAG_B, data.h)


def solve_mixed(domain, data: BoundaryDataTriple, arc_data: FieldData = None):
    """Dirichlet data on S (and the sector arc), Neumann on B."""
    system = assemble(domain)
    load = mixed_load(domain, data)
    nodes, values = _dirichlet_sets(domain, data, arc_data)
    return DiscreteSystem(system, nodes, values, load, label="mixed").solve()


def harmonic_extension(domain, f, arc_data: FieldData = None):
    return solve_mixed(domain, BoundaryDataTriple(f=f), arc_data=arc_data)


def poisson_dirichlet(domain, g, h):
    """Zero Dirichlet data on S, source g, bottom Neumann h."""
    return solve_mixed(domain, BoundaryDataTriple(f=None, g=g, h=h))


def solve_neumann_neumann(domain, g, h_S, h_B, compat_tol=1e-6):
    """Neumann data on both pieces, solved modulo constants (mean zero)."""
    system = assemble(domain)
    data = BoundaryDataTriple(f=h_S, g=g, h=h_B)
    residual = data.attach_compatibility(domain, system)
    scale = max(
        1.0,
        abs(volume_integral(domain, system, g)),
        abs(boundary_integral(domain, TAG_S, h_S)),
        abs(boundary_integral(domain, TAG_B, h_B)),
    )
    if abs(residual) > compat_tol * scale:
        raise SolverError(
            f"incompatible Neumann data: residual {residual:.3e} (tol {compat_tol:g})"
        )
    load = (
        -volume_load(domain, system, g)
        + neumann_load(domain, TAG_S, h_S)
        + neumann_load(domain, TAG_B, h_B)
    )
    u = DiscreteSystem(
        system, np.empty(0, dtype=np.int64), np.empty(0), load,
        mean_zero=True, label="neumann-neumann",
    ).solve()
    return u


def weak_surface_flux(domain, u, data: Optional[BoundaryDataTriple] = None):
    """Consistent boundary flux d_N u at the surface nodes.

    Tests the solved field against the surface nodal basis: the residual
    a(u, phi_i) - load(phi_i) equals the weak integral of (d_N u) phi_i,
    inverted with the 1D surface mass matrix.  This is the same recovery
    the Dirichlet-to-Neumann assembly uses, and it is one order more
    accurate than differencing the P1 solution at the boundary.
    """
    system = assemble(domain)
    load = mixed_load(domain, data) if data is not None else 0.0
    res = system.stiffness @ u - load
    s_nodes = domain.surface_nodes
    ms = surface_mass_matrix(domain)
    return np.linalg.solve(ms, res[s_nodes])


def surface_mass_matrix(domain):
    """Consistent 1D mass matrix on the ordered surface chain."""
    pts = domain.surface_points
    seg = np.hypot(*np.diff(pts, axis=0).T)
    n = len(pts)
    ms = np.zeros((n, n))
    i = np.arange(n - 1)
    ms[i, i] += seg / 3.0
    ms[i + 1, i + 1] += seg / 3.0
    ms[i, i + 1] += seg / 6.0
    ms[i + 1, i] += seg / 6.0
    return ms


def elementwise_gradient(system: P1System, u):
    return np.einsum("mi,mik->mk", u[system.mesh.triangles], system.basis_grads)


def nodal_gradient(system: P1System, u, grads=None):
    """Area-weighted average of the elementwise gradients."""
    if grads is None:
        grads = elementwise_gradient(system, u)
    mesh = system.mesh
    out = np.zeros((system.n, 2))
    w = (system.areas / 3.0)[:, None]
    for k in range(3):
        np.add.at(out, mesh.triangles[:, k], grads * w)
    return out / (system.lumped[:, None])


def min_constrained_eigenvalue(domain, mean_zero=False):
    """Smallest eigenvalue of the constrained stiffness (coercivity)."""
    system = assemble(domain)
    A = system.stiffness
    if mean_zero:
        dense = A.toarray()
        w = np.linalg.eigvalsh(dense)
        return float(np.sort(w)[1])  # skip the constant kernel
    nodes, _ = _dirichlet_sets(domain, BoundaryDataTriple(), None)
    free = np.setdiff1d(np.arange(system.n), nodes)
    dense = A[free][:, free].toarray()
    return float(np.linalg.eigvalsh(dense)[0])


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class ConvergenceStudy:
    hs: np.ndarray
    l2_errors: np.ndarray
    h1_errors: np.ndarray
    orders_l2: np.ndarray = field(init=False)
    orders_h1: np.ndarray = field(init=False)
    slope_l2: float = field(init=False)
    slope_h1: float = field(init=False)
    valid: bool = field(init=False)

    def __post_init__(self):
        if len(self.hs) < 3:
            raise ValueError("need at least 3 meshes for observed orders")
        if np.any(np.diff(self.hs) >= 0):
            raise ValueError("mesh sizes must decrease strictly")
        with np.errstate(divide="ignore"):
            ratio = np.log(self.hs[:-1] / self.hs[1:])
            self.orders_l2 = np.log(self.l2_errors[:-1] / self.l2_errors[1:]) / ratio
            self.orders_h1 = np.log(self.h1_errors[:-1] / self.h1_errors[1:]) / ratio
        self.slope_l2 = float(np.polyfit(np.log(self.hs), np.log(self.l2_errors), 1)[0])
        self.slope_h1 = float(np.polyfit(np.log(self.hs), np.log(self.h1_errors), 1)[0])
        self.valid = bool(
            np.all(np.diff(self.l2_errors) < 0) and np.all(np.diff(self.h1_errors) < 0)
        )


def solution_errors(domain, u, exact, exact_grad):
    """L2 and H1-seminorm errors against a manufactured solution."""
    system = assemble(domain)
    mesh = system.mesh
    v = mesh.vertices[mesh.triangles]
    mids = 0.5 * (v + np.roll(v, -1, axis=1))
    uh = u[mesh.triangles]
    uh_mid = 0.5 * (uh + np.roll(uh, -1, axis=1))
    gh = elementwise_gradient(system, u)
    l2 = 0.0
    h1 = 0.0
    for q in range(3):
        pts = mids[:, q]
        l2 += np.sum(system.areas / 3.0 * (uh_mid[:, q] - exact(pts)) ** 2)
        dg = gh - exact_grad(pts)
        h1 += np.sum(system.areas / 3.0 * np.einsum("ij,ij->i", dg, dg))
    return float(np.sqrt(l2)), float(np.sqrt(h1))


def convergence_study(problem_factory, hs, grading=1.0, jobs=1):
    """Run `problem_factory(h, grading) -> (domain, u, exact, exact_grad)`
    over a decreasing mesh sequence and collect observed orders."""
    hs = np.asarray(sorted(hs, reverse=True), dtype=np.float64)

    def run(h):
        domain, u, exact, exact_grad = problem_factory(h, grading)
        return solution_errors(domain, u, exact, exact_grad)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, hs))
    else:
        results = [run(h) for h in hs]
    l2 = np.array([r[0] for r in results])
    h1 = np.array([r[1] for r in results])
    return ConvergenceStudy(hs, l2, h1)
