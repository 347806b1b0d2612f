"""P1 / isoparametric P2 finite elements for the Dirichlet Poisson problem.

The solver works with the SPD form of -Laplace and negates the source, so the
returned field satisfies Laplace(u) = f with u = 0 on the boundary.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import CgDiverged, IterationStalled, OutsideDomain, SingularElement

__all__ = [
    "QuadratureRule",
    "RULES",
    "QuadData",
    "PoissonSystem",
    "FemSolution",
    "SourceField",
    "source_preset",
    "quad_data",
    "assemble_poisson",
    "pcg",
    "solve_dirichlet",
    "weighted_eigen_min",
    "interpolate",
    "evaluate",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle (0,0),(1,0),(0,1); weights sum to 1/2."""

    degree: int
    points: np.ndarray
    weights: np.ndarray


def _sym_rule(degree, groups):
    pts, wts = [], []
    for w, coords in groups:
        a = coords
        if len(a) == 1:
            bary = [(a[0], a[0], a[0])]
        elif len(a) == 2:
            x, y = a
            bary = [(x, x, y), (x, y, x), (y, x, x)]
        else:
            x, y, z = a
            bary = [(x, y, z), (x, z, y), (y, x, z), (y, z, x), (z, x, y), (z, y, x)]
        for b in bary:
            pts.append((b[1], b[2]))
            wts.append(w)
    return QuadratureRule(degree, np.array(pts), 0.5 * np.array(wts))


# Dunavant symmetric rules
RULES = {
    1: _sym_rule(1, [(1.0, (1 / 3,))]),
    4: _sym_rule(
        4,
        [
            (0.223381589678011, (0.445948490915965, 0.108103018168070)),
            (0.109951743655322, (0.091576213509771, 0.816847572980459)),
        ],
    ),
    6: _sym_rule(
        6,
        [
            (0.116786275726379, (0.249286745170910, 0.501426509658179)),
            (0.050844906370207, (0.063089014491502, 0.873821971016996)),
            (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
        ],
    ),
}


def _basis(order, xi):
    """Values (Q, nb), gradients (Q, nb, 2), Hessians (Q, nb, 2, 2) on the reference triangle."""
    xi = np.atleast_2d(xi)
    s, t = xi[:, 0], xi[:, 1]
    Q = len(xi)
    if order == 1:
        val = np.stack([1 - s - t, s, t], axis=1)
        grad = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (Q, 3, 2)).copy()
        return val, grad, np.zeros((Q, 3, 2, 2))
    l0 = 1 - s - t
    val = np.stack([l0 * (2 * l0 - 1), s * (2 * s - 1), t * (2 * t - 1), 4 * l0 * s, 4 * s * t, 4 * l0 * t], axis=1)
    z = np.zeros(Q)
    grad = np.stack(
        [
            np.stack([1 - 4 * l0, 1 - 4 * l0], axis=1),
            np.stack([4 * s - 1, z], axis=1),
            np.stack([z, 4 * t - 1], axis=1),
            np.stack([4 * (l0 - s), -4 * s], axis=1),
            np.stack([4 * t, 4 * s], axis=1),
            np.stack([-4 * t, 4 * (l0 - t)], axis=1),
        ],
        axis=1,
    )
    H = np.array(
        [
            [[4, 4], [4, 4]],
            [[4, 0], [0, 0]],
            [[0, 0], [0, 4]],
            [[-8, -4], [-4, 0]],
            [[0, 4], [4, 0]],
            [[0, -4], [-4, -8]],
        ],
        dtype=float,
    )
    return val, grad, np.broadcast_to(H, (Q, 6, 2, 2)).copy()


@dataclass
class QuadData:
    """Per-element quadrature data for one group of elements sharing a rule."""

    elements: np.ndarray  # element indices into mesh.triangles
    dofs: np.ndarray  # (E, nb)
    x: np.ndarray  # (E, Q, 2) physical points
    wdet: np.ndarray  # (E, Q) weight * |det J|
    phi: np.ndarray  # (Q, nb)
    grad: np.ndarray  # (E, Q, nb, 2)
    hess: np.ndarray = None  # (E, Q, nb, 2, 2), order 2 only


def _geometry(nodes, dofs, order, xi, want_hess):
    val, dref, href = _basis(order, xi)
    X = nodes[dofs]  # (E, nb, 2)
    x = np.einsum("qi,eik->eqk", val, X)
    Jm = np.einsum("eik,qil->eqkl", X, dref)  # J[k, l] = dx_k / dxi_l
    det = Jm[..., 0, 0] * Jm[..., 1, 1] - Jm[..., 0, 1] * Jm[..., 1, 0]
    if np.any(det <= 0):
        bad = np.unique(np.nonzero(det <= 0)[0])
        raise SingularElement(f"{len(bad)} element(s) with non-positive Jacobian")
    inv = np.empty_like(Jm)
    inv[..., 0, 0] = Jm[..., 1, 1] / det
    inv[..., 1, 1] = Jm[..., 0, 0] / det
    inv[..., 0, 1] = -Jm[..., 0, 1] / det
    inv[..., 1, 0] = -Jm[..., 1, 0] / det
    grad = np.einsum("qil,eqlk->eqik", dref, inv)  # J^-T grad_ref
    hess = None
    if want_hess:
        hx = np.einsum("eik,qilm->eqklm", X, href)  # second derivatives of the map
        corr = href[None] - np.einsum("eqik,eqklm->eqilm", grad, hx)
        hess = np.einsum("eqak,eqiab,eqbl->eqikl", inv, corr, inv)
    return x, det, grad, hess


def _near_mask(nodes, tris, punctures, R):
    if punctures is None or len(punctures) == 0 or R is None:
        return np.zeros(len(tris), dtype=bool)
    P = nodes[tris[:, :3]]
    c = P.mean(axis=1)
    diam = np.linalg.norm(P - c[:, None], axis=-1).max(axis=1)
    tree = cKDTree(punctures)
    d, _ = tree.query(c)
    return d - diam < R / 5.0


def quad_data(mesh, order=None, weight=None, degree=4, near_degree=6, want_hess=False):
    """Quadrature data split into far (``degree``) and near-puncture (``near_degree``) groups."""
    order = mesh.order if order is None else order
    if order == 2 and mesh.order == 1:
        mesh = mesh.to_p2()
    dofs = mesh.triangles if order == 2 else mesh.triangles[:, :3]
    geo = mesh.triangles if mesh.order == 2 else mesh.triangles[:, :3]
    punctures = getattr(weight, "punctures", None)
    R = getattr(getattr(weight, "eta", None), "R", None)
    near = _near_mask(mesh.nodes, mesh.triangles, punctures, R)
    groups = []
    for mask, deg in ((~near, degree), (near, near_degree)):
        idx = np.nonzero(mask)[0]
        if len(idx) == 0:
            continue
        rule = RULES[deg]
        x, det, ggrad, ghess = _geometry(mesh.nodes, geo[idx], mesh.order, rule.points, want_hess and mesh.order == 2)
        phi, dref, href = _basis(order, rule.points)
        if order == mesh.order:
            grad, hess = ggrad, ghess
        else:
            # P1 unknowns on a P2 geometry: transform with the geometric Jacobian
            Jinv_T = _inverse_map_jacobian(mesh.nodes, geo[idx], mesh.order, rule.points)
            grad = np.einsum("qil,eqlk->eqik", dref, Jinv_T)
            hess = None
        if want_hess and order == 1:
            hess = np.zeros(grad.shape + (2,))
        groups.append(
            QuadData(
                elements=idx,
                dofs=dofs[idx],
                x=x,
                wdet=det * rule.weights[None, :],
                phi=phi,
                grad=grad,
                hess=hess,
            )
        )
    return groups


def _inverse_map_jacobian(nodes, geo, order, xi):
    _, dref, _ = _basis(order, xi)
    X = nodes[geo]
    Jm = np.einsum("eik,qil->eqkl", X, dref)
    return np.linalg.inv(Jm)


def _scatter(groups, local, n):
    rows, cols, vals = [], [], []
    for g, A in zip(groups, local):
        nb = g.dofs.shape[1]
        rows.append(np.repeat(g.dofs, nb, axis=1).ravel())
        cols.append(np.tile(g.dofs, (1, nb)).ravel())
        vals.append(A.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


@dataclass
class PoissonSystem:
    mesh: object
    order: int
    groups: list
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    n_dofs: int

    def weighted_mass(self, w):
        """Mass matrix with density r(x)^-2."""
        local = []
        for g in self.groups:
            dens = 1.0 / w(g.x.reshape(-1, 2)).reshape(g.x.shape[:2]) ** 2
            local.append(np.einsum("eq,qi,qj->eij", g.wdet * dens, g.phi, g.phi))
        return _scatter(self.groups, local, self.n_dofs)

    def load(self, f):
        """Vector of integrals of f against each basis function."""
        b = np.zeros(self.n_dofs)
        for g in self.groups:
            fv = np.asarray(f(g.x.reshape(-1, 2)), dtype=float).reshape(g.x.shape[:2])
            np.add.at(b, g.dofs, np.einsum("eq,qi->ei", g.wdet * fv, g.phi))
        return b

    @property
    def dirichlet(self):
        mask = np.zeros(self.n_dofs, dtype=bool)
        mask[self.mesh.boundary_nodes[self.mesh.boundary_nodes < self.n_dofs]] = True
        return mask


def assemble_poisson(mesh, order=None, weight=None):
    """Stiffness and mass matrices (plus the r^-2 weighted mass via ``weighted_mass``)."""
    order = mesh.order if order is None else order
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if order == 2 and mesh.order == 1:
        mesh = mesh.to_p2()
    groups = quad_data(mesh, order, weight)
    n = mesh.n_nodes if order == 2 else mesh.n_vertex_nodes
    Kloc = [np.einsum("eq,eqik,eqjk->eij", g.wdet, g.grad, g.grad) for g in groups]
    Mloc = [np.einsum("eq,qi,qj->eij", g.wdet, g.phi, g.phi) for g in groups]
    return PoissonSystem(mesh, order, groups, _scatter(groups, Kloc, n), _scatter(groups, Mloc, n), n)


def pcg(A, b, tol=1e-10, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients; stops at ||r|| <= tol ||b||."""
    n = len(b)
    maxiter = int(20 * math.sqrt(n)) + 1 if maxiter is None else maxiter
    dinv = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise CgDiverged(f"CG did not reach {tol:g} within {maxiter} iterations")


@dataclass
class FemSolution:
    """Nodal coefficients (all dofs; Dirichlet entries exactly zero)."""

    mesh: object
    order: int
    values: np.ndarray
    dirichlet: np.ndarray
    iterations: int = 0
    system: PoissonSystem = field(default=None, repr=False)

    def export(self, path):
        x = self.mesh.nodes[: len(self.values)]
        lines = [f"{a:.17g} {b:.17g} {u:.17g}" for (a, b), u in zip(x, self.values)]
        Path(path).write_text("\n".join(lines) + "\n")


SOURCE_NAMES = ("one", "zero", "sine", "bump")


@dataclass(frozen=True)
class SourceField:
    """Callable source f(x) with a preset name."""

    name: str
    center: tuple = (0.5, 0.5)
    width: float = 0.1
    scale: float = 1.0

    def __post_init__(self):
        if self.name not in SOURCE_NAMES:
            raise ValueError(f"unknown source {self.name!r}")

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.name == "one":
            v = np.ones(len(x))
        elif self.name == "zero":
            v = np.zeros(len(x))
        elif self.name == "sine":
            v = -2 * np.pi**2 * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
        elif self.name == "bump":
            d2 = ((x - np.asarray(self.center)) ** 2).sum(axis=1)
            v = np.exp(-d2 / (2 * self.width**2))
        else:
            raise ValueError(f"unknown source {self.name!r}")
        return self.scale * v


def source_preset(name, **kw):
    """``one`` (f = 1), ``sine`` (manufactured, u = sin(pi x) sin(pi y)), ``bump`` (Gaussian)."""
    return SourceField(name, **kw)


def solve_dirichlet(mesh, order=None, f=None, system=None, weight=None, tol=1e-10):
    """Finite element solution of Laplace(u) = f, u = 0 on the boundary."""
    system = assemble_poisson(mesh, order, weight) if system is None else system
    f = source_preset("one") if f is None else f
    rhs = -system.load(f) if callable(f) else -np.asarray(f, dtype=float)
    bc = system.dirichlet
    free = ~bc
    A = system.stiffness[free][:, free]
    u = np.zeros(system.n_dofs)
    uf, it = pcg(A.tocsr(), rhs[free], tol=tol)
    u[free] = uf
    return FemSolution(system.mesh, system.order, u, bc, it, system)


def weighted_eigen_min(mesh, order=None, w=None, system=None, tol=1e-6, maxiter=500):
    """Smallest lambda with K u = lambda M_w u (Dirichlet), M_w the r^-2 weighted mass."""
    system = assemble_poisson(mesh, order, w) if system is None else system
    free = ~system.dirichlet
    K = system.stiffness[free][:, free].tocsr()
    Mw = (system.weighted_mass(w) if w is not None else system.mass)[free][:, free].tocsr()
    x = np.ones(K.shape[0])
    x /= math.sqrt(x @ (Mw @ x))
    lam = (x @ (K @ x)) / (x @ (Mw @ x))
    y = None
    for _ in range(maxiter):
        y, _ = pcg(K, Mw @ x, tol=1e-12, x0=None if y is None else y * (x @ (Mw @ x)))
        x = y / math.sqrt(y @ (Mw @ y))
        new = (x @ (K @ x)) / (x @ (Mw @ x))
        if abs(new - lam) <= 0.01 * tol * new:
            return float(new)
        lam = new
    raise IterationStalled("inverse iteration did not converge")


def interpolate(mesh, func, order=None):
    """Nodal interpolant of ``func`` as a FemSolution (boundary values kept)."""
    order = mesh.order if order is None else order
    if order == 2 and mesh.order == 1:
        mesh = mesh.to_p2()
    n = mesh.n_nodes if order == 2 else mesh.n_vertex_nodes
    vals = np.asarray(func(mesh.nodes[:n]), dtype=float)
    bc = np.zeros(n, dtype=bool)
    bc[mesh.boundary_nodes[mesh.boundary_nodes < n]] = True
    return FemSolution(mesh, order, vals, bc)


# ---------------------------------------------------------------------------
# point evaluation


def _locator(mesh):
    cache = mesh.__dict__.setdefault("_locator", {})
    if "tree" not in cache:
        P = mesh.nodes[mesh.vertices]
        cache["tree"] = cKDTree(P.mean(axis=1))
        cache["radius"] = float(np.linalg.norm(P - P.mean(axis=1)[:, None], axis=-1).max())
    return cache


def _reference_coords(mesh, e, x):
    """Reference coordinates of x in element e (Newton on curved elements)."""
    geo = mesh.triangles[e] if mesh.order == 2 else mesh.triangles[e, :3]
    X = mesh.nodes[geo]
    A = np.column_stack([X[1] - X[0], X[2] - X[0]])
    xi = np.linalg.solve(A, x - X[0])
    if mesh.order == 2:
        for _ in range(20):
            val, dref, _ = _basis(2, xi)
            F = val[0] @ X - x
            Jm = X.T @ dref[0]
            step = np.linalg.solve(Jm, F)
            xi = xi - step
            if np.abs(step).max() < 1e-15:
                break
    return xi


def _locate(mesh, x, tol=1e-10):
    loc = _locator(mesh)
    tree = loc["tree"]
    for k in (8, 32, 128, len(mesh.triangles)):
        k = min(k, len(mesh.triangles))
        _, cand = tree.query(x, k=k)
        for e in np.atleast_1d(cand):
            xi = _reference_coords(mesh, int(e), x)
            if xi[0] >= -tol and xi[1] >= -tol and xi[0] + xi[1] <= 1 + tol:
                return int(e), xi
        if k == len(mesh.triangles):
            break
    raise OutsideDomain(f"point {x} is not in the mesh")


def _reference_coords_many(mesh, elems, x):
    """Batched :func:`_reference_coords` for element/point pairs."""
    geo = mesh.triangles[elems] if mesh.order == 2 else mesh.triangles[elems, :3]
    X = mesh.nodes[geo]
    A = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)
    xi = np.linalg.solve(A, (x - X[:, 0])[..., None])[..., 0]
    if mesh.order == 2:
        for _ in range(20):
            val, dref, _ = _basis(2, xi)
            F = np.einsum("qi,qik->qk", val, X) - x
            Jm = np.einsum("qik,qil->qkl", X, dref)
            step = np.linalg.solve(Jm, F[..., None])[..., 0]
            xi = xi - step
            if np.abs(step).max() < 1e-15:
                break
    return xi


def _locate_many(mesh, pts, tol=1e-10):
    loc = _locator(mesh)
    n = len(pts)
    elem = np.full(n, -1)
    xis = np.zeros((n, 2))
    ntri = len(mesh.triangles)
    for k in (8, 32, 128):
        todo = np.nonzero(elem < 0)[0]
        if len(todo) == 0:
            break
        k = min(k, ntri)
        _, cand = loc["tree"].query(pts[todo], k=k)
        cand = cand.reshape(len(todo), -1)
        for j in range(cand.shape[1]):
            left = elem[todo] < 0
            if not left.any():
                break
            idx = todo[left]
            e = cand[left, j]
            xi = _reference_coords_many(mesh, e, pts[idx])
            ok = (xi[:, 0] >= -tol) & (xi[:, 1] >= -tol) & (xi.sum(axis=1) <= 1 + tol)
            elem[idx[ok]] = e[ok]
            xis[idx[ok]] = xi[ok]
    for i in np.nonzero(elem < 0)[0]:
        elem[i], xis[i] = _locate(mesh, pts[i], tol)
    return elem, xis


def evaluate(solution, x, derivative=0):
    """Value, gradient or Hessian of the finite element field at point(s) x."""
    mesh = solution.mesh
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    order = solution.order
    if derivative == 0:
        elem, xi = _locate_many(mesh, pts)
        dofs = mesh.triangles[elem] if order == 2 else mesh.triangles[elem, :3]
        val, _, _ = _basis(order, xi)
        out = (val * solution.values[dofs]).sum(axis=1)
        return out[0] if np.asarray(x).ndim == 1 else out
    out = []
    for p in pts:
        e, xi = _locate(mesh, p)
        dofs = mesh.triangles[e] if order == 2 else mesh.triangles[e, :3]
        geo = mesh.triangles[e] if mesh.order == 2 else mesh.triangles[e, :3]
        c = solution.values[dofs]
        if derivative == 0:
            val, _, _ = _basis(order, xi)
            out.append(val[0] @ c)
            continue
        gx, det, ggrad, ghess = _geometry(mesh.nodes, geo[None], mesh.order, xi[None], derivative == 2)
        if order == mesh.order:
            grad, hess = ggrad[0, 0], (None if ghess is None else ghess[0, 0])
        else:
            _, dref, _ = _basis(order, xi)
            inv = _inverse_map_jacobian(mesh.nodes, geo[None], mesh.order, xi[None])[0, 0]
            grad = dref[0] @ inv
            hess = np.zeros((len(dofs), 2, 2))
        if derivative == 1:
            out.append(c @ grad)
        elif derivative == 2:
            out.append(np.einsum("i,ikl->kl", c, hess) if order == 2 else np.zeros((2, 2)))
        else:
            raise ValueError("derivative must be 0, 1 or 2")
    out = np.array(out)
    return out[0] if np.asarray(x).ndim == 1 else out
