"""Relaxed graph-area minimization on flat triangulated 2-D domains.

P1 elements: the gradient is constant per triangle, the energy is
sum_T |T| (sqrt(1+|grad u|_T^2) - 1), and in relaxed mode the boundary traces
enter through edge-length-weighted penalties (the penalty weight is exactly
the boundary length, nothing tunable).  The per-triangle Hessian block
(1+|g|^2)^(-3/2) [(1+|g|^2) I - g g^T] is positive definite, so damped Newton
with a strict-decrease line search converges globally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, InputError

__all__ = [
    "TriMesh", "MeshSolution", "solve", "boundary_flux", "refine",
    "refine_and_extrapolate", "annulus_mesh", "square_disk_mesh",
    "read_off", "write_off", "read_tags", "write_tags", "circle_snapper",
]

_MIN_AREA = 1e-14


@dataclass
class TriMesh:
    vertices: np.ndarray                 # (V, 2)
    triangles: np.ndarray                # (T, 3) int, positively oriented
    boundary_tags: dict = field(default_factory=dict)   # vertex -> K|outer|free

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise InputError("vertices must be (V, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise InputError("triangles must be (T, 3)")
        if self.areas().min() <= _MIN_AREA:
            raise InputError("degenerate or negatively oriented triangle")
        bset = self.boundary_vertices()
        for v, tag in self.boundary_tags.items():
            if tag not in ("K", "outer", "free"):
                raise InputError(f"unknown boundary tag {tag!r}")
            if v not in bset:
                raise InputError(f"tagged vertex {v} is not on the boundary")

    def areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_edges(self):
        """Edges owned by exactly one triangle, with that triangle's index."""
        seen = {}
        for ti, (i, j, k) in enumerate(self.triangles):
            for a, b in ((i, j), (j, k), (k, i)):
                key = (min(a, b), max(a, b))
                if key in seen:
                    seen[key] = None
                else:
                    seen[key] = (int(a), int(b), ti)
        return [v for v in seen.values() if v is not None]

    def boundary_vertices(self):
        out = set()
        for a, b, _ in self.boundary_edges():
            out.add(a)
            out.add(b)
        return out

    def tagged(self, tag):
        return sorted(v for v, s in self.boundary_tags.items() if s == tag)


@dataclass
class MeshSolution:
    u: np.ndarray
    J: float
    mode: str
    t: float
    k_edge_flux: list                    # [((a, b), flux), ...]
    trace_deficit_K: np.ndarray          # t - u on K vertices
    trace_outer: np.ndarray              # u on outer vertices
    diagnostics: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# assembly


class _P1Assembler:
    def __init__(self, mesh):
        v = mesh.vertices
        tri = mesh.triangles
        p0, p1, p2 = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]
        e1, e2 = p1 - p0, p2 - p0
        self.area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        # grad of barycentric basis: rotate opposite edges by +90deg / (2A)
        def perp(e):
            return np.stack([-e[:, 1], e[:, 0]], axis=1)
        g0 = perp(p2 - p1)
        g1 = perp(p0 - p2)
        g2 = perp(p1 - p0)
        self.grads = np.stack([g0, g1, g2], axis=1) / (2.0 * self.area)[:, None, None]
        self.tri = tri
        self.nv = len(v)
        rows, cols = [], []
        for a in range(3):
            for b in range(3):
                rows.append(tri[:, a])
                cols.append(tri[:, b])
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)

    def grad_u(self, u):
        return np.einsum("tac,ta->tc", self.grads, u[self.tri])

    def energy(self, u):
        g = self.grad_u(u)
        g2 = np.einsum("tc,tc->t", g, g)
        phi = g2 / (1.0 + np.sqrt(1.0 + g2))
        return float(np.dot(self.area, phi))

    def gradient(self, u):
        g = self.grad_u(u)
        g2 = np.einsum("tc,tc->t", g, g)
        F = g / np.sqrt(1.0 + g2)[:, None]
        contrib = self.area[:, None] * np.einsum("tac,tc->ta", self.grads, F)
        out = np.zeros(self.nv)
        np.add.at(out, self.tri, contrib)
        return out

    def hessian(self, u):
        g = self.grad_u(u)
        g2 = np.einsum("tc,tc->t", g, g)
        s = 1.0 + g2
        M = (s[:, None, None] * np.eye(2)[None] -
             np.einsum("tc,td->tcd", g, g)) * (s ** -1.5)[:, None, None]
        Mg = np.einsum("tcd,tbd->tbc", M, self.grads)
        blocks = np.einsum("tac,tbc->tab", self.grads, Mg) \
            * self.area[:, None, None]
        data = blocks.transpose(1, 2, 0).reshape(9, -1).reshape(-1)
        return sparse.csr_matrix((data, (self._rows, self._cols)),
                                 shape=(self.nv, self.nv))


def _edge_weights(mesh, tag):
    """Lumped boundary weights: half the adjacent tagged edge lengths."""
    w = np.zeros(len(mesh.vertices))
    tags = mesh.boundary_tags
    for a, b, _ in mesh.boundary_edges():
        if tags.get(a) == tag and tags.get(b) == tag:
            ell = float(np.linalg.norm(mesh.vertices[a] - mesh.vertices[b]))
            w[a] += 0.5 * ell
            w[b] += 0.5 * ell
    return w


def solve(mesh, t, mode="dirichlet", *, grad_tol=1e-10, max_iter=100):
    """Minimize the relaxed area functional; returns the solution and J.

    dirichlet: u = t on K vertices and u = 0 on outer vertices, exactly.
    relaxed: all nodes free inside the box 0 <= u <= t with the trace
    penalties length(e) * |trace - data| added; inside the box the penalties
    are linear, so the projected damped-Newton iteration stays smooth.
    """
    if t < 0:
        raise InputError("t must be nonnegative")
    if mode not in ("dirichlet", "relaxed"):
        raise InputError("mode must be 'dirichlet' or 'relaxed'")
    K = mesh.tagged("K")
    outer = mesh.tagged("outer")
    if not K or not outer:
        raise InputError("capacity problems need nonempty K and outer tags")
    asm = _P1Assembler(mesh)
    nv = len(mesh.vertices)
    wK = _edge_weights(mesh, "K")
    wO = _edge_weights(mesh, "outer")

    fixed = np.zeros(nv, dtype=bool)
    u = np.zeros(nv)
    if mode == "dirichlet":
        fixed[K] = True
        fixed[outer] = True
        u[K] = t

    def total(u):
        J = asm.energy(u)
        g = asm.gradient(u)
        if mode == "relaxed":
            J += float(wK @ (t - u)) + float(wO @ u)
            g = g - wK + wO
        return J, g

    # harmonic start: one linear solve of the small-slope limit
    H0 = asm.hessian(u * 0.0)
    rhs = -total(u)[1]
    free0 = ~fixed
    if free0.any():
        lu = splu(H0[np.ix_(free0, free0)].tocsc() +
                  1e-14 * sparse.eye(int(free0.sum()), format="csc"))
        u[free0] += lu.solve(rhs[free0])
    if mode == "relaxed":
        u = np.clip(u, 0.0, t)

    J, g = total(u)
    history = [J]
    gnorm = math.inf
    for it in range(max_iter):
        free = ~fixed
        if mode == "relaxed":
            free &= ~((u <= 0.0) & (g > 0)) & ~((u >= t) & (g < 0))
        gnorm = float(np.linalg.norm(g[free])) if free.any() else 0.0
        if gnorm <= grad_tol * (1.0 + abs(J)):
            break
        H = asm.hessian(u)
        idx = np.flatnonzero(free)
        Hff = H[np.ix_(idx, idx)].tocsc()
        try:
            step_f = splu(Hff).solve(-g[idx])
        except RuntimeError:
            Hff = Hff + 1e-12 * sparse.eye(len(idx), format="csc")
            step_f = splu(Hff).solve(-g[idx])
        step = np.zeros(nv)
        step[idx] = step_f
        slope = float(g @ step)
        alpha, accepted = 1.0, False
        for _ in range(50):
            cand = u + alpha * step
            if mode == "relaxed":
                cand = np.clip(cand, 0.0, t)
            Jc, gc = total(cand)
            if Jc < J + 1e-4 * alpha * min(slope, 0.0) and Jc < J:
                u, J, g = cand, Jc, gc
                history.append(J)
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if gnorm <= 1e-6 * (1.0 + abs(J)):
                break
            raise ConvergenceError("mesh Newton stagnated", last_iterate=u,
                                   diagnostics={"grad_norm": gnorm, "J": J})
    else:
        raise ConvergenceError("mesh Newton hit the iteration limit",
                               last_iterate=u,
                               diagnostics={"grad_norm": gnorm, "J": J})

    sol = MeshSolution(u=u, J=J, mode=mode, t=t, k_edge_flux=[],
                       trace_deficit_K=t - u[K], trace_outer=u[outer],
                       diagnostics={"iterations": len(history) - 1,
                                    "grad_norm": gnorm,
                                    "monotone_J": bool(np.all(np.diff(history) < 0))})
    sol.k_edge_flux = _k_edge_flux(mesh, asm, u)
    return sol


def _k_edge_flux(mesh, asm, u):
    tags = mesh.boundary_tags
    g = asm.grad_u(u)
    g2 = np.einsum("tc,tc->t", g, g)
    F = g / np.sqrt(1.0 + g2)[:, None]
    out = []
    for a, b, ti in mesh.boundary_edges():
        if tags.get(a) == "K" and tags.get(b) == "K":
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            e = pb - pa
            ell = float(np.linalg.norm(e))
            nu = np.array([-e[1], e[0]]) / ell
            centroid = mesh.vertices[mesh.triangles[ti]].mean(axis=0)
            if np.dot(nu, centroid - 0.5 * (pa + pb)) > 0:
                nu = -nu          # point out of the domain, into K
            out.append(((a, b), ell * float(F[ti] @ nu)))
    return out


def boundary_flux(sol, mesh):
    """Total discrete flux through the K boundary and the per-edge list."""
    total = math.fsum(f for _, f in sol.k_edge_flux)
    return total, sol.k_edge_flux


# --------------------------------------------------------------------------
# refinement


def refine(mesh, snap=None):
    """Split every triangle in four at the edge midpoints.

    ``snap`` (tag, point -> point) optionally projects new boundary vertices
    back onto the exact boundary curve, keeping the geometric error at the
    same order as the interpolation error.
    """
    v = mesh.vertices.tolist()
    tags = dict(mesh.boundary_tags)
    bedges = {(min(a, b), max(a, b)) for a, b, _ in mesh.boundary_edges()}
    mid = {}

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in mid:
            p = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
            tag = None
            if key in bedges:
                ta, tb = tags.get(a), tags.get(b)
                if ta == tb and ta is not None:
                    tag = ta
                if snap is not None and tag is not None:
                    p = np.asarray(snap(tag, p), dtype=float)
            mid[key] = len(v)
            v.append([float(p[0]), float(p[1])])
            if tag is not None:
                tags[mid[key]] = tag
        return mid[key]

    new_tris = []
    for i, j, k in mesh.triangles:
        a, b, c = midpoint(i, j), midpoint(j, k), midpoint(k, i)
        new_tris += [[i, a, c], [a, j, b], [c, b, k], [a, b, c]]
    return TriMesh(np.array(v), np.array(new_tris), tags)


def refine_and_extrapolate(mesh, t, mode="dirichlet", levels=3, snap=None):
    """Capacity estimates over nested refinements + Richardson extrapolation.

    Returns {"values": [...], "order": p or None, "extrapolated": J* or None,
    "monotone": bool}; a non-monotone level sequence reports a warning and
    skips the extrapolation.
    """
    if levels < 2:
        raise InputError("need at least 2 refinement levels")
    values = []
    current = mesh
    for lev in range(levels):
        sol = solve(current, t, mode=mode)
        values.append(sol.J)
        if lev < levels - 1:
            current = refine(current, snap=snap)
    diffs = np.diff(values)
    monotone = bool(np.all(diffs < 0) or np.all(diffs > 0) or
                    np.allclose(values, values[0]))
    out = {"values": values, "order": None, "extrapolated": None,
           "monotone": monotone}
    if np.allclose(values, values[0]):
        out["extrapolated"] = values[-1]
        return out
    if not monotone:
        out["warning"] = "level sequence is not monotone; no extrapolation"
        return out
    if levels >= 3:
        d1, d2 = values[-2] - values[-3], values[-1] - values[-2]
        if d1 != 0 and d2 != 0 and abs(d2) < abs(d1):
            out["order"] = math.log2(abs(d1) / abs(d2))
            out["extrapolated"] = values[-1] + d2 * d2 / (d1 - d2) \
                if d1 != d2 else values[-1]
    return out


# --------------------------------------------------------------------------
# benchmark meshes


def annulus_mesh(r_a, r_b, n_rings=50, n_sectors=100, grading="geometric"):
    """Structured polar annulus mesh, K on the inner circle, outer outside.

    Geometric ring grading keeps the first layer thin where the capacity
    integrand is largest (and the discrete flux is read off).
    """
    if not 0 < r_a < r_b:
        raise InputError("need 0 < r_a < r_b")
    if grading == "geometric":
        radii = np.geomspace(r_a, r_b, n_rings + 1)
    elif grading == "linear":
        radii = np.linspace(r_a, r_b, n_rings + 1)
    else:
        raise InputError("grading must be 'geometric' or 'linear'")
    th = np.linspace(0.0, 2.0 * math.pi, n_sectors, endpoint=False)
    verts = np.empty(((n_rings + 1) * n_sectors, 2))
    for i, r in enumerate(radii):
        verts[i * n_sectors:(i + 1) * n_sectors, 0] = r * np.cos(th)
        verts[i * n_sectors:(i + 1) * n_sectors, 1] = r * np.sin(th)
    tris = []
    for i in range(n_rings):
        for j in range(n_sectors):
            j2 = (j + 1) % n_sectors
            v00 = i * n_sectors + j
            v01 = i * n_sectors + j2
            v10 = (i + 1) * n_sectors + j
            v11 = (i + 1) * n_sectors + j2
            tris += [[v00, v10, v11], [v00, v11, v01]]
    tags = {j: "K" for j in range(n_sectors)}
    tags.update({n_rings * n_sectors + j: "outer" for j in range(n_sectors)})
    return TriMesh(verts, np.array(tris), tags)


def circle_snapper(r_a, r_b, center=(0.0, 0.0)):
    """Boundary projector for annulus refinements: snap to the exact circles."""
    c = np.asarray(center, dtype=float)

    def snap(tag, p):
        r = r_a if tag == "K" else r_b
        d = p - c
        return c + d * (r / np.linalg.norm(d))

    return snap


def square_disk_mesh(half_width, center, radius, h):
    """Square [-w, w]^2 with an off-center K-disk hole, Delaunay triangulated.

    Deterministic point set: rings around the disk, a uniform lattice
    outside, and the square boundary; triangles inside the disk are dropped.
    """
    from scipy.spatial import Delaunay
    cx, cy = center
    if radius + max(abs(cx), abs(cy)) >= half_width:
        raise InputError("disk must sit strictly inside the square")
    pts = []
    n_c = max(16, int(round(2.0 * math.pi * radius / h)))
    for ring, rr in enumerate((radius, radius + 0.7 * h, radius + 1.6 * h)):
        kk = n_c if ring == 0 else int(round(2.0 * math.pi * rr / h))
        off = 0.5 * ring * 2.0 * math.pi / kk
        for i in range(kk):
            a = 2.0 * math.pi * i / kk + off
            pts.append((cx + rr * math.cos(a), cy + rr * math.sin(a)))
    n_k = len([p for p in pts][:n_c])
    side = np.linspace(-half_width, half_width, int(round(2 * half_width / h)) + 1)
    for x in side:
        for y in side:
            if math.hypot(x - cx, y - cy) > radius + 2.2 * h:
                pts.append((float(x), float(y)))
    pts = np.array(pts)
    dela = Delaunay(pts)
    cent = pts[dela.simplices].mean(axis=1)
    keep = np.hypot(cent[:, 0] - cx, cent[:, 1] - cy) > radius * (1.0 - 1e-9)
    tris = dela.simplices[keep]
    # enforce positive orientation
    p = pts[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    flip = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    used = np.unique(tris)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh_pts = pts[used]
    tris = remap[tris]
    tags = {}
    for old in range(n_k):
        if remap[old] >= 0:
            tags[int(remap[old])] = "K"
    for new_i, (x, y) in enumerate(mesh_pts):
        if max(abs(x), abs(y)) > half_width - 1e-12:
            tags[new_i] = "outer"
    return TriMesh(mesh_pts, tris, tags)


# --------------------------------------------------------------------------
# OFF + JSON tag file I/O


def write_off(mesh, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.triangles)} 0\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")


def read_off(path):
    with open(path) as fh:
        tokens = fh.read().split()
    if tokens[0] != "OFF":
        raise InputError("not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = np.empty((nv, 2))
    for i in range(nv):
        verts[i] = (float(tokens[pos]), float(tokens[pos + 1]))
        pos += 3
    tris = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        if tokens[pos] != "3":
            raise InputError("only triangle faces supported")
        tris[i] = (int(tokens[pos + 1]), int(tokens[pos + 2]),
                   int(tokens[pos + 3]))
        pos += 4
    return verts, tris


def write_tags(mesh, path):
    doc = {"K": mesh.tagged("K"), "outer": mesh.tagged("outer"),
           "free": mesh.tagged("free")}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def read_tags(path):
    with open(path) as fh:
        doc = json.load(fh)
    tags = {}
    for tag in ("K", "outer", "free"):
        for v in doc.get(tag, []):
            tags[int(v)] = tag
    return tags


def load_mesh(off_path, tags_path):
    verts, tris = read_off(off_path)
    return TriMesh(verts, tris, read_tags(tags_path))
