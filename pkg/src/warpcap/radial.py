"""Radial minimal graphs via the first integral, harmonic profiles, barriers.

A rotationally symmetric minimal graph u(r) conserves the flux
q = W(r) u'(r) / sqrt(1 + u'(r)^2) with W = w^(n-1), so its slope is
u' = q / sqrt(W^2 - q^2) and every boundary-value question reduces to
one-dimensional quadrature plus a monotone root-find in q.  The flux
parameterization replaces the additive constant of the classical first
integral (w = e^-f turns q = W u'/sqrt(1+u'^2) into the usual
(n-1)(f - c) = log(u'/sqrt(1+u'^2)) with q = e^-(n-1)c); q is bounded by
inf W and the map q -> interior drop is strictly increasing, which makes
bisection robust.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import quadrature
from .errors import (DegenerateGeometryError, InputError, NonIntegrableError,
                     SingularInputError, UnsupportedError)
from .manifold import sphere_area

__all__ = [
    "RadialProfile", "HarmonicProfile", "minimal_slope", "integrate_drop",
    "shoot_for_drop", "radial_harmonic", "barrier", "BarrierFunction",
    "oscillation_sup", "oscillation_formula", "lateral_infimum",
]

_HINT_BUDGET = 20000


@dataclass
class RadialProfile:
    """A radial (BV) minimal-graph solution on [grid[0], grid[-1]].

    ``values`` runs from t - jump_inner at the inner radius down to
    jump_outer at the outer radius; the interior drop plus the two trace
    jumps equals the prescribed boundary gap.
    """

    grid: np.ndarray
    values: np.ndarray
    flux_q: float
    jump_inner: float = 0.0
    jump_outer: float = 0.0
    monotone: str = "nonincreasing"
    diag: dict = field(default_factory=dict)

    @property
    def inner_r(self):
        return float(self.grid[0])

    @property
    def outer_r(self):
        return float(self.grid[-1])

    @property
    def interior_drop(self):
        return float(self.values[0] - self.values[-1])

    def interp(self, r):
        return np.interp(r, self.grid, self.values)

    def to_csv(self, path, m):
        """CSV columns (r, u, u_prime, w) plus a JSON sidecar with the flux."""
        w = np.asarray(m.w(self.grid), dtype=float)
        sign = -1.0 if self.monotone == "nonincreasing" else 1.0
        up = sign * np.array([minimal_slope(m, float(r), self.flux_q)
                              if self.flux_q < m.lateral(float(r)) else math.inf
                              for r in self.grid])
        with open(path, "w") as fh:
            fh.write("r,u,u_prime,w\n")
            for row in zip(self.grid, self.values, up, w):
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
        sidecar = {"flux_q": self.flux_q, "jump_inner": self.jump_inner,
                   "jump_outer": self.jump_outer, "monotone": self.monotone}
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=1)


@dataclass
class HarmonicProfile:
    grid: np.ndarray
    values: np.ndarray
    c: float
    kappa: int

    def interp(self, r):
        return np.interp(r, self.grid, self.values)


# --------------------------------------------------------------------------
# flux admissibility


def lateral_infimum(m, lo, hi, n_scan=2048):
    """(inf of W = w^(n-1) on [lo, hi], argmin, attained_interior).

    Uses the warp's analytic neck family when it has one; otherwise a dense
    scan (log-spaced on wide windows) with golden refinement of local minima.
    """
    scan_hi = hi
    if not np.isfinite(hi):
        scan_hi = _decay_guard(m, lo)
    candidates = [(float(m.lateral(lo)), float(lo)),
                  (float(m.lateral(scan_hi)), float(scan_hi))]
    necks = m.warp.known_necks(lo, scan_hi)
    if necks is not None:
        candidates += [(float(w) ** (m.n - 1), float(r)) for r, w in necks]
    else:
        if scan_hi / max(lo, 1e-12) > 20:
            grid = np.geomspace(max(lo, 1e-12), scan_hi, n_scan)
        else:
            grid = np.linspace(lo, scan_hi, n_scan)
        grid = np.unique(np.concatenate(
            [grid, [lo, scan_hi], list(m.warp.hint_points(lo, scan_hi))]))
        vals = np.asarray(m.lateral(grid), dtype=float)
        interior = np.flatnonzero((vals[1:-1] <= vals[:-2])
                                  & (vals[1:-1] <= vals[2:])) + 1
        for i in interior[np.argsort(vals[interior])][:8]:
            res = minimize_scalar(lambda r: float(m.lateral(r)),
                                  bounds=(grid[i - 1], grid[i + 1]),
                                  method="bounded",
                                  options={"xatol": 1e-13 * max(1.0, grid[i])})
            candidates.append((float(res.fun), float(res.x)))
        j = int(np.argmin(vals))
        candidates.append((float(vals[j]), float(grid[j])))
    q_sup, r_at = min(candidates)
    eps = 1e-9 * (scan_hi - lo)
    return q_sup, r_at, (lo + eps < r_at < hi - eps)


def _decay_guard(m, lo):
    # infinite outer radius only makes sense when W grows toward infinity
    r, w_prev = lo, m.lateral(lo)
    for _ in range(24):
        r *= 2.0
        if r >= m.warp.domain[1]:
            r = m.warp.domain[1]
            break
    if m.lateral(r) < w_prev:
        raise UnsupportedError("lateral area decays toward infinity; "
                               "use a finite exhaustion instead of r_b = inf")
    return r


def _hints(m, lo, hi):
    cap = hi if np.isfinite(hi) else max(lo * 2.0 ** 24, lo + 1e7)
    pts = m.warp.hint_points(lo, min(cap, m.warp.domain[1]))
    if len(pts) > _HINT_BUDGET:
        raise UnsupportedError("warp has too many breakpoints for this window")
    return pts


# --------------------------------------------------------------------------
# slopes and drops


def minimal_slope(m, r, q):
    """u'(r) = q / sqrt(W(r)^2 - q^2) for the flux constant q < W(r)."""
    if q < 0:
        raise InputError("flux constant must be nonnegative")
    if q == 0:
        return 0.0
    W = m.lateral(r)
    if q >= W:
        raise SingularInputError(f"flux {q} >= lateral area {W} at r={r}")
    return q / math.sqrt((W - q) * (W + q))


def _singular_set(m, lo, hi, q, hints):
    """Radii where W comes within a factor ~2 of q (slope near-singular)."""
    if q == 0:
        return ()
    pts = []
    for r in (lo, hi, *hints):
        if not np.isfinite(r):
            continue
        W = float(m.lateral(r))
        if W <= 2.0 * q:
            pts.append(float(r))
    return tuple(pts)


def _drop_area(m, r_a, r_b, q, rel_tol=1e-9, want_area=False):
    """Interior drop (and relaxed-area) integrals for the flux constant q."""
    if q == 0.0:
        return (0.0, 0.0) if want_area else (0.0,)
    hints = _hints(m, r_a, r_b)
    sing = _singular_set(m, r_a, r_b, q, hints)

    # admissibility is validated by the callers; a nonpositive W^2 - q^2 here
    # is rounding noise within ulps of a declared singular endpoint, where
    # the substituted integrand tends to 0
    def slope(r):
        W = float(m.lateral(r))
        d2 = (W - q) * (W + q)
        if d2 <= 0.0:
            return 0.0
        return q / math.sqrt(d2)

    drop, _ = quadrature.integrate(slope, r_a, r_b, rel_tol=rel_tol,
                                   hints=hints, singular=sing)
    if not want_area:
        return (drop,)

    def area_density(r):
        # (sqrt(1+u'^2) - 1) * W  ==  q^2 W / (S (W + S)),  S = sqrt(W^2-q^2)
        W = float(m.lateral(r))
        d2 = (W - q) * (W + q)
        if d2 <= 0.0:
            return 0.0
        S = math.sqrt(d2)
        return q * q * W / (S * (W + S))

    area, _ = quadrature.integrate(area_density, r_a, r_b, rel_tol=rel_tol,
                                   hints=hints, singular=sing)
    return drop, area


def integrate_drop(m, r_a, r_b, q, rel_tol=1e-9):
    """Total interior drop of the minimal graph with flux q on [r_a, r_b]."""
    if q < 0:
        raise InputError("flux constant must be nonnegative")
    if q == 0 or r_b == r_a:
        return 0.0
    if r_b < r_a:
        raise InputError("need r_b >= r_a")
    q_sup, r_at, interior = lateral_infimum(m, r_a, r_b)
    if q > q_sup * (1.0 + 1e-12):
        raise SingularInputError(
            f"flux {q} exceeds inf lateral area {q_sup} (attained at r={r_at})")
    if interior and q >= q_sup * (1.0 - 1e-13):
        raise NonIntegrableError(
            f"flux touches the lateral-area infimum at interior r={r_at}")
    return _drop_area(m, r_a, r_b, min(q, q_sup), rel_tol)[0]


# --------------------------------------------------------------------------
# shooting


def _profile_grid(r_a, r_b, sing, n=241):
    """Radius grid clustered (quartically) toward singular endpoints."""
    x = np.linspace(0.0, 1.0, n)
    left = r_a in sing
    right = r_b in sing
    if left and right:
        y = np.where(x < 0.5, 8.0 * x ** 4, 1.0 - 8.0 * (1.0 - x) ** 4)
    elif left:
        y = x ** 4
    elif right:
        y = 1.0 - (1.0 - x) ** 4
    else:
        y = x
    grid = r_a + (r_b - r_a) * y
    grid[0], grid[-1] = r_a, r_b
    return np.unique(grid)


def _build_profile(m, r_a, r_b, t, q, j_in, j_out, rel_tol, diag,
                   profile_n=241):
    hints = _hints(m, r_a, r_b) if np.isfinite(r_b) else ()
    sing = _singular_set(m, r_a, r_b, q, hints) if q > 0 else ()
    grid = np.unique(np.concatenate(
        [_profile_grid(r_a, r_b if np.isfinite(r_b) else 64.0 * r_a, sing,
                       n=profile_n),
         [h for h in hints if np.isfinite(h)]]))
    def slope(r):
        W = float(m.lateral(r))
        d2 = (W - q) * (W + q)
        return q / math.sqrt(d2) if d2 > 0.0 else 0.0

    drops = np.zeros(len(grid))
    if q > 0:
        for i in range(1, len(grid)):
            lo, hi = grid[i - 1], grid[i]
            seg_sing = tuple(s for s in sing if lo <= s <= hi)
            val, _ = quadrature.integrate(slope, lo, hi, rel_tol=rel_tol,
                                          singular=seg_sing)
            drops[i] = val
    values = (t - j_in) - np.cumsum(drops)
    return RadialProfile(grid=grid, values=values, flux_q=q,
                         jump_inner=j_in, jump_outer=j_out,
                         monotone="nonincreasing", diag=diag)


def shoot_for_drop(m, r_a, r_b, t, rel_tol=1e-10, profile_n=241):
    """Profile of the relaxed minimizer with boundary gap t on [r_a, r_b].

    The map q -> interior drop is strictly increasing, so the attached case is
    a bracketed root-find.  When even the largest admissible flux cannot
    absorb t, the flux is chosen among the admissible candidate set
    {q solving drop = t} | {W(r_a), W(r_b), inf W} by direct comparison of the
    relaxed objective (interior area plus lateral wall area), with the
    residual drop placed as a trace jump on the cheaper boundary sphere.
    """
    if t < 0:
        raise InputError("boundary gap t must be nonnegative")
    if not r_b > r_a:
        raise InputError("need r_b > r_a")
    if t == 0:
        grid = np.linspace(r_a, r_b, 65) if np.isfinite(r_b) else \
            np.geomspace(r_a, 64 * r_a, 65)
        return RadialProfile(grid=grid, values=np.zeros(65), flux_q=0.0)
    q_sup, r_at, interior = lateral_infimum(m, r_a, r_b)
    if q_sup <= 0:
        raise DegenerateGeometryError("lateral area infimum is zero")

    def drop(q):
        return _drop_area(m, r_a, r_b, q, rel_tol=rel_tol)[0]

    # probe the admissibility edge; interior minima usually make drop blow up
    attached_q = None
    tries = 0
    for back in (1e-9, 1e-12, 3e-15):
        q_hi = q_sup * (1.0 - back)
        d_hi = drop(q_hi)
        tries += 1
        if d_hi >= t:
            attached_q = brentq(lambda q: drop(q) - t, 0.0, q_hi,
                                xtol=1e-15 * q_sup, rtol=8.9e-16, maxiter=200)
            break
        if not interior:
            break   # endpoint infimum: the drop limit is finite
    if attached_q is not None:
        q = float(attached_q)
        diag = {"branch": "attached", "drop_evals": tries,
                "residual": drop(q) - t}
        return _build_profile(m, r_a, r_b, t, q, 0.0, 0.0, rel_tol, diag,
                              profile_n=profile_n)
    if not np.isfinite(r_b):
        # the exhaustion limit of a detached family is not a single free-outer
        # problem; callers must take the monotone limit over finite domains
        raise UnsupportedError("gap not attainable on [r_a, inf); "
                               "take an exhaustion limit over finite outer radii")

    # detached: compare the relaxed objective over the candidate flux set
    W_a, W_b = float(m.lateral(r_a)), float(m.lateral(r_b))
    wall = min(W_a, W_b)
    # an interior infimum only detaches below numerical resolution
    q_edge = q_sup * (1.0 - 1e-13) if interior else q_sup
    cands = sorted({min(q_edge, W_a), min(q_edge, W_b), q_edge})
    best = None
    for q in cands:
        d, a = _drop_area(m, r_a, r_b, q, rel_tol=rel_tol, want_area=True)
        resid = max(t - d, 0.0)
        obj = a + resid * wall
        if best is None or obj < best[0]:
            best = (obj, q, d, resid)
    _, q, d, resid = best
    j_in, j_out = (resid, 0.0) if W_a < W_b else (0.0, resid)
    diag = {"branch": "detached", "candidates": cands, "wall_density": wall,
            "interior_drop": d}
    prof = _build_profile(m, r_a, r_b, t, q, j_in, j_out, rel_tol, diag,
                          profile_n=profile_n)
    # reconcile the jump with the profile's own cumulative drop so that
    # drop + jumps = t holds exactly as reported
    cum = float(prof.values[0] - prof.values[-1])
    if j_in > 0.0:
        new_j_in = max(t - j_out - cum, 0.0)
        prof.values = prof.values + ((t - new_j_in) - prof.values[0])
        prof.jump_inner = new_j_in
    else:
        prof.jump_outer = max(t - j_in - cum, 0.0)
    return prof


# --------------------------------------------------------------------------
# radial harmonic functions (classical capacity route)


def harmonic_normalizer(m, r_a, r_b, rel_tol=1e-10):
    """(c, profile tail radius): c = 1 / int_{r_a}^{r_b} w^-kappa, or 0 when
    the integral to infinity diverges (the parabolic signal)."""
    from .manifold import improper_integral   # local to avoid cycle at import
    kap = m.kappa
    if np.isfinite(r_b):
        hints = _hints(m, r_a, r_b)
        total, _ = quadrature.integrate(lambda r: float(m.w(r)) ** (-kap),
                                        r_a, r_b, rel_tol=rel_tol,
                                        hints=hints, singular=hints)
        if not np.isfinite(total):
            raise InputError("the normalizer integral diverges on [r_a, r_b]")
        return 1.0 / total, r_b
    cert = improper_integral(m, -float(kap), r_a, rel_tol=rel_tol)
    if cert.verdict != "convergent":
        return 0.0, 64.0 * r_a
    return 1.0 / cert.value, max(cert.r_cut, 64.0 * r_a)


def radial_harmonic(m, r_a, r_b, rel_tol=1e-10, n_grid=257):
    """phi(r) = 1 - c * int_{r_a}^r w^-kappa, c the normalizer to phi(r_b)=0.

    A divergent normalizer with r_b = inf is the parabolic signal: the
    function degenerates to the constant 1 and c = 0 (not an error).
    """
    kap = m.kappa
    c, tail_r = harmonic_normalizer(m, r_a, r_b, rel_tol=rel_tol)
    if c == 0.0:
        grid = np.geomspace(r_a, tail_r, n_grid)
        return HarmonicProfile(grid, np.ones(n_grid), 0.0, kap), 0.0
    grid = (np.linspace(r_a, r_b, n_grid) if np.isfinite(r_b)
            else np.geomspace(r_a, tail_r, n_grid))
    hints = _hints(m, r_a, min(grid[-1], m.warp.domain[1]))
    grid = np.unique(np.concatenate([grid, hints]))
    vals = np.empty(len(grid))
    vals[0], acc = 1.0, 0.0
    for i in range(1, len(grid)):
        seg_sing = tuple(h for h in hints if grid[i - 1] <= h <= grid[i])
        seg, _ = quadrature.integrate(lambda r: float(m.w(r)) ** (-kap),
                                      grid[i - 1], grid[i], rel_tol=rel_tol,
                                      singular=seg_sing)
        acc += seg
        vals[i] = 1.0 - c * acc
    return HarmonicProfile(grid, vals, c, kap), c


# --------------------------------------------------------------------------
# comparison barrier and the exponential-warp oscillation bound


class BarrierFunction:
    """phi(s) = int_0^s ((1+eps^-2) e^(2 Lambda sigma) - 1)^(-1/2) d sigma.

    Solves Lambda phi' + phi'' / (1 + phi'^2) = 0 with phi'(0) = eps; closed
    form via arctan of the square root.
    """

    def __init__(self, epsilon, Lambda, tau):
        if min(epsilon, Lambda, tau) <= 0:
            raise InputError("epsilon, Lambda, tau must all be positive")
        self.epsilon = float(epsilon)
        self.Lambda = float(Lambda)
        self.tau = float(tau)
        self._A = 1.0 + epsilon ** -2
        self.lambda_eps = ((1.0 + epsilon ** -2) ** -0.5 / Lambda
                           * (1.0 - math.exp(-Lambda * tau)))

    def _root(self, s):
        return np.sqrt(self._A * np.exp(2.0 * self.Lambda * np.asarray(s)) - 1.0)

    def __call__(self, s):
        val = (np.arctan(self._root(s)) - math.atan(1.0 / self.epsilon)) / self.Lambda
        return float(val) if np.ndim(s) == 0 else val

    def prime(self, s):
        val = 1.0 / self._root(s)
        return float(val) if np.ndim(s) == 0 else val


def barrier(epsilon, Lambda, tau):
    """(barrier phi on [0, tau], Lambda_eps) with phi(tau) >= Lambda_eps."""
    phi = BarrierFunction(epsilon, Lambda, tau)
    assert phi(phi.tau) >= phi.lambda_eps * (1.0 - 1e-12)
    return phi, phi.lambda_eps


def oscillation_formula(lam, r_a, r_b, T):
    """Interior drop of the exponential-warp graph whose slope blows up at T."""
    if T < r_b:
        raise InputError("the blow-up radius T sits at or beyond r_b")
    return (math.acos(math.exp(-lam * (T - r_a)))
            - math.acos(math.exp(-lam * (T - r_b)))) / lam


def oscillation_sup(lam, r_a, r_b, T_span, n_grid=2048):
    """sup over T in [r_b, r_b + T_span] of the exponential-warp drop.

    Always <= pi / (2 lam); the sup is located numerically rather than by the
    (true) monotonicity in T, so it doubles as a check of that monotonicity.
    """
    if lam <= 0 or r_b < r_a or T_span < 0:
        raise InputError("need lam > 0, r_b >= r_a, T_span >= 0")
    if r_b == r_a:
        return 0.0
    Ts = np.linspace(r_b, r_b + max(T_span, 0.0), max(n_grid, 2))
    vals = [oscillation_formula(lam, r_a, r_b, T) for T in Ts]
    i = int(np.argmax(vals))
    lo = Ts[max(i - 1, 0)]
    hi = Ts[min(i + 1, len(Ts) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda T: -oscillation_formula(lam, r_a, r_b, T),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14 * max(1.0, r_b)})
        return max(vals[i], -float(res.fun))
    return float(vals[i])
