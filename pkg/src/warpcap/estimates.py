"""Volume-ratio integral, grid mollifier, flux identities, asymptotic audits.

The mollifier is the double ball average
f_lam(x) = [int_0^lam |B_tau(x)| dtau]^-1 int_0^lam (int_{B_tau(x)} f) dtau,
whose exact discrete analogue on a uniform grid is a normalized convolution
with the tent kernel (lam - d)_+ over cell centers.  The audited constants
(Theta*, vartheta*, beta*) are reported as fitted empirical values only: the
theory proves their existence, not their magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import quadrature
from .capacity import classical_capacity, exhaustion_flux, minimal_capacity
from .errors import InputError, PreconditionError, ResolutionError, UnsupportedError
from .manifold import IntegralCertificate, ball_volume, sphere_area
from .radial import _drop_area, integrate_drop

__all__ = [
    "phi_integral", "mollify", "MollifyResult", "flux_from_profile",
    "FluxReport", "slice_identity_check", "asymptotic_audit",
    "AsymptoticAudit", "capacity_sandwich_audit", "SandwichReport",
]


# --------------------------------------------------------------------------
# Phi(r) = int_r^inf s ds / |B_s|


class _GrowingVolume:
    """Ball-volume evaluator that extends its cumulative table on demand.

    Nodal volumes are exact quadrature increments; queries go through a
    cubic spline (rebuilt after extensions) so that downstream adaptive
    quadrature sees a smooth integrand.
    """

    def __init__(self, m, r_seed):
        self.m = m
        self.knots = [0.0]
        self.vols = [0.0]
        self._spline = None
        self._extend(r_seed)

    def _extend(self, r_target):
        lo = self.knots[-1]
        start = max(lo, min(1e-3, r_target / 64.0))
        new = np.geomspace(start if start > 0 else r_target / 512.0,
                           r_target, 64)
        new = new[new > lo]
        for hi in new:
            hints = self.m.warp.hint_points(self.knots[-1], float(hi))
            seg, _ = quadrature.integrate(
                lambda s: sphere_area(self.m, s), self.knots[-1], float(hi),
                rel_tol=1e-11, hints=hints, singular=hints)
            self.knots.append(float(hi))
            self.vols.append(self.vols[-1] + seg)
        from scipy.interpolate import CubicSpline
        self._spline = CubicSpline(np.asarray(self.knots),
                                   np.asarray(self.vols))

    def __call__(self, s):
        while s > self.knots[-1]:
            self._extend(2.0 * self.knots[-1])
        return float(self._spline(s))


def phi_integral(m, r, volume=None, tol=1e-6, r_max=1e7):
    """Certificate for int_r^inf s ds / ball_volume(s).

    Finite exactly in the nonparabolic regime; ``volume`` overrides the ball
    volume (callable of s) for tabulated cross-checks.
    """
    if r <= 0:
        raise InputError("r must be positive")
    if volume is None:
        if m.origin != "pole":
            raise UnsupportedError("volume ratio needs a smooth pole")
        volume = _GrowingVolume(m, 4.0 * r)

    def segment(lo, hi):
        val, _ = quadrature.integrate(lambda s: s / volume(s), lo, hi,
                                      rel_tol=1e-10)
        return val

    res = quadrature.improper(segment, r, r_max=min(r_max, m.warp.domain[1]),
                              tol=tol)
    value = res.value if res.verdict == "convergent" else (
        math.inf if res.verdict == "divergent" else res.value)
    return IntegralCertificate(res.verdict, value, res.tail_bound, res.r_cut,
                               res.witness)


# --------------------------------------------------------------------------
# grid mollifier


@dataclass
class MollifyResult:
    smoothed: np.ndarray
    lam: float
    spacing: float
    ratio_gradient: float        # sup|Df_lam| * lam / sup|f|
    ratio_energy: float          # sup of graph-energy density quotients

    def to_json(self):
        return {"lam": self.lam, "spacing": self.spacing,
                "ratio_gradient": self.ratio_gradient,
                "ratio_energy": self.ratio_energy}


def _tent_kernel(ndim, lam, h):
    # the indicator ball is padded by the gradient stencil width so the
    # denominator average always sees everything the smoothed gradient saw
    pad = 2.0 * h
    k = int(math.floor((lam + pad) / h))
    ax = np.arange(-k, k + 1) * h
    if ndim == 1:
        d = np.abs(ax)
    else:
        d = np.sqrt(ax[:, None] ** 2 + ax[None, :] ** 2)
    return np.maximum(lam - d, 0.0), np.where(d <= lam + pad, 1.0, 0.0)


def _graph_energy(grads):
    g2 = np.zeros_like(grads[0])
    for g in grads:
        g2 = g2 + g * g
    return g2 / (1.0 + np.sqrt(1.0 + g2))


def mollify(field, spacing, lam):
    """Double ball average of a gridded field (1-D or 2-D, uniform spacing).

    Returns the smoothed field together with the two certified quotients:
    the scaled gradient bound and the graph-energy-density bound, both taken
    over points whose lam-ball stays inside the grid.  Constants reproduce
    exactly and the sup norm never grows (the weights are a convex
    combination).
    """
    field = np.asarray(field, dtype=float)
    if field.ndim not in (1, 2):
        raise InputError("mollifier fields are 1-D or 2-D grids")
    if lam <= 0 or spacing <= 0:
        raise InputError("lam and spacing must be positive")
    if spacing >= lam / 8.0:
        raise ResolutionError("grid spacing must resolve lam (h < lam/8)")
    tent, ball = _tent_kernel(field.ndim, lam, spacing)
    ones = np.ones_like(field)
    num = fftconvolve(field, tent, mode="same")
    den = fftconvolve(ones, tent, mode="same")
    smoothed = num / den

    grads_s = np.gradient(smoothed, spacing)
    grads_f = np.gradient(field, spacing)
    if field.ndim == 1:
        grads_s, grads_f = [grads_s], [grads_f]
    k = int(math.floor(lam / spacing))
    interior = tuple(slice(k, s - k) for s in field.shape)
    if any(sl.start >= sl.stop for sl in interior):
        raise ResolutionError("grid too small for an interior of width lam")

    sup_f = float(np.max(np.abs(field)))
    sup_grad = float(max(np.max(np.abs(g[interior])) for g in grads_s))
    ratio_grad = 0.0 if sup_f == 0.0 else sup_grad * lam / sup_f

    e_s = _graph_energy([g[interior] for g in grads_s])
    e_f = _graph_energy(grads_f)
    ball_counts = fftconvolve(ones, ball, mode="same")
    e_avg = (fftconvolve(e_f, ball, mode="same") / ball_counts)[interior]
    # FFT convolution leaves ~eps-level noise, so "zero slope" regions never
    # report exactly zero energy; quotients below the rounding floor are 0
    noise_slope = 64.0 * np.finfo(float).eps * max(1.0, sup_f) / spacing
    floor = 0.5 * noise_slope * noise_slope
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(e_s <= floor, 0.0, e_s / np.maximum(e_avg, floor))
    ratio_energy = float(np.max(quot)) if quot.size else 0.0
    return MollifyResult(smoothed, lam, spacing, ratio_grad, ratio_energy)


# --------------------------------------------------------------------------
# boundary flux of radial profiles


@dataclass
class FluxReport:
    mu_norm: float
    cap_t: float
    t: float
    lower: float                  # cap_t / t
    upper: float                  # 2 cap_t / t
    window_ok: bool

    def to_json(self):
        return self.__dict__.copy()


def flux_from_profile(m, profile, rel_tol=1e-10):
    """Total boundary flux of a radial minimal-graph profile.

    Exact via the first integral: the flux through any level circle is
    n omega_n q, so the total co-normal mass is that constant; the report
    checks the capacity window cap_t/t <= mu <= 2 cap_t/t.
    """
    nsa = m.unit_sphere_area
    mu = nsa * profile.flux_q
    t = profile.interior_drop + profile.jump_inner + profile.jump_outer
    if t <= 0:
        return FluxReport(mu, 0.0, 0.0, 0.0, 0.0, mu == 0.0)
    _, area = _drop_area(m, profile.inner_r, profile.outer_r, profile.flux_q,
                         rel_tol=rel_tol, want_area=True)
    cap = (nsa * area
           + sphere_area(m, profile.inner_r) * profile.jump_inner
           + sphere_area(m, profile.outer_r) * profile.jump_outer)
    lower, upper = cap / t, 2.0 * cap / t
    ok = lower * (1.0 - 1e-9) <= mu <= upper * (1.0 + 1e-9)
    return FluxReport(mu, cap, t, lower, upper, ok)


def slice_identity_check(m, profile, lambdas, rel_tol=1e-10):
    """lam * mu versus the graph energy below each level lam.

    The energy of the solution over the sublevel set {u < lam} equals
    lam * mu exactly; the right side is recomputed by quadrature of
    u'^2/sqrt(1+u'^2) * W without invoking the first integral, plus the
    wall contributions when the profile carries trace jumps.
    """
    nsa = m.unit_sphere_area
    q = profile.flux_q
    mu = nsa * q
    t = profile.interior_drop + profile.jump_inner + profile.jump_outer
    r_a, r_b = profile.inner_r, profile.outer_r
    out = []
    for lam in lambdas:
        if not 0 < lam <= t * (1.0 + 1e-9):
            raise InputError("levels must lie in (0, t]")
        lam = min(lam, t)
        lhs = lam * mu
        interior_target = min(max(lam - profile.jump_outer, 0.0),
                              profile.interior_drop)
        if q == 0.0 or interior_target == 0.0:
            graph_part = 0.0
        else:
            # radius where u crosses jump_outer + interior_target
            from scipy.optimize import brentq
            lo_drop = profile.interior_drop - interior_target

            def crossing(r):
                return integrate_drop(m, r_a, r, q, rel_tol=rel_tol) - lo_drop

            r_lam = r_a if lo_drop <= 0 else brentq(crossing, r_a, r_b,
                                                    xtol=1e-13, rtol=8.9e-16)

            def density(r):
                W = float(m.lateral(r))
                d2 = (W - q) * (W + q)
                if d2 <= 0:
                    return math.inf
                up2 = q * q / d2
                return up2 / math.sqrt(1.0 + up2) * W

            hints = m.warp.hint_points(r_lam, r_b)
            sing = tuple(p for p in (r_lam, r_b, *hints)
                         if float(m.lateral(p)) <= 2.0 * q)
            graph_part, _ = quadrature.integrate(density, r_lam, r_b,
                                                 rel_tol=rel_tol, hints=hints,
                                                 singular=sing)
            graph_part *= nsa
        walls = sphere_area(m, r_b) * min(lam, profile.jump_outer)
        inner_excess = lam - (t - profile.jump_inner)
        if inner_excess > 0:
            walls += sphere_area(m, r_a) * inner_excess
        out.append((lam, lhs, graph_part + walls))
    return out


# --------------------------------------------------------------------------
# asymptotic audits


@dataclass
class AsymptoticAudit:
    radii: list
    u_values: list
    phi_values: list
    ratios: list                  # u(R) * t / (cap_t * Phi(R))
    theta_star: float
    cap_t: float
    t: float
    stable: bool

    def __post_init__(self):
        if any(r <= 0 for r in self.ratios):
            raise InputError("audit ratios must be positive")
        if self.theta_star < 1.0:
            raise InputError("fitted Theta* cannot be below 1")

    def to_json(self):
        return {"radii": self.radii, "u": self.u_values,
                "phi": self.phi_values, "ratios": self.ratios,
                "theta_star": self.theta_star, "cap_t": self.cap_t,
                "t": self.t, "stable": self.stable}


def _require_nonparabolic(m, classification):
    if classification is None:
        from .classify import classify
        classification = classify(m)
    if classification.parabolicity != "nonparabolic" or \
            classification.m_parabolicity != "m_nonparabolic":
        raise PreconditionError("audit needs a nonparabolic, M-nonparabolic "
                                "manifold")
    return classification


def asymptotic_audit(m, r_a, t, R_list, classification=None):
    """Ratios u(R) t / (cap_t Phi(R)) for the full-space solution.

    Theta* = max(sup ratio, 1/inf ratio) is the fitted two-sided constant;
    ``stable`` records whether the ratio drifts less than 10% across R.
    """
    _require_nonparabolic(m, classification)
    R_list = sorted(float(R) for R in R_list)
    if not R_list or R_list[0] < max(t, 2.0 * r_a):
        raise InputError("audit radii must start at max(t, 2 r_a)")
    prof = exhaustion_flux(m, r_a, t)
    q = prof.flux_q
    _, area = _drop_area(m, r_a, math.inf, q, rel_tol=1e-10, want_area=True)
    cap_t = m.unit_sphere_area * area + sphere_area(m, r_a) * prof.jump_inner
    us, phis, ratios = [], [], []
    vol = _GrowingVolume(m, 4.0 * max(R_list))
    for R in R_list:
        u_R = t - prof.jump_inner - integrate_drop(m, r_a, R, q)
        cert = phi_integral(m, R, volume=vol)
        if cert.verdict != "convergent":
            raise PreconditionError(f"Phi({R}) did not certify convergent")
        us.append(float(u_R))
        phis.append(float(cert.value))
        ratios.append(float(u_R * t / (cap_t * cert.value)))
    theta = max(max(ratios), 1.0 / min(ratios))
    stable = (max(ratios) - min(ratios)) / max(ratios) < 0.10
    return AsymptoticAudit(R_list, us, phis, ratios, max(theta, 1.0),
                           cap_t, t, stable)


@dataclass
class SandwichReport:
    radii: list
    cap_t_values: list
    phi_values: list
    vartheta_star: float
    beta_star: float
    upper_ok: bool                # cap_t <= t^2/2 * cap everywhere
    details: list = field(default_factory=list)

    def to_json(self):
        return {"radii": self.radii, "cap_t": self.cap_t_values,
                "phi": self.phi_values, "vartheta_star": self.vartheta_star,
                "beta_star": self.beta_star, "upper_ok": self.upper_ok}


def capacity_sandwich_audit(m, r_list, t, R_outer=None, classification=None):
    """Fit vartheta* from t^2/cap_t against Phi, and beta* from the
    half-radius classical comparison; verify the quadratic upper bound."""
    _require_nonparabolic(m, classification)
    r_list = sorted(float(r) for r in r_list)
    if r_list[0] < t:
        raise InputError("sandwich audit needs r >= t")
    if R_outer is None:
        R_outer = 16.0 * r_list[-1]
    vol = _GrowingVolume(m, 4.0 * R_outer)
    caps, phis, details = [], [], []
    vth, beta, upper_ok = 1.0, 2.0, True
    for r in r_list:
        prof = exhaustion_flux(m, r, t)
        _, area = _drop_area(m, r, math.inf, prof.flux_q, rel_tol=1e-10,
                             want_area=True)
        cap_t_full = m.unit_sphere_area * area \
            + sphere_area(m, r) * prof.jump_inner
        cert = phi_integral(m, r, volume=vol)
        ratio = (t * t / cap_t_full) / cert.value
        vth = max(vth, ratio, 1.0 / ratio)
        cap_t_RR = minimal_capacity(m, r, R_outer, t).value
        cap_half = classical_capacity(m, r / 2.0, R_outer + r / 2.0).value
        cap_same = classical_capacity(m, r, R_outer).value
        beta = max(beta, t * t * cap_half / cap_t_RR)
        upper_ok &= cap_t_RR <= 0.5 * t * t * cap_same * (1.0 + 1e-6)
        caps.append(cap_t_full)
        phis.append(float(cert.value))
        details.append({"r": r, "cap_t_condenser": cap_t_RR,
                        "cap_half": cap_half, "cap_same": cap_same})
    return SandwichReport(r_list, caps, phis, vth, beta, upper_ok, details)
