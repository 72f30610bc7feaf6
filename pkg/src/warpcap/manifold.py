"""Rotationally symmetric manifolds sigma = dr^2 + w(r)^2 dtheta^2.

A manifold is an integer dimension n >= 2, a positive warp function w on the
radial axis, a flag saying whether the origin closes up smoothly, and the
radial Laplacian exponent convention ``kappa`` (n-1 for the standard warped
product; n reproduces the displayed exponents of the alternative convention).
All quantities that matter downstream are powers of the lateral area density
w^(n-1), so warps only need to be evaluable and positive.
"""

from __future__ import annotations

import ast
import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import quadrature
from .errors import DomainError, InputError, UnsupportedError

__all__ = [
    "Warp", "ExprWarp", "TableWarp", "WarpedManifold", "IntegralCertificate",
    "unit_ball_volume", "sphere_area", "ball_volume", "improper_integral",
    "paper_completeness_test", "manifold_from_json", "manifold_to_json",
]


def unit_ball_volume(n):
    """Volume of the n-dimensional unit Euclidean ball (Gamma closed form)."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


# --------------------------------------------------------------------------
# warp functions


class Warp:
    """Positive function of the radius.  Subclasses implement ``value``."""

    #: (r_lo, r_hi); evaluation outside raises DomainError
    domain = (0.0, math.inf)

    def value(self, r):
        raise NotImplementedError

    def __call__(self, r):
        lo, hi = self.domain
        if np.ndim(r) == 0:
            r = float(r)
            if not lo <= r <= hi:
                raise DomainError(f"radius {r} outside warp domain [{lo}, {hi}]")
            return float(self.value(r))
        r = np.asarray(r, dtype=float)
        if np.any(r < lo) or np.any(r > hi):
            raise DomainError(f"radius outside warp domain [{lo}, {hi}]")
        return self.value(r)

    def hint_points(self, lo, hi):
        """Radii in (lo, hi) where integrands of this warp may kink or spike."""
        return ()

    def known_necks(self, lo, hi):
        """Exact local minima [(r, w(r)), ...] when the family knows them.

        Returns None when the warp carries no analytic neck structure and the
        caller must fall back to a numeric scan.
        """
        return None

    def to_json(self):
        raise NotImplementedError(f"{type(self).__name__} is not serializable")


_EXPR_FUNCS = {
    "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos,
    "abs": np.abs, "min": np.minimum, "max": np.maximum, "pow": np.power,
}
_EXPR_FUNCS_SCALAR = {
    "exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos,
    "abs": abs, "min": min, "max": max, "pow": pow,
}
_EXPR_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
                ast.Div: np.divide, ast.Pow: np.power}


class ExprWarp(Warp):
    """Closed-form warp from a tiny expression grammar.

    Grammar: +, -, *, /, pow (also **), exp, log, sin, cos, abs, min, max,
    numeric literals and the radius variable ``r``.  Parsed through the Python
    AST with a strict whitelist; anything else is rejected.
    """

    def __init__(self, expr, domain=(0.0, math.inf), hints=()):
        self.expr = expr
        self.domain = (float(domain[0]), float(domain[1]))
        self._hints = tuple(sorted(float(h) for h in hints))
        self._validate(expr)
        self._code = compile(ast.parse(expr, mode="eval"), "<warp>", "eval")

    @staticmethod
    def _validate(expr):
        try:
            tree = ast.parse(expr, mode="eval")
        except SyntaxError as exc:
            raise InputError(f"bad warp expression: {exc}") from None
        for node in ast.walk(tree):
            if isinstance(node, (ast.Expression, ast.Load)):
                continue
            if isinstance(node, ast.BinOp) and type(node.op) in _EXPR_BINOPS:
                continue
            if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
                continue
            if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
                continue
            if isinstance(node, ast.Name) and (node.id == "r"
                                               or node.id in _EXPR_FUNCS):
                continue
            if isinstance(node, ast.Call):
                if (isinstance(node.func, ast.Name) and node.func.id in _EXPR_FUNCS
                        and not node.keywords):
                    continue
                raise InputError(f"function not in warp grammar: {ast.dump(node)}")
            if isinstance(node, (ast.operator, ast.unaryop)):
                continue
            raise InputError(f"token not in warp grammar: {type(node).__name__}")

    def value(self, r):
        if np.ndim(r) == 0:
            env = {"__builtins__": {}, "r": float(r)}
            env.update(_EXPR_FUNCS_SCALAR)
            try:
                return eval(self._code, env)  # noqa: S307 - AST whitelisted
            except OverflowError:
                # math.* raises where numpy saturates to inf; retry saturating
                env.update(_EXPR_FUNCS)
                with np.errstate(over="ignore"):
                    return float(eval(self._code, env))  # noqa: S307
        env = {"__builtins__": {}, "r": r}
        env.update(_EXPR_FUNCS)
        with np.errstate(over="ignore"):
            return eval(self._code, env)  # noqa: S307 - AST whitelisted

    def hint_points(self, lo, hi):
        return tuple(h for h in self._hints if lo < h < hi)

    def to_json(self):
        out = {"kind": "expr", "expr": self.expr}
        if self.domain != (0.0, math.inf):
            out["domain"] = list(self.domain)
        if self._hints:
            out["hints"] = list(self._hints)
        return out


class TableWarp(Warp):
    """Tabulated warp with declared interpolation; extrapolation is refused.

    Capacity integrands carry powers of 1/w, so values invented beyond the
    samples would be untrustworthy.  Interpolation is piecewise-linear or
    monotone cubic (PCHIP, which cannot overshoot and so keeps positivity).
    """

    def __init__(self, radii, values, interpolation="pchip"):
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape or radii.size < 2:
            raise InputError("table warp needs matching 1-D radii/values arrays")
        if np.any(np.diff(radii) <= 0):
            raise InputError("table radii must be strictly increasing")
        if np.any(values <= 0):
            raise InputError("table warp values must be strictly positive")
        if interpolation not in ("linear", "pchip"):
            raise InputError(f"unknown interpolation {interpolation!r}")
        self.radii = radii
        self.values = values
        self.interpolation = interpolation
        self.domain = (float(radii[0]), float(radii[-1]))
        self._pchip = (PchipInterpolator(radii, values, extrapolate=False)
                       if interpolation == "pchip" else None)
        self._knots = radii.tolist()     # bisect fast path for scalar queries
        self._knot_vals = values.tolist()

    def value(self, r):
        if self.interpolation != "linear":
            return self._pchip(r)
        if np.ndim(r) == 0:
            i = bisect.bisect_right(self._knots, float(r))
            if i <= 0:
                return self._knot_vals[0]
            if i >= len(self._knots):
                return self._knot_vals[-1]
            r0, r1 = self._knots[i - 1], self._knots[i]
            v0, v1 = self._knot_vals[i - 1], self._knot_vals[i]
            return v0 + (v1 - v0) * (float(r) - r0) / (r1 - r0)
        return np.interp(r, self.radii, self.values)

    def hint_points(self, lo, hi):
        inside = (self.radii > lo) & (self.radii < hi)
        return tuple(self.radii[inside])

    def known_necks(self, lo, hi):
        if self.interpolation != "linear":
            return None
        # piecewise-linear minima sit on knots
        necks = []
        r, v = self.radii, self.values
        for i in range(1, len(r) - 1):
            if lo <= r[i] <= hi and v[i] <= v[i - 1] and v[i] <= v[i + 1]:
                necks.append((float(r[i]), float(v[i])))
        return necks

    def to_json(self):
        return {"kind": "table", "r": self.radii.tolist(),
                "w": self.values.tolist(), "interpolation": self.interpolation}


# --------------------------------------------------------------------------
# the manifold value and its integral services


@dataclass(frozen=True)
class WarpedManifold:
    n: int
    warp: Warp
    origin: str = "pole"          # "pole": w(0)=0 smooth closure; else "open"
    kappa: int | None = None      # radial Laplacian exponent; default n-1

    def __post_init__(self):
        if self.n < 2:
            raise InputError("dimension must be >= 2")
        if self.origin not in ("pole", "open"):
            raise InputError("origin must be 'pole' or 'open'")
        if self.kappa is None:
            object.__setattr__(self, "kappa", self.n - 1)
        if self.kappa not in (self.n - 1, self.n):
            raise InputError("kappa must be n-1 or n")

    @property
    def omega_n(self):
        return unit_ball_volume(self.n)

    @property
    def unit_sphere_area(self):
        return self.n * self.omega_n

    def w(self, r):
        return self.warp(r)

    def lateral(self, r):
        """Lateral area density w(r)^(n-1); sphere area up to n*omega_n."""
        return self.warp(r) ** (self.n - 1)


class IntegralCertificate:
    """Verdict + numeric evidence for an improper warp-power integral."""

    def __init__(self, verdict, value, tail_bound, r_cut, witness=()):
        self.verdict = verdict
        self.value = value
        self.tail_bound = tail_bound
        self.r_cut = r_cut
        self.witness = list(witness)

    def __repr__(self):
        return (f"IntegralCertificate({self.verdict}, value={self.value:.6g}, "
                f"tail<{self.tail_bound:.2g} @ r={self.r_cut:.6g})")

    def to_json(self):
        return {"verdict": self.verdict, "value": _finite_or_str(self.value),
                "tail_bound": _finite_or_str(self.tail_bound),
                "r_cut": self.r_cut,
                "witness": [[r, _finite_or_str(p)] for r, p in self.witness]}


def _finite_or_str(x):
    return x if np.isfinite(x) else ("inf" if x > 0 else "-inf")


def sphere_area(m, r):
    """Area of the distance sphere: n * omega_n * w(r)^(n-1)."""
    if np.any(np.asarray(r) < 0):
        raise DomainError("radius must be nonnegative")
    return m.unit_sphere_area * m.lateral(r)


def ball_volume(m, r, rel_tol=1e-10):
    """Volume of the distance ball around the pole, by adaptive quadrature."""
    if m.origin != "pole":
        raise UnsupportedError("ball volume needs a smooth pole at the origin")
    if r < 0:
        raise DomainError("radius must be nonnegative")
    if r == 0:
        return 0.0
    hints = m.warp.hint_points(0.0, r)
    val, _ = quadrature.integrate(lambda s: sphere_area(m, s), 0.0, r,
                                  rel_tol=rel_tol, hints=hints,
                                  singular=hints)
    return val


def _power_segment(m, p, rel_tol):
    def segment(lo, hi):
        hints = m.warp.hint_points(lo, hi)
        sing = hints if p < 0 else ()
        val, _ = quadrature.integrate(lambda s: m.w(s) ** p, lo, hi,
                                      rel_tol=rel_tol, hints=hints, singular=sing)
        return val
    return segment


def improper_integral(m, p, r0, *, tol=1e-6, rel_tol=1e-9, r_max=None):
    """Certificate for the improper integral of w^p over [r0, infinity).

    Negative powers get singular treatment at the warp's hint radii (necks).
    The verdict follows the doubling protocol in :mod:`warpcap.quadrature`;
    an exhausted radius budget yields ``undetermined``, not an error.
    """
    if r0 <= 0:
        raise DomainError("r0 must be positive")
    if r_max is None:
        r_max = min(m.warp.domain[1], 1e9)
    res = quadrature.improper(_power_segment(m, p, rel_tol), r0,
                              r_max=r_max, tol=tol)
    value = res.value if res.verdict == "convergent" else (
        math.inf if res.verdict == "divergent" else res.value)
    return IntegralCertificate(res.verdict, value, res.tail_bound, res.r_cut,
                               res.witness)


def paper_completeness_test(m, r0=1.0, **kw):
    """Divergence certificate for the completeness criterion integral of w."""
    return improper_integral(m, 1.0, r0, **kw)


# --------------------------------------------------------------------------
# cumulative volume helper (repeated ball volumes without nested quadrature)


class VolumeTable:
    """Interpolant of r -> ball volume, built once per manifold.

    Increments are exact quadrature between knots, so the nodal values carry
    the quadrature tolerance; a cubic spline keeps the interpolation error at
    fourth order in the knot spacing.
    """

    def __init__(self, m, r_hi, n_knots=512):
        if m.origin != "pole":
            raise UnsupportedError("volume table needs a smooth pole")
        knots = np.concatenate([[0.0], np.geomspace(min(1e-3, r_hi / 64.0),
                                                    r_hi, n_knots)])
        incs = [0.0]
        for lo, hi in zip(knots, knots[1:]):
            hints = m.warp.hint_points(lo, hi)
            v, _ = quadrature.integrate(lambda s: sphere_area(m, s), lo, hi,
                                        rel_tol=1e-11, hints=hints,
                                        singular=hints)
            incs.append(v)
        self.r_hi = r_hi
        from scipy.interpolate import CubicSpline
        self._interp = CubicSpline(knots, np.cumsum(incs))

    def __call__(self, r):
        if np.any(np.asarray(r) > self.r_hi):
            raise DomainError("volume table queried beyond its range")
        return self._interp(r)


# --------------------------------------------------------------------------
# JSON interchange: {n, warp: {kind: expr|table|builtin, ...}, kappa, origin}


def warp_from_json(doc):
    kind = doc.get("kind")
    if kind == "expr":
        return ExprWarp(doc["expr"], domain=tuple(doc.get("domain", (0.0, math.inf))),
                        hints=doc.get("hints", ()))
    if kind == "table":
        return TableWarp(doc["r"], doc["w"], doc.get("interpolation", "pchip"))
    if kind == "builtin":
        from . import examples   # deferred: examples imports this module
        return examples.builtin_warp(doc["name"], doc.get("params", {}))
    raise InputError(f"unknown warp kind {kind!r}")


def manifold_from_json(doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        return WarpedManifold(n=int(doc["n"]), warp=warp_from_json(doc["warp"]),
                              origin=doc.get("origin", "pole"),
                              kappa=doc.get("kappa"))
    except KeyError as exc:
        raise InputError(f"manifold spec missing field {exc}") from None


def manifold_to_json(m):
    return {"n": m.n, "warp": m.warp.to_json(), "kappa": m.kappa,
            "origin": m.origin}
