"""Canned constructors for every manifold the test corpus names.

Each id maps deterministically to a WarpedManifold, so reproduction commands
are one-liners.  Builtins that the generic expression grammar cannot evaluate
reliably (oscillating warp with extremely deep necks, the staircase) are
dedicated Warp subclasses carrying their neck families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import InputError
from .manifold import ExprWarp, TableWarp, Warp, WarpedManifold

__all__ = ["ExampleSpec", "build", "builtin_warp", "example_ids",
           "OscNeckWarp", "staircase_warp", "staircase_steps",
           "NeckCylinderWarp"]


class OscNeckWarp(Warp):
    """w(r) = r (1+r) (sin^2 r + (1+r^2)^(-4(n+1)))^(1/(4n)).

    Smooth, w(0)=0, w'(0)=1, with necks at the multiples of pi whose depth
    w(k pi) = k pi (1+k pi) (1+k^2 pi^2)^(-(n+1)/n) tends to zero.  The float
    formula is accurate at every representable radius (libm reduces the sine
    argument correctly), but no float can represent the neck radius itself:
    the regularizing term that sets the true depth sits astronomically below
    the sin^2 of the nearest representable point.  A radius within a few ulps
    of k pi is therefore read as meaning the exact neck and evaluated with
    mpmath at a working precision sized to the regularizer.
    """

    _SNAP_ULPS = 4.0

    def __init__(self, n):
        if n < 2:
            raise InputError("dimension must be >= 2")
        self.n = int(n)

    def _neck_exact(self, k):
        n = self.n
        digits = 40 + int(4 * (n + 1) * math.log10(1.0 + (k * math.pi) ** 2))
        with mpmath.workdps(digits):
            kpi = k * mpmath.pi
            core = (1 + kpi * kpi) ** (-4 * (n + 1))
            return float(kpi * (1 + kpi) * core ** (mpmath.mpf(1) / (4 * n)))

    def value(self, r):
        n = self.n
        if np.ndim(r) == 0:
            r = float(r)
            k = round(r / math.pi)
            if k >= 1 and abs(r - k * math.pi) <= self._SNAP_ULPS * np.spacing(r):
                return self._neck_exact(k)
            s = math.sin(r)
            return r * (1.0 + r) * (s * s + (1.0 + r * r)
                                    ** (-4.0 * (n + 1))) ** (1.0 / (4 * n))
        r = np.asarray(r, dtype=float)
        out = r * (1.0 + r) * (np.sin(r) ** 2
                               + (1.0 + r * r) ** (-4.0 * (n + 1))) ** (1.0 / (4 * n))
        ks = np.round(r / math.pi)
        near = (np.abs(r - ks * math.pi) <= self._SNAP_ULPS * np.spacing(r)) \
            & (ks >= 1)
        for idx in np.flatnonzero(near):
            out[idx] = self._neck_exact(int(ks[idx]))
        return out

    def neck_value(self, k):
        """w at the exact neck radius k*pi (extended precision)."""
        return self._neck_exact(int(k))

    def hint_points(self, lo, hi):
        if not math.isfinite(hi):
            raise InputError("this warp has unboundedly many necks; "
                             "use a finite window")
        k0 = max(1, math.ceil(lo / math.pi - 1e-9))
        k1 = math.floor(hi / math.pi + 1e-9)
        return tuple(k * math.pi for k in range(k0, k1 + 1))

    def known_necks(self, lo, hi, max_count=64):
        """Necks in [lo, hi]; wide windows are subsampled geometrically.

        The neck depth decreases in k, so keeping the last index preserves
        the infimum over any window.
        """
        if not math.isfinite(hi):
            raise InputError("this warp has unboundedly many necks; "
                             "use a finite window")
        k0 = max(1, math.ceil(lo / math.pi - 1e-9))
        k1 = math.floor(hi / math.pi + 1e-9)
        if k1 < k0:
            return []
        count = k1 - k0 + 1
        if count <= max_count:
            ks = range(k0, k1 + 1)
        else:
            ks = sorted({k0, k1,
                         *(int(round(k0 * (k1 / k0) ** (i / (max_count - 1))))
                           for i in range(max_count))})
        return [(k * math.pi, self.neck_value(k)) for k in ks]

    def to_json(self):
        return {"kind": "builtin", "name": "prop2_6", "params": {"n": self.n}}


# --------------------------------------------------------------------------
# staircase warp: low plateaus 1 + 2^-j straddling 2^j, huge plateaus 2^(j^2)
# between them, joined by linear ramps of width 2^(-j-3) eaten out of the huge
# plateaus so the low-plateau extents stay exact.

_VALUE_CAP = 1e300     # keep 2**(j*j) finite in float arithmetic


def staircase_steps(j_max):
    """[(lo, hi, value), ...] of the unmollified step function on [s_1, r_jmax]."""
    steps = []
    for j in range(1, j_max + 1):
        s_j = 2.0 ** j - 2.0 ** (-j)
        r_j = 2.0 ** j + 2.0 ** (-j)
        steps.append((s_j, r_j, 1.0 + 2.0 ** (-j)))
        if j < j_max:
            s_next = 2.0 ** (j + 1) - 2.0 ** (-j - 1)
            steps.append((r_j, s_next, min(2.0 ** (j * j), _VALUE_CAP)))
    return steps


def staircase_knots(j_max):
    """Breakpoints of the ramp-mollified staircase, linear below s_1 = 1.5."""
    radii = [1.5]
    values = [1.5]
    for idx, (lo, hi, val) in enumerate(staircase_steps(j_max)):
        if idx % 2 == 0:           # low plateau: keep its exact extent
            if radii[-1] < lo:
                radii.append(lo)
                values.append(val)
            else:
                values[-1] = val
            radii.append(hi)
            values.append(val)
        else:                      # huge plateau: recess both ramps into it
            j = (idx + 1) // 2     # ramp widths 2^(-j-3) and 2^(-j-4)
            radii.extend([lo + 2.0 ** (-j - 3), hi - 2.0 ** (-j - 4)])
            values.extend([val, val])
    # ramps narrower than float spacing at huge radii collapse; keep the
    # breakpoints strictly increasing (the affected integrands are ~2^-j^2)
    out = [radii[0]]
    for r in radii[1:]:
        out.append(r if r > out[-1] else np.nextafter(out[-1], math.inf))
    return np.array(out), np.array(values)


def staircase_warp(n=2, j_max=26):
    """Ramp-mollified staircase as a piecewise-linear table warp, w^(n-1)=steps."""
    radii, fvals = staircase_knots(j_max)
    radii = np.concatenate([[1e-9], radii])
    fvals = np.concatenate([[1e-9], fvals])
    return TableWarp(radii, fvals ** (1.0 / (n - 1)), interpolation="linear")


class NeckCylinderWarp(Warp):
    """Unit cylinder with smooth necks of geometrically shrinking depth.

    w dips to depth(k) at radius k*spacing through Gaussian notches; the bulk
    stays at 1, so the manifold is parabolic while the necks certify cheap
    cutoffs.
    """

    def __init__(self, spacing=3.0, width=0.3, count=12, depth_base=0.5):
        if not (0 < depth_base < 1 and width < spacing / 4):
            raise InputError("need 0 < depth_base < 1 and width << spacing")
        self.spacing = float(spacing)
        self.width = float(width)
        self.count = int(count)
        self.depth_base = float(depth_base)

    def _depth(self, k):
        return self.depth_base ** k

    def value(self, r):
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        for k in range(1, self.count + 1):
            c = k * self.spacing
            out = out - (1.0 - self._depth(k)) * np.exp(-((r - c) / self.width) ** 2)
        return np.maximum(out, 1e-12)

    def hint_points(self, lo, hi):
        return tuple(k * self.spacing for k in range(1, self.count + 1)
                     if lo < k * self.spacing < hi)

    def known_necks(self, lo, hi):
        return [(c, float(self.value(c))) for c in self.hint_points(lo, hi)]

    def to_json(self):
        return {"kind": "builtin", "name": "neck_cylinder",
                "params": {"spacing": self.spacing, "width": self.width,
                           "count": self.count, "depth_base": self.depth_base}}


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class ExampleSpec:
    id: str
    params: dict = field(default_factory=dict)

    def to_json(self):
        return {"id": self.id, "params": dict(self.params)}

    @staticmethod
    def from_json(doc):
        return ExampleSpec(doc["id"], dict(doc.get("params", {})))


def _flat(n):
    return WarpedManifold(n=n, warp=ExprWarp("r"), origin="pole")


def _builders():
    return {
        "flat": lambda n=2: _flat(int(n)),
        "cylinder": lambda n=2: WarpedManifold(n=int(n), warp=ExprWarp("1 + 0*r"),
                                               origin="open"),
        "hyperbolic_like": lambda n=2: WarpedManifold(
            n=int(n), warp=ExprWarp("(exp(r) - exp(-r)) / 2"), origin="pole"),
        "power": lambda alpha=1.0, n=2: WarpedManifold(
            n=int(n), warp=ExprWarp(f"pow(r, {float(alpha)!r})"), origin="pole"),
        # source conventions: prop2_6 ships the alternative exponent kappa=n,
        # the radial-ODE families ship the standard kappa=n-1
        "prop2_6": lambda n=2: WarpedManifold(n=int(n), warp=OscNeckWarp(int(n)),
                                              origin="pole", kappa=int(n)),
        "exp_warp": lambda lam=1.0, n=2: WarpedManifold(
            n=int(n), warp=ExprWarp(f"exp(-{float(lam) / (int(n) - 1)!r} * r)"),
            origin="open"),
        "staircase": lambda n=2, j_max=26: WarpedManifold(
            n=int(n), warp=staircase_warp(int(n), int(j_max)), origin="pole"),
        "neck_cylinder": lambda **kw: WarpedManifold(n=2, warp=NeckCylinderWarp(**kw),
                                                     origin="open"),
    }


def example_ids():
    return sorted(_builders())


def build(spec):
    """Construct the manifold named by an ExampleSpec (or id string).

    String sugar: a trailing integer selects the dimension, so "flat3" is
    ExampleSpec("flat", {"n": 3}).
    """
    if isinstance(spec, str):
        spec = _parse_id(spec)
    builders = _builders()
    if spec.id not in builders:
        raise InputError(f"unknown example id {spec.id!r}; "
                         f"known: {', '.join(example_ids())}")
    try:
        return builders[spec.id](**spec.params)
    except TypeError as exc:
        raise InputError(f"bad parameters for {spec.id!r}: {exc}") from None


def _parse_id(text):
    builders = _builders()
    if text in builders:
        return ExampleSpec(text)
    for name in builders:
        if text.startswith(name) and text[len(name):].isdigit():
            return ExampleSpec(name, {"n": int(text[len(name):])})
    return ExampleSpec(text)


def builtin_warp(name, params):
    """Warp factory for manifold JSON documents of kind 'builtin'."""
    if name == "prop2_6":
        return OscNeckWarp(int(params.get("n", 2)))
    if name == "staircase":
        return staircase_warp(int(params.get("n", 2)), int(params.get("j_max", 26)))
    if name == "neck_cylinder":
        return NeckCylinderWarp(**params)
    raise InputError(f"unknown builtin warp {name!r}")


def random_smooth_manifold(rng, n=2):
    """Deterministic (seeded) smooth pole warp for randomized property sweeps.

    w(r) = r * exp(a sin(b log(1+r) + p) + c cos(d log(1+r))) with small
    amplitudes, so w stays comparable to r and every condenser gap used by
    the sweeps is attainable.
    """
    a, c = (float(x) for x in rng.uniform(-0.18, 0.18, 2))
    b, d = (float(x) for x in rng.uniform(0.4, 2.5, 2))
    p = float(rng.uniform(0.0, 2.0 * math.pi))
    expr = (f"r * exp({a!r} * sin({b!r} * log(1 + r) + {p!r}) "
            f"+ {c!r} * cos({d!r} * log(1 + r)))")
    return WarpedManifold(n=n, warp=ExprWarp(expr), origin="pole")
