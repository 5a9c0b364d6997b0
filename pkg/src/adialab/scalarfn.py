"""Scalar functions of time used as model coefficients.

Coefficients (drive amplitudes, couplings, well offsets) enter models as
smooth maps t -> R together with their first derivative.  Three declarable
presets are supported -- ``constant``, ``sinusoid`` (c0 + c1*sin(c2*t)) and
``tabulated`` (cubic interpolation through (t, value) pairs) -- plus a thin
wrapper around arbitrary Python callables for library use.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigInvalid

_FD_STEP = 1e-6


@dataclass(frozen=True)
class ScalarFn:
    """A scalar coefficient with a derivative.

    Parameters
    ----------
    value : callable
        Map t -> float.
    deriv : callable, optional
        Map t -> float for the first derivative.  When omitted the
        derivative falls back to a central difference with step 1e-6.
    label : str
        Human-readable description used in run manifests.
    """

    value: object
    deriv: object = None
    label: str = "callable"

    def __call__(self, t):
        return self.value(t)

    def d(self, t):
        if self.deriv is not None:
            return self.deriv(t)
        h = _FD_STEP * max(1.0, abs(t))
        return (self.value(t + h) - self.value(t - h)) / (2.0 * h)


def constant(c0: float) -> ScalarFn:
    c0 = float(c0)
    return ScalarFn(lambda t: c0, lambda t: 0.0, f"constant({c0})")


def sinusoid(c0: float, c1: float, c2: float) -> ScalarFn:
    """c0 + c1*sin(c2*t) with its exact derivative."""
    c0, c1, c2 = float(c0), float(c1), float(c2)
    return ScalarFn(
        lambda t: c0 + c1 * np.sin(c2 * t),
        lambda t: c1 * c2 * np.cos(c2 * t),
        f"sinusoid({c0},{c1},{c2})",
    )


def linear(c0: float, c1: float) -> ScalarFn:
    c0, c1 = float(c0), float(c1)
    return ScalarFn(lambda t: c0 + c1 * t, lambda t: c1, f"linear({c0},{c1})")


def tabulated(points) -> ScalarFn:
    """Cubic interpolation through (t, value) pairs.

    Knots must be strictly increasing; the spline and its derivative are
    evaluated outside the knot range by cubic extrapolation.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ConfigInvalid("tabulated needs at least two (t, value) pairs")
    t, v = pts[:, 0], pts[:, 1]
    if np.any(np.diff(t) <= 0):
        raise ConfigInvalid("tabulated knots must be strictly increasing")
    sp = CubicSpline(t, v)
    dsp = sp.derivative()
    return ScalarFn(lambda s: float(sp(s)), lambda s: float(dsp(s)), f"tabulated({len(t)} pts)")


def as_scalar_fn(obj, name: str = "coefficient") -> ScalarFn:
    """Coerce config values / numbers / callables to a :class:`ScalarFn`.

    Accepted forms: a ScalarFn (returned as is), a plain number (constant),
    a callable (finite-difference derivative), or a mapping with a ``kind``
    key naming one of the presets.
    """
    if isinstance(obj, ScalarFn):
        return obj
    if isinstance(obj, numbers.Real):
        return constant(obj)
    if callable(obj):
        return ScalarFn(obj, None, f"{name}:callable")
    if isinstance(obj, dict):
        kind = obj.get("kind")
        if kind == "constant":
            return constant(obj["c0"])
        if kind == "sinusoid":
            return sinusoid(obj.get("c0", 0.0), obj.get("c1", 0.0), obj.get("c2", 1.0))
        if kind == "linear":
            return linear(obj.get("c0", 0.0), obj.get("c1", 0.0))
        if kind == "tabulated":
            return tabulated(obj["points"])
        raise ConfigInvalid(f"unknown scalar-function kind {kind!r} for {name}")
    raise ConfigInvalid(f"cannot interpret {obj!r} as a scalar function for {name}")
