"""Amplitude functions.

An amplitude is an even, rapidly decaying function ``a`` on the real line
with ``a(0) = 1``.  Its square, evaluated at ``|xi|``, is (up to the factor
``(2 pi)^-m``) the spectral density of an isotropic Gaussian field on R^m.

Only three families are supported, each with closed-form radial moments::

    gaussian          a(t) = exp(-t^2 / 4)
    gaussian-scaled   a(t) = exp(-t^2 / (4 R^2))          params: (R,)
    poly-gaussian     a(t) = (1 + c t^2) exp(-t^2 / 4)     params: (c,), c >= 0
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("gaussian", "gaussian-scaled", "poly-gaussian")

_NPARAMS = {"gaussian": 0, "gaussian-scaled": 1, "poly-gaussian": 1}

# a(r)^2 r^(m+7) must fall below this at the quadrature cutoff
CUTOFF_LEVEL = 1e-16


def gaussian_radial_moment(k: float) -> float:
    """Return ``int_0^inf r^k exp(-r^2/2) dr = 2^((k-1)/2) Gamma((k+1)/2)``."""
    return 2.0 ** ((k - 1) / 2) * math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class Amplitude:
    family: str = "gaussian"
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown amplitude family {self.family!r}; expected one of {FAMILIES}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _NPARAMS[self.family]:
            raise ValueError(
                f"{self.family} takes {_NPARAMS[self.family]} parameter(s), got {len(params)}")
        if not all(math.isfinite(p) for p in params):
            raise ValueError("amplitude parameters must be finite")
        if self.family == "gaussian-scaled" and params[0] <= 0:
            raise ValueError("gaussian-scaled needs a positive scale R")
        if self.family == "poly-gaussian" and params[0] < 0:
            raise ValueError("poly-gaussian needs c >= 0")
        object.__setattr__(self, "params", params)

    @classmethod
    def parse(cls, text: str) -> "Amplitude":
        """Parse ``NAME`` or ``NAME:P1,P2`` (the CLI syntax)."""
        name, _, rest = text.strip().partition(":")
        params = tuple(float(p) for p in rest.split(",") if p.strip()) if rest else ()
        return cls(name.strip(), params)

    def __str__(self):
        if not self.params:
            return self.family
        # repr round-trips; drop a trailing ".0" so "gaussian-scaled:2" prints as typed
        return self.family + ":" + ",".join(repr(p).removesuffix(".0") for p in self.params)

    @property
    def length_scale(self) -> float:
        """Frequency scale of the amplitude (1 except for gaussian-scaled)."""
        return 1.0 / self.params[0] if self.family == "gaussian-scaled" else 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "gaussian":
            out = np.exp(-t * t / 4)
        elif self.family == "gaussian-scaled":
            R = self.params[0]
            out = np.exp(-t * t / (4 * R * R))
        else:
            c = self.params[0]
            out = (1 + c * t * t) * np.exp(-t * t / 4)
        return out if out.ndim else float(out)

    def squared(self, t):
        return self(t) ** 2

    def closed_radial_moment(self, k: int) -> float | None:
        """Closed form of ``int_0^inf r^k a(r)^2 dr``, or None if unavailable."""
        if self.family == "gaussian":
            return gaussian_radial_moment(k)
        if self.family == "gaussian-scaled":
            R = self.params[0]
            return R ** (k + 1) * gaussian_radial_moment(k)
        if self.family == "poly-gaussian":
            c = self.params[0]
            g = gaussian_radial_moment
            return g(k) + 2 * c * g(k + 2) + c * c * g(k + 4)
        return None

    def cutoff(self, m: int) -> float:
        """Radius beyond which ``a(r)^2 r^(m+7)`` stays below ``CUTOFF_LEVEL``."""
        scale = 1.0 / self.length_scale
        # the weight r^(m+7) a(r)^2 is unimodal for every family here; start past its peak
        r = scale * math.sqrt(m + 11.0)
        while self.squared(r) * r ** (m + 7) >= CUTOFF_LEVEL:
            r += 0.25 * scale
        return r
