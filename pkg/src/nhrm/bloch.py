"""Momentum-space Rice-Mele Hamiltonian with imbalanced hopping.

The Bloch matrix is

    h_k = [[V,            lam * gamma(-k)],
           [gamma(k)/lam, -V            ]]

with ``gamma(k) = ((1 - delta) + (1 + delta) exp(ik)) / 2``.  Its right and
left eigenvectors are written in the Bloch-sphere angles ``theta`` (real) and
``phi = arg(gamma) + i ln(lam)`` (complex), in one of two gauges:

* gauge ``"I"``: ``|phi_+> = (cos t/2, sin t/2 e^{i phi})``,
  ``|phi_-> = (-sin t/2, cos t/2 e^{i phi})``; left vectors use ``phi*``.
* gauge ``"II"``: both vectors of gauge I multiplied by ``exp(-i Re phi)``.

For the lower band gauge I is singular at the north pole (``theta = 0``,
``V > 0``) and gauge II at the south pole; the upper band is the mirror image.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GapClosed, GaugeSingular, IndefinitePhase

__all__ = [
    "ModelParams",
    "Angles",
    "BiorthPair",
    "gamma",
    "bloch_matrix",
    "dispersion",
    "field_components",
    "angles",
    "eigenpair",
    "spinor_pair",
    "pole_tolerance",
    "singular_pole",
]

GAUGES = ("I", "II")


@dataclass(frozen=True)
class ModelParams:
    """Imbalance factor ``lam``, dimerization ``delta``, staggered potential
    ``V`` and the number of unit cells ``N`` (the chain has ``2N`` sites)."""

    lam: float
    delta: float
    V: float
    N: int = 10

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValueError(f"lam must be positive and finite, got {self.lam}")
        if not -1.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [-1, 1], got {self.delta}")
        if not np.isfinite(self.V):
            raise ValueError(f"V must be finite, got {self.V}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def gap_closed(self) -> bool:
        return abs(self.delta) < 1e-12 and abs(self.V) < 1e-12

    def replace(self, **changes) -> "ModelParams":
        fields = dict(lam=self.lam, delta=self.delta, V=self.V, N=self.N)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class Angles:
    theta: float
    phi: complex


@dataclass(frozen=True)
class BiorthPair:
    band: int
    eigenvalue: float
    right: np.ndarray
    left: np.ndarray
    gauge: str


def _band(band) -> int:
    if band in (1, "+", "plus", "upper"):
        return 1
    if band in (-1, "-", "minus", "lower"):
        return -1
    raise ValueError(f"band must be +1 or -1, got {band!r}")


def _gauge(gauge) -> str:
    if gauge not in GAUGES:
        raise ValueError(f"gauge must be 'I' or 'II', got {gauge!r}")
    return gauge


def pole_tolerance(V):
    return 1e-9 * np.maximum(1.0, np.abs(V))


def gamma(k, delta):
    """``((1 - delta) + (1 + delta) e^{ik}) / 2``; accepts arrays."""
    return 0.5 * ((1.0 - delta) + (1.0 + delta) * np.exp(1j * np.asarray(k)))


def bloch_matrix(k: float, p: ModelParams) -> np.ndarray:
    g = complex(gamma(k, p.delta))
    return np.array(
        [[p.V, p.lam * g.conjugate()], [g / p.lam, -p.V]], dtype=complex
    )


def dispersion(k, p: ModelParams):
    """Return ``(eps_minus, eps_plus)``; the spectrum does not depend on lam."""
    e = np.sqrt(np.abs(gamma(k, p.delta)) ** 2 + p.V**2)
    return -e, e


def field_components(k: float, p: ModelParams):
    """Complex field ``(B_x, B_y, B_z, |B|)`` with ``h_k = B . sigma``."""
    g = complex(gamma(k, p.delta))
    fwd = p.lam * g.conjugate()  # B_x - i B_y
    bwd = g / p.lam  # B_x + i B_y
    bx = 0.5 * (fwd + bwd)
    by = 0.5j * (fwd - bwd)
    bz = float(p.V)
    b = float(np.sqrt(abs(g) ** 2 + p.V**2))
    return bx, by, bz, b


def angles(k: float, p: ModelParams) -> Angles:
    g = complex(gamma(k, p.delta))
    tol = pole_tolerance(p.V)
    if abs(g) < tol:
        if abs(p.V) < tol:
            raise GapClosed(f"bands touch at k={k}, delta={p.delta}, V={p.V}")
        raise IndefinitePhase(f"gamma_k = 0 at k={k}: azimuth undefined")
    theta = float(np.arctan2(abs(g), p.V))
    phi = complex(np.angle(g), np.log(p.lam))
    return Angles(theta, phi)


def singular_pole(band, gauge) -> int:
    """Return +1 if the gauge is singular at ``theta = 0`` (V > 0), -1 if at
    ``theta = pi``."""
    band, gauge = _band(band), _gauge(gauge)
    return band * (1 if gauge == "II" else -1)


def spinor_pair(k, delta, V, lam, band, gauge):
    """Vectorized right/left eigenvectors, shape ``broadcast(k, delta, V) + (2,)``.

    No pole checks: where ``gamma = 0`` the azimuth is taken as zero, which
    yields *some* valid eigenvector there.  Use :func:`eigenpair` for the
    checked scalar version.
    """
    band, gauge = _band(band), _gauge(gauge)
    k, delta, V = np.broadcast_arrays(
        np.asarray(k, float), np.asarray(delta, float), np.asarray(V, float)
    )
    g = gamma(k, delta)
    rho = np.abs(g)
    theta = np.arctan2(rho, V)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    a = np.where(rho < pole_tolerance(V), 0.0, np.angle(g))
    x1, x2 = (c, s) if band == 1 else (-s, c)
    shift = 1.0 if gauge == "II" else 0.0
    e1 = np.exp(-1j * shift * a)
    e2 = np.exp(1j * (1.0 - shift) * a)
    right = np.stack([x1 * e1, x2 * e2 / lam], axis=-1)
    left = np.stack([x1 * e1, x2 * e2 * lam], axis=-1)
    return right, left


def eigenpair(k: float, p: ModelParams, band, gauge="I") -> BiorthPair:
    band, gauge = _band(band), _gauge(gauge)
    g = complex(gamma(k, p.delta))
    tol = pole_tolerance(p.V)
    if abs(g) < tol:
        if abs(p.V) < tol:
            raise GapClosed(f"bands touch at k={k}, delta={p.delta}, V={p.V}")
        if np.sign(p.V) == singular_pole(band, gauge):
            raise GaugeSingular(
                f"gauge {gauge} of band {band:+d} is singular at k={k}, "
                f"delta={p.delta}, V={p.V}"
            )
    right, left = spinor_pair(k, p.delta, p.V, p.lam, band, gauge)
    eps = band * float(np.sqrt(abs(g) ** 2 + p.V**2))
    return BiorthPair(band, eps, right, left, gauge)
