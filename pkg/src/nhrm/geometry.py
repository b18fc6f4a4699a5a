"""Biorthonormal Berry connection, curvature, Chern number and Zak phase.

A parameter loop ``q -> (delta(q), V(q))``, ``q in [0, 2pi)``, together with
the crystal momentum ``k`` spans a torus.  All quantities use the pairing
``<eta|phi>`` between left and right eigenvectors and the sign convention

    A_sigma = -i <eta| d_sigma |phi>,    Omega_kq = d_k A_q - d_q A_k,
    c = (1/2pi) int Omega_kq dk dq.

Two independent Chern routes are provided: the gauge-seam line integral
(:func:`chern_line_integral`) and the lattice plaquette sum
(:func:`chern_plaquette`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .bloch import (
    ModelParams,
    _band,
    _gauge,
    gamma,
    pole_tolerance,
    singular_pole,
    spinor_pair,
)
from .errors import GapClosed, GaugeSingular, GridTooCoarse, LoopThroughDegeneracy

__all__ = [
    "PumpLoop",
    "CircleLoop",
    "PolylineLoop",
    "berry_connection",
    "berry_curvature",
    "seam_contributions",
    "chern_line_integral",
    "chern_plaquette",
    "zak_phase",
    "adiabatic_current",
    "bulk_pump_charge",
]

TWO_PI = 2.0 * math.pi
DEGENERACY_TOL = 1e-6


class PumpLoop:
    """Closed path in the (delta, V) plane parametrized by ``q in [0, 2pi)``."""

    def point(self, q):
        raise NotImplementedError

    def tangent(self, q):
        raise NotImplementedError

    def reversed(self) -> "PumpLoop":
        raise NotImplementedError

    def min_distance_to_origin(self) -> float:
        raise NotImplementedError

    def check_gap(self, tol=DEGENERACY_TOL):
        d = self.min_distance_to_origin()
        if d < tol:
            raise LoopThroughDegeneracy(d, tol)


@dataclass(frozen=True)
class CircleLoop(PumpLoop):
    """``delta = dc + r cos(o q)``, ``V = Vc + r sin(o q)`` with orientation o."""

    center: tuple = (0.0, 0.0)
    radius: float = 0.5
    orientation: int = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    def point(self, q):
        u = self.orientation * np.asarray(q, float)
        dc, vc = self.center
        return dc + self.radius * np.cos(u), vc + self.radius * np.sin(u)

    def tangent(self, q):
        u = self.orientation * np.asarray(q, float)
        o, r = self.orientation, self.radius
        return -o * r * np.sin(u), o * r * np.cos(u)

    def reversed(self):
        return CircleLoop(self.center, self.radius, -self.orientation)

    def min_distance_to_origin(self):
        return abs(math.hypot(*self.center) - self.radius)


@dataclass(frozen=True)
class PolylineLoop(PumpLoop):
    """Closed polygon through ``vertices`` (the last edge returns to the
    first vertex), traversed at uniform speed in arc length."""

    vertices: tuple

    def __post_init__(self):
        verts = tuple((float(d), float(v)) for d, v in self.vertices)
        if len(verts) < 3:
            raise ValueError("a closed polyline needs at least 3 vertices")
        object.__setattr__(self, "vertices", verts)
        if self.perimeter <= 0:
            raise ValueError("polyline has zero length")

    @property
    def _edges(self):
        p = np.array(self.vertices)
        return p, np.roll(p, -1, axis=0) - p

    @property
    def perimeter(self):
        _, e = self._edges
        return float(np.hypot(e[:, 0], e[:, 1]).sum())

    def _locate(self, q):
        p, e = self._edges
        lengths = np.hypot(e[:, 0], e[:, 1])
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        s = np.mod(np.asarray(q, float), TWO_PI) / TWO_PI * cum[-1]
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lengths) - 1)
        frac = (s - cum[idx]) / lengths[idx]
        return p, e, idx, frac, cum[-1]

    def point(self, q):
        p, e, idx, frac, _ = self._locate(q)
        return p[idx, 0] + frac * e[idx, 0], p[idx, 1] + frac * e[idx, 1]

    def tangent(self, q):
        _, e, idx, _, total = self._locate(q)
        scale = total / TWO_PI
        lengths = np.hypot(e[idx, 0], e[idx, 1])
        return e[idx, 0] / lengths * scale, e[idx, 1] / lengths * scale

    def reversed(self):
        return PolylineLoop(tuple(reversed(self.vertices)))

    def min_distance_to_origin(self):
        p, e = self._edges
        t = np.clip(-(p * e).sum(axis=1) / (e * e).sum(axis=1), 0.0, 1.0)
        closest = p + t[:, None] * e
        return float(np.hypot(closest[:, 0], closest[:, 1]).min())

    @classmethod
    def rectangle(cls, delta_range, V_range, orientation=1):
        (d0, d1), (v0, v1) = delta_range, V_range
        verts = ((d0, v0), (d1, v0), (d1, v1), (d0, v1))
        return cls(verts if orientation == 1 else tuple(reversed(verts)))


# -- analytic derivatives ----------------------------------------------------


def _dgamma(k, delta, ddelta, direction):
    e = np.exp(1j * k)
    if direction == "k":
        return 0.5j * (1.0 + delta) * e
    if direction == "q":
        return 0.5 * (e - 1.0) * ddelta
    raise ValueError(f"direction must be 'k' or 'q', got {direction!r}")


def _weights(gauge):
    """Phase multipliers ``m`` of the two spinor components: the components
    carry ``exp(i m Re(phi))``."""
    return (-1.0, 0.0) if gauge == "II" else (0.0, 1.0)


def _connection(k, delta, V, ddelta, dV, lam, band, gauge, direction):
    # <eta|d phi> = i d(phi) * sum_i m_i x_i^2; the d(theta) terms cancel
    # because sum_i x_i^2 = 1.  Since lam is constant on the loop,
    # d(phi) = d(arg gamma) = Im(conj(g) dg) / |g|^2.
    g = gamma(k, delta)
    dg = _dgamma(k, delta, ddelta, direction)
    b = np.sqrt(np.abs(g) ** 2 + V**2)
    im = np.imag(np.conj(g) * dg)
    # x^2 weights written so each is finite at its regular pole:
    # cos^2(t/2) d(phi) = im / (2B(B - V)),  sin^2(t/2) d(phi) = im / (2B(B + V))
    with np.errstate(divide="ignore", invalid="ignore"):
        cos2_dphi = im / (2.0 * b * (b - V))
        sin2_dphi = im / (2.0 * b * (b + V))
    x1sq, x2sq = (cos2_dphi, sin2_dphi) if band == 1 else (sin2_dphi, cos2_dphi)
    m1, m2 = _weights(gauge)
    return np.asarray(m1 * x1sq + m2 * x2sq, dtype=complex)


def _check_point(k, delta, V, band, gauge):
    g = complex(gamma(k, delta))
    tol = pole_tolerance(V)
    if abs(g) < tol:
        if abs(V) < tol:
            raise GapClosed(f"bands touch at k={k}, delta={delta}, V={V}")
        if gauge is not None and np.sign(V) == singular_pole(band, gauge):
            raise GaugeSingular(
                f"gauge {gauge} of band {band:+d} is singular at k={k}, "
                f"delta={delta}, V={V}"
            )
        return True
    return False


def berry_connection(k, q, loop, p0: ModelParams, band=-1, gauge="I", direction="k"):
    """``A_sigma = -i <eta|d_sigma|phi>`` at ``(k, q)`` in the requested gauge.

    Closed form: in gauge I the lower band gives
    ``<eta|d phi> = (i/2)(1 + cos theta) d(phi)`` and the upper band
    ``(i/2)(1 - cos theta) d(phi)``; gauge II subtracts ``i d(Re phi)``.
    """
    band, gauge = _band(band), _gauge(gauge)
    delta, V = (float(x) for x in loop.point(q))
    ddelta, dV = (float(x) for x in loop.tangent(q))
    _check_point(k, delta, V, band, gauge)
    return complex(_connection(k, delta, V, ddelta, dV, p0.lam, band, gauge, direction))


def _spinor_derivs(k, delta, V, ddelta, dV, lam, band, gauge, direction):
    """Right/left eigenvectors and their analytic derivatives along
    ``direction``; arrays of shape ``(..., 2)``."""
    g = gamma(k, delta)
    dg = _dgamma(k, delta, ddelta, direction)
    dVs = 0.0 * V if direction == "k" else dV
    rho2 = np.abs(g) ** 2
    rho = np.sqrt(rho2)
    b2 = rho2 + V**2
    theta = np.arctan2(rho, V)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    a = np.angle(g)
    da = np.imag(np.conj(g) * dg) / rho2
    drho = np.real(np.conj(g) * dg) / rho
    dtheta = (V * drho - rho * dVs) / b2
    dc, ds = -0.5 * s * dtheta, 0.5 * c * dtheta
    if band == 1:
        x, dx = (c, s), (dc, ds)
    else:
        x, dx = (-s, c), (-ds, dc)
    m = _weights(gauge)
    scale_r, scale_l = (1.0, 1.0 / lam), (1.0, lam)
    right, left, dright, dleft = [], [], [], []
    for i in range(2):
        ph = np.exp(1j * m[i] * a)
        v = x[i] * ph
        dv = (dx[i] + 1j * m[i] * x[i] * da) * ph
        right.append(v * scale_r[i])
        left.append(v * scale_l[i])
        dright.append(dv * scale_r[i])
        dleft.append(dv * scale_l[i])
    stack = lambda parts: np.stack(parts, axis=-1)  # noqa: E731
    return stack(right), stack(left), stack(dright), stack(dleft)


def _curvature_dvec(k, delta, V, ddelta, dV, band):
    # Omega = band * (1/2) d.(d_k d x d_q d) / |d|^3 with d = (Re g, Im g, V):
    # the biorthonormal curvature equals that of the lam = 1 counterpart.
    g = gamma(k, delta)
    gk = _dgamma(k, delta, ddelta, "k")
    gq = _dgamma(k, delta, ddelta, "q")
    d = np.stack([g.real, g.imag, V + 0 * g.real], axis=-1)
    dk = np.stack([gk.real, gk.imag, 0 * gk.real], axis=-1)
    dq = np.stack([gq.real, gq.imag, dV + 0 * gq.real], axis=-1)
    triple = np.einsum("...i,...i->...", d, np.cross(dk, dq))
    return band * 0.5 * triple / np.linalg.norm(d, axis=-1) ** 3


def _curvature(k, delta, V, ddelta, dV, lam, band, gauge):
    r, l, rk, lk = _spinor_derivs(k, delta, V, ddelta, dV, lam, band, gauge, "k")
    _, _, rq, lq = _spinor_derivs(k, delta, V, ddelta, dV, lam, band, gauge, "q")
    inner = lambda u, v: np.einsum("...i,...i->...", np.conj(u), v)  # noqa: E731
    return -1j * (inner(lk, rq) - inner(lq, rk))


def berry_curvature(k, q, loop, p0: ModelParams, band=-1, gauge="I"):
    """``Omega_kq = -i(<d_k eta|d_q phi> - <d_q eta|d_k phi>)`` from analytic
    eigenvector derivatives in the given gauge (gauge-independent value).

    At a Bloch-sphere pole, where the angle derivatives are undefined, the
    equivalent field-vector form is used instead.
    """
    band, gauge = _band(band), _gauge(gauge)
    delta, V = (float(x) for x in loop.point(q))
    ddelta, dV = (float(x) for x in loop.tangent(q))
    if _check_point(k, delta, V, band, gauge):
        return complex(_curvature_dvec(k, delta, V, ddelta, dV, band))
    return complex(_curvature(k, delta, V, ddelta, dV, p0.lam, band, gauge))


# -- Chern number: gauge-seam line integral ------------------------------------


@dataclass(frozen=True)
class SeamCrossing:
    q: float
    delta: float
    sign: int  # +1: the boundary of the gauge-I patch runs along +k here
    integral: complex  # int_0^{2pi} (A_I - A_II)_k dk on the seam


def _v_crossings(loop, nq):
    qs = np.linspace(0.0, TWO_PI, nq + 1)
    _, v = loop.point(qs)
    v = np.asarray(v, float)
    v[-1] = v[0]  # q = 2pi is q = 0; avoid round-off at the wrap
    neg = v < 0
    vfun = lambda q: float(loop.point(q)[1])  # noqa: E731
    crossings = []
    for i in range(nq):
        if neg[i] == neg[i + 1]:
            continue
        lo, hi = qs[i], qs[i + 1]
        if v[i] == 0.0:
            q_star = lo
        elif v[i + 1] == 0.0:
            q_star = hi
        else:
            f = vfun
            if i == nq - 1:
                f = lambda q: v[0] if q >= TWO_PI else vfun(q)  # noqa: E731
            q_star = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        crossings.append((float(q_star % TWO_PI), -1 if neg[i + 1] else 1))
    return crossings


def seam_contributions(loop, p0: ModelParams, band=-1, nq=256, nk=256):
    """Locate the seams ``V(q) = 0`` and integrate the gauge mismatch
    ``A_I - A_II`` along each of them.

    Each gauge is used on the half-plane where it is smooth: for the lower
    band gauge I covers ``V < 0`` and gauge II covers ``V >= 0`` (mirrored for
    the upper band).
    """
    band = _band(band)
    loop.check_gap()
    ks = (np.arange(nk) + 0.5) * (TWO_PI / nk)
    gauge_one_side = band  # sign(V) on the patch where gauge I is regular
    out = []
    for q_star, direction in _v_crossings(loop, nq):
        delta, V = (float(x) for x in loop.point(q_star))
        ddelta, dV = (float(x) for x in loop.tangent(q_star))
        a1 = _connection(ks, delta, V, ddelta, dV, p0.lam, band, "I", "k")
        a2 = _connection(ks, delta, V, ddelta, dV, p0.lam, band, "II", "k")
        integral = complex(np.sum(a1 - a2) * (TWO_PI / nk))
        sign = 1 if direction == gauge_one_side else -1
        out.append(SeamCrossing(q_star, delta, sign, integral))
    return out


def chern_line_integral(loop, p0: ModelParams, band=-1, nq=256, nk=256) -> float:
    """``c = (1/2pi) oint_{dD_I} (A_I - A_II) . dr`` over the patch seams.

    Returns the real part without rounding; the imaginary part is available
    from :func:`seam_contributions`.
    """
    total = sum(s.sign * s.integral for s in seam_contributions(loop, p0, band, nq, nk))
    return float(np.real(total)) / TWO_PI


# -- Chern number: plaquette sum -----------------------------------------------


def _grid_spinors(loop, lam, band, nk, nq, gauge="I"):
    ks = np.arange(nk) * (TWO_PI / nk)
    qs = np.arange(nq) * (TWO_PI / nq)
    delta, V = loop.point(qs)
    kk, dd = np.meshgrid(ks, delta, indexing="ij")
    _, vv = np.meshgrid(ks, V, indexing="ij")
    return spinor_pair(kk, dd, vv, lam, band, gauge)


def chern_plaquette(loop, p0: ModelParams, band=-1, nk=256, nq=256, gauge="I", backend=None) -> int:
    """Integer Chern number from biorthogonal link variables on an
    ``nk x nq`` torus grid.

    Link ``U_mu(x) = <eta(x)|phi(x + mu)> / |...|``; plaquette phase
    ``F = arg(U_k(x) U_q(x+k) / (U_k(x+q) U_q(x)))``.
    """
    band = _band(band)
    loop.check_gap()
    right, left = _grid_spinors(loop, p0.lam, band, nk, nq, gauge)
    total, fmax = _kernels.get(backend).plaquette_sum(
        np.ascontiguousarray(right), np.ascontiguousarray(left)
    )
    if fmax > math.pi - 0.1:
        raise GridTooCoarse(
            f"plaquette phase {fmax:.3f} is close to the branch cut; refine nk, nq"
        )
    return int(round(total / TWO_PI))


# -- Zak phase and bulk pumping ------------------------------------------------


def zak_phase(delta, V, p0: ModelParams, band=-1, nk=4096) -> float:
    """Biorthonormal Zak phase in units of 2pi, reduced to ``[0, 1)``.

    Wilson loop ``prod_j <eta(k_j)|phi(k_{j+1})>`` on a closed k grid.
    """
    band = _band(band)
    if math.hypot(delta, V) < 1e-9:
        raise GapClosed(f"gap closes at k = pi for delta={delta}, V={V}")
    ks = np.arange(nk) * (TWO_PI / nk)
    right, left = spinor_pair(ks, delta, V, p0.lam, band, "I")
    links = np.einsum("ki,ki->k", np.conj(left), np.roll(right, -1, axis=0))
    w = np.prod(links / np.abs(links))
    z = -np.angle(w) / TWO_PI
    return float(z % 1.0)


def adiabatic_current(loop, p0: ModelParams, band=-1, nt=256, nk=256):
    """Bulk biorthonormal adiabatic current over one period ``T = 1``.

    ``J(t) = (i/2pi) int dk [<d_t eta|d_k phi> - <d_k eta|d_t phi>]`` on
    midpoint meshes in ``t`` and ``k``.  Returns ``(t, J)`` with complex J.
    """
    band = _band(band)
    loop.check_gap()
    ts = (np.arange(nt) + 0.5) / nt
    qs = TWO_PI * ts
    ks = (np.arange(nk) + 0.5) * (TWO_PI / nk)
    delta, V = loop.point(qs)
    ddelta, dV = loop.tangent(qs)
    kk, dd = np.meshgrid(ks, delta, indexing="ij")
    _, vv = np.meshgrid(ks, V, indexing="ij")
    _, ddd = np.meshgrid(ks, ddelta, indexing="ij")
    _, dvv = np.meshgrid(ks, dV, indexing="ij")
    # Pointwise gauge choice: the integrand is gauge invariant, so each point
    # uses the gauge that is regular there.
    one = np.sign(vv) == band
    omega = np.empty(kk.shape, complex)
    for gauge, mask in (("I", one), ("II", ~one)):
        if mask.any():
            omega[mask] = _curvature(
                kk[mask], dd[mask], vv[mask], ddd[mask], dvv[mask], p0.lam, band, gauge
            )
    # d_t = (2pi / T) d_q with T = 1
    integrand = omega * TWO_PI
    current = integrand.sum(axis=0) * (TWO_PI / nk) / TWO_PI
    return ts, current


def bulk_pump_charge(loop, p0: ModelParams, band=-1, nt=256, nk=256) -> float:
    """``c = int_0^T J(t) dt``: charge pumped by all k channels per period."""
    ts, current = adiabatic_current(loop, p0, band, nt, nk)
    return float(np.real(current.sum() / nt))
