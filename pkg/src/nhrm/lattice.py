"""Real-space chains: ring, open chain and weak-link chain.

Sites are labelled ``l = 1..2N`` in formulas and stored at index ``l - 1``.
Bond ``l`` joins site ``l`` to ``l + 1``; bond ``2N`` joins site ``2N`` back
to site 1 and is the only bond that depends on the boundary.

With ``D = diag(1, lam, 1, lam, ...)`` (site ``l`` weighted by ``lam`` when l
is even) every such chain satisfies ``D H D^-1 = H(lam=1)``, a real symmetric
matrix, so the spectrum is real and independent of ``lam``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import _pykernels as _pk
from .bloch import ModelParams
from .errors import ComplexSpectrum, RatioPole

__all__ = [
    "BOUNDARIES",
    "RealSpaceModel",
    "EdgeMode",
    "build_hamiltonian",
    "spectrum",
    "dense_spectrum",
    "biorthogonal_eigensystem",
    "band_edges",
    "mid_gap_states",
    "edge_modes",
    "edge_probability",
    "commutator_residual",
]

BOUNDARIES = ("ring", "open", "weak_link")


def _link(boundary, kappa):
    if boundary == "ring":
        return 1.0
    if boundary == "open":
        return 0.0
    if boundary == "weak_link":
        if kappa is None:
            raise ValueError("weak_link boundary needs kappa")
        return float(kappa)
    raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")


@dataclass(frozen=True)
class RealSpaceModel:
    """A ``2N x 2N`` single-particle Hamiltonian with its balancing similarity.

    Attributes
    ----------
    params : ModelParams
    boundary : str
        ``"ring"``, ``"open"`` or ``"weak_link"``.
    kappa : float or None
        Weak-link factor multiplying bond ``2N`` (only for ``"weak_link"``).
    matrix : ndarray
        Complex Hamiltonian ``H``.
    """

    params: ModelParams
    boundary: str
    kappa: float | None = None
    matrix: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def n_sites(self) -> int:
        return 2 * self.params.N

    @property
    def link(self) -> float:
        return _link(self.boundary, self.kappa)

    @property
    def similarity(self) -> np.ndarray:
        """Diagonal of ``D``."""
        return _pk.similarity_diag(self.n_sites, self.params.lam)

    def hermitian(self) -> np.ndarray:
        """Real symmetric ``D H D^-1``."""
        p = self.params
        return _pk.hermitian_chain(self.n_sites, p.delta, p.V, self.link)

    def hoppings(self):
        """Forward and backward amplitudes ``(kappa_{l,l+1}, kappa_{l+1,l})``
        for bonds ``l = 1..2N``; bond 2N carries the boundary factor."""
        p = self.params
        return _pk.chain_hoppings(self.n_sites, p.lam, p.delta, self.link)


def build_hamiltonian(p: ModelParams, boundary="ring", kappa=None) -> RealSpaceModel:
    """Assemble ``H`` for the given boundary.

    ``H[l, l+1] = kappa_{l,l+1}``, ``H[l+1, l] = kappa_{l+1,l}`` and
    ``H[l, l] = -V (-1)^l`` (1-based).  The open chain drops bond ``2N``;
    the weak-link chain scales it by ``kappa``.
    """
    if p.N < 2:
        raise ValueError(f"real-space chains need N >= 2, got N={p.N}")
    link = _link(boundary, kappa)
    if boundary == "weak_link" and not np.isfinite(link):
        raise ValueError(f"kappa must be finite, got {kappa}")
    n = 2 * p.N
    fwd, bwd = _pk.chain_hoppings(n, p.lam, p.delta, link)
    sgn = np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0)
    h = np.diag((-p.V * sgn).astype(complex))
    idx = np.arange(n)
    nxt = (idx + 1) % n
    h[idx, nxt] += fwd
    h[nxt, idx] += bwd
    return RealSpaceModel(p, boundary, kappa if boundary == "weak_link" else None, h)


def dense_spectrum(m: RealSpaceModel):
    """General non-Hermitian dense eigenvalues of the raw matrix (ascending
    by real part).  Raises ComplexSpectrum when any ``|Im| > 1e-6``."""
    ev = np.linalg.eigvals(m.matrix)
    worst = float(np.abs(ev.imag).max())
    if worst > 1e-6:
        raise ComplexSpectrum(f"eigenvalue with |Im| = {worst:.3e}")
    return np.sort(ev.real)


def spectrum(m: RealSpaceModel, verify=False) -> np.ndarray:
    """Ascending real eigenvalues via the balanced Hermitian counterpart.

    With ``verify=True`` the result is cross-checked against
    :func:`dense_spectrum` and must agree within 1e-8.
    """
    ev = np.linalg.eigvalsh(m.hermitian())
    if verify:
        ref = dense_spectrum(m)
        err = float(np.abs(ref - ev).max())
        if err > 1e-8:
            raise ComplexSpectrum(
                f"balanced and dense spectra differ by {err:.3e}"
            )
    return ev


def biorthogonal_eigensystem(m: RealSpaceModel):
    """Eigenvalues with right and left eigenvectors (columns).

    ``H R = R diag(E)``, ``H^dagger L = L diag(E)``, ``L^dagger R = 1``.
    """
    e, u = np.linalg.eigh(m.hermitian())
    d = m.similarity[:, None]
    return e, (u / d).astype(complex), (u * d).astype(complex)


def band_edges(p: ModelParams):
    """Inner and outer bulk band edges ``(sqrt(delta^2 + V^2), sqrt(1 + V^2))``
    of the upper band; the lower band is the mirror image."""
    return float(np.hypot(p.delta, p.V)), float(np.hypot(1.0, p.V))


def mid_gap_states(m: RealSpaceModel, factor=3.0) -> np.ndarray:
    """Eigenvalues farther than ``factor`` level spacings from every bulk
    band edge while lying inside the bulk gap."""
    p = m.params
    inner, outer = band_edges(p)
    spacing = (outer - inner) / p.N
    ev = spectrum(m)
    return ev[inner - np.abs(ev) > factor * spacing]


@dataclass(frozen=True)
class EdgeMode:
    """Closed-form edge mode of the open chain.

    Attributes
    ----------
    side : str
        ``"L"`` lives on even sites with energy ``-V``; ``"R"`` on odd sites
        with energy ``+V``.
    amplitude : ndarray
        Real ``2N`` vector; it is both the right and the left eigenvector.
    ratio : float
        ``r = (delta - 1) / (delta + 1)``.
    norm_factor : float
        ``(1 - r^{2N}) / (1 - r^2)``.
    """

    side: str
    amplitude: np.ndarray = field(repr=False)
    ratio: float
    norm_factor: float

    def energy(self, V) -> float:
        return -V if self.side == "L" else V


def _norm_factor(r, N):
    r2 = r * r
    if r2 == 1.0:
        return float(N)
    return (1.0 - r2**N) / (1.0 - r2)


def edge_modes(p: ModelParams):
    """``(L, R)`` edge modes; independent of ``lam`` and ``V``.

    ``L``: amplitude ``r^{N-j} / sqrt(Omega)`` on site ``2j``;
    ``R``: amplitude ``r^{j-1} / sqrt(Omega)`` on site ``2j - 1``.
    """
    if p.delta == -1.0:
        raise RatioPole("edge ratio (delta - 1)/(delta + 1) diverges at delta = -1")
    r = (p.delta - 1.0) / (p.delta + 1.0)
    N = p.N
    omega = _norm_factor(r, N)
    j = np.arange(1, N + 1)
    # 0.0 ** 0 == 1 so the dimerized limit r = 0 is exact
    left = np.zeros(2 * N)
    left[2 * j - 1] = r ** (N - j) / np.sqrt(omega)
    right = np.zeros(2 * N)
    right[2 * j - 2] = r ** (j - 1) / np.sqrt(omega)
    return EdgeMode("L", left, r, omega), EdgeMode("R", right, r, omega)


def edge_probability(mode: EdgeMode, l: int) -> float:
    """Closed-form ``P_mu(l)`` for 1-based site ``l``."""
    n = len(mode.amplitude)
    if not 1 <= l <= n:
        raise IndexError(f"site {l} outside 1..{n}")
    r, omega = mode.ratio, mode.norm_factor
    if mode.side == "L":
        return 0.0 if l % 2 else float(r ** (n - l)) / omega
    return 0.0 if l % 2 == 0 else float(r ** (l - 1)) / omega


def commutator_residual(mode: EdgeMode, m: RealSpaceModel) -> float:
    """``||(H - E) u||`` with ``E = -V`` for L and ``+V`` for R.

    This is the finite-size leakage from the opposite chain end; it vanishes
    exactly only for ``delta = 1``.
    """
    if m.boundary != "open":
        raise ValueError("commutator_residual needs an open chain")
    u = mode.amplitude
    if len(u) != m.n_sites:
        raise ValueError("edge mode and model have different sizes")
    e = mode.energy(m.params.V)
    return float(np.linalg.norm(m.matrix @ u - e * u))
