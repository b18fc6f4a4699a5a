"""Pure numpy implementations; same signatures as ``_ckernels``."""
import numpy as np


def plaquette_sum(right, left):
    """Sum and maximum modulus of the plaquette phases on a periodic grid.

    ``right`` and ``left`` have shape ``(nk, nq, 2)``.
    """
    def link(shift_axis):
        u = np.einsum("abi,abi->ab", np.conj(left), np.roll(right, -1, axis=shift_axis))
        return u / np.abs(u)

    uk, uq = link(0), link(1)
    loop = uk * np.roll(uq, -1, axis=0) * np.conj(np.roll(uk, -1, axis=1)) * np.conj(uq)
    f = np.angle(loop)
    return float(f.sum()), float(np.abs(f).max())


def chain_hoppings(n, lam, delta, link):
    """Raw forward/backward hoppings ``kappa_{l,l+1}``, ``kappa_{l+1,l}`` for
    bonds l = 1..n (index l-1); bond n joins site n to site 1."""
    l = np.arange(1, n + 1)
    sgn = np.where(l % 2 == 0, 1.0, -1.0)
    amp = 0.5 * (1.0 + sgn * delta)
    fwd = amp * lam ** (-sgn)
    bwd = amp * lam**sgn
    fwd[-1] *= link
    bwd[-1] *= link
    return fwd, bwd


def hermitian_chain(n, delta, V, link):
    """Real symmetric counterpart ``D H D^-1`` (equal to H at lam = 1)."""
    l = np.arange(1, n + 1)
    sgn = np.where(l % 2 == 0, 1.0, -1.0)
    t = 0.5 * (1.0 + sgn * delta)
    t[-1] *= link
    h = np.diag(-V * sgn)
    idx = np.arange(n - 1)
    h[idx, idx + 1] = t[:-1]
    h[idx + 1, idx] = t[:-1]
    h[n - 1, 0] += t[-1]
    h[0, n - 1] += t[-1]
    return h


def similarity_diag(n, lam):
    return np.where(np.arange(1, n + 1) % 2 == 0, lam, 1.0)


def _currents(fwd, bwd, right, left):
    rn = np.roll(right, -1)
    ln = np.roll(left, -1)
    return -1j * (np.conj(left) * fwd * rn - np.conj(ln) * bwd * right)


def evolve_chain(N, lam, link, d_mid, v_mid, d_s, v_s, dt, right0, left0, branch, stride):
    n = 2 * N
    nsamp = len(d_s)
    dsim = similarity_diag(n, lam)
    right = np.array(right0, complex)
    left = np.array(left0, complex)
    nstore = len(range(0, nsamp, stride)) + (0 if (nsamp - 1) % stride == 0 else 1)
    rights = np.empty((nstore, n), complex)
    lefts = np.empty((nstore, n), complex)
    currents = np.empty((nsamp, n), complex)
    fidelity = np.empty(nsamp)
    overlap = np.empty(nsamp, complex)
    slot = 0
    for s in range(nsamp):
        if s > 0:
            e, u = np.linalg.eigh(hermitian_chain(n, d_mid[s - 1], v_mid[s - 1], link))
            ph = np.exp(-1j * e * dt)
            right = (u @ (ph * (u.T @ (dsim * right)))) / dsim
            left = (u @ (ph * (u.T @ (left / dsim)))) * dsim
        _, u = np.linalg.eigh(hermitian_chain(n, d_s[s], v_s[s], link))
        w = u[:, branch]
        fidelity[s] = np.sqrt(abs(np.dot(w, left / dsim).conjugate() * np.dot(w, dsim * right)))
        fwd, bwd = chain_hoppings(n, lam, d_s[s], link)
        currents[s] = _currents(fwd, bwd, right, left)
        overlap[s] = np.vdot(left, right)
        if s % stride == 0 or s == nsamp - 1:
            rights[slot] = right
            lefts[slot] = left
            slot += 1
    return rights, lefts, currents, fidelity, overlap
