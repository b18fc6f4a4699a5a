import numpy as np
import pytest

from nhrm.bloch import ModelParams, dispersion
from nhrm.errors import ComplexSpectrum, RatioPole
from nhrm.lattice import (
    biorthogonal_eigensystem,
    build_hamiltonian,
    commutator_residual,
    dense_spectrum,
    edge_modes,
    edge_probability,
    mid_gap_states,
    spectrum,
)


def _kappa(l, lam, delta, forward):
    # hopping amplitudes transcribed independently, l 1-based
    sign = (-1) ** l
    amp = (1 + sign * delta) / 2
    return amp * lam ** ((-1) ** (l + 1) if forward else (-1) ** l)


def test_matrix_entries_follow_hopping_formula():
    p = ModelParams(1.7, 0.3, 0.4, N=3)
    for boundary, link in (("ring", 1.0), ("open", 0.0), ("weak_link", 0.2)):
        m = build_hamiltonian(p, boundary, 0.2 if boundary == "weak_link" else None)
        h = m.matrix
        n = 6
        for l in range(1, n + 1):
            assert h[l - 1, l - 1] == pytest.approx(-p.V * (-1) ** l)
        for l in range(1, n):
            assert h[l - 1, l] == pytest.approx(_kappa(l, p.lam, p.delta, True))
            assert h[l, l - 1] == pytest.approx(_kappa(l, p.lam, p.delta, False))
        assert h[n - 1, 0] == pytest.approx(link * _kappa(n, p.lam, p.delta, True))
        assert h[0, n - 1] == pytest.approx(link * _kappa(n, p.lam, p.delta, False))
        # nothing beyond nearest neighbours
        mask = np.abs(np.subtract.outer(range(n), range(n))) % (n - 1) > 1
        assert np.all(h[mask] == 0)


def test_uniform_four_site_ring():
    ev = spectrum(build_hamiltonian(ModelParams(1.0, 0.0, 0.0, N=2), "ring"))
    assert np.allclose(ev, [-1, 0, 0, 1], atol=1e-14)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.5])
def test_ring_spectrum_equals_bloch_bands(lam):
    p = ModelParams(lam, 0.35, -0.2, N=8)
    k = 2 * np.pi * np.arange(p.N) / p.N
    em, ep = dispersion(k, p)
    ref = np.sort(np.concatenate([em, ep]))
    assert np.abs(spectrum(build_hamiltonian(p, "ring")) - ref).max() < 1e-9


def test_dimerized_open_chain():
    p = ModelParams(1.3, 1.0, 0.0, N=5)
    ev = spectrum(build_hamiltonian(p, "open"))
    expected = np.sort([-1.0] * (p.N - 1) + [1.0] * (p.N - 1) + [0.0, 0.0])
    assert np.allclose(ev, expected, atol=1e-14)


@pytest.mark.parametrize("boundary", ["ring", "open", "weak_link"])
def test_spectrum_independent_of_lambda(boundary):
    spectra = [
        spectrum(build_hamiltonian(ModelParams(lam, 0.4, 0.25, N=10), boundary, 0.05))
        for lam in (0.5, 1.5)
    ]
    assert np.abs(spectra[0] - spectra[1]).max() < 1e-9


@pytest.mark.parametrize("boundary", ["ring", "open", "weak_link"])
def test_balanced_spectrum_agrees_with_dense_fallback(boundary):
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = ModelParams(rng.uniform(0.3, 3), rng.uniform(-1, 1), rng.uniform(-1, 1), N=7)
        m = build_hamiltonian(p, boundary, 0.3)
        assert np.abs(dense_spectrum(m) - spectrum(m, verify=True)).max() < 1e-8


def test_hermitian_counterpart_is_similar():
    p = ModelParams(2.2, -0.3, 0.6, N=4)
    for boundary in ("ring", "open", "weak_link"):
        m = build_hamiltonian(p, boundary, 0.4)
        d = m.similarity
        h = (d[:, None] * m.matrix) / d[None, :]
        assert np.allclose(h, h.conj().T, atol=1e-15)
        assert np.allclose(h, m.hermitian(), atol=1e-15)


def test_complex_spectrum_guard():
    m = build_hamiltonian(ModelParams(1.0, 0.0, 0.0, N=2), "ring")
    bad = m.matrix.copy()
    bad[0, 1], bad[1, 0] = 1.0, -1.0  # antisymmetric hop: complex pair
    from dataclasses import replace

    with pytest.raises(ComplexSpectrum):
        dense_spectrum(replace(m, matrix=bad))


def test_biorthogonal_eigensystem():
    m = build_hamiltonian(ModelParams(1.8, 0.2, 0.3, N=6), "weak_link", 0.1)
    e, r, l = biorthogonal_eigensystem(m)
    assert np.allclose(m.matrix @ r, r * e, atol=1e-13)
    assert np.allclose(m.matrix.conj().T @ l, l * e, atol=1e-13)
    assert np.allclose(l.conj().T @ r, np.eye(12), atol=1e-13)


def test_open_chain_edge_energies():
    p = ModelParams(1.5, 0.5, 0.3, N=10)
    mid = mid_gap_states(build_hamiltonian(p, "open"))
    assert len(mid) == 2
    assert np.allclose(mid, [-0.3, 0.3], atol=np.exp(-p.N * np.log(3)) * 10)


@pytest.mark.parametrize("delta, count", [(0.5, 2), (-0.5, 0), (0.2, 2), (-0.8, 0)])
def test_mid_gap_count(delta, count):
    m = build_hamiltonian(ModelParams(1.5, delta, 0.0, N=50), "open")
    assert len(mid_gap_states(m)) == count


def test_weak_link_avoided_crossing():
    gaps = []
    for V in np.linspace(-0.02, 0.02, 5):
        m = build_hamiltonian(ModelParams(1.5, 0.5, V, N=50), "weak_link", 0.05)
        ev = spectrum(m)
        gaps.append(ev[50] - ev[49])
    assert min(gaps) > 0
    # the branches repel: the splitting at V = 0 stays open
    assert gaps[2] > 1e-3


def test_edge_modes_dimerized():
    L, R = edge_modes(ModelParams(1.0, 1.0, 0.0, N=4))
    assert edge_probability(R, 1) == 1.0
    assert all(edge_probability(R, l) == 0 for l in range(2, 9))
    assert edge_probability(L, 8) == 1.0
    assert all(edge_probability(L, l) == 0 for l in range(1, 8))


def test_edge_mode_normalization_value():
    L, R = edge_modes(ModelParams(1.0, 0.5, 0.0, N=10))
    omega = (1 - (1 / 3) ** 20) / (1 - 1 / 9)
    assert abs(R.norm_factor - omega) < 1e-15
    assert abs(edge_probability(R, 1) - 1 / omega) < 1e-15
    assert abs(omega - 9 / 8) < 2 * (1 / 3) ** 20


@pytest.mark.parametrize("delta", [0.9, 0.5, 0.1, -0.3, -0.7])
def test_edge_profiles_normalized_and_sublattice(delta):
    L, R = edge_modes(ModelParams(1.0, delta, 0.0, N=12))
    pl = [edge_probability(L, l) for l in range(1, 25)]
    pr = [edge_probability(R, l) for l in range(1, 25)]
    assert abs(sum(pl) - 1) < 1e-12 and abs(sum(pr) - 1) < 1e-12
    assert all(pl[l - 1] == 0 for l in range(1, 25, 2))
    assert all(pr[l - 1] == 0 for l in range(2, 25, 2))
    assert np.allclose(pl, L.amplitude**2, atol=1e-15)
    assert abs(pr[2] / pr[0] - R.ratio**2) < 1e-14


def test_edge_profiles_independent_of_lambda_and_V():
    a = edge_modes(ModelParams(1.0, 0.5, 0.0, N=8))
    b = edge_modes(ModelParams(3.0, 0.5, 0.7, N=8))
    for x, y in zip(a, b):
        assert np.array_equal(x.amplitude, y.amplitude)


def test_ratio_pole():
    with pytest.raises(RatioPole):
        edge_modes(ModelParams(1.0, -1.0, 0.0, N=4))


def test_edge_modes_are_self_dual_eigenvectors():
    # right eigenvector of H and left eigenvector (of H^dagger) coincide; the
    # finite chain differs by far-end leakage of order 3^-N
    p = ModelParams(1.5, 0.5, 0.3, N=24)
    m = build_hamiltonian(p, "open")
    e, r, l = biorthogonal_eigensystem(m)
    hd = m.matrix.conj().T
    for mode in edge_modes(p):
        u = mode.amplitude
        left_res = np.linalg.norm(hd @ u - mode.energy(p.V) * u)
        assert left_res < 1e-10 and commutator_residual(mode, m) < 1e-10
        i = int(np.argmin(np.abs(e - mode.energy(p.V))))
        rr = r[:, i] / r[np.argmax(np.abs(r[:, i])), i]
        ll = l[:, i] / l[np.argmax(np.abs(l[:, i])), i]
        assert np.abs(rr - ll).max() < 1e-10
        u = mode.amplitude / mode.amplitude[np.argmax(np.abs(mode.amplitude))]
        assert np.abs(rr - u).max() < 1e-8


def test_commutator_residual_dimerized_zero():
    p = ModelParams(1.5, 1.0, 0.4, N=6)
    m = build_hamiltonian(p, "open")
    for mode in edge_modes(p):
        assert commutator_residual(mode, m) == 0.0


def test_commutator_residual_closed_form():
    # leakage from the far end: only the single hop 1 <-> 2 (L) or
    # 2N-1 <-> 2N (R) is left uncancelled
    p = ModelParams(1.5, 0.5, 0.3, N=10)
    m = build_hamiltonian(p, "open")
    L, R = edge_modes(p)
    r = abs(L.ratio)
    lead = (1 - p.delta) / 2 * r ** (p.N - 1) / np.sqrt(L.norm_factor)
    assert commutator_residual(L, m) == pytest.approx(p.lam * lead, rel=1e-12)
    assert commutator_residual(R, m) == pytest.approx(lead / p.lam, rel=1e-12)


def test_two_edge_energy_sum_zero():
    p = ModelParams(1.5, 0.5, 0.3, N=10)
    L, R = edge_modes(p)
    assert L.energy(p.V) + R.energy(p.V) == 0.0


def test_build_rejects_bad_input():
    with pytest.raises(ValueError):
        build_hamiltonian(ModelParams(1.0, 0.0, 0.0, N=1), "ring")
    with pytest.raises(ValueError):
        build_hamiltonian(ModelParams(1.0, 0.0, 0.0, N=2), "moebius")
    with pytest.raises(ValueError):
        build_hamiltonian(ModelParams(1.0, 0.0, 0.0, N=2), "weak_link")
