import math

import numpy as np
import pytest

from nhrm.bloch import ModelParams, bloch_matrix, spinor_pair
from nhrm.errors import GapClosed, GridTooCoarse, LoopThroughDegeneracy
from nhrm.geometry import (
    CircleLoop,
    PolylineLoop,
    adiabatic_current,
    berry_connection,
    berry_curvature,
    bulk_pump_charge,
    chern_line_integral,
    chern_plaquette,
    seam_contributions,
    zak_phase,
)

P0 = ModelParams(1.5, 0.0, 0.0)
ENCLOSING = CircleLoop((0.0, 0.0), 0.5, 1)
OUTSIDE = CircleLoop((1.0, 0.0), 0.5, 1)


def _random_regular_point(rng, loop):
    while True:
        k, q = rng.uniform(0, 2 * np.pi, 2)
        d, v = loop.point(q)
        g = 0.5 * ((1 - d) + (1 + d) * np.exp(1j * k))
        if abs(g) > 0.05 and abs(v) > 0.05:
            return k, q


def _fd_connection(k, q, loop, lam, band, gauge, direction, h=1e-5):
    d0, v0 = loop.point(q)
    _, left = spinor_pair(k, d0, v0, lam, band, gauge)
    if direction == "k":
        rp, _ = spinor_pair(k + h, d0, v0, lam, band, gauge)
        rm, _ = spinor_pair(k - h, d0, v0, lam, band, gauge)
    else:
        rp, _ = spinor_pair(k, *loop.point(q + h), lam, band, gauge)
        rm, _ = spinor_pair(k, *loop.point(q - h), lam, band, gauge)
    return -1j * np.vdot(left, (rp - rm) / (2 * h))


def _lower_state_hermitian(k, d, v):
    # lam = 1 oracle: numpy eigensolver, arbitrary phase
    _, u = np.linalg.eigh(bloch_matrix(k, ModelParams(1.0, d, v)))
    return u[:, 0]


def _oracle_curvature(k, q, loop, h=1e-4):
    # gauge-invariant product around a tiny plaquette, k first then q
    pts = [(k, q), (k + h, q), (k + h, q + h), (k, q + h)]
    us = [_lower_state_hermitian(kk, *loop.point(qq)) for kk, qq in pts]
    w = 1.0 + 0j
    for i in range(4):
        w *= np.vdot(us[i], us[(i + 1) % 4])
    return np.angle(w) / h**2


# -- connection -----------------------------------------------------------------


def test_connection_real_in_hermitian_limit():
    rng = np.random.default_rng(0)
    p = ModelParams(1.0, 0.0, 0.0)
    for _ in range(20):
        k, q = _random_regular_point(rng, ENCLOSING)
        for direction in "kq":
            a = berry_connection(k, q, ENCLOSING, p, -1, "I", direction)
            assert abs(a.imag) < 1e-10


def test_biorthonormal_connection_is_real_for_imbalanced_hopping():
    # The lam factors of right and left vectors cancel in <eta|d phi>, so the
    # properly conjugated connection stays real at lam = 1.5.
    loop = CircleLoop((0.2, -0.3), 0.3, 1)
    q = math.pi / 2  # (delta, V) = (0.2, 0)
    k = 1.0
    fd = _fd_connection(k, q, loop, 1.5, -1, "I", "k")
    a = berry_connection(k, q, loop, ModelParams(1.5, 0.2, 0.0), -1, "I", "k")
    assert abs(a - fd) < 1e-6
    assert abs(a.imag) < 1e-12


@pytest.mark.parametrize("band", [-1, 1])
@pytest.mark.parametrize("gauge", ["I", "II"])
def test_connection_matches_finite_differences(band, gauge):
    rng = np.random.default_rng(11)
    loops = [ENCLOSING, OUTSIDE, CircleLoop((0.2, -0.1), 0.7, -1)]
    for i in range(100):
        loop = loops[i % 3]
        lam = rng.uniform(0.3, 3.0)
        k, q = _random_regular_point(rng, loop)
        for direction in "kq":
            a = berry_connection(k, q, loop, ModelParams(lam, 0, 0), band, gauge, direction)
            fd = _fd_connection(k, q, loop, lam, band, gauge, direction)
            assert abs(a - fd) < 1e-6, (k, q, direction)


def test_gauge_shift_identity():
    rng = np.random.default_rng(5)
    h = 1e-5
    for _ in range(50):
        k, q = _random_regular_point(rng, ENCLOSING)
        for direction in "kq":
            for band in (-1, 1):
                a1 = berry_connection(k, q, ENCLOSING, P0, band, "I", direction)
                a2 = berry_connection(k, q, ENCLOSING, P0, band, "II", direction)
                if direction == "k":
                    gp = 0.5 * ((1 - ENCLOSING.point(q)[0]) + (1 + ENCLOSING.point(q)[0]) * np.exp(1j * (k + h)))
                    gm = 0.5 * ((1 - ENCLOSING.point(q)[0]) + (1 + ENCLOSING.point(q)[0]) * np.exp(1j * (k - h)))
                else:
                    dp, dm = ENCLOSING.point(q + h)[0], ENCLOSING.point(q - h)[0]
                    gp = 0.5 * ((1 - dp) + (1 + dp) * np.exp(1j * k))
                    gm = 0.5 * ((1 - dm) + (1 + dm) * np.exp(1j * k))
                d_re_phi = np.angle(gp / gm) / (2 * h)
                assert abs((a1 - a2) - d_re_phi) < 1e-8


# -- curvature ------------------------------------------------------------------


def test_curvature_gauge_independent():
    rng = np.random.default_rng(2)
    for _ in range(50):
        k, q = _random_regular_point(rng, ENCLOSING)
        for band in (-1, 1):
            o1 = berry_curvature(k, q, ENCLOSING, P0, band, "I")
            o2 = berry_curvature(k, q, ENCLOSING, P0, band, "II")
            assert abs(o1 - o2) < 1e-8


def test_curvature_hermitian_limit_matches_plaquette_oracle():
    rng = np.random.default_rng(4)
    p = ModelParams(1.0, 0, 0)
    for _ in range(30):
        k, q = _random_regular_point(rng, ENCLOSING)
        om = berry_curvature(k, q, ENCLOSING, p, -1)
        # centre the oracle plaquette on (k, q)
        ref = _oracle_curvature(k - 0.5e-4, q - 0.5e-4, ENCLOSING)
        assert abs(om.real - ref) < 1e-6
        assert abs(om.imag) < 1e-12


def test_curvature_independent_of_lambda_and_band_antisymmetric():
    loop = CircleLoop((0.1, 0.05), 0.4, 1)
    for k, q in [(0.5, 1.0), (2.9, 4.0), (3.3, 0.2)]:
        ref = berry_curvature(k, q, loop, ModelParams(1.0, 0, 0), -1)
        for lam in (0.5, 1.5, 3.0):
            assert abs(berry_curvature(k, q, loop, ModelParams(lam, 0, 0), -1) - ref) < 1e-10
        assert abs(berry_curvature(k, q, loop, P0, 1) + ref) < 1e-10


def test_curvature_antisymmetric_in_kq():
    # the oracle traversed q-first gives -Omega_kq
    k, q = 2.4, 1.1
    h = 1e-4
    pts = [(k, q), (k, q + h), (k + h, q + h), (k + h, q)]
    us = [_lower_state_hermitian(kk, *ENCLOSING.point(qq)) for kk, qq in pts]
    w = np.prod([np.vdot(us[i], us[(i + 1) % 4]) for i in range(4)])
    om_qk = np.angle(w) / h**2
    om_kq = berry_curvature(k + h / 2, q + h / 2, ENCLOSING, ModelParams(1.0, 0, 0), -1).real
    assert abs(om_qk + om_kq) < 1e-5


def test_curvature_at_pole_uses_field_vector_form():
    # k = pi, delta = 0 crossing: gamma = 0 with V != 0
    loop = CircleLoop((0.0, 0.0), 0.5, 1)
    q = math.pi / 2  # delta = 0, V = 0.5
    om = berry_curvature(math.pi, q, loop, P0, -1, "II")
    near = berry_curvature(math.pi + 1e-6, q, loop, P0, -1, "II")
    assert abs(om - near) < 1e-4


# -- Chern numbers -----------------------------------------------------------------


@pytest.mark.parametrize(
    "loop, lower",
    [(ENCLOSING, -1), (OUTSIDE, 0), (ENCLOSING.reversed(), 1)],
    ids=["enclosing", "outside", "reversed"],
)
def test_chern_canonical_loops_both_methods(loop, lower):
    for band, expected in ((-1, lower), (1, -lower)):
        plaq = chern_plaquette(loop, P0, band, 256, 256)
        line = chern_line_integral(loop, P0, band, 256, 256)
        assert plaq == expected
        assert abs(line - plaq) < 1e-3


def test_chern_quadrant_loop_trivial():
    loop = CircleLoop((0.5, 0.5), 0.2, 1)
    assert chern_plaquette(loop, P0) == 0
    assert abs(chern_line_integral(loop, P0)) < 1e-3


@pytest.mark.parametrize("lam", [0.5, 1.0, 1.5, 3.0])
def test_chern_independent_of_lambda(lam):
    p = ModelParams(lam, 0, 0)
    assert chern_plaquette(ENCLOSING, p) == chern_plaquette(ENCLOSING, P0)


def test_chern_rectangle_all_quadrants():
    rect = PolylineLoop.rectangle((-0.5, 0.5), (-0.4, 0.6))
    c = chern_plaquette(rect, P0)
    assert abs(c) == 1
    assert abs(chern_line_integral(rect, P0) - c) < 1e-3
    assert chern_plaquette(rect.reversed(), P0) == -c


def test_chern_loop_additivity():
    big = PolylineLoop.rectangle((-0.4, 0.6), (-0.3, 0.7))
    tiles = [
        PolylineLoop.rectangle(dr, vr)
        for dr in ((-0.4, 0.1), (0.1, 0.6))
        for vr in ((-0.3, 0.2), (0.2, 0.7))
    ]
    assert chern_plaquette(big, P0) == sum(chern_plaquette(t, P0) for t in tiles)
    total_line = sum(chern_line_integral(t, P0) for t in tiles)
    assert abs(total_line - chern_line_integral(big, P0)) < 1e-3


def test_line_integral_imaginary_part_vanishes():
    for loop in (ENCLOSING, OUTSIDE, CircleLoop((0.3, 0.1), 0.6, -1)):
        for s in seam_contributions(loop, P0):
            assert abs(s.integral.imag) < 1e-8


def test_seams_found_at_v_zero():
    seams = seam_contributions(ENCLOSING, P0)
    assert sorted(round(s.q, 12) for s in seams) == [0.0, round(math.pi, 12)]
    for s in seams:
        assert abs(ENCLOSING.point(s.q)[1]) < 1e-12


def test_loop_through_degeneracy():
    loop = CircleLoop((0.5, 0.0), 0.5, 1)
    with pytest.raises(LoopThroughDegeneracy) as err:
        chern_plaquette(loop, P0)
    assert err.value.min_distance < 1e-12
    with pytest.raises(LoopThroughDegeneracy):
        chern_line_integral(loop, P0)


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        chern_plaquette(CircleLoop((0.5, 0.67), 0.93, 1), P0, -1, 2, 4)


def test_loop_geometry():
    c = CircleLoop((0.2, -0.1), 0.3, -1)
    assert np.allclose(c.point(0.0), c.point(2 * np.pi))
    d, v = c.point(0.4)
    assert abs(d - (0.2 + 0.3 * math.cos(-0.4))) < 1e-15
    assert abs(v - (-0.1 + 0.3 * math.sin(-0.4))) < 1e-15
    sq = PolylineLoop(((0, 0), (1, 0), (1, 1), (0, 1)))
    assert sq.perimeter == 4.0
    assert np.allclose(sq.point(np.pi / 2), (1, 0))
    assert np.allclose(sq.point(0.0), sq.point(2 * np.pi))
    with pytest.raises(ValueError):
        CircleLoop((0, 0), 0.0)


# -- Zak phase and bulk pump ------------------------------------------------------


def test_zak_phase_values():
    p = ModelParams(1.0, 0, 0)
    assert abs(zak_phase(0.5, 0.0, p) - 0.5) < 1e-6
    z = zak_phase(-0.5, 0.0, p)
    assert min(z, 1 - z) < 1e-6


def test_zak_phase_independent_of_lambda():
    a = zak_phase(0.5, 0.0, ModelParams(1.0, 0, 0))
    b = zak_phase(0.5, 0.0, ModelParams(1.5, 0, 0))
    assert abs(a - b) < 1e-8


def test_zak_phase_gap_closed():
    with pytest.raises(GapClosed):
        zak_phase(0.0, 0.0, P0)


def test_zak_phase_against_hermitian_wilson_oracle():
    # numpy eigenvectors with random phases; the Wilson loop is gauge invariant
    d, v = 0.3, 0.4
    nk = 512
    ks = np.arange(nk) * 2 * np.pi / nk
    us = [_lower_state_hermitian(k, d, v) for k in ks]
    w = np.prod([np.vdot(us[i], us[(i + 1) % nk]) for i in range(nk)])
    ref = (-np.angle(w) / (2 * np.pi)) % 1.0
    assert abs(zak_phase(d, v, P0, nk=nk) - ref) < 1e-10


def test_bulk_pump_charge_matches_chern():
    assert abs(bulk_pump_charge(ENCLOSING, P0, -1, 256, 256) + 1) < 1e-3
    assert abs(bulk_pump_charge(OUTSIDE, P0, -1, 256, 256)) < 1e-3


def test_bulk_pump_equals_plaquette_random_loops():
    rng = np.random.default_rng(8)
    for _ in range(5):
        while True:
            center = tuple(rng.uniform(-0.5, 0.5, 2))
            r = rng.uniform(0.2, 0.8)
            loop = CircleLoop(center, r, int(rng.choice([-1, 1])))
            if loop.min_distance_to_origin() > 0.1:
                break
        c = chern_plaquette(loop, P0)
        assert abs(bulk_pump_charge(loop, P0) - c) < 1e-2


def test_adiabatic_current_is_real():
    _, j = adiabatic_current(ENCLOSING, P0, -1, 64, 64)
    assert np.abs(j.imag).max() < 1e-12
