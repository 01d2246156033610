import numpy as np
import pytest
from hypothesis import given, strategies as st

from kerrdg import FieldState, Material, cavity_mode
from kerrdg.diagnostics import discrete_energy_rate_identity
from kerrdg.fields import extract_traces
from kerrdg.projection import project_2d
from kerrdg.spatial import (
    FluxConfig, boundary_penalty, boundary_trace_integrals, compute_fluxes, curl_residual,
    electric_flux_only, magnetic_flux_only, penalty_matrix, semidiscrete_residual,
)

from conftest import random_state, unit_disc


def _const(disc, v):
    return project_2d(3, lambda x, y: v + 0 * x, disc)


def test_constant_h_gives_constant_flux():
    disc = unit_disc(3, 1)
    s = FieldState(disc.zeros(), disc.zeros(), _const(disc, 1.0))
    fl = compute_fluxes(extract_traces(s, disc), FluxConfig(0.0))
    np.testing.assert_allclose(fl.hz_hat_v, 1.0, atol=1e-13)
    np.testing.assert_allclose(fl.hz_hat_h, 1.0, atol=1e-13)


def test_bottom_penalty_example():
    disc = unit_disc(2, 1)
    s = FieldState(_const(disc, 2.0), disc.zeros(), _const(disc, 3.0))
    fl = compute_fluxes(extract_traces(s, disc), FluxConfig(0.5))
    np.testing.assert_allclose(fl.hz_hat_h[:, 0], 4.0, atol=1e-13)


def test_half_penalty_is_upwind_with_mirror_ghost(rng):
    # upwind: H^ = {H} + [E]/2 with ghost H- = H+ and ghost tangential E- = 0 (PEC)
    disc = unit_disc(2, 2)
    s = random_state(disc, rng)
    tr = extract_traces(s, disc)
    fl = compute_fluxes(tr, FluxConfig(0.5))
    hp, ep = tr.hz_plus_h[:, 0], tr.ex_plus[:, 0]
    np.testing.assert_allclose(fl.hz_hat_h[:, 0], 0.5 * (hp + hp) + 0.5 * (ep - 0.0), atol=1e-14)


def test_flux_single_valued_on_interior_faces(rng):
    disc = unit_disc(3, 2)
    fl = compute_fluxes(extract_traces(random_state(disc, rng), disc), FluxConfig(0.7))
    # one array per face means both neighbours read the same value; check no NaN leaked in
    for a in (fl.ey_hat, fl.ex_hat, fl.hz_hat_v, fl.hz_hat_h):
        assert np.isfinite(a).all()
    np.testing.assert_array_equal(fl.ey_hat[[0, -1]], 0.0)
    np.testing.assert_array_equal(fl.ex_hat[:, [0, -1]], 0.0)


def test_flux_only_paths_match_full(rng):
    disc = unit_disc(3, 2)
    s = random_state(disc, rng)
    full = compute_fluxes(extract_traces(s, disc), FluxConfig(0.0))
    h = magnetic_flux_only(s.Hz, disc)
    e = electric_flux_only(s.Ex, s.Ey, disc)
    np.testing.assert_allclose(h.hz_hat_v, full.hz_hat_v, atol=1e-14)
    np.testing.assert_allclose(h.hz_hat_h, full.hz_hat_h, atol=1e-14)
    np.testing.assert_allclose(e.ey_hat, full.ey_hat, atol=1e-14)
    np.testing.assert_allclose(e.ex_hat, full.ex_hat, atol=1e-14)


def test_zero_state_zero_residual():
    disc = unit_disc(2, 1)
    r = semidiscrete_residual(FieldState.zeros(disc), disc, FluxConfig(0.5))
    assert not (r.rx.any() or r.ry.any() or r.rz.any())


def test_linear_h_gives_load_of_one():
    disc = unit_disc(3, 2)
    s = FieldState(disc.zeros(), disc.zeros(), project_2d(3, lambda x, y: y, disc))
    r = semidiscrete_residual(s, disc, FluxConfig(0.0))
    X, _ = disc.points()
    np.testing.assert_allclose(r.rx, disc.load(np.ones_like(X)), atol=1e-13)
    np.testing.assert_allclose(r.ry, 0.0, atol=1e-13)


def test_cavity_curl_residual_converges():
    sc = cavity_mode(1, 1)
    t = 0.3
    errs = []
    for n in (4, 8, 16):
        disc = unit_disc(n, 1)
        s = FieldState(*(project_2d(w, lambda x, y, c=c: sc.exact(x, y, t)[c], disc)
                         for c, w in enumerate((1, 2, 3))))
        rz = semidiscrete_residual(s, disc, FluxConfig(0.0)).rz
        # mu0 dH/dt = d_y E_x - d_x E_y = -omega sin(omega t) cos cos
        w = sc.params["omega"]
        X, Y = disc.points()
        want = disc.load(-w * np.sin(w * t) * np.cos(np.pi * X) * np.cos(np.pi * Y))
        errs.append(np.sqrt(np.sum((rz - want) ** 2 / disc.jac[:, :, None, None])))
    assert np.log2(errs[1] / errs[2]) >= 1.0


def test_skew_symmetry_without_penalty(rng):
    disc = unit_disc(4, 2)
    s = random_state(disc, rng)
    r = semidiscrete_residual(s, disc, FluxConfig(0.0))
    power = np.sum(r.rx * s.Ex) + np.sum(r.ry * s.Ey) + np.sum(r.rz * s.Hz)
    scale = np.sum(np.abs(r.rx * s.Ex)) + np.sum(np.abs(r.ry * s.Ey)) + np.sum(np.abs(r.rz * s.Hz))
    assert abs(power) <= 1e-11 * scale


@pytest.mark.parametrize("c0", [0.3, 1.0])
def test_penalty_power(rng, c0):
    disc = unit_disc(4, 2)
    s = random_state(disc, rng)
    r = semidiscrete_residual(s, disc, FluxConfig(c0))
    power = np.sum(r.rx * s.Ex) + np.sum(r.ry * s.Ey) + np.sum(r.rz * s.Hz)
    want = -c0 * boundary_trace_integrals(s.Ex, s.Ey, disc)
    assert power == pytest.approx(want, rel=1e-11)


def test_penalty_vector_and_matrix_agree(rng):
    disc = unit_disc(3, 2)
    s = random_state(disc, rng)
    r0 = semidiscrete_residual(s, disc, FluxConfig(0.0))
    r1 = semidiscrete_residual(s, disc, FluxConfig(0.8))
    px, py = boundary_penalty(s.Ex, s.Ey, disc, 0.8)
    np.testing.assert_allclose(r0.rx - px, r1.rx, atol=1e-13)
    np.testing.assert_allclose(r0.ry - py, r1.ry, atol=1e-13)
    P = penalty_matrix(disc, 0.8)
    u = np.concatenate([s.Ex.reshape(3, 3, -1), s.Ey.reshape(3, 3, -1)], axis=-1)
    pu = np.einsum("ijnp,ijp->ijn", P, u)
    np.testing.assert_allclose(pu[..., :9].reshape(s.Ex.shape), px, atol=1e-13)
    np.testing.assert_allclose(pu[..., 9:].reshape(s.Ey.shape), py, atol=1e-13)


def test_rejects_negative_penalty():
    with pytest.raises(ValueError):
        FluxConfig(-0.1)


def test_energy_rate_identity_zero_state():
    disc = unit_disc(2, 1)
    mat = Material(chi3=1.0).on(disc)
    assert discrete_energy_rate_identity(FieldState.zeros(disc), FluxConfig(0.5), mat, disc) == (0.0, 0.0, 0.0)


@given(st.integers(0, 10**6), st.sampled_from([0.0, 0.5, 1.0]), st.floats(0.0, 2.0), st.booleans())
def test_energy_rate_identity_random(seed, c0, chi3, with_source):
    rng = np.random.default_rng(seed)
    disc = unit_disc(3, 2)
    mat = Material(1.3, lambda x, y: 1 + 0.5 * x, lambda x, y: 0.2 * y, chi3).on(disc)
    s = random_state(disc, rng, 0.5)
    X, _ = disc.points()
    jx = rng.standard_normal(X.shape) if with_source else None
    jy = rng.standard_normal(X.shape) if with_source else None
    lhs, diss, power = discrete_energy_rate_identity(s, FluxConfig(c0), mat, disc, jx, jy)
    scale = abs(lhs) + abs(diss) + abs(power) + 1.0
    assert abs(lhs + diss - power) <= 1e-10 * scale
