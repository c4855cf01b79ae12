import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boussinesq_couette.solver import (
    CFLViolation,
    Grid,
    NumericalAbort,
    SimConfig,
    SimState,
    Simulation,
    SpectralField,
    gevrey_weight,
    init_gaussian,
    init_perturbation,
    phi_functions,
    read_snapshot,
    run,
    velocity_from_vorticity,
    write_snapshot,
)

SMALL = dict(Nx=32, Ny=32, Ly=4.0)


def l2(c, grid):
    """Plancherel norm of half-spectrum coefficients."""
    w = np.full(c.shape[1], 2.0)
    w[0] = w[-1] = 1.0
    return math.sqrt(float(np.sum(w * np.abs(c) ** 2)) / grid.Ly)


# --- grid and transforms ---------------------------------------------------


@pytest.mark.parametrize("kw", [dict(Nx=48), dict(Ny=100), dict(Ly=3.0), dict(dealias_fraction=0.0)])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        Grid(**kw)


def test_lattice():
    g = Grid(16, 32, 4.0)
    assert g.k.min() == -8 and g.k.max() == 7
    assert np.allclose(np.diff(g.eta_half), 0.25)
    assert g.eta_full.min() == -32 / (2 * 4.0)


def test_single_mode_coefficient():
    g = Grid(16, 16, 4.0)
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    c = g.to_spectral(np.cos(X + Y / g.Ly))
    # (1/2pi) int int cos(x + y/Ly) e^{-i(x + y/Ly)} = pi Ly
    assert c[1, 1] == pytest.approx(math.pi * g.Ly, rel=1e-13)
    c[1, 1] = 0
    assert np.max(np.abs(c)) < 1e-12


def test_plancherel_and_roundtrip():
    g = Grid(16, 32, 4.0)
    f = np.random.default_rng(0).standard_normal((g.Nx, g.Ny))
    c = g.to_spectral(f)
    np.testing.assert_allclose(g.to_physical(c), f, atol=1e-13)
    assert l2(c, g) ** 2 == pytest.approx(np.sum(f**2) * g.dx * g.dy, rel=1e-12)


def test_full_half_roundtrip_and_symmetry():
    g = Grid(16, 16, 4.0)
    c = g.to_spectral(np.random.default_rng(1).standard_normal((16, 16)))
    full = g.full_from_half(c)
    assert SpectralField(full, g).conjugate_defect() < 1e-14
    np.testing.assert_array_equal(g.half_from_full(full), c)


# --- configuration ----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(gamma=0.0, system="NSB3")
    with pytest.raises(ValueError):
        SimConfig(epsilon=-1.0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    assert SimConfig(gamma=0.0, system="NSB4").gamma1 == 0


# --- initial data -----------------------------------------------------------


def test_init_zero_amplitude():
    cfg = SimConfig(epsilon=0.0, **SMALL)
    s = init_perturbation(cfg.grid, cfg)
    assert not s.omega.any() and not s.theta.any()


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_init_normalization_and_means(seed):
    cfg = SimConfig(epsilon=1e-3, seed=seed, **SMALL)
    g = cfg.grid
    s = init_perturbation(g, cfg)
    w = gevrey_weight(g, cfg.lambda0, cfg.s_norm) ** 2
    total = (l2(s.omega * np.sqrt(w), g) ** 2 + l2(s.theta * np.sqrt(w), g) ** 2)
    assert math.sqrt(total) == pytest.approx(1e-3, rel=1e-12)
    assert s.omega[0, 0] == 0 and s.theta[0, 0] == 0
    assert s.omega_hat.conjugate_defect() == 0.0


def test_init_seeded():
    cfg = SimConfig(**SMALL)
    a = init_perturbation(cfg.grid, cfg)
    b = init_perturbation(cfg.grid, cfg)
    c = init_perturbation(cfg.grid, SimConfig(seed=1, **SMALL))
    np.testing.assert_array_equal(a.omega, b.omega)
    assert not np.allclose(a.omega, c.omega)


def test_init_shared_across_resolutions():
    # same underlying phases on both lattices, up to the normalization constant
    a_cfg = SimConfig(Nx=32, Ny=32, Ly=4.0)
    b_cfg = SimConfig(Nx=64, Ny=64, Ly=4.0)
    a = init_perturbation(a_cfg.grid, a_cfg)
    b = init_perturbation(b_cfg.grid, b_cfg)
    ra = a.omega[1, 1:5]
    rb = b.omega[1, 1:5]
    np.testing.assert_allclose(ra / ra[0], rb / rb[0], rtol=1e-12)


# --- kinematics ---------------------------------------------------------------


def test_velocity_single_mode():
    g = Grid(16, 16, 4.0)
    w = np.zeros((16, 9), complex)
    w[1, 0] = 0.3 + 0.4j
    ux, uy = velocity_from_vorticity(w, 0.0, g)
    psi = -w[1, 0]
    assert ux[1, 0] == 0 and uy[1, 0] == pytest.approx(1j * psi)
    assert np.count_nonzero(ux) == 0 and np.count_nonzero(uy) == 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 60.0), st.integers(0, 2**31))
def test_velocity_divergence_free_and_bounded(t, seed):
    g = Grid(32, 32, 4.0)
    rng = np.random.default_rng(seed)
    w = g.to_spectral(rng.standard_normal((32, 32)))
    w[0, 0] = 0
    ux, uy = velocity_from_vorticity(SpectralField.from_half(w, g, t), t)
    kk, ee = g.mesh(False)
    div = np.abs(1j * kk * ux + 1j * (ee - kk * t) * uy)
    unorm = math.sqrt(l2(g.half_from_full(ux), g) ** 2 + l2(g.half_from_full(uy), g) ** 2)
    assert div.max() <= 1e-13 * unorm
    # ||u|| <= ||omega|| needs |k, eta~| >= 1 on the lattice, true for k != 0;
    # the k = 0 row has |u^| = |omega^|/|eta| with |eta| >= 1/Ly
    w_nz = w.copy()
    w_nz[0, :] = 0
    ux, uy = velocity_from_vorticity(w_nz, t, g)
    assert math.hypot(l2(ux, g), l2(uy, g)) <= l2(w_nz, g) * (1 + 1e-12)


# --- time stepping ------------------------------------------------------------


def test_phi_functions():
    z = np.array([0.0, 1e-8, -0.5, 0.999, 1.001, -3.0, -40.0, 2 + 1j])
    p1, p2, p3 = phi_functions(z)
    assert (p1[0], p2[0], p3[0]) == (1.0, 0.5, pytest.approx(1 / 6))
    big = np.abs(z) > 0.5
    zb = z[big]
    e = np.exp(zb)
    np.testing.assert_allclose(p1[big], (e - 1) / zb, rtol=1e-12)
    np.testing.assert_allclose(p2[big], (e - 1 - zb) / zb**2, rtol=1e-10)
    np.testing.assert_allclose(p3[big], (e - 1 - zb - zb**2 / 2) / zb**3, rtol=1e-8)


def test_zero_state_is_equilibrium():
    cfg = SimConfig(epsilon=0.0, T=2.0, **SMALL)
    states = list(run(cfg))
    assert all(not s.omega.any() and not s.theta.any() for s in states)


def test_navier_stokes_vorticity_non_increasing():
    cfg = SimConfig(nu=1.0, gamma=0.0, system="NSB4", epsilon=0.5, T=3.0, dt=0.02, **SMALL)
    g = cfg.grid
    s0 = init_perturbation(g, cfg)
    s0 = SimState(s0.omega, np.zeros_like(s0.theta), 0.0, g)
    sim = Simulation(cfg, g)
    norms = [l2(s0.omega, g)]
    s = s0
    for _ in range(150):
        s = sim.step(s)
        norms.append(l2(s.omega, g))
        assert not s.theta.any()
    assert np.all(np.diff(norms) <= 0)


def test_step_invariants():
    cfg = SimConfig(epsilon=0.5, T=1.0, **SMALL)
    g = cfg.grid
    sim = Simulation(cfg, g)
    s = init_perturbation(g, cfg)
    for _ in range(20):
        s = sim.step(s)
        assert s.omega[0, 0] == 0 and s.theta[0, 0] == 0
        assert s.omega_hat.conjugate_defect() < 1e-15 * l2(s.omega, g)
        assert not s.omega[~g.dealias_mask()].any()


def test_dealias_projection_idempotent():
    cfg = SimConfig(**SMALL)
    sim = Simulation(cfg)
    c = cfg.grid.to_spectral(np.random.default_rng(0).standard_normal((32, 32)))
    once = sim._project(c)
    np.testing.assert_array_equal(sim._project(once), once)


def test_temporal_order():
    cfg = SimConfig(epsilon=2.0, T=2.0, nu=1.0, gamma=1.0, **SMALL)
    g = cfg.grid
    s0 = init_perturbation(g, cfg)

    def final(dt):
        sim = Simulation(cfg, g)
        s = s0
        for _ in range(int(round(cfg.T / dt))):
            s = sim.step(s, dt)
        return s.omega

    ref = final(0.0125)
    errs = [l2(final(dt) - ref, g) for dt in (0.2, 0.1, 0.05)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.5), orders


def test_cfl_violation_reports_dt():
    cfg = SimConfig(epsilon=1e4, dt=0.5, **SMALL)
    s = init_perturbation(cfg.grid, cfg)
    with pytest.raises(CFLViolation) as exc:
        Simulation(cfg).step(s)
    assert 0 < exc.value.suggested_dt < 0.5


def test_nan_aborts():
    cfg = SimConfig(**SMALL)
    s = init_perturbation(cfg.grid, cfg)
    s.theta[2, 3] = np.nan
    with pytest.raises(NumericalAbort) as exc:
        Simulation(cfg).step(s)
    assert exc.value.t == pytest.approx(cfg.dt)


# --- driver and snapshots -----------------------------------------------------


def test_run_horizon_zero():
    cfg = SimConfig(T=0.0, **SMALL)
    states = list(run(cfg))
    assert len(states) == 1
    np.testing.assert_array_equal(states[0].omega, init_perturbation(cfg.grid, cfg).omega)


def test_run_deterministic_and_sampled():
    cfg = SimConfig(T=2.0, epsilon=0.1, sample_every=0.5, **SMALL)
    a = list(run(cfg))
    b = list(run(cfg))
    assert [s.t for s in a] == pytest.approx([0, 0.5, 1.0, 1.5, 2.0])
    for x, y in zip(a, b):
        assert x.omega.tobytes() == y.omega.tobytes() and x.theta.tobytes() == y.theta.tobytes()


def test_snapshot_roundtrip(tmp_path):
    cfg = SimConfig(**SMALL)
    s = init_perturbation(cfg.grid, cfg)
    s.t = 3.25
    p = tmp_path / "s.cblb"
    write_snapshot(p, s)
    assert p.stat().st_size == 32 + 2 * 32 * 32 * 16
    r = read_snapshot(p)
    assert r.t == 3.25 and r.grid == s.grid
    np.testing.assert_array_equal(r.omega, s.omega)
    np.testing.assert_array_equal(r.theta, s.theta)


def test_snapshot_rejects_bad_files(tmp_path):
    cfg = SimConfig(**SMALL)
    s = init_perturbation(cfg.grid, cfg)
    p = tmp_path / "s.cblb"
    write_snapshot(p, s)
    raw = p.read_bytes()
    (tmp_path / "magic.cblb").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "short.cblb").write_bytes(raw[:-16])
    (tmp_path / "head.cblb").write_bytes(raw[:10])
    for name, msg in (("magic", "magic"), ("short", "expected"), ("head", "truncated")):
        with pytest.raises(ValueError, match=msg):
            read_snapshot(tmp_path / f"{name}.cblb")


@pytest.mark.slow
def test_doubling_the_box_is_innocuous():
    def norms(Ly, Ny):
        cfg = SimConfig(epsilon=0.05, T=20.0, Nx=32, Ny=Ny, Ly=Ly, sample_every=20.0)
        g = cfg.grid
        s = list(run(cfg, g, init_gaussian(g, cfg)))[-1]
        return np.array([l2(s.omega, g), l2(s.theta, g)])

    a, b = norms(8.0, 128), norms(16.0, 256)
    assert np.max(np.abs(a - b) / a) < 0.01
