"""Norms, weighted energies, CK terms and coordinate-change diagnostics.

Everything here consumes solver states (sheared-frame coefficients) and the
zero-mode history recorded during a run; nothing feeds back into the solver.

Weighted sums are done in log space: the multiplier ``A`` overflows doubles
for moderate frequencies, so per-mode exponents are combined with a shifted
``exp`` and only the final number has to be representable.

Energies and CK terms are evaluated on a fixed frequency window
``|k| <= k_window, |eta| <= eta_window`` (the same physical band at every
resolution).  Outside it the weighted sums are governed by roundoff in the
coefficients rather than by the solution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import interpolate

from .fitting import decay_fit
from .solver import Grid, SimState, SpectralField, stream_function
from .weights import (
    WeightParams,
    b_cutoff,
    dlambda_dt,
    lambda_of_t,
    log_B,
    log_g,
    log_J,
    log_M,
    log_theta,
)

__all__ = [
    "WeightOverflow",
    "DiagnosticsConfig",
    "DiagnosticsRecord",
    "CKTerms",
    "CoordinateState",
    "ZeroModeHistory",
    "gevrey_norm",
    "good_unknown_hat",
    "main_energy",
    "ck_terms",
    "nonzero_norms",
    "shift_profile",
    "scattering_residual",
    "extrapolate_profile",
    "coordinate_quantities",
    "consistency_residual",
    "coordinate_energy",
    "low_energies",
    "diagnose_run",
    "write_records",
    "collect_run",
    "RECORD_HEADER",
]


class WeightOverflow(OverflowError):
    def __init__(self, what, mode):
        super().__init__(f"{what} overflows double precision; dominant mode (k, eta) = {mode}")
        self.mode = mode


def run_weights() -> WeightParams:
    """Milder weights used on simulation output (``delta_L = delta_B = 1``)."""
    return WeightParams(delta_L=1.0, delta_B=1.0)


@dataclass(frozen=True)
class DiagnosticsConfig:
    weights: WeightParams = field(default_factory=run_weights)
    k_window: int = 16
    eta_window: float = 4.0
    scatter_lambda: float | None = None  # defaults to weights.lambda_prime
    scatter_s: float | None = None  # defaults to weights.s
    fit_window: tuple = (5.0, 50.0)

    def __post_init__(self):
        if self.k_window < 1 or self.eta_window <= 0:
            raise ValueError("spectral window must be non-empty")


# ---------------------------------------------------------------------------
# lattice helpers
# ---------------------------------------------------------------------------


def _as_lattice(field_or_array, grid=None):
    """``(coef, grid, half, kk, ee, multiplicity)`` for a field on either lattice."""
    if isinstance(field_or_array, SpectralField):
        coef, grid = field_or_array.coefficients, field_or_array.grid
    else:
        coef = np.asarray(field_or_array)
        if grid is None:
            raise ValueError("grid is required for raw coefficient arrays")
    half = coef.shape[1] != grid.Ny
    kk, ee = grid.mesh(half)
    if half:
        mult = np.full(coef.shape[1], 2.0)
        mult[0] = 1.0
        if grid.Ny % 2 == 0:
            mult[-1] = 1.0
        mult = np.broadcast_to(mult[None, :], coef.shape)
    else:
        mult = np.ones(coef.shape)
    return coef, grid, half, kk, ee, mult


def _log_sum(log_terms, mult, kk, ee, what):
    """``log sum mult * exp(log_terms)`` with overflow reporting."""
    finite = np.isfinite(log_terms)
    if not finite.any():
        return -math.inf
    m = float(np.max(log_terms[finite]))
    s = float(np.sum(mult[finite] * np.exp(log_terms[finite] - m)))
    val = m + math.log(s)
    if val > 709.0:
        i = np.unravel_index(np.argmax(np.where(finite, log_terms, -np.inf)), log_terms.shape)
        raise WeightOverflow(what, (int(kk[i]), float(ee[i])))
    return val


def _log_abs2(c):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(c) ** 2)


def gevrey_norm(field, lam, sigma, s, grid=None, window=None):
    """``sqrt((1/Ly) sum |g^|^2 e^{2 lam |k,eta|^s} <k,eta>^{2 sigma})``.

    ``|k, eta| = |k| + |eta|`` and ``<k, eta> = (1 + k^2 + eta^2)^{1/2}``.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    coef, grid, half, kk, ee, mult = _as_lattice(field, grid)
    logw = 2 * lam * (np.abs(kk) + np.abs(ee)) ** s + sigma * np.log1p(kk * kk + ee * ee)
    terms = _log_abs2(coef) + logw
    if window is not None:
        terms = np.where(window(kk, ee), terms, -np.inf)
    ls = _log_sum(terms, mult, kk, ee, "Gevrey norm")
    return math.exp(0.5 * (ls - math.log(grid.Ly))) if np.isfinite(ls) else 0.0


# ---------------------------------------------------------------------------
# weights on the lattice
# ---------------------------------------------------------------------------


@dataclass
class _LatticeWeights:
    t: float
    sel: np.ndarray  # boolean mask of windowed modes (same shape as the field)
    k: np.ndarray  # windowed k
    eta: np.ndarray  # windowed eta
    mult: np.ndarray
    log_A: np.ndarray
    log_A_theta: np.ndarray  # A~ of the Theta CK term
    log_A_g: np.ndarray  # A~~ of the g CK term
    dlog_theta: np.ndarray
    dlog_g: np.ndarray
    b_rate: np.ndarray  # b / (delta_B (1 + (t - eta/k)^2))
    lam_dot: float


def _lattice_weights(t, grid: Grid, p: WeightParams, half=True, k_window=None,
                     eta_window=None) -> _LatticeWeights:
    kk, ee = grid.mesh(half)
    sel = np.ones(kk.shape, bool)
    if k_window is not None:
        sel &= np.abs(kk) <= k_window
    if eta_window is not None:
        sel &= np.abs(ee) <= eta_window
    k = kk[sel].astype(int)
    eta = ee[sel]
    _, _, _, _, _, mult = _as_lattice(np.zeros(kk.shape, complex), grid)
    lam = float(lambda_of_t(t, p))
    lth, dth = log_theta(t, k, eta, p)
    lg, dg = log_g(t, eta, p)
    lJ = log_J(t, k, eta, p, log_theta_value=lth)
    lM = log_M(t, k, eta, p, log_g_value=lg)
    lB = log_B(t, k, eta, p)
    ak = np.abs(k).astype(float)
    base = lam * (ak + np.abs(eta)) ** p.s + 0.5 * p.sigma * np.log1p(ak * ak + eta * eta)
    e13 = np.cbrt(np.abs(eta))
    with np.errstate(divide="ignore", invalid="ignore"):
        lor = np.where(k != 0, 1.0 / (1.0 + (t - eta / np.where(k != 0, k, 1)) ** 2), 0.0)
    b = np.asarray(b_cutoff(t, k, eta))
    return _LatticeWeights(
        t=t, sel=sel, k=k, eta=eta, mult=mult[sel],
        log_A=base + lJ + lM + lB,
        log_A_theta=base + p.mu * e13 - lth + lM + lB,
        log_A_g=base + p.m_rate * e13 - lg + lJ + lB,
        dlog_theta=dth, dlog_g=dg, b_rate=b * lor / p.delta_B,
        lam_dot=float(dlambda_dt(t, p)),
    )


def _weighted(w: _LatticeWeights, log_abs2, log_factor, what, grid, rate=None):
    """``(1/Ly) sum rate * exp(log_abs2 + log_factor)`` over the window."""
    terms = log_abs2 + log_factor
    mult = w.mult
    if rate is not None:
        if np.any(rate < 0):
            raise AssertionError(f"{what}: negative rate")
        with np.errstate(divide="ignore"):
            terms = terms + np.log(rate)
    ls = _log_sum(terms, mult, w.k, w.eta, what)
    return math.exp(ls) / grid.Ly if np.isfinite(ls) else 0.0


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------


def good_unknown_hat(state: SimState, gamma_sq):
    """``K = -gamma^2 d_z rho + Delta_L f`` on the half lattice at ``state.t``."""
    kk, ee = state.grid.mesh(True)
    et = ee - kk * state.t
    return -gamma_sq * 1j * kk * state.theta - (kk * kk + et * et) * state.omega


def good_unknown_corrected(state: SimState, gamma_sq, h_y):
    """``K`` with ``Delta_t`` in place of ``Delta_L``.

    ``h_y`` is ``d_y v - 1`` on the solver's y grid; the coefficients are used
    as if ``v = y`` (the difference is second order in the perturbation).
    ``Delta_t - Delta_L = ((v')^2 - 1) D^2 + v'' D`` with ``D = d_v - t d_z``.
    """
    g = state.grid
    kk, ee = g.mesh(True)
    et = ee - kk * state.t
    D1 = g.to_physical(1j * et * state.omega)
    D2 = g.to_physical(-(et * et) * state.omega)
    vp = 1.0 + h_y
    vpp = _dy(h_y, g)
    corr = g.to_spectral((vp * vp - 1.0)[None, :] * D2 + vpp[None, :] * D1)
    return good_unknown_hat(state, gamma_sq) + corr * g.dealias_mask(True)


def main_energy(K_hat, rho_hat, t, p: WeightParams, grid=None, k_window=None,
                eta_window=None):
    """``E = 1/2 ||A K||^2 + 1/2 ||A rho||^2``."""
    cK, grid, half, *_ = _as_lattice(K_hat, grid)
    cR, *_ = _as_lattice(rho_hat, grid)
    w = _lattice_weights(t, grid, p, half, k_window, eta_window)
    eK = _weighted(w, _log_abs2(cK[w.sel]), 2 * w.log_A, "A K", grid)
    eR = _weighted(w, _log_abs2(cR[w.sel]), 2 * w.log_A, "A rho", grid)
    return 0.5 * (eK + eR)


@dataclass(frozen=True)
class CKTerms:
    lam: float
    theta: float
    M: float
    B: float

    @property
    def total(self):
        return self.lam + self.theta + self.M + self.B


def _ck_from_weights(c, w: _LatticeWeights, grid, s):
    la2 = _log_abs2(c[w.sel])
    nabla = (w.k.astype(float) ** 2 + w.eta**2) ** (0.5 * s)
    ck_l = -w.lam_dot * _weighted(w, la2, 2 * w.log_A, "CK_lambda", grid, rate=nabla)
    ck_t = _weighted(w, la2, w.log_A_theta + w.log_A, "CK_Theta", grid,
                     rate=np.maximum(w.dlog_theta, 0.0))
    ck_m = _weighted(w, la2, w.log_A_g + w.log_A, "CK_M", grid,
                     rate=np.maximum(w.dlog_g, 0.0))
    ck_b = _weighted(w, la2, 2 * w.log_A, "CK_B", grid, rate=w.b_rate)
    return CKTerms(ck_l + 0.0, ck_t, ck_m, ck_b)


def ck_terms(phi_hat, t, p: WeightParams, grid=None, k_window=None, eta_window=None):
    """``(CK_lambda, CK_Theta, CK_M, CK_B)`` for ``phi`` in ``{K, rho}``.

    The rates ``d_t log Theta`` and ``d_t log g`` are the one-sided (right)
    values at junction points.
    """
    c, grid, half, *_ = _as_lattice(phi_hat, grid)
    w = _lattice_weights(t, grid, p, half, k_window, eta_window)
    if np.any(w.dlog_theta < 0) or np.any(w.dlog_g < 0):
        raise AssertionError("weight rates must be non-negative")
    return _ck_from_weights(c, w, grid, p.s)


def nonzero_norms(state: SimState):
    """``(||omega_!=||, ||u^x_!=||, ||u^y||, ||theta_!=||)`` in ``L^2``."""
    g = state.grid
    coef, _, _, kk, ee, mult = _as_lattice(state.omega, g)
    et = ee - kk * state.t
    psi = stream_function(state.omega, g, state.t)
    nz = kk != 0

    def l2(a):
        return math.sqrt(float(np.sum(mult * np.abs(a) ** 2)) / g.Ly)

    return (l2(state.omega * nz), l2(et * psi * nz), l2(kk * psi), l2(state.theta * nz))


# ---------------------------------------------------------------------------
# zero modes (1-D fields on the y grid)
# ---------------------------------------------------------------------------


def _row_to_profile(row, grid: Grid):
    """x-average ``(1/2pi) int g dx`` on the y grid from the ``k = 0`` row."""
    return np.fft.irfft(row * grid.y_phase()[0], n=grid.Ny) * grid.Ny / (2 * np.pi * grid.Ly)


def _profile_to_row(prof, grid: Grid):
    return np.fft.rfft(prof) * grid.y_phase()[0] * (2 * np.pi * grid.Ly / grid.Ny)


def _dy(prof, grid: Grid, order=1):
    eta = grid.eta_half
    c = np.fft.rfft(prof)
    d = c * (1j * eta) ** order
    if grid.Ny % 2 == 0 and order % 2 == 1:
        d[-1] = 0.0
    return np.fft.irfft(d, n=grid.Ny)


def _l2_1d(prof, grid: Grid):
    return math.sqrt(float(np.sum(prof * prof)) * grid.dy)


@dataclass
class ZeroModeHistory:
    """``k = 0`` vorticity coefficients after every step (half lattice)."""

    grid: Grid
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def record(self, state: SimState):
        self.times.append(float(state.t))
        self.rows.append(state.omega[0].copy())

    __call__ = record

    @property
    def t(self):
        return np.asarray(self.times)

    def omega0(self):
        return np.array([_row_to_profile(r, self.grid) for r in self.rows])

    def psi0(self):
        eta = self.grid.eta_half
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(eta != 0, -1.0 / np.where(eta != 0, eta, 1.0) ** 2, 0.0)
        return np.array([_row_to_profile(r * inv, self.grid) for r in self.rows])

    def ux0(self):
        """``<u^x> = -d_y psi_0`` (so ``u^ = i omega^ / eta`` on the zero row)."""
        eta = self.grid.eta_half
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(eta != 0, 1j / np.where(eta != 0, eta, 1.0), 0.0)
        return np.array([_row_to_profile(r * m, self.grid) for r in self.rows])

    def save(self, path):
        np.savez(path, t=self.t, rows=np.asarray(self.rows), Nx=self.grid.Nx,
                 Ny=self.grid.Ny, Ly=self.grid.Ly)

    @classmethod
    def load(cls, path):
        d = np.load(path)
        g = Grid(int(d["Nx"]), int(d["Ny"]), float(d["Ly"]))
        return cls(g, list(d["t"]), list(d["rows"]))

    @classmethod
    def from_states(cls, states):
        states = list(states)
        if not states:
            raise ValueError("no states")
        h = cls(states[0].grid)
        for s in states:
            h.record(s)
        return h


def shift_profile(times, ux_history, max_gap_factor=4.0):
    """``Phi(t_n, y) = int_0^{t_n} <u^x>(tau, y) d tau`` by the trapezoid rule.

    ``times`` must start at 0 and increase; a step larger than
    ``max_gap_factor`` times the median step is treated as a gap.
    """
    t = np.asarray(times, float)
    u = np.asarray(ux_history, float)
    if t.ndim != 1 or t.size == 0 or u.shape[0] != t.size:
        raise ValueError("times and history must align")
    if abs(t[0]) > 1e-12:
        raise ValueError("history must start at t = 0")
    if t.size == 1:
        return np.zeros_like(u)
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("times must be strictly increasing")
    if np.max(dt) > max_gap_factor * np.median(dt):
        raise ValueError(f"gap in history: step {np.max(dt):.3g} vs median {np.median(dt):.3g}")
    shape = (-1,) + (1,) * (u.ndim - 1)
    inc = 0.5 * dt.reshape(shape) * (u[1:] + u[:-1])
    return np.concatenate([np.zeros_like(u[:1]), np.cumsum(inc, axis=0)])


@dataclass
class CoordinateState:
    """Coordinate-change fields at one time.

    ``h``, ``g_shift`` and ``f0`` are sampled on the v grid (numerically the
    same points as the y grid); ``psi0``, ``ux0``, ``omega0`` and ``h_y`` are
    functions of y.
    """

    t: float
    v: np.ndarray  # v(t, y_j)
    h: np.ndarray  # v' - 1 at v = y_j
    g_shift: np.ndarray  # d_t v at v = y_j
    f0: np.ndarray  # omega_0 at v = y_j
    psi0: np.ndarray
    ux0: np.ndarray
    omega0: np.ndarray
    h_y: np.ndarray  # d_y v - 1 at y_j
    Phi: np.ndarray

    @property
    def v_prime_minus_1(self):
        return self.h


def _to_v_grid(v, values, grid: Grid):
    """Resample ``values(y_j)`` at the points ``v = y_j`` (v - y periodic)."""
    period = 2 * np.pi * grid.Ly
    y = grid.y
    if np.allclose(v, y, atol=0, rtol=0):
        return values.copy()
    if np.any(np.diff(v) <= 0):
        raise ValueError("v(t, .) is not monotone; coordinate change breaks down")
    xs = np.concatenate([v, [v[0] + period]])
    ys = np.concatenate([values, [values[0]]])
    spl = interpolate.CubicSpline(xs, ys, bc_type="periodic")
    target = (y - xs[0]) % period + xs[0]
    return spl(target)


def coordinate_quantities(history: ZeroModeHistory):
    """Series of :class:`CoordinateState` from the zero-mode history.

    ``v = y + Phi/t``, ``h = d_y v - 1 = d_y Phi / t``,
    ``g = d_t v = (1/t^2) int_0^t s d_t u_0 ds = u_0/t - Phi/t^2`` (the last
    form is the first after one integration by parts).  At ``t = 0`` the
    limits ``v = y + u_0``, ``h = d_y u_0`` and ``g = (1/2) d_t u_0`` are used.
    """
    g = history.grid
    t = history.t
    w0 = history.omega0()
    p0 = history.psi0()
    u0 = history.ux0()
    Phi = shift_profile(t, u0)
    out = []
    y = g.y
    for n, tn in enumerate(t):
        if tn > 0:
            v = y + Phi[n] / tn
            h_y = _dy(Phi[n], g) / tn
            gs = u0[n] / tn - Phi[n] / tn**2
        else:
            v = y + u0[n]
            h_y = _dy(u0[n], g)
            if len(t) > 2:
                du = (-3 * u0[0] + 4 * u0[1] - u0[2]) / (t[2] - t[0])
            else:
                du = np.zeros_like(u0[0])
            gs = 0.5 * du
        f0 = _to_v_grid(v, w0[n], g)
        h = _to_v_grid(v, h_y, g)
        gv = _to_v_grid(v, gs, g)
        out.append(CoordinateState(float(tn), v, h, gv, f0, p0[n], u0[n], w0[n], h_y, Phi[n]))
    return out


def consistency_residual(coords):
    """``max_n ||d/dt (t h) + omega_0||_2`` by centered differences (y frame)."""
    if len(coords) < 3:
        return 0.0
    grid_dy = coords[0].v[1] - coords[0].v[0] if len(coords[0].v) > 1 else 1.0
    worst = 0.0
    for a, b, c in zip(coords[:-2], coords[1:-1], coords[2:]):
        d = (c.t * c.h_y - a.t * a.h_y) / (c.t - a.t)
        r = d + b.omega0
        worst = max(worst, math.sqrt(float(np.sum(r * r)) * abs(grid_dy)))
    return worst


def hbar_residual(coords):
    """``max_n ||-(omega_0 + h)/t - d_t h||`` (the ``h bar`` relation, y frame)."""
    worst = 0.0
    for a, b, c in zip(coords[:-2], coords[1:-1], coords[2:]):
        if b.t <= 0:
            continue
        lhs = -(b.omega0 + b.h_y) / b.t
        rhs = (c.h_y - a.h_y) / (c.t - a.t)
        r = lhs - rhs
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def coordinate_energy(cs: CoordinateState, grid: Grid, p: WeightParams, eta_window=None):
    """``E_d = 1/2 <t> ||A <d_v>^2 h||_2^2`` (1-D norm in v)."""
    row = _profile_to_row(cs.h, grid)
    w = _lattice_weights(cs.t, grid, p, True, 0, eta_window)
    m = w.sel[0]
    eta = grid.eta_half[m]
    la2 = _log_abs2(row[m]) + 2 * np.log1p(eta * eta)
    terms = la2 + 2 * w.log_A
    mult = w.mult
    ls = _log_sum(terms, mult, w.k, w.eta, "E_d")
    norm2 = math.exp(ls) / (2 * np.pi * grid.Ly) if np.isfinite(ls) else 0.0
    return 0.5 * math.sqrt(1.0 + cs.t**2) * norm2


def _gevrey_1d(prof, grid: Grid, lam, beta, s, deriv=0):
    row = _profile_to_row(prof, grid)
    eta = grid.eta_half
    mult = np.full(row.size, 2.0)
    mult[0] = 1.0
    if grid.Ny % 2 == 0:
        mult[-1] = 1.0
    wt = np.exp(2 * lam * np.abs(eta) ** s) * (1 + eta * eta) ** beta * eta ** (2 * deriv)
    return float(np.sum(mult * wt * np.abs(row) ** 2)) / (2 * np.pi * grid.Ly)


def low_energies(cs: CoordinateState, grid: Grid, p: WeightParams):
    """``(E_lo_f0, E_lo_g, E_lo_h)`` at ``(lambda(t), beta, s)``."""
    lam = float(lambda_of_t(cs.t, p))
    br = 1.0 + cs.t**2
    e_f0 = sum(cs.t**j / 4**j * _gevrey_1d(cs.f0, grid, lam, p.beta, p.s, j) for j in range(4))
    e_g = br**2 * _gevrey_1d(cs.g_shift, grid, lam, p.beta, p.s, 3)
    e_h = br * _gevrey_1d(cs.h, grid, lam, p.beta, p.s, 2)
    return e_f0, e_g, e_h


# ---------------------------------------------------------------------------
# scattering
# ---------------------------------------------------------------------------


@dataclass
class ScatteringResult:
    times: np.ndarray
    residual: np.ndarray
    alias_fraction: np.ndarray  # energy fraction pushed past the dealias cut
    aliased: bool


def profile_coefficients(theta_half, Phi_y, grid: Grid):
    """Coefficients of ``theta(t, x + t y + Phi(t, y), y)``.

    The stored sheared-frame field already is ``theta(t, x + t y, y)``; the
    remaining y-dependent x-shift is a per-row phase ``e^{i k Phi(y)}``.
    """
    full = grid.full_from_half(theta_half) * grid.y_phase(half=False)
    mixed = np.fft.ifft(full, axis=1)
    k = grid.k[:, None]
    shifted = mixed * np.exp(1j * k * np.asarray(Phi_y)[None, :])
    back = np.fft.fft(shifted, axis=1) * grid.y_phase(half=False)
    return back


def extrapolate_profile(times, profiles, tail=0.5):
    """Limit ``theta_inf`` by summing the algebraic tail of the profile increments.

    The increment norms ``||p(t_{n+1}) - p(t_n)|| / dt`` over ``t >= tail * T``
    are fitted to ``t^{-p}``; for ``p > 1`` the remainder
    ``int_T^inf dp/dt = (dp/dt)(T) T / (p - 1)`` is added to the final profile
    along the last increment.  Otherwise (or with fewer than four snapshots in
    the tail) the final profile is returned.
    """
    times = np.asarray(times, float)
    sel = np.nonzero(times >= tail * times[-1])[0]
    if len(sel) < 4 or times[sel[0]] <= 0:
        return profiles[-1]
    mids, rates = [], []
    for i, j in zip(sel[:-1], sel[1:]):
        d = float(np.linalg.norm(profiles[j] - profiles[i]))
        if d > 0:
            mids.append(0.5 * (times[i] + times[j]))
            rates.append(d / (times[j] - times[i]))
    if len(rates) < 3:
        return profiles[-1]
    p = -np.polyfit(np.log(mids), np.log(rates), 1)[0]
    if not p > 1.0:
        return profiles[-1]
    T, dt = times[-1], times[-1] - times[-2]
    slope = (profiles[-1] - profiles[-2]) / dt * ((T - 0.5 * dt) / T) ** p
    return profiles[-1] + slope * T / (p - 1.0)


def scattering_residual(snapshots, Phi_at, T_ref=0.0, lam=0.5, s=0.8, alias_tol=1e-8,
                        reference="final"):
    """Residual ``||profile(t) - theta_inf||`` in the ``(lam, s)`` Gevrey norm.

    ``snapshots`` are solver states; ``Phi_at(t)`` returns ``Phi(t, y_j)``.
    The series covers snapshots with ``t >= T_ref``.  ``theta_inf`` is the
    last profile or, with ``reference="extrapolate"``, the extrapolated limit
    of :func:`extrapolate_profile` (the final-profile series vanishes at the
    last time by construction).
    """
    if reference not in ("extrapolate", "final"):
        raise ValueError(f"unknown reference {reference!r}")
    snaps = [sn for sn in snapshots if sn.t >= T_ref - 1e-12]
    if len(snaps) < 2:
        raise ValueError("need at least two snapshots at or beyond T_ref")
    grid = snaps[0].grid
    mask = grid.dealias_mask(half=False)
    profs, alias = [], []
    for sn in snaps:
        c = profile_coefficients(sn.theta, Phi_at(sn.t), grid)
        tot = float(np.sum(np.abs(c) ** 2))
        out = float(np.sum(np.abs(c[~mask]) ** 2))
        alias.append(out / tot if tot > 0 else 0.0)
        profs.append(c)
    times = np.array([sn.t for sn in snaps])
    ref = extrapolate_profile(times, profs) if reference == "extrapolate" else profs[-1]
    res = np.array([gevrey_norm(SpectralField(c - ref, grid), lam, 0.0, s) for c in profs])
    alias = np.array(alias)
    return ScatteringResult(times, res, alias,
                            bool(np.any(alias > alias_tol)))


# ---------------------------------------------------------------------------
# records and the run-level driver
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsRecord:
    t: float
    gevrey_energy: float
    Ed: float
    ck_lambda: float
    ck_theta: float
    ck_M: float
    ck_B: float
    omega_nz: float
    ux_nz: float
    uy: float
    theta_nz: float
    shift_profile_norm: float
    scattering_residual: float
    ck_integral: float = 0.0
    K_correction: float = 0.0  # ||K(Delta_t) - K(Delta_L)|| / ||K(Delta_L)||

    @property
    def nonzero_norms(self):
        return (self.omega_nz, self.ux_nz, self.uy, self.theta_nz)

    def row(self):
        return [f"{getattr(self, f.name):.12e}" for f in fields(self)]


RECORD_HEADER = [f.name for f in fields(DiagnosticsRecord)]


def write_records(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow(r.row())


@dataclass
class DiagnosticsReport:
    records: list
    coords: list
    scattering: ScatteringResult
    epsilon: float
    fits: dict
    consistency: float
    scattering_extrapolated: ScatteringResult | None = None
    psi_mean_l1: float = float("nan")  # || x-mean of psi_in ||_{L^1_y} on the periodic box

    @property
    def energy_constant(self):
        return max(r.gevrey_energy for r in self.records) / self.epsilon**2

    @property
    def ck_constant(self):
        return self.records[-1].ck_integral / self.epsilon**2

    @property
    def C0(self):
        """Smallest ``C_0`` with ``E <= 10 C_0 eps^2`` and ``int CK <= 10 C_0 eps^2``."""
        return max(self.energy_constant, self.ck_constant) / 10.0

    def summary_lines(self):
        lines = [f"energy_constant={self.energy_constant:.6g}",
                 f"ck_constant={self.ck_constant:.6g}",
                 f"C0={self.C0:.6g}",
                 f"consistency_residual={self.consistency:.3e}",
                 f"psi_mean_l1_over_eps={self.psi_mean_l1 / self.epsilon:.6g}",
                 f"scattering_aliased={self.scattering.aliased}"]
        for name, fit in self.fits.items():
            if fit is None:
                lines.append(f"{name}.fit=unavailable")
            else:
                lines.extend(fit.as_text(prefix=f"{name}.").splitlines())
        return lines


def diagnose_run(states, history: ZeroModeHistory, gamma_sq, epsilon,
                 dcfg: DiagnosticsConfig | None = None):
    """Diagnostics for every stored state.

    ``history`` must contain (at least) every time in ``states``; its cadence
    sets the accuracy of ``Phi`` and of the coordinate fields.
    """
    dcfg = dcfg or DiagnosticsConfig()
    p = dcfg.weights
    states = list(states)
    grid = states[0].grid
    coords = coordinate_quantities(history)
    ht = history.t
    idx = {}
    for sn in states:
        j = int(np.argmin(np.abs(ht - sn.t)))
        if abs(ht[j] - sn.t) > 1e-9 * max(1.0, sn.t):
            raise ValueError(f"zero-mode history has no entry at t={sn.t}")
        idx[sn.t] = j

    lam_s = p.lambda_prime if dcfg.scatter_lambda is None else dcfg.scatter_lambda
    s_s = p.s if dcfg.scatter_s is None else dcfg.scatter_s
    Phi_at = lambda t: coords[idx[t]].Phi  # noqa: E731
    scat = scattering_residual(states, Phi_at, 0.0, lam_s, s_s)
    scat_x = scattering_residual(states, Phi_at, 0.0, lam_s, s_s, reference="extrapolate")
    scat_map = dict(zip(scat.times, scat.residual))

    records = []
    ck_int = 0.0
    prev = None
    for sn in states:
        cs = coords[idx[sn.t]]
        w = _lattice_weights(sn.t, grid, p, True, dcfg.k_window, dcfg.eta_window)
        K = good_unknown_hat(sn, gamma_sq)
        la = _weighted(w, _log_abs2(K[w.sel]), 2 * w.log_A, "A K", grid)
        lr = _weighted(w, _log_abs2(sn.theta[w.sel]), 2 * w.log_A, "A rho", grid)
        E = 0.5 * (la + lr)
        ckK = _ck_from_weights(K, w, grid, p.s)
        ckR = _ck_from_weights(sn.theta, w, grid, p.s)
        ck = CKTerms(ckK.lam + ckR.lam, ckK.theta + ckR.theta, ckK.M + ckR.M, ckK.B + ckR.B)
        if prev is not None:
            ck_int += 0.5 * (sn.t - prev[0]) * (ck.total + prev[1])
        prev = (sn.t, ck.total)
        Kc = good_unknown_corrected(sn, gamma_sq, cs.h_y)
        nK = float(np.linalg.norm(K))
        kcorr = float(np.linalg.norm(Kc - K)) / nK if nK > 0 else 0.0
        Ed = coordinate_energy(cs, grid, p, dcfg.eta_window)
        nz = nonzero_norms(sn)
        records.append(DiagnosticsRecord(
            t=sn.t, gevrey_energy=E, Ed=Ed, ck_lambda=ck.lam, ck_theta=ck.theta,
            ck_M=ck.M, ck_B=ck.B, omega_nz=nz[0], ux_nz=nz[1], uy=nz[2], theta_nz=nz[3],
            shift_profile_norm=_l2_1d(cs.Phi, grid),
            scattering_residual=float(scat_map[sn.t]), ck_integral=ck_int,
            K_correction=kcorr))

    fits = {}
    win = dcfg.fit_window
    tt = [r.t for r in records]
    for name, vals in (("omega_nz", [r.omega_nz for r in records]),
                       ("ux_nz", [r.ux_nz for r in records]),
                       ("uy", [r.uy for r in records])):
        fits[name] = _try_fit(tt, vals, win)
    ct = [c.t for c in coords]
    fits["h"] = _try_fit(ct, [_l2_1d(c.h, grid) for c in coords], win)
    fits["f0"] = _try_fit(ct, [_l2_1d(c.f0, grid) for c in coords], win)
    # residual envelope; expected between t^-1 (log-corrected) and t^-3
    fits["scattering"] = _try_fit(scat_x.times, scat_x.residual, (max(win[0], 10.0), win[1]))
    psi_l1 = float(np.sum(np.abs(history.psi0()[0])) * grid.dy)
    return DiagnosticsReport(records, coords, scat, epsilon, fits, consistency_residual(coords),
                             scat_x, psi_l1)


def _try_fit(t, vals, window):
    try:
        return decay_fit(list(zip(t, vals)), window=window)
    except ValueError:
        return None


def collect_run(config, grid=None):
    """Run the solver keeping every sampled state and the per-step zero-mode history."""
    from .solver import run

    grid = grid or config.grid
    hist = ZeroModeHistory(grid)
    states = list(run(config, grid, on_step=hist.record))
    return states, hist
