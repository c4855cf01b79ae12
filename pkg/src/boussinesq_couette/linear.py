"""Single Fourier-mode dynamics of the linearized Boussinesq system.

Everything lives in the moving frame ``z = x - t y``, where a mode ``(k, eta)``
sees the shifted frequency ``eta - k t`` and ``-Delta_L`` has symbol
``q(t) = k^2 + (eta - k t)^2``.  The linear system is

    f'   = -gamma^2 i k rho - nu q f
    rho' =  gamma1 i k phi,      phi = -f / q

with ``gamma1 = 1`` for the full stratified linearization and ``gamma1 = 0``
when the density is passively transported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .fitting import RateFit, beat_fit

__all__ = [
    "LinearParams",
    "LinearModeState",
    "symbol",
    "mode_rhs",
    "good_unknown",
    "good_unknown_evolution",
    "viscous_exponent",
    "closed_form_viscous",
    "integrate_mode",
    "mode_velocity",
    "lin_bound_ratio",
    "good_unknown_ratio",
    "yang_lin_rate_scan",
    "expected_exponents",
    "write_rate_table",
]


@dataclass(frozen=True)
class LinearParams:
    nu: float = 1.0
    gamma_sq: float = 1.0
    gamma1: int = 1

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        if self.gamma_sq < 0:
            raise ValueError("gamma_sq must be >= 0")
        if self.gamma1 not in (0, 1):
            raise ValueError("gamma1 must be 0 or 1")


@dataclass(frozen=True)
class LinearModeState:
    k: int
    eta: float
    f_hat: complex
    rho_hat: complex
    t: float = 0.0

    def __post_init__(self):
        if self.k == 0:
            raise ValueError("the k = 0 mode has no linear coupling")

    def K_hat(self, p: LinearParams) -> complex:
        return good_unknown(self.k, self.eta, self.t, self.f_hat, self.rho_hat, p.gamma_sq)


def symbol(k, eta, t):
    """``k^2 + (eta - k t)^2``."""
    return k * k + (eta - k * t) ** 2


def mode_rhs(state: LinearModeState, p: LinearParams):
    k, eta, t = state.k, state.eta, state.t
    q = symbol(k, eta, t)
    df = -p.gamma_sq * 1j * k * state.rho_hat - p.nu * q * state.f_hat
    drho = p.gamma1 * 1j * k * (-state.f_hat / q)
    return df, drho


def good_unknown(k, eta, t, f_hat, rho_hat, gamma_sq):
    """``K = -gamma^2 d_z rho + Delta_L f`` in Fourier variables."""
    return -gamma_sq * 1j * k * rho_hat - symbol(k, eta, t) * f_hat


def good_unknown_evolution(state: LinearModeState, p: LinearParams) -> complex:
    """``dK/dt`` written in terms of ``K`` and ``f``.

    For ``nu = 1`` and ``gamma1 = 1`` this is
    ``-q K - gamma^2 k^2 f / q + 2 k (eta - k t) f``; the extra
    ``(1 - nu) q^2 f`` term covers other viscosities.
    """
    k, eta, t, f = state.k, state.eta, state.t, state.f_hat
    q = symbol(k, eta, t)
    K = state.K_hat(p)
    return (
        -q * (K + (1.0 - p.nu) * q * f)
        - p.gamma1 * p.gamma_sq * k * k / q * f
        + 2.0 * k * (eta - k * t) * f
    )


def viscous_exponent(k, eta, tau, t, nu=1.0):
    """``nu * int_tau^t (k^2 + (eta - k s)^2) ds`` in closed form."""
    k = float(k)
    if k == 0:
        return nu * eta * eta * (t - tau)
    return nu * (k * k * (t - tau) + ((eta - k * tau) ** 3 - (eta - k * t) ** 3) / (3.0 * k))


def closed_form_viscous(k, eta, f_in, rho_in, t, nu=1.0, gamma_sq=1.0, gamma1=0):
    """Exact Duhamel solution when the density is not fed back (``gamma1 = 0``).

    ``f(t) = e^{-Q(0,t)} f_in - i gamma^2 k rho_in int_0^t e^{-Q(tau,t)} d tau``
    and ``rho(t) = rho_in``.  The Duhamel integral is done with adaptive
    quadrature in ``sigma = t - tau``, where the kernel decays fastest.
    """
    if gamma1 != 0:
        raise ValueError("closed form requires gamma1 = 0")
    if k == 0:
        raise ValueError("k = 0 rejected")
    t = float(t)
    hom = math.exp(-viscous_exponent(k, eta, 0.0, t, nu)) * f_in
    if t == 0 or rho_in == 0 or gamma_sq == 0:
        return hom, rho_in
    if nu == 0:
        duh = t
    else:
        kern = lambda s: math.exp(-viscous_exponent(k, eta, t - s, t, nu))
        q_end = nu * symbol(k, eta, t)
        scale = 1.0 / max(q_end, 1e-12)
        pts = sorted({min(t, x) for x in (scale, 10 * scale, 100 * scale, max(t - eta / k, 0.0))}
                     - {0.0, t})
        duh, _ = integrate.quad(kern, 0.0, t, points=pts or None, epsabs=1e-16,
                                epsrel=1e-13, limit=400)
    return hom - 1j * gamma_sq * k * rho_in * duh, rho_in


def _real_system(k, eta, p: LinearParams):
    g2, nu, g1 = p.gamma_sq, p.nu, p.gamma1

    def rhs(t, y):
        q = k * k + (eta - k * t) ** 2
        fr, fi, rr, ri = y
        # f' = -g2 i k rho - nu q f ;  rho' = -g1 i k f / q
        return [
            g2 * k * ri - nu * q * fr,
            -g2 * k * rr - nu * q * fi,
            g1 * k * fi / q,
            -g1 * k * fr / q,
        ]

    def jac(t, y):
        q = k * k + (eta - k * t) ** 2
        c = g1 * k / q
        return np.array(
            [
                [-nu * q, 0.0, 0.0, g2 * k],
                [0.0, -nu * q, -g2 * k, 0.0],
                [0.0, c, 0.0, 0.0],
                [-c, 0.0, 0.0, 0.0],
            ]
        )

    return rhs, jac


def integrate_mode(k, eta, f_in, rho_in, t_eval, p: LinearParams, rtol=1e-11, atol=1e-14):
    """Integrate one mode, returning ``(f(t_eval), rho(t_eval))`` as complex arrays.

    With ``nu > 0`` the ``nu q(t) f`` damping grows like ``t^2`` and the
    problem becomes stiff, so the implicit Radau scheme with the analytic
    Jacobian is used; the inviscid problem is non-stiff and uses DOP853.
    """
    if k == 0:
        raise ValueError("k = 0 rejected")
    t_eval = np.atleast_1d(np.asarray(t_eval, float))
    rhs, jac = _real_system(k, eta, p)
    y0 = [complex(f_in).real, complex(f_in).imag, complex(rho_in).real, complex(rho_in).imag]
    scale = max(abs(f_in), abs(rho_in), 1e-300)
    if p.nu > 0:
        # Radau's dense output is only third order, so restart at each sample
        out = np.empty((4, t_eval.size))
        y, t0 = np.asarray(y0, float), 0.0
        for i, te in enumerate(t_eval):
            if te > t0:
                seg = integrate.solve_ivp(rhs, (t0, te), y, method="Radau", jac=jac,
                                          rtol=rtol, atol=atol * scale)
                if not seg.success:
                    raise RuntimeError(seg.message)
                y, t0 = seg.y[:, -1], te
            out[:, i] = y
        return out[0] + 1j * out[1], out[2] + 1j * out[3]
    else:
        sol = integrate.solve_ivp(rhs, (0.0, t_eval[-1]), y0, method="DOP853",
                                  t_eval=t_eval, rtol=rtol, atol=atol * scale)
    if not sol.success:
        raise RuntimeError(sol.message)
    y = sol.y
    return y[0] + 1j * y[1], y[2] + 1j * y[3]


def mode_velocity(k, eta, t, f_hat):
    """``(u_x, u_y)`` of one mode from ``psi = -f/q``: ``(-i(eta - k t) psi, i k psi)``."""
    psi = -f_hat / symbol(k, eta, t)
    return -1j * (eta - k * t) * psi, 1j * k * psi


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def lin_bound_ratio(k, eta, t, f_in=1.0, rho_in=1.0, nu=1.0, gamma_sq=1.0):
    """``|f(t)| / (e^{-Q(0,t)} |f_in| + k/((kt - eta)^2 + k^2) |rho_in|)``."""
    f, _ = closed_form_viscous(k, eta, f_in, rho_in, t, nu=nu, gamma_sq=gamma_sq)
    denom = (math.exp(-viscous_exponent(k, eta, 0.0, t, nu)) * abs(f_in)
             + abs(k) / symbol(k, eta, t) * abs(rho_in))
    return abs(f) / denom


def good_unknown_ratio(k, eta, t_eval, f_in, rho_in, p: LinearParams):
    """``|K(t)| / |K_in|`` and ``|f(t)| q(t) / (|k||rho_in| + |K_in|)`` along a trajectory."""
    f, rho = integrate_mode(k, eta, f_in, rho_in, t_eval, p)
    t_eval = np.atleast_1d(t_eval)
    K = good_unknown(k, eta, t_eval, f, rho, p.gamma_sq)
    K0 = good_unknown(k, eta, 0.0, f_in, rho_in, p.gamma_sq)
    r_K = np.abs(K) / abs(K0)
    r_f = np.abs(f) * symbol(k, eta, t_eval) / (abs(k) * abs(rho_in) + abs(K0))
    return r_K, r_f


# ---------------------------------------------------------------------------
# inviscid rates
# ---------------------------------------------------------------------------

QUANTITIES = ("u_x", "u_y", "theta", "omega")


def expected_exponents(gamma_sq, gamma1=1, theta_zero=False):
    """Asymptotic exponents of ``(u_x, u_y, theta, omega)``.

    For ``gamma1 = 1`` the vorticity behaves like ``t^a`` with
    ``a (a - 1) = -gamma^2``; the larger root is used (its real part when
    ``gamma^2 > 1/4``).
    """
    if theta_zero:
        return (-1.0, -2.0, None, 0.0)
    if gamma1 == 0:
        return (0.0, -1.0, 0.0, 1.0)
    disc = 0.25 - gamma_sq
    a = 0.5 + (math.sqrt(disc) if disc > 0 else 0.0)
    return (a - 1.0, a - 2.0, a - 1.0, a)


def default_mode_set(n_modes=16, k_values=(1, 2, 3), eta_max=3.0, seed=0):
    """Deterministic mode ensemble with random complex data."""
    rng = np.random.default_rng(seed)
    modes = []
    for i in range(n_modes):
        k = int(k_values[i % len(k_values)])
        eta = float(rng.uniform(-eta_max, eta_max))
        f0 = complex(*rng.standard_normal(2))
        r0 = complex(*rng.standard_normal(2))
        modes.append((k, eta, f0, r0))
    return modes


def yang_lin_rate_scan(gamma_sq, mode_set=None, T=1e4, n_samples=64, gamma1=1,
                       theta_zero=False, residual_max=0.1):
    """Integrate the inviscid modes and fit the decay of the four norms on [T/10, T].

    For ``gamma^2 > 1/4`` the fit includes the known log-periodic beat (see
    :func:`beat_fit`).  Returns ``{quantity: RateFit}``; fits whose residual exceeds
    ``residual_max`` are flagged in ``fit.converged`` rather than raising.
    """
    if mode_set is None:
        mode_set = default_mode_set()
    if theta_zero:
        # no density at all (and none generated): the vorticity is simply transported
        gamma_sq, gamma1 = 0.0, 0
    p = LinearParams(nu=0.0, gamma_sq=gamma_sq, gamma1=gamma1)
    beat = 2.0 * math.sqrt(gamma_sq - 0.25) if (gamma1 and gamma_sq > 0.25) else 0.0
    ts = np.geomspace(T / 10.0, T, n_samples)
    acc = {q: np.zeros_like(ts) for q in QUANTITIES}
    for k, eta, f0, r0 in sorted(mode_set, key=lambda m: (m[0], m[1])):
        if theta_zero:
            r0 = 0.0
        f, rho = integrate_mode(k, eta, f0, r0, ts, p, rtol=1e-10, atol=1e-14)
        ux, uy = mode_velocity(k, eta, ts, f)
        acc["u_x"] += np.abs(ux) ** 2
        acc["u_y"] += np.abs(uy) ** 2
        acc["theta"] += np.abs(rho) ** 2
        acc["omega"] += np.abs(f) ** 2
    out = {}
    for q in QUANTITIES:
        vals = np.sqrt(acc[q])
        if np.all(vals > 0):
            fit = beat_fit(np.column_stack([ts, vals]), beat, (T / 10.0, T))
        else:
            fit = RateFit([], float("nan"), float("nan"), window=(T / 10.0, T))
        fit.converged = bool(np.isfinite(fit.residual) and fit.residual <= residual_max)
        out[q] = fit
    return out


def write_rate_table(path, rows):
    """rows: iterables of (gamma_sq, quantity, fitted, expected, residual, window)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma_sq", "quantity", "fitted_exponent", "expected_exponent",
                    "residual", "window"])
        for r in rows:
            w.writerow(r)
