"""Resonant toy models behind the Theta weight.

Two levels of caricature of the reaction term ``d_v phi d_z rho_lo``:

* the two-component system on one critical interval,
  ``rho_R' = kappa k^5/eta^3 rho_NR``,
  ``rho_NR' = kappa eta k / (k^2 + (eta - k t)^2)^2 rho_R``;
* the truncated chain over ``l = -L..-1, 1..L`` at fixed ``eta``, coupled
  through a low-frequency density profile ``rho_lo(k - l)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import integrate

from .fitting import decay_fit
from .weights import WeightParams, critical_interval, cube_root_floor, log_theta_nr

__all__ = [
    "ToyState",
    "ChainState",
    "ChainResult",
    "toy_rhs",
    "integrate_toy",
    "toy_picard_oracle",
    "growth_sweep",
    "gaussian_profile",
    "integrate_chain",
    "chain_report_rows",
]


@dataclass(frozen=True)
class ToyState:
    rho_R: float
    rho_NR: float
    k: int
    eta: float
    kappa: float

    @property
    def norm(self):
        return math.hypot(self.rho_R, self.rho_NR)


def _coefficients(k, eta, kappa):
    a = kappa * k**5 / eta**3
    b = lambda t: kappa * eta * k / (k * k + (eta - k * t) ** 2) ** 2
    return a, b


def toy_rhs(t, y, k, eta, kappa):
    a, b = _coefficients(k, eta, kappa)
    return [a * y[1], b(t) * y[0]]


def integrate_toy(state: ToyState, interval=None, rtol=1e-12, atol=1e-14):
    """Integrate across ``I_{k,eta}``; returns ``(final_state, amplification)``."""
    if interval is None:
        interval = critical_interval(state.k, state.eta)
    if interval.empty:
        raise ValueError(f"empty critical interval for k={state.k}, eta={state.eta}")
    y = _integrate_split(state, interval, rtol, atol)
    final = replace(state, rho_R=float(y[0]), rho_NR=float(y[1]))
    n0 = state.norm
    return final, (final.norm / n0 if n0 > 0 else 1.0)


def _integrate_split(state, interval, rtol, atol):
    """Integrate in three legs so the solver resolves the peak at ``eta/k``."""
    k, eta = abs(state.k), abs(state.eta)
    c = eta / k
    knots = [interval.t_minus, max(interval.t_minus, c - 5.0), c,
             min(interval.t_plus, c + 5.0), interval.t_plus]
    y = np.array([state.rho_R, state.rho_NR], float)
    for t0, t1 in zip(knots[:-1], knots[1:]):
        if t1 <= t0:
            continue
        sol = integrate.solve_ivp(toy_rhs, (t0, t1), y, method="DOP853",
                                  args=(k, eta, state.kappa), rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(sol.message)
        y = sol.y[:, -1]
    return y


def toy_picard_oracle(state: ToyState, n_nodes=256, tol=1e-15, max_iter=200):
    """Independent solution by Picard iteration on a Chebyshev grid.

    Time is mapped through ``t = eta/k + sinh(u)`` which spreads the unit-width
    resonance peak evenly; the Volterra integrals are done with Chebyshev
    antiderivatives.  Returns the amplification across the interval.
    """
    iv = critical_interval(state.k, state.eta)
    k, eta, kap = abs(state.k), abs(state.eta), state.kappa
    c = eta / k
    u0, u1 = math.asinh(iv.t_minus - c), math.asinh(iv.t_plus - c)
    x = np.cos(np.pi * np.arange(n_nodes) / (n_nodes - 1))[::-1]  # [-1, 1]
    u = 0.5 * (u1 - u0) * (x + 1) + u0
    t = c + np.sinh(u)
    jac = np.cosh(u) * 0.5 * (u1 - u0)
    a, bfun = _coefficients(k, eta, kap)
    b = bfun(t)

    def cumint(vals):
        coef = cheb.chebfit(x, vals, n_nodes - 1)
        anti = cheb.chebint(coef, lbnd=-1)
        return cheb.chebval(x, anti)

    r = np.full(n_nodes, state.rho_R)
    n = np.full(n_nodes, state.rho_NR)
    for _ in range(max_iter):
        r_new = state.rho_R + cumint(a * n * jac)
        n_new = state.rho_NR + cumint(b * r_new * jac)
        delta = max(np.max(np.abs(r_new - r)), np.max(np.abs(n_new - n)))
        r, n = r_new, n_new
        if delta < tol * max(1.0, np.max(np.abs(n))):
            break
    return math.hypot(r[-1], n[-1]) / state.norm


def growth_sweep(etas, k=1, kappa=0.01, C_theta=1.0):
    """Amplification across ``I_{k,eta}`` from ``(1, 0)`` and the fitted exponent.

    Returns ``(rows, fit)``; ``fit.exponent`` is the slope of
    ``log amplification`` against ``log(eta/k^3)`` and is compared with
    ``c = 2 C kappa + 1``.
    """
    rows = []
    for eta in etas:
        st = ToyState(1.0, 0.0, k, float(eta), kappa)
        _, amp = integrate_toy(st)
        rows.append((float(eta) / k**3, amp))
    fit = decay_fit(rows, min_samples=min(8, len(rows)))
    fit.expected = 2 * C_theta * kappa + 1
    return rows, fit


# ---------------------------------------------------------------------------
# truncated chain
# ---------------------------------------------------------------------------


def gaussian_profile(width=1.0, mass=1.0):
    """``rho_lo(m) ~ exp(-m^2 / (2 w^2))`` normalized to ``sum_m rho_lo(m) = mass``."""
    m = np.arange(-200, 201)
    z = np.exp(-0.5 * (m / width) ** 2).sum()

    def prof(d):
        return mass * np.exp(-0.5 * (np.asarray(d, float) / width) ** 2) / z

    return prof


@dataclass
class ChainState:
    amplitudes: dict
    eta: float
    L: int

    def __post_init__(self):
        if self.L < cube_root_floor(abs(self.eta)):
            raise ValueError("L must be at least E(|eta|^{1/3})")

    @property
    def labels(self):
        return [l for l in range(-self.L, self.L + 1) if l != 0]

    def vector(self):
        return np.array([complex(self.amplitudes.get(l, 0.0)) for l in self.labels])


@dataclass
class ChainResult:
    state: ChainState
    times: np.ndarray
    history: np.ndarray  # |rho(l)| per sample, columns follow state.labels
    dominant: list = field(default_factory=list)  # (l, t_lo, t_hi, dominant source)
    failed_at: float | None = None

    @property
    def growth(self):
        n = np.linalg.norm(self.history, axis=1)
        return float(n[-1] / n[0])


def _chain_matrix(labels, eta, t, prof, gamma_sq):
    l = np.asarray(labels, float)
    coef = eta * l / (l * l + (eta - l * t) ** 2) ** 2  # source weight
    kk = l[:, None]
    ll = l[None, :]
    return (1j * gamma_sq / (2 * np.pi)) * coef[None, :] * (kk - ll) * prof(kk - ll)


def integrate_chain(state: ChainState, rho_zero_profile=None, T=None, gamma_sq=1.0,
                    n_samples=2001, overflow=1e250, rtol=1e-10, atol=1e-14):
    """Integrate the chain from ``t = 0`` to ``T`` (default ``2|eta|``)."""
    if rho_zero_profile is None:
        rho_zero_profile = gaussian_profile()
    eta = float(state.eta)
    T = 2.0 * abs(eta) if T is None else float(T)
    labels = state.labels
    n = len(labels)

    def rhs(t, y):
        z = y[:n] + 1j * y[n:]
        dz = _chain_matrix(labels, eta, t, rho_zero_profile, gamma_sq) @ z
        return np.concatenate([dz.real, dz.imag])

    def blow(t, y):
        return overflow - np.max(np.abs(y))

    blow.terminal = True
    z0 = state.vector()
    ts = np.linspace(0.0, T, n_samples)
    sol = integrate.solve_ivp(rhs, (0.0, T), np.concatenate([z0.real, z0.imag]),
                              method="DOP853", t_eval=ts, rtol=rtol, atol=atol,
                              max_step=0.25, events=blow)
    z = sol.y[:n] + 1j * sol.y[n:]
    failed = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    final = ChainState(dict(zip(labels, z[:, -1])), eta, state.L)
    res = ChainResult(final, sol.t, np.abs(z.T), failed_at=failed)
    res.dominant = _dominant_sources(labels, eta, sol.t, z, rho_zero_profile, gamma_sq)
    return res


def _dominant_sources(labels, eta, ts, z, prof, gamma_sq):
    """For each bar-interval of ``l``, the source mode with the largest transfer."""
    out = []
    e = abs(eta)
    sgn = 1 if eta >= 0 else -1
    for lpos in range(1, cube_root_floor(e) + 1):
        l = sgn * lpos
        lo, hi = 2 * e / (2 * lpos + 1), 2 * e / (2 * lpos - 1)
        sel = (ts >= lo) & (ts <= hi)
        if sel.sum() < 2:
            continue
        transfer = np.zeros(len(labels))
        for i in np.nonzero(sel)[0]:
            M = _chain_matrix(labels, eta, ts[i], prof, gamma_sq)
            transfer += np.sum(np.abs(M * z[:, i][None, :]), axis=0)
        out.append((l, lo, hi, labels[int(np.argmax(transfer))]))
    return out


def chain_report_rows(eta, res: ChainResult, p: WeightParams):
    """CSV rows ``eta, k, interval, amplification, designed_theta_ratio, ratio_of_ratios``.

    Per bar-interval the realized growth of the chain norm is compared with
    the growth ``Theta_NR(hi)/Theta_NR(lo)`` designed into the weight.
    """
    rows = []
    norm = np.linalg.norm(res.history, axis=1)
    for l, lo, hi, _src in res.dominant:
        i0 = int(np.searchsorted(res.times, lo))
        i1 = min(int(np.searchsorted(res.times, hi)), len(res.times) - 1)
        amp = float(norm[i1] / norm[i0])
        lt_hi, _ = log_theta_nr(hi, eta, p)
        lt_lo, _ = log_theta_nr(lo, eta, p)
        designed = float(np.exp(lt_hi - lt_lo))
        rows.append((eta, l, f"[{lo:.6g},{hi:.6g}]", amp, designed, amp / designed))
    return rows


def write_toy_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "k", "interval", "amplification", "designed_theta_ratio",
                    "ratio_of_ratios"])
        for r in rows:
            w.writerow(r)
