"""Time-dependent Fourier multipliers for the Boussinesq-Couette energy.

The weight ``A_k(t, eta)`` is assembled from

* ``Theta_k``  -- resonant toy-model weight, built backward in time over the
  critical intervals ``I_{k,eta}``;
* ``g``        -- milder weight built over the bar-intervals, closed form in
  ``arctan``;
* ``B_k``      -- bounded "ghost" weight defined through a smooth cut-off;
* ``lambda(t)``-- shrinking Gevrey radius;
* ``J_k = e^{mu|eta|^{1/3}}/Theta_k + e^{mu|k|^{1/3}}`` and
  ``M_k = e^{c|eta|^{1/3}}/g + e^{c|k|^{1/3}}`` with ``c = 4 pi / delta_L``.

Everything here is a pure function of ``(t, k, eta, params)``.  The array
routines work in log space (the weights overflow doubles for modest
frequencies); the scalar wrappers return plain floats and
:class:`WeightEvaluation` records.

Negative frequencies follow the reality-symmetric extension
``Theta_k(t, eta) = Theta_{|k|}(t, |eta|)`` for ``k eta > 0``,
``Theta_NR(t, |eta|)`` otherwise, and ``g(t, eta) = g(t, |eta|)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

__all__ = [
    "WeightParams",
    "ResonanceInterval",
    "Regime",
    "WeightEvaluation",
    "integer_part",
    "cube_root_floor",
    "critical_interval",
    "log_theta_nr",
    "log_theta",
    "theta_weight",
    "log_g",
    "g_weight",
    "chi",
    "chi1",
    "b_cutoff",
    "db_deta",
    "log_B",
    "B_multiplier",
    "lambda_of_t",
    "dlambda_dt",
    "calibrate_delta_lambda",
    "log_J",
    "log_M",
    "log_A",
    "J_multiplier",
    "M_multiplier",
    "A_multiplier",
]


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightParams:
    """All multiplier constants in one validated record.

    ``mu``, ``q_tilde`` and ``delta_lambda`` are derived when left as
    ``None``: ``mu = 6(1 + 2 C kappa)``, ``q_tilde = 3 s / 4`` and
    ``delta_lambda`` is calibrated so that
    ``lambda(inf) = (lambda0 + lambda')/2 + (lambda0 - lambda')/8``.
    Passing an explicit ``mu`` that disagrees with the formula is an error.
    """

    s: float = 0.8
    lambda0: float = 1.0
    lambda_prime: float = 0.5
    sigma: float = 8.0
    beta: float = 4.0
    kappa: float = 0.01
    C_theta: float = 1.0
    mu: float | None = None
    delta_L: float = 0.1
    delta_B: float = 0.1
    q_tilde: float | None = None
    delta_lambda: float | None = None

    def __post_init__(self):
        mu_formula = 6.0 * (1.0 + 2.0 * self.C_theta * self.kappa)
        if self.mu is None:
            object.__setattr__(self, "mu", mu_formula)
        elif not math.isclose(self.mu, mu_formula, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(
                f"mu={self.mu} violates mu = 6(1 + 2 C kappa) = {mu_formula}"
            )
        if self.q_tilde is None:
            object.__setattr__(self, "q_tilde", 0.75 * self.s)
        self._check_ranges()
        if self.delta_lambda is None:
            object.__setattr__(self, "delta_lambda", calibrate_delta_lambda(self))
        elif self.delta_lambda <= 0:
            raise ValueError("delta_lambda must be positive")

    def _check_ranges(self):
        if not (1.0 / 3.0 < self.s <= 1.0):
            raise ValueError(f"s={self.s} outside (1/3, 1]")
        if not (self.lambda0 > self.lambda_prime > 0):
            raise ValueError("need lambda0 > lambda_prime > 0")
        for name in ("delta_L", "delta_B"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValueError(f"{name}={v} outside (0, 1]")
        if self.kappa < 0 or self.C_theta < 0:
            raise ValueError("kappa and C_theta must be non-negative")
        q = self.q_tilde
        if not (2 * q < 3 * self.s and 4 * q < 3 * self.s + 1):
            raise ValueError(
                f"q_tilde={q} violates 2q < 3s and 4q < 3s + 1 (s={self.s})"
            )
        # lambda(t) only stays bounded below when <t>^{-2q} is integrable
        if q <= 0.5:
            raise ValueError(f"q_tilde={q} must exceed 1/2 for lambda to converge")

    @property
    def lambda1(self) -> float:
        return 0.75 * self.lambda0 + 0.25 * self.lambda_prime

    @property
    def lambda_floor(self) -> float:
        return 0.5 * (self.lambda0 + self.lambda_prime)

    @property
    def m_rate(self) -> float:
        """Exponent coefficient ``4 pi / delta_L`` of the M multiplier."""
        return 4.0 * math.pi / self.delta_L

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# critical intervals
# ---------------------------------------------------------------------------


def integer_part(eta: float) -> int:
    """``E(eta) = floor(eta)`` for ``eta >= 0``."""
    if eta < 0:
        raise ValueError("integer_part is defined for eta >= 0")
    return int(math.floor(eta))


def cube_root_floor(x):
    """Largest integer ``n >= 0`` with ``n**3 <= x`` (elementwise).

    ``E(x^{1/3})`` computed without the rounding slips of ``x ** (1/3)``
    (``1000 ** (1/3) == 9.999...``).
    """
    x = np.asarray(x, dtype=float)
    n = np.floor(np.cbrt(np.maximum(x, 0.0)))
    n = np.where((n + 1) ** 3 <= x, n + 1, n)
    n = np.where(n**3 > x, n - 1, n)
    n = np.maximum(n, 0).astype(np.int64)
    return n if n.ndim else int(n)


@dataclass(frozen=True)
class ResonanceInterval:
    """Critical interval ``I_{k,eta} = [t_minus, t_plus]`` and its bar-interval.

    An empty interval has all endpoints set to ``nan``.
    """

    k: int
    eta: float
    t_minus: float = math.nan
    t_plus: float = math.nan
    bar_lo: float = math.nan
    bar_hi: float = math.nan

    @property
    def empty(self) -> bool:
        return math.isnan(self.t_minus)

    @property
    def center(self) -> float:
        return abs(self.eta / self.k)

    @property
    def contained(self) -> bool:
        """Whether ``I_{k,eta}`` sits inside the bar-interval (fails for k = 1)."""
        if self.empty:
            return True
        return self.bar_lo <= self.t_minus and self.t_plus <= self.bar_hi

    def __contains__(self, t) -> bool:
        return not self.empty and self.t_minus <= t <= self.t_plus


def critical_interval(k: int, eta: float) -> ResonanceInterval:
    if k == 0:
        raise ValueError("critical intervals are undefined for k = 0")
    ak, ae = abs(k), abs(eta)
    if eta * k < 0 or not (1 <= ak <= cube_root_floor(ae)):
        return ResonanceInterval(k, eta)
    half = ae / (2.0 * ak**3)
    c = ae / ak
    return ResonanceInterval(
        k,
        eta,
        t_minus=c - half,
        t_plus=c + half,
        bar_lo=2.0 * ae / (2 * ak + 1),
        bar_hi=2.0 * ae / (2 * ak - 1),
    )


# ---------------------------------------------------------------------------
# Theta
# ---------------------------------------------------------------------------


class Regime(str, enum.Enum):
    NR = "NR"
    R = "R"
    PRE = "pre-window"
    POST = "post-window"


@dataclass(frozen=True)
class WeightEvaluation:
    value: float
    d_log_dt: float
    regime: Regime
    log_value: float = field(default=math.nan, repr=False)


def _theta_window_logs(t, e, k, ck):
    """log of the k-th window factor of Theta_NR and its time derivative.

    The factor is 1 after ``t_plus``, follows the power laws on the two halves
    of ``I_{k,eta}`` and is frozen at ``(eta/k^3)^{-(1 + 2 C kappa)}`` before
    ``t_minus``.  ``e`` must satisfy ``e >= k^3`` wherever the result is used.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.maximum(e / k**3, 1.0)
        a = 2.0 * (1.0 - 1.0 / r)
        tc = e / k
        half = e / (2.0 * k**3)
        tp, tm = tc + half, tc - half
        logr = np.log(r)
        right = (t >= tc) & (t < tp)
        left = (t >= tm) & (t < tc)
        before = t < tm
        tau = np.abs(t - tc)
        logf = np.where(
            right,
            ck * (np.log1p(a * tau) - logr),
            np.where(
                left,
                -ck * logr - (1.0 + ck) * np.log1p(a * tau),
                np.where(before, -(1.0 + 2.0 * ck) * logr, 0.0),
            ),
        )
        dlog = np.where(
            right,
            ck * a / (1.0 + a * tau),
            np.where(left, (1.0 + ck) * a / (1.0 + a * tau), 0.0),
        )
    return logf, dlog


def log_theta_nr(t, eta, p: WeightParams):
    """``(log Theta_NR, d/dt log Theta_NR)`` for broadcastable ``t, eta``.

    Theta_NR is the product of the per-window factors for
    ``k = 1 .. E(|eta|^{1/3})``.  For ``k >= 3`` the windows are disjoint and
    this is exactly the backward recursion; ``I_{1,eta}`` and ``I_{2,eta}``
    overlap on ``[eta/2, 9 eta/16]`` and the product is the continuous,
    monotone continuation through that overlap.
    """
    t, e = np.broadcast_arrays(np.asarray(t, float), np.abs(np.asarray(eta, float)))
    n = cube_root_floor(e)
    n = np.asarray(n)
    logv = np.zeros(t.shape)
    dlog = np.zeros(t.shape)
    ck = p.C_theta * p.kappa
    kmax = int(n.max()) if n.size else 0
    for k in range(1, kmax + 1):
        act = n >= k
        lf, dl = _theta_window_logs(t, e, k, ck)
        logv += np.where(act, lf, 0.0)
        dlog += np.where(act, dl, 0.0)
    return logv, dlog


def _regime_codes(t, k, e, n, in_res):
    # 0 NR, 1 R, 2 pre-window, 3 post-window
    code = np.zeros(np.shape(t), dtype=np.int8)
    with np.errstate(divide="ignore", invalid="ignore"):
        nn = np.maximum(n, 1)
        tm_last = e / nn - e / (2.0 * nn**3)
    code = np.where((n >= 1) & (t < tm_last), 2, code)
    code = np.where(in_res, 1, code)
    code = np.where(t >= 2 * e, 3, code)
    return code


_REGIMES = (Regime.NR, Regime.R, Regime.PRE, Regime.POST)


def log_theta(t, k, eta, p: WeightParams, with_regime: bool = False):
    """``(log Theta_k, d/dt log Theta_k)`` (and regime codes) elementwise.

    On its own resonant interval the mode uses
    ``Theta_R = (k^3/eta)(1 + a|t - eta/k|) Theta_NR``; everywhere else
    ``Theta_NR``.
    """
    t, k, eta = np.broadcast_arrays(
        np.asarray(t, float), np.asarray(k), np.asarray(eta, float)
    )
    e = np.abs(eta)
    ak = np.abs(k).astype(float)
    logv, dlog = log_theta_nr(t, e, p)
    n = np.asarray(cube_root_floor(e))
    with np.errstate(divide="ignore", invalid="ignore"):
        admissible = (k * eta > 0) & (ak >= 1) & (ak <= n)
        akk = np.where(admissible, ak, 1.0)
        r = np.where(admissible, e / akk**3, 1.0)
        tc = e / akk
        half = e / (2.0 * akk**3)
        in_res = admissible & (t >= tc - half) & (t <= tc + half)
        a = 2.0 * (1.0 - 1.0 / r)
        tau = t - tc
        extra = -np.log(r) + np.log1p(a * np.abs(tau))
        dextra = np.sign(tau) * a / (1.0 + a * np.abs(tau))
    logv = logv + np.where(in_res, extra, 0.0)
    dlog = dlog + np.where(in_res, dextra, 0.0)
    if with_regime:
        return logv, dlog, _regime_codes(t, k, e, n, in_res)
    return logv, dlog


def theta_weight(t: float, k: int, eta: float, p: WeightParams) -> WeightEvaluation:
    lv, dl, code = log_theta(t, k, eta, p, with_regime=True)
    lv = float(lv)
    return WeightEvaluation(math.exp(lv), float(dl), _REGIMES[int(code)], lv)


# ---------------------------------------------------------------------------
# g
# ---------------------------------------------------------------------------


def log_g(t, eta, p: WeightParams):
    """``(log g, d/dt log g)`` from the closed-form arctan solution.

    On the bar-interval ``[2|eta|/(2k+1), 2|eta|/(2k-1)]`` the ODE rate is
    ``w_k / (delta_L (1 + (t - |eta|/k)^2))`` with ``w_k = 1`` for
    ``k <= E(|eta|^{1/3})`` and ``w_k = |eta|/k^3`` up to ``E(|eta|^{2/3})``.
    g is 1 for ``t >= 2|eta|`` and frozen below the last bar-interval.
    """
    t, e = np.broadcast_arrays(np.asarray(t, float), np.abs(np.asarray(eta, float)))
    n1 = np.asarray(cube_root_floor(e))
    n2 = np.asarray(cube_root_floor(e * e))
    inv = 1.0 / p.delta_L
    logv = np.zeros(t.shape)
    dlog = np.zeros(t.shape)
    kmax = int(n2.max()) if n2.size else 0
    for k in range(1, kmax + 1):
        act = n2 >= k
        if not act.any():
            continue
        w = np.where(n1 >= k, 1.0, e / k**3)
        hi = 2.0 * e / (2 * k - 1)
        lo = 2.0 * e / (2 * k + 1)
        tc = e / k
        tt = np.clip(t, lo, hi)
        incr = np.arctan(hi - tc) - np.arctan(tt - tc)
        logv -= np.where(act, inv * w * incr, 0.0)
        inside = act & (t >= lo) & (t < hi)
        dlog += np.where(inside, inv * w / (1.0 + (t - tc) ** 2), 0.0)
    return logv, dlog


def g_weight(t: float, eta: float, p: WeightParams) -> WeightEvaluation:
    lv, dl = log_g(t, eta, p)
    lv = float(lv)
    e = abs(eta)
    if t >= 2 * e:
        regime = Regime.POST
    elif e >= 1 and t < 2 * e / (2 * cube_root_floor(e * e) + 1):
        regime = Regime.PRE
    else:
        regime = Regime.NR
    return WeightEvaluation(math.exp(lv), float(dl), regime, lv)


# ---------------------------------------------------------------------------
# cut-offs and B
# ---------------------------------------------------------------------------


def _smoothstep(u):
    """C^2 quintic ramp from 0 (u <= 0) to 1 (u >= 1)."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)


def _dsmoothstep(u):
    inside = (u > 0) & (u < 1)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


def chi(x):
    """Even cut-off: 1 on ``|x| <= 8``, 0 on ``|x| >= 10``."""
    return 1.0 - _smoothstep((np.abs(x) - 8.0) / 2.0)


def dchi(x):
    return -0.5 * _dsmoothstep((np.abs(x) - 8.0) / 2.0) * np.sign(x)


def chi1(x):
    """1 on ``[1/2, 3/2]``, supported in ``[1/3, 5/2]``."""
    x = np.asarray(x, float)
    up = _smoothstep((x - 1.0 / 3.0) * 6.0)
    down = 1.0 - _smoothstep(x - 1.5)
    return np.where(x < 0.5, up, down)


def dchi1(x):
    x = np.asarray(x, float)
    return np.where(x < 0.5, 6.0 * _dsmoothstep((x - 1.0 / 3.0) * 6.0),
                    -_dsmoothstep(x - 1.5))


def b_cutoff(t, k, eta):
    """``chi(100/t) chi(eta/t^3) chi(eta/k^3) chi1(eta/(k t))``; 0 at t = 0 or k = 0."""
    t, k, eta = np.broadcast_arrays(
        np.asarray(t, float), np.asarray(k, float), np.asarray(eta, float)
    )
    ok = (t > 0) & (k != 0)
    ts = np.where(ok, t, 1.0)
    ks = np.where(ok, k, 1.0)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):  # t ~ 0 saturates chi
        val = chi(100.0 / ts) * chi(eta / ts**3) * chi(eta / ks**3) * chi1(eta / (ks * ts))
    out = np.where(ok, val, 0.0)
    return out if out.ndim else float(out)


def db_deta(t, k, eta):
    """Analytic ``d b / d eta``."""
    t, k, eta = np.broadcast_arrays(
        np.asarray(t, float), np.asarray(k, float), np.asarray(eta, float)
    )
    ok = (t > 0) & (k != 0)
    ts = np.where(ok, t, 1.0)
    ks = np.where(ok, k, 1.0)
    c0 = chi(100.0 / ts)
    x1, x2, x3 = eta / ts**3, eta / ks**3, eta / (ks * ts)
    c1, c2, c3 = chi(x1), chi(x2), chi1(x3)
    d = c0 * (
        dchi(x1) / ts**3 * c2 * c3
        + c1 * dchi(x2) / ks**3 * c3
        + c1 * c2 * dchi1(x3) / (ks * ts)
    )
    return np.where(ok, d, 0.0)


def _b_support(k: int, eta: float):
    """Interval of s on which ``b(s, k, eta)`` can be nonzero (or None)."""
    if k == 0:
        return None
    c = eta / k
    if c <= 0 or abs(eta / k**3) >= 10:
        return None
    lo = max(10.0, c / 2.5, (abs(eta) / 10.0) ** (1.0 / 3.0))
    hi = 3.0 * c
    if hi <= lo:
        return None
    return lo, hi


def _log_B_scalar(t: float, k: int, eta: float, delta_B: float) -> float:
    sup = _b_support(int(k), float(eta))
    if sup is None:
        return 0.0
    lo, hi = sup
    hi = min(hi, t)
    if hi <= lo:
        return 0.0
    c = eta / k

    def f(s):
        return float(b_cutoff(s, k, eta)) / (1.0 + (s - c) ** 2)

    pts = [x for x in (12.5, c / 1.5, c, 2.0 * c) if lo < x < hi]
    val, _ = integrate.quad(f, lo, hi, points=pts or None, epsabs=1e-10,
                            epsrel=1e-12, limit=200)
    return val / delta_B


def log_B(t, k, eta, p: WeightParams):
    """``log B_k(t, eta)`` elementwise by adaptive quadrature of the exponent."""
    t, k, eta = np.broadcast_arrays(
        np.asarray(t, float), np.asarray(k), np.asarray(eta, float)
    )
    out = np.zeros(t.shape)
    # b vanishes unless 0 < eta/k^3 < 10 and t > 10
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = (k != 0) & (t > 10.0) & (eta * k > 0) & (np.abs(eta) < 10.0 * np.abs(k) ** 3)
    for idx in np.argwhere(cand):
        idx = tuple(idx)
        out[idx] = _log_B_scalar(t[idx], int(k[idx]), eta[idx], p.delta_B)
    return out if out.ndim else float(out)


def B_multiplier(t: float, k: int, eta: float, p: WeightParams) -> float:
    return math.exp(float(log_B(t, k, eta, p)))


# ---------------------------------------------------------------------------
# lambda(t)
# ---------------------------------------------------------------------------


def _bracket_integral(t, q):
    """``int_0^t (1 + tau^2)^{-q} d tau`` via the incomplete beta function."""
    t = np.asarray(t, float)
    a, b = 0.5, q - 0.5
    full = 0.5 * special.beta(a, b)
    u = t * t / (1.0 + t * t)
    # complement form keeps precision for large t
    return np.where(u < 0.5, full * special.betainc(a, b, u),
                    full * (1.0 - special.betainc(b, a, 1.0 / (1.0 + t * t))))


def _bracket_tail_from_one(q) -> float:
    return float(0.5 * special.beta(0.5, q - 0.5) - _bracket_integral(1.0, q))


def calibrate_delta_lambda(p: WeightParams) -> float:
    target = p.lambda_floor + (p.lambda0 - p.lambda_prime) / 8.0
    return math.log((1.0 + p.lambda1) / (1.0 + target)) / _bracket_tail_from_one(p.q_tilde)


def lambda_of_t(t, p: WeightParams):
    """Gevrey radius: constant on ``[0, 1]``, then
    ``1 + lambda(t) = (1 + lambda(1)) exp(-delta_lambda int_1^t <tau>^{-2q} d tau)``."""
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("lambda(t) is defined for t >= 0")
    tt = np.maximum(t, 1.0)
    integral = _bracket_integral(tt, p.q_tilde) - _bracket_integral(1.0, p.q_tilde)
    val = (1.0 + p.lambda1) * np.exp(-p.delta_lambda * integral) - 1.0
    out = np.where(t <= 1.0, p.lambda1, val)
    return out if out.ndim else float(out)


def dlambda_dt(t, p: WeightParams):
    t = np.asarray(t, float)
    lam = lambda_of_t(t, p)
    out = np.where(t > 1.0, -p.delta_lambda * (1.0 + t * t) ** (-p.q_tilde) * (1.0 + lam), 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# J, M, A
# ---------------------------------------------------------------------------


def log_J(t, k, eta, p: WeightParams, log_theta_value=None):
    if log_theta_value is None:
        log_theta_value, _ = log_theta(t, k, eta, p)
    return np.logaddexp(
        p.mu * np.cbrt(np.abs(eta)) - log_theta_value, p.mu * np.cbrt(np.abs(k))
    )


def log_M(t, k, eta, p: WeightParams, log_g_value=None):
    if log_g_value is None:
        log_g_value, _ = log_g(t, eta, p)
    c = p.m_rate
    return np.logaddexp(c * np.cbrt(np.abs(eta)) - log_g_value, c * np.cbrt(np.abs(k)))


def log_A(t, k, eta, p: WeightParams, include_B: bool = True):
    """``log A_k(t, eta)`` with the l^1 convention ``|k, eta| = |k| + |eta|``."""
    t, k, eta = np.broadcast_arrays(
        np.asarray(t, float), np.asarray(k), np.asarray(eta, float)
    )
    lam = lambda_of_t(t, p)
    kk = np.abs(k).astype(float)
    out = (
        lam * (kk + np.abs(eta)) ** p.s
        + 0.5 * p.sigma * np.log1p(kk * kk + eta * eta)
        + log_J(t, k, eta, p)
        + log_M(t, k, eta, p)
    )
    if include_B:
        out = out + log_B(t, k, eta, p)
    return out


def _exp_or_inf(x) -> float:
    x = float(x)
    return math.inf if x > 709.78 else math.exp(x)


def J_multiplier(t: float, k: int, eta: float, p: WeightParams) -> float:
    return _exp_or_inf(log_J(t, k, eta, p))


def M_multiplier(t: float, k: int, eta: float, p: WeightParams) -> float:
    return _exp_or_inf(log_M(t, k, eta, p))


def A_multiplier(t: float, k: int, eta: float, p: WeightParams) -> float:
    return _exp_or_inf(log_A(t, k, eta, p))
