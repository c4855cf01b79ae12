"""Power-law fits on log-log axes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RateFit:
    """Least-squares slope of ``log value`` against ``log t``.

    ``residual`` is the RMS of the linear fit in log space.
    """

    series: list
    exponent: float
    residual: float
    prefactor: float = float("nan")
    window: tuple = (float("nan"), float("nan"))

    def as_text(self, prefix=""):
        lines = [
            f"{prefix}exponent={self.exponent:.6g}",
            f"{prefix}residual={self.residual:.6g}",
            f"{prefix}prefactor={self.prefactor:.6g}",
            f"{prefix}window_lo={self.window[0]:.6g}",
            f"{prefix}window_hi={self.window[1]:.6g}",
        ]
        return "\n".join(lines)


def decay_fit(series, window=None, min_samples=8) -> RateFit:
    """Fit ``value ~ C t^p`` over ``window = (t_lo, t_hi)`` (inclusive)."""
    arr = np.asarray(series, float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, value) pairs")
    t, v = arr[:, 0], arr[:, 1]
    if window is None:
        window = (t.min(), t.max())
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < min_samples:
        raise ValueError(f"need at least {min_samples} samples in window {window}")
    if np.any(t[sel] <= 0) or np.any(v[sel] <= 0):
        raise ValueError("decay_fit needs positive times and values in the window")
    x, y = np.log(t[sel]), np.log(v[sel])
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return RateFit(
        [tuple(r) for r in arr[sel]],
        float(slope),
        res,
        float(np.exp(icpt)),
        (float(window[0]), float(window[1])),
    )


def beat_fit(series, beat, window=None, min_samples=8) -> RateFit:
    """Power-law fit for ``value^2 ~ t^{2p} (P + c cos(b log t) + d sin(b log t))``.

    Solutions of Euler-type equations ``t^2 f'' + gamma^2 f = 0`` with
    ``gamma^2 > 1/4`` carry a log-periodic beat with known frequency
    ``b = 2 sqrt(gamma^2 - 1/4)``.  A plain log-log slope over less than one
    beat period is biased by the phase of the beat; fitting the beat
    explicitly recovers the envelope exponent ``p``.
    """
    from scipy import optimize

    base = decay_fit(series, window, min_samples)
    if beat == 0:
        return base
    t = np.array([s[0] for s in base.series])
    v = np.array([s[1] for s in base.series])
    x, y = np.log(t), 2.0 * np.log(v)
    cb, sb = np.cos(beat * x), np.sin(beat * x)

    def resid(th):
        p, logP, c, d = th
        inner = 1.0 + c * cb + d * sb
        return y - 2 * p * x - logP - np.log(np.maximum(inner, 1e-300))

    best = None
    for phase in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        th0 = [base.exponent, 2 * np.log(base.prefactor), 0.5 * np.cos(phase), 0.5 * np.sin(phase)]
        sol = optimize.least_squares(
            resid, th0,
            bounds=([-np.inf, -np.inf, -0.999, -0.999], [np.inf, np.inf, 0.999, 0.999]),
            xtol=1e-14, ftol=1e-14,
        )
        if sol.success and (best is None or sol.cost < best.cost):
            best = sol
    if best is None:
        return base
    p, logP, c, d = best.x
    res = float(np.sqrt(np.mean(resid(best.x) ** 2)) / 2.0)
    return RateFit(base.series, float(p), res, float(np.exp(0.5 * logP)), base.window)
