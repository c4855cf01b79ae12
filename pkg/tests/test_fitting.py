import numpy as np
import pytest
from hypothesis import given, strategies as st

from boussinesq_couette.fitting import beat_fit, decay_fit


def _series(f, t=np.geomspace(1, 100, 40)):
    return list(zip(t, f(t)))


def test_exact_power_law():
    fit = decay_fit(_series(lambda t: t**-2.0))
    assert fit.exponent == pytest.approx(-2.0, abs=1e-10)
    assert fit.residual < 1e-12


def test_log_periodic_ripple():
    fit = decay_fit(_series(lambda t: 3.0 * t**-3 * (1 + 0.1 * np.sin(np.log(t)))))
    assert fit.exponent == pytest.approx(-3.0, abs=0.05)


def test_constant_series():
    fit = decay_fit(_series(lambda t: np.full_like(t, 7.0)))
    assert fit.exponent == pytest.approx(0.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(7.0)


def test_window_restricts_samples():
    t = np.linspace(1, 50, 99)
    v = np.where(t < 5, 1.0, t**-1.5)
    fit = decay_fit(list(zip(t, v)), window=(5, 50))
    assert fit.exponent == pytest.approx(-1.5, abs=1e-12)
    assert fit.window == (5.0, 50.0)
    assert all(5 <= s[0] <= 50 for s in fit.series)


def test_errors():
    with pytest.raises(ValueError, match="samples"):
        decay_fit(_series(lambda t: t**-1.0, np.linspace(1, 2, 5)))
    with pytest.raises(ValueError, match="positive"):
        decay_fit(_series(lambda t: t - 5))
    with pytest.raises(ValueError):
        decay_fit([1.0, 2.0, 3.0])


def test_as_text_keys():
    text = decay_fit(_series(lambda t: t**-1.0)).as_text("u.")
    keys = [line.split("=")[0] for line in text.splitlines()]
    assert keys == ["u.exponent", "u.residual", "u.prefactor", "u.window_lo", "u.window_hi"]


def test_beat_fit_recovers_envelope():
    # a short window holds less than one beat period: the plain slope is biased
    b = 2 * np.sqrt(1 - 0.25)
    t = np.geomspace(1e3, 1e4, 64)
    v = t**-0.5 * np.sqrt(1 + 0.6 * np.cos(b * np.log(t) + 0.7))
    plain = decay_fit(list(zip(t, v)))
    beat = beat_fit(list(zip(t, v)), b)
    assert abs(beat.exponent + 0.5) < 1e-6
    assert abs(plain.exponent + 0.5) > 10 * abs(beat.exponent + 0.5)


@given(st.floats(-5, 5), st.floats(1e-3, 1e3))
def test_power_law_property(p, c):
    fit = decay_fit(_series(lambda t: c * t**p))
    assert fit.exponent == pytest.approx(p, abs=1e-9)
    assert fit.prefactor == pytest.approx(c, rel=1e-8)
