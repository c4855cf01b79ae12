"""A walk through the Fourier multipliers.

Picks one vertical frequency ``eta`` and follows the weights in time: the
critical intervals where the mode ``k`` is resonant, the slow loss of
``Theta`` across them, the smoothing weight ``g`` and the full multiplier
``A``.  Run with ``python demos/weights_tour.py``.
"""

import math

import numpy as np

from boussinesq_couette.lemmas import g_product_formula, growth_profile
from boussinesq_couette.weights import (
    WeightParams,
    critical_interval,
    cube_root_floor,
    lambda_of_t,
    log_A,
    log_g,
    log_theta,
)

p = WeightParams()
eta = 1000.0
print(f"mu = {p.mu:.4f} (derived from kappa = {p.kappa}, C = {p.C_theta})")

# Resonant windows: one per k up to eta^{1/3}, centred at t = eta/k.
print(f"\ncritical intervals for eta = {eta:g}:")
for k in range(1, cube_root_floor(eta) + 1):
    iv = critical_interval(k, eta)
    print(f"  k={k:2d}  [{iv.t_minus:8.2f}, {iv.t_plus:8.2f}]  centre {eta / k:8.2f}")

# Theta decreases backward in time; by t = 2 eta it is identically 1.
print("\nlog Theta_k(t, eta) for the resonant k = 4 and a non-resonant k = 20:")
for t in (0.0, 100.0, 200.0, 250.0, 300.0, 1000.0, 2000.0):
    r, _ = log_theta(t, 4, eta, p)
    n, _ = log_theta(t, 20, eta, p)
    print(f"  t={t:7.1f}  k=4: {float(r):9.4f}   k=20: {float(n):9.4f}")

# The total loss at t = 0 grows like e^{mu eta^{1/3}/2} up to a power.
etas = np.geomspace(10, 1e5, 5)
print("\nlog(1/Theta(0)) minus its predicted envelope (should stay bounded):")
for e, d in zip(etas, growth_profile(etas, p)):
    print(f"  eta={e:9.1f}  {d:+.4f}")

lg, _ = log_g(0.0, eta, p)
print(f"\n-log g(0, {eta:g}) = {-float(lg):.6f}; product formula {g_product_formula(eta, p):.6f}")

# The Gevrey radius shrinks but stays above its floor.
for t in (0.5, 1.0, 10.0, 1e3, 1e6):
    print(f"lambda({t:g}) = {float(lambda_of_t(t, p)):.6f}")
print(f"\nlog A(0, 1, {eta:g}) = {float(log_A(0.0, 1, eta, p)):.3f}"
      f"  (Gevrey part {float(lambda_of_t(0.0, p)) * math.pow(1 + eta, p.s):.3f})")
