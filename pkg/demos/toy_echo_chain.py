"""The toy model behind Theta and a truncated echo chain.

First the two-component ODE on one critical interval: the amplification
grows like ``(eta/k^3)^{1 + 2 C kappa}``, which is exactly what ``Theta``
is designed to absorb.  Then a chain of modes ``l = L, L-1, ...`` driven by
a fixed background density: energy hops from one resonance to the next.
"""

import numpy as np

from boussinesq_couette.toy import ChainState, growth_sweep, integrate_chain

rows, fit = growth_sweep(np.geomspace(1e2, 1e5, 10), k=1, kappa=0.01)
for x, amp in rows[::3]:
    print(f"eta/k^3 = {x:9.1f}  amplification {amp:10.3f}")
print(f"fitted exponent {fit.exponent:.4f}, designed {fit.expected:.4f}")

eta, L = 1000.0, 10
res = integrate_chain(ChainState({L: 1.0}, eta, L))
print(f"\nchain with eta = {eta:g}, starting at l = {L}: total growth {res.growth:.3f}")
for l, lo, hi, src in res.dominant[:6]:
    print(f"  l={l:2d} grows on [{lo:7.2f}, {hi:7.2f}], dominant source l={src}")
