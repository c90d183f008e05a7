"""
Purcell-shortened fluorescence lifetime
=======================================

Start the atom in the excited state with an empty cavity, follow the photon
flux leaving the cavity and fit an exponential to the decaying part.
"""
import numpy as np

from purcell_readout import CompositeState, HilbertSpec, SystemParams, build_model, cooperativity
from purcell_readout.fitters import fit_exponential
from purcell_readout.liouville import decay_curve
from purcell_readout.qed import MHZ, free_space_lifetime

# C = 4.73 with the cavity and atomic half-widths of the experiment
params = SystemParams.with_cooperativity(4.73, kappa=159 * MHZ, gamma=3.03 * MHZ)
rep = cooperativity(params)
print(f"g = 2pi x {params.g / MHZ:.2f} MHz, C = {rep.c_real:.3f}")
print(f"free-space lifetime      {free_space_lifetime(params.gamma) * 1e9:6.2f} ns")
print(f"1/(2 gamma (2C+1))       {rep.lifetime_enhanced * 1e9:6.2f} ns")

# One excitation is all the undriven problem ever holds, so two Fock levels suffice
model = build_model(params, HilbertSpec(2))
t = np.linspace(0, 15e-9, 601)
t, flux = decay_curve(model, CompositeState.excited(2), t)
i_peak = int(np.argmax(flux))
print(f"flux peaks at {t[i_peak] * 1e9:.2f} ns")

# The fitted lifetime depends on where the window starts: g/kappa is only
# about 0.4, so the decay is a sum of two exponentials, not one.
for start in (t[i_peak], 3e-9, 5e-9, 10e-9):
    fit = fit_exponential(t, flux, window_start=start)
    print(f"window from {start * 1e9:5.2f} ns -> lifetime {fit.params['lifetime'] * 1e9:.3f} ns")

# Exact tail: twice the slower single-excitation amplitude decay rate
gen = np.array([[-params.gamma, -1j * params.g], [-1j * params.g, -params.kappa]])
slow = -np.max(np.linalg.eigvals(gen).real)
print(f"asymptotic lifetime      {1e9 / (2 * slow):6.3f} ns")
