"""
Purcell-broadened excitation line
=================================

Weak-drive emission rate versus probe detuning, with a Lorentzian fit.
"""
import numpy as np

from purcell_readout import SystemParams, cooperativity, fit_lorentzian, lineshape_scan
from purcell_readout.liouville import build_model, emission_rate
from purcell_readout.qed import MHZ

params = SystemParams.with_cooperativity(4.65, kappa=159 * MHZ, gamma=3.03 * MHZ,
                                         omega=0.1 * 3.03 * MHZ)
grid = 0.25 * MHZ * np.arange(-800, 801)

for mode in ("atom", "common"):
    d, r = lineshape_scan(params, grid, scan=mode)
    fit = fit_lorentzian(d, r)
    print(f"{mode:>6} scan: FWHM = 2pi x {fit.params['fwhm'] / MHZ:.2f} MHz")
print(f"(2C+1) 2 gamma = 2pi x {cooperativity(params).fwhm_enhanced / MHZ:.2f} MHz")

# Spot-check the closed form against the full master equation
for delta in (0.0, 10 * MHZ, 30 * MHZ):
    p = params.replace(delta_a=delta)
    print(f"Da = 2pi x {delta / MHZ:4.0f} MHz: Lindblad {emission_rate(build_model(p)):.4e} /s, "
          f"closed form {lineshape_scan(params, [delta])[1][0]:.4e} /s")
