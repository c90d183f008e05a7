"""
Threshold readout with a dead-time-limited detector
===================================================

Bright and dark count histograms for three readout windows, and the
infidelity at the optimal threshold.
"""
from purcell_readout import DetectorModel, ReadoutConfig, simulate_counts
from purcell_readout.counting import dead_time_correct, optimize_threshold, readout_histograms

detector = DetectorModel(efficiency=1.0, dead_time=28e-9, background_rate=6.5e3)

# Bright input rates before dead time, recovered from measured count rates
for duration, measured in [(200e-9, 18.1e6), (800e-9, 9.12e6), (9e-6, 2.16e6)]:
    bright = dead_time_correct(measured, detector.dead_time)
    cfg = ReadoutConfig(duration, bright, detector.background_rate)
    hb, hd = readout_histograms(cfg, detector, 200_000, seed=1)
    res = optimize_threshold(hb, hd)
    print(f"{duration * 1e9:6.0f} ns  bright {bright / 1e6:5.2f} Mcps  mean counts {hb.mean():5.2f}  "
          f"N_thr = {res.threshold}  infidelity {res.infidelity:.2e}")

# Dead time caps the count rate: long windows follow R / (1 + R t_dead)
for rate in (10e6, 40e6, 160e6):
    h = simulate_counts(ReadoutConfig(20e-6, rate, 0.0), detector, "bright", 2000, seed=2, n_max=1000)
    print(f"input {rate / 1e6:5.0f} Mcps -> detected {h.mean() / 20e-6 / 1e6:5.2f} Mcps "
          f"(renewal formula {rate / (1 + rate * detector.dead_time) / 1e6:5.2f})")
