"""Purcell-enhanced single-atom readout toolkit.

Modules
-------
qed        closed-form cooperativity, weak-drive emission rate, line shapes
liouville  Lindblad model, steady states, time evolution, decay curves
counting   detector model, count histograms, threshold discrimination
protocol   segmented optical pumping with readout (accelerated preparation)
fitters    exponential and Lorentzian least-squares fits
cli        command-line pipelines
"""
from .counting import (CountHistogram, DetectorModel, DiscriminationResult, ReadoutConfig,
                       analytic_dark_histogram, dead_time_correct, optimize_threshold,
                       readout_fidelity, simulate_counts)
from .fitters import FitResult, fit_exponential, fit_lorentzian
from .liouville import (CompositeState, HilbertSpec, LindbladModel, build_model, decay_curve,
                        emission_rate, evolve, steady_state)
from .protocol import (ProtocolConfig, ProtocolReport, PumpModel, optimize_segments,
                       protocol_report, simulate_protocol, transfer_matrix)
from .qed import (MHZ, CooperativityReport, SystemParams, cooperativity,
                  emission_rate_weak_drive, lineshape_scan)

__version__ = "0.1.0"

__all__ = [
    "CountHistogram", "DetectorModel", "DiscriminationResult", "ReadoutConfig",
    "analytic_dark_histogram", "dead_time_correct", "optimize_threshold", "readout_fidelity",
    "simulate_counts", "FitResult", "fit_exponential", "fit_lorentzian", "CompositeState",
    "HilbertSpec", "LindbladModel", "build_model", "decay_curve", "emission_rate", "evolve",
    "steady_state", "ProtocolConfig", "ProtocolReport", "PumpModel", "optimize_segments",
    "protocol_report", "simulate_protocol", "transfer_matrix", "MHZ", "CooperativityReport",
    "SystemParams", "cooperativity", "emission_rate_weak_drive", "lineshape_scan",
]
