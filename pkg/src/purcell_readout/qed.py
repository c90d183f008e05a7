"""Closed-form atom-cavity analytics.

All rates are angular frequencies in rad/s. Use :meth:`SystemParams.from_mhz`
to build parameters from values quoted as ``2*pi x MHz``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6  # 1 MHz (ordinary frequency) expressed in rad/s


@dataclass(frozen=True)
class SystemParams:
    """Physical rates of the driven two-level atom coupled to one cavity mode.

    Parameters
    ----------
    g : float
        Atom-cavity coupling strength.
    kappa : float
        Cavity field decay rate.
    gamma : float
        Atomic polarization decay rate (population decays at ``2*gamma``).
    delta_a, delta_c : float
        Detuning of the drive from the atom and from the cavity.
    omega : float
        Drive Rabi frequency.
    """

    g: float
    kappa: float
    gamma: float
    delta_a: float = 0.0
    delta_c: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa", "gamma", "delta_a", "delta_c", "omega"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if self.g < 0:
            raise ValueError(f"g must be nonnegative, got {self.g!r}")
        if self.omega < 0:
            raise ValueError(f"omega must be nonnegative, got {self.omega!r}")

    @classmethod
    def from_mhz(cls, g, kappa, gamma, delta_a=0.0, delta_c=0.0, omega=0.0):
        """Build from ordinary frequencies in MHz (multiplied by 2*pi internally)."""
        return cls(g * MHZ, kappa * MHZ, gamma * MHZ,
                   delta_a * MHZ, delta_c * MHZ, omega * MHZ)

    @classmethod
    def with_cooperativity(cls, c, kappa, gamma, **kwargs):
        """Parameters whose coupling is chosen so that ``g**2 / (2 kappa gamma) == c``."""
        if c < 0:
            raise ValueError("cooperativity must be nonnegative")
        return cls(math.sqrt(2.0 * kappa * gamma * c), kappa, gamma, **kwargs)

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class CooperativityReport:
    c_real: float
    c_complex: complex
    enhancement: float
    lifetime_enhanced: float
    fwhm_enhanced: float


def free_space_lifetime(gamma: float) -> float:
    """Excited-state 1/e lifetime without the cavity, ``1 / (2 gamma)``."""
    return 1.0 / (2.0 * gamma)


def complex_cooperativity(params: SystemParams) -> complex:
    return params.g ** 2 / (2.0 * (params.kappa - 1j * params.delta_c)
                            * (params.gamma - 1j * params.delta_a))


def cooperativity(params: SystemParams) -> CooperativityReport:
    """Cooperativity, its detuned complex form and the Purcell-enhanced figures.

    The enhanced lifetime is the free-space lifetime divided by ``2C + 1`` and
    the enhanced linewidth (FWHM, rad/s) is ``(2C + 1) * 2 gamma``.
    """
    c = params.g ** 2 / (2.0 * params.kappa * params.gamma)
    enhancement = 2.0 * c + 1.0
    return CooperativityReport(
        c_real=c,
        c_complex=complex_cooperativity(params),
        enhancement=enhancement,
        lifetime_enhanced=free_space_lifetime(params.gamma) / enhancement,
        fwhm_enhanced=enhancement * 2.0 * params.gamma,
    )


def emission_rate_weak_drive(params: SystemParams) -> float:
    """Photon emission rate into the cavity in the weak-drive limit.

    ``R = Omega**2 / (gamma C) * |C~|**2 / |1 + 2 C~|**2`` with ``C`` the
    resonant cooperativity and ``C~`` evaluated at the detunings of `params`.
    Valid for ``Omega << gamma``; this is not enforced.
    """
    if params.g == 0:
        raise ValueError("uncoupled system: g = 0 makes the weak-drive rate singular")
    c = params.g ** 2 / (2.0 * params.kappa * params.gamma)
    ct = complex_cooperativity(params)
    return float(params.omega ** 2 / (params.gamma * c) * abs(ct) ** 2 / abs(1 + 2 * ct) ** 2)


def lineshape_scan(params: SystemParams, detuning_grid, scan: str = "atom"):
    """Weak-drive emission rate as the drive frequency is stepped over `detuning_grid`.

    ``scan="atom"`` sets the atom detuning to each grid value and keeps the
    cavity detuning at ``params.delta_c``. The resulting line is an exact
    Lorentzian of FWHM ``(2C+1) 2 gamma``. ``scan="common"`` moves both
    detunings together. That co-scan adds a cavity filtering factor, which
    broadens the line further when ``g`` is comparable to ``kappa``.

    Returns
    -------
    detunings, rates : ndarray
    """
    grid = np.asarray(detuning_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("detuning grid is empty")
    if scan not in ("atom", "common"):
        raise ValueError(f"unknown scan mode {scan!r}; expected 'atom' or 'common'")
    rates = np.empty_like(grid)
    for i, d in enumerate(grid):
        if scan == "atom":
            p = params.replace(delta_a=float(d))
        else:
            p = params.replace(delta_a=float(d), delta_c=float(d))
        rates[i] = emission_rate_weak_drive(p)
    return grid, rates
