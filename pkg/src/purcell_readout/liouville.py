"""Driven atom-cavity Lindblad model on a truncated Fock space.

Basis ordering is ``|atom> (x) |n>`` with atom index 0 = ground, 1 = excited,
so the composite index is ``atom * n_fock + n``. Density matrices are
vectorized row-major, ``vec(rho) = rho.ravel()``, for which
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qed import SystemParams, cooperativity

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
EVOLVE_PSD_TOL = 1e-7
TRUNCATION_TOL = 1e-6
MAX_FOCK = 20


class TruncationError(RuntimeError):
    """Raised when the top Fock level carries too much steady-state population."""


class ConditioningError(RuntimeError):
    """Raised when the steady-state linear system is singular or ill-conditioned."""


@dataclass(frozen=True)
class HilbertSpec:
    n_fock: int = 5

    def __post_init__(self):
        if int(self.n_fock) != self.n_fock or self.n_fock < 2:
            raise ValueError(f"n_fock must be an integer >= 2, got {self.n_fock!r}")

    @property
    def dim(self) -> int:
        return 2 * self.n_fock


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Density operator on atom (x) cavity, validated on construction."""

    rho: np.ndarray
    n_fock: int
    psd_tol: float = field(default=PSD_TOL, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        dim = 2 * self.n_fock
        if rho.shape != (dim, dim):
            raise ValueError(f"rho must be {dim}x{dim}, got {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise ValueError("rho contains non-finite entries")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > HERMITIAN_TOL:
            raise ValueError(f"rho is not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"rho does not have unit trace (trace = {tr!r})")
        lam_min = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if lam_min < -self.psd_tol:
            raise ValueError(f"rho is not positive semidefinite (min eigenvalue {lam_min:.3g})")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def basis(cls, atom: int, n: int, n_fock: int) -> "CompositeState":
        """Pure product state ``|atom, n><atom, n|`` (atom 0 = g, 1 = e)."""
        if atom not in (0, 1) or not 0 <= n < n_fock:
            raise ValueError("basis state out of range")
        rho = np.zeros((2 * n_fock, 2 * n_fock), dtype=complex)
        k = atom * n_fock + n
        rho[k, k] = 1.0
        return cls(rho, n_fock)

    @classmethod
    def ground(cls, n_fock: int) -> "CompositeState":
        return cls.basis(0, 0, n_fock)

    @classmethod
    def excited(cls, n_fock: int) -> "CompositeState":
        return cls.basis(1, 0, n_fock)

    def expect(self, op) -> float:
        return float(np.trace(self.rho @ op).real)

    def fock_populations(self) -> np.ndarray:
        """Cavity photon-number distribution (atom traced out)."""
        d = np.real(np.diag(self.rho)).reshape(2, self.n_fock)
        return d.sum(axis=0)


@dataclass(frozen=True, eq=False)
class LindbladModel:
    hamiltonian: np.ndarray
    jump_ops: tuple
    spec: HilbertSpec
    params: SystemParams

    @property
    def number_op(self) -> np.ndarray:
        return _operators(self.spec.n_fock)["n"]

    @property
    def excited_op(self) -> np.ndarray:
        return _operators(self.spec.n_fock)["ee"]


def _operators(n_fock: int) -> dict:
    a_c = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), k=1)
    i_c = np.eye(n_fock)
    i_a = np.eye(2)
    sm = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e|
    a = np.kron(i_a, a_c)
    sigma_minus = np.kron(sm, i_c)
    return {
        "a": a.astype(complex),
        "sm": sigma_minus.astype(complex),
        "n": (a.T @ a).astype(complex),
        "ee": np.kron(np.diag([0.0, 1.0]), i_c).astype(complex),
    }


def build_model(params: SystemParams, spec: HilbertSpec | None = None) -> LindbladModel:
    """Hamiltonian and jump operators of the driven atom-cavity system.

    ``H = -Da |e><e| - Dc a'a + g (a s+ + a' s-) + (Omega/2)(s+ + s-)`` with
    jump operators ``sqrt(2 gamma) s-`` and ``sqrt(2 kappa) a``.
    """
    spec = spec or HilbertSpec()
    ops = _operators(spec.n_fock)
    a, sm = ops["a"], ops["sm"]
    sp = sm.conj().T
    h = (-params.delta_a * ops["ee"]
         - params.delta_c * ops["n"]
         + params.g * (a @ sp + a.conj().T @ sm)
         + 0.5 * params.omega * (sp + sm))
    jumps = (math.sqrt(2.0 * params.gamma) * sm, math.sqrt(2.0 * params.kappa) * a)
    return LindbladModel(h, jumps, spec, params)


def liouvillian(model: LindbladModel) -> np.ndarray:
    """Dense superoperator acting on row-major vectorized density matrices."""
    h = model.hamiltonian
    eye = np.eye(h.shape[0])
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in model.jump_ops:
        ld = op.conj().T @ op
        sup += np.kron(op, op.conj()) - 0.5 * (np.kron(ld, eye) + np.kron(eye, ld.T))
    return sup


def apply_liouvillian(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """``d rho / dt`` evaluated directly in matrix form."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for op in model.jump_ops:
        ld = op.conj().T @ op
        out += op @ rho @ op.conj().T - 0.5 * (ld @ rho + rho @ ld)
    return out


def steady_state(model: LindbladModel, cond_limit: float = 1e13) -> CompositeState:
    """Steady state from a dense solve with one row replaced by the trace constraint.

    Raises
    ------
    ConditioningError
        If the constrained system is singular or ill-conditioned.
    TruncationError
        If the top Fock level holds more than 1e-6 of the population.
    """
    dim = model.spec.dim
    sup = liouvillian(model)
    scale = np.max(np.abs(sup))  # keeps the trace row commensurate with the rates
    mat = sup.copy()
    mat[0, :] = scale * np.eye(dim).ravel()
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = scale
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > cond_limit:
        raise ConditioningError(
            f"steady-state system is ill-conditioned (condition number {cond:.3g}); "
            "check that kappa and gamma are positive")
    vec = np.linalg.solve(mat, rhs)
    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    resid = np.linalg.norm(sup @ rho.ravel())
    if resid > 1e-8 * np.linalg.norm(sup, 2):
        raise ConditioningError(f"steady-state residual {resid:.3g} exceeds tolerance")
    state = CompositeState(rho, model.spec.n_fock)
    top = state.fock_populations()[-1]
    if top > TRUNCATION_TOL:
        raise TruncationError(
            f"top Fock level population {top:.3g} exceeds {TRUNCATION_TOL:g}; "
            f"increase n_fock beyond {model.spec.n_fock}")
    return state


def converged_steady_state(params: SystemParams, n_fock: int = 5, max_fock: int = MAX_FOCK):
    """Steady state with the Fock cutoff doubled until truncation converges.

    Returns ``(model, state)`` for the first cutoff that passes.
    """
    n = n_fock
    while True:
        model = build_model(params, HilbertSpec(n))
        try:
            return model, steady_state(model)
        except TruncationError:
            if n >= max_fock:
                raise
            n = min(2 * n, max_fock)


def emission_rate(model: LindbladModel, escalate: bool = True) -> float:
    """Steady-state photon emission rate into the cavity, ``2 kappa <a'a>``.

    With `escalate`, a truncation failure rebuilds the model with a larger
    Fock cutoff (doubling, capped at 20) instead of raising immediately.
    """
    if escalate:
        model, state = converged_steady_state(model.params, model.spec.n_fock)
    else:
        state = steady_state(model)
    return max(0.0, 2.0 * model.params.kappa * state.expect(model.number_op))


def _max_rate(params: SystemParams) -> float:
    c = cooperativity(params)
    return max(2 * params.kappa, 2 * params.gamma * c.enhancement, params.omega,
               abs(params.delta_a), abs(params.delta_c), params.g)


def evolve(model: LindbladModel, initial: CompositeState, t_grid, max_step: float | None = None):
    """Integrate the master equation with fixed-step RK4 and return states on `t_grid`.

    The internal step never exceeds ``1 / (20 * fastest rate)``; every interval
    of `t_grid` is split into equal substeps. Each returned state is checked
    against the density-matrix invariants (positivity to 1e-7).

    Returns
    -------
    list of (time, CompositeState)
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
        raise ValueError("t_grid must be one-dimensional and start at 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if initial.n_fock != model.spec.n_fock:
        raise ValueError("initial state and model have different Fock cutoffs")
    h_max = 1.0 / (20.0 * _max_rate(model.params))
    if max_step is not None:
        h_max = min(h_max, max_step)
    sup = liouvillian(model)
    dim = model.spec.dim
    y = initial.rho.ravel().copy()
    scale = np.max(np.abs(y))
    out = [(0.0, initial)]
    for t0, t1 in zip(t[:-1], t[1:]):
        n_sub = int(math.ceil((t1 - t0) / h_max))
        h = (t1 - t0) / n_sub
        if h <= 0 or t0 + h == t0:
            raise FloatingPointError(f"step size underflow at t = {t0:.3g}")
        for _ in range(n_sub):
            k1 = sup @ y
            k2 = sup @ (y + 0.5 * h * k1)
            k3 = sup @ (y + 0.5 * h * k2)
            k4 = sup @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 1e3 * max(scale, 1.0):
            raise FloatingPointError(f"integration became unstable near t = {t1:.3g}")
        rho = y.reshape(dim, dim)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-8:
            raise FloatingPointError(f"trace drifted to {tr!r} at t = {t1:.3g}")
        rho_h = 0.5 * (rho + rho.conj().T)
        out.append((float(t1), CompositeState(rho_h, dim // 2, psd_tol=EVOLVE_PSD_TOL)))
    return out


def decay_curve(model: LindbladModel, initial: CompositeState, t_grid):
    """Photon flux out of the cavity, ``2 kappa <a'a>(t)``, along a trajectory.

    Returns
    -------
    times, flux : ndarray
    """
    traj = evolve(model, initial, t_grid)
    n_op = model.number_op
    times = np.array([tt for tt, _ in traj])
    flux = np.array([2.0 * model.params.kappa * s.expect(n_op) for _, s in traj])
    return times, flux


def calibrate_omega(params: SystemParams, target_rate: float, n_fock: int = 5,
                    rtol: float = 1e-10) -> float:
    """Rabi frequency at which the steady-state emission rate equals `target_rate`.

    The bracket grows from ``gamma`` until it contains the target; the rate
    saturates, so targets above the saturated value raise ValueError.
    """
    from scipy.optimize import brentq

    if target_rate < 0:
        raise ValueError("target rate must be nonnegative")
    if target_rate == 0:
        return 0.0

    def rate(omega):
        return emission_rate(build_model(params.replace(omega=omega), HilbertSpec(n_fock)))

    hi = params.gamma
    while rate(hi) < target_rate:
        if hi > 1e3 * (params.gamma + params.kappa + params.g):
            raise ValueError(f"target rate {target_rate:.4g}/s exceeds the saturated emission rate")
        hi *= 2.0
    return float(brentq(lambda om: rate(om) - target_rate, 0.0, hi, rtol=rtol))
