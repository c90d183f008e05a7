"""Unweighted least-squares fits for decay curves and line shapes.

Both fits run a Levenberg-damped Gauss-Newton iteration on data rescaled
to unit range, then map estimates and covariance back to the input units.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 200
GRAD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FitResult:
    params: dict
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    n_iter: int = 0
    message: str = ""
    names: tuple = field(default=())

    @property
    def stderr(self) -> dict:
        err = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(self.names, err.tolist()))

    def to_text(self) -> str:
        """Flat ``key = value`` block."""
        lines = [f"{k} = {v:.9g}" for k, v in self.params.items()]
        lines += [f"{k}_stderr = {v:.9g}" for k, v in self.stderr.items()]
        lines += [f"residual_norm = {self.residual_norm:.9g}",
                  f"converged = {str(self.converged).lower()}",
                  f"iterations = {self.n_iter}"]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "value", "stderr"])
        err = self.stderr
        for k, v in self.params.items():
            w.writerow([k, f"{v:.9g}", f"{err[k]:.9g}"])
        return buf.getvalue()


def read_xy_csv(text: str):
    """Two-column ``x, y`` data; a non-numeric first row is taken as a header."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("no data rows")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    data = np.array([[float(r[0]), float(r[1])] for r in rows])
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("no data rows")
    return data[:, 0], data[:, 1]


def _gradient_cosine(jac, resid):
    """Largest |cos| between the residual and any Jacobian column."""
    rn = np.linalg.norm(resid)
    if rn == 0:
        return 0.0
    cn = np.linalg.norm(jac, axis=0)
    cn[cn == 0] = 1.0
    return float(np.max(np.abs(jac.T @ resid) / (cn * rn)))


def levenberg_marquardt(fun, jac, p0, y_scale=1.0, max_iter=MAX_ITER, gtol=GRAD_TOL):
    """Minimize ``||fun(p)||**2`` with damped Gauss-Newton steps.

    Convergence is declared when the residual is at round-off level relative
    to `y_scale`, or when the residual is orthogonal to every Jacobian
    column to within `gtol`.

    Returns
    -------
    p, converged, n_iter, message
    """
    p = np.asarray(p0, dtype=float).copy()
    r = fun(p)
    cost = float(r @ r)
    lam = 1e-3
    tiny = (1e-13 * y_scale) ** 2 * r.size
    for it in range(1, max_iter + 1):
        j = jac(p)
        if not np.all(np.isfinite(j)) or not np.all(np.isfinite(r)):
            return p, False, it, "non-finite residual or Jacobian"
        cos = _gradient_cosine(j, r)
        if cost <= tiny or cos <= gtol:
            return p, True, it - 1, "gradient tolerance reached"
        diag = np.sum(j * j, axis=0)
        diag[diag == 0] = 1.0
        rhs = np.concatenate([-r, np.zeros(p.size)])
        improved = False
        for _ in range(60):
            # augmented least squares avoids squaring the condition number of J
            aug = np.vstack([j, np.diag(np.sqrt(lam * diag))])
            step = np.linalg.lstsq(aug, rhs, rcond=None)[0]
            p_new = p + step
            r_new = fun(p_new)
            c_new = float(r_new @ r_new)
            if not np.isfinite(c_new):
                lam *= 10.0
                continue
            # Near the optimum the cost is flat to round-off, so a step that
            # keeps it level while reducing the gradient cosine also counts.
            flat = c_new <= cost * (1 + 1e-14) and _gradient_cosine(jac(p_new), r_new) < 0.5 * cos
            if c_new < cost or flat:
                p, r, cost = p_new, r_new, c_new
                lam = max(lam / 10.0, 1e-15)
                improved = True
                break
            lam *= 10.0
            if lam > 1e16:
                break
        if not improved:
            j = jac(p)
            if cost <= tiny or _gradient_cosine(j, r) <= gtol:
                return p, True, it, "gradient tolerance reached"
            return p, False, it, "no further decrease possible"
    return p, False, max_iter, "iteration cap reached"


def _covariance(jac, resid, n_par):
    dof = max(resid.size - n_par, 1)
    s2 = float(resid @ resid) / dof
    try:
        return s2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full((n_par, n_par), np.inf)


def _prepare(x, y, min_points):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size < min_points:
        raise ValueError(f"need at least {min_points} samples, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")
    yspan = np.ptp(y)
    if yspan <= 1e-14 * max(np.max(np.abs(y)), 1e-300):
        raise ValueError("degenerate data: y is constant")
    return x, y, yspan


def fit_exponential(t, y, window_start: float = 0.0, p0=None) -> FitResult:
    """Fit ``y = amplitude * exp(-t / lifetime) + offset`` for ``t >= window_start``.

    The starting lifetime comes from a log-linear regression on the
    baseline-subtracted data unless `p0` = (amplitude, lifetime, offset)
    is given.
    """
    t = np.asarray(t, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    keep = t >= window_start
    t, y, yspan = _prepare(t[keep], y[keep], 4)
    if np.any(y < 0):
        raise ValueError("y values must be nonnegative")
    t0 = t[0]
    tspan = np.ptp(t)
    u = (t - t0) / tspan
    v = y / yspan

    if p0 is None:
        base = v.min()
        pos = v - base > 1e-3 * (v.max() - base)
        if pos.sum() >= 2:
            slope, icpt = np.polyfit(u[pos], np.log(v[pos] - base), 1)
        else:
            slope, icpt = -1.0, 0.0
        k0 = -slope if slope < 0 else 1.0
        q0 = np.array([math.exp(icpt), k0, base])
    else:
        a, life, off = p0
        q0 = np.array([a * math.exp(-t0 / life) / yspan, tspan / life, off / yspan])

    def fun(q):
        return q[0] * np.exp(-q[1] * u) + q[2] - v

    def jac(q):
        e = np.exp(-q[1] * u)
        return np.column_stack([e, -q[0] * u * e, np.ones_like(u)])

    q, ok, n_it, msg = levenberg_marquardt(fun, jac, q0)
    if q[1] <= 0:
        ok, msg = False, "fitted decay rate is not positive"
    life = tspan / q[1]
    amp = q[0] * yspan * math.exp(t0 / life)
    off = q[2] * yspan
    r = fun(q)
    # d(amp, life, off) / d(q)
    d = np.array([
        [yspan * math.exp(t0 / life), q[0] * yspan * math.exp(t0 / life) * (t0 / tspan), 0.0],
        [0.0, -tspan / q[1] ** 2, 0.0],
        [0.0, 0.0, yspan],
    ])
    cov = d @ _covariance(jac(q), r, 3) @ d.T
    return FitResult(
        params={"amplitude": float(amp), "lifetime": float(life), "offset": float(off)},
        covariance=cov,
        residual_norm=float(np.linalg.norm(r) * yspan),
        converged=bool(ok),
        n_iter=n_it,
        message=msg,
        names=("amplitude", "lifetime", "offset"),
    )


def _half_max_width(x, v, i_peak, base):
    """FWHM from linear interpolation of the half-maximum crossings."""
    half = base + 0.5 * (v[i_peak] - base)
    left = np.flatnonzero(v[:i_peak] < half)
    right = np.flatnonzero(v[i_peak:] < half)
    if left.size == 0 or right.size == 0:
        raise ValueError("peak is not bracketed by half-maximum crossings; "
                         "the grid must span at least one FWHM around the peak")
    i = left[-1]
    xl = x[i] + (half - v[i]) * (x[i + 1] - x[i]) / (v[i + 1] - v[i])
    k = i_peak + right[0]
    xr = x[k - 1] + (half - v[k - 1]) * (x[k] - x[k - 1]) / (v[k] - v[k - 1])
    return xr - xl


def fit_lorentzian(x, y, p0=None) -> FitResult:
    """Fit ``y = amplitude * (w/2)**2 / ((x - center)**2 + (w/2)**2) + offset``.

    Starts from the argmax and the half-maximum crossings unless `p0` =
    (amplitude, center, fwhm, offset) is given. A peak that is not bracketed
    by the data raises ValueError.
    """
    x, y, yspan = _prepare(x, y, 5)
    order = np.argsort(x)
    x, y = x[order], y[order]
    xmid = 0.5 * (x[0] + x[-1])
    xspan = np.ptp(x)
    u = (x - xmid) / xspan
    v = y / yspan

    if p0 is None:
        i = int(np.argmax(v))
        base = float(v.min())
        w0 = _half_max_width(u, v, i, base)
        q0 = np.array([v[i] - base, u[i], w0, base])
    else:
        a, c, w, off = p0
        q0 = np.array([a / yspan, (c - xmid) / xspan, w / xspan, off / yspan])

    def fun(q):
        h = 0.5 * q[2]
        return q[0] * h * h / ((u - q[1]) ** 2 + h * h) + q[3] - v

    def jac(q):
        h = 0.5 * q[2]
        dx = u - q[1]
        den = dx * dx + h * h
        shape = h * h / den
        d_c = q[0] * h * h * 2 * dx / den ** 2
        d_w = q[0] * (h * dx * dx / den ** 2)
        return np.column_stack([shape, d_c, d_w, np.ones_like(u)])

    q, ok, n_it, msg = levenberg_marquardt(fun, jac, q0)
    if ok and not (u[0] <= q[1] <= u[-1]):
        ok, msg = False, "fitted center lies outside the sampled range"
    r = fun(q)
    scale = np.array([yspan, xspan, xspan, yspan])
    cov = _covariance(jac(q), r, 4) * np.outer(scale, scale)
    params = {
        "amplitude": float(q[0] * yspan),
        "center": float(q[1] * xspan + xmid),
        "fwhm": float(abs(q[2]) * xspan),
        "offset": float(q[3] * yspan),
    }
    return FitResult(params, cov, float(np.linalg.norm(r) * yspan), bool(ok), n_it, msg,
                     ("amplitude", "center", "fwhm", "offset"))
