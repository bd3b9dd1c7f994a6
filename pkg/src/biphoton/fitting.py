"""Weighted nonlinear least-squares fits for correlation histograms.

Two peak models are provided: the two-sided exponential of a nondegenerate
pair source (independent falling and rising linewidths) and a symmetric
exponential for thermal bunching peaks.  The solver is a damped Gauss-Newton
iteration with analytic Jacobians and Poisson weighting; bins are weighted
by 1/max(counts, 1) and the bin containing the peak position carries half
weight because the model kink makes its Jacobian unreliable there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlator import AnalysisError, CorrelationHistogram

TWO_PI = 2.0 * math.pi
LN2 = math.log(2.0)

DOUBLE_EXPONENTIAL = "double-exponential"
SYMMETRIC_EXPONENTIAL = "symmetric-exponential"

_PARAM_NAMES = {
    DOUBLE_EXPONENTIAL: ("amplitude", "dnu_fall_hz", "dnu_rise_hz", "tau0_s", "floor"),
    SYMMETRIC_EXPONENTIAL: ("floor", "contrast", "tau_decay_s", "tau0_s"),
}


@dataclass(frozen=True)
class FitResult:
    """Converged parameter estimates with first-order standard errors."""

    model: str
    names: tuple[str, ...]
    values: np.ndarray
    errors: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int

    def param(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.errors[self.names.index(name)])

    def fwhm_s(self) -> float:
        """Full width at half maximum of the fitted peak above its floor."""
        if self.model == DOUBLE_EXPONENTIAL:
            return LN2 / TWO_PI * (1.0 / self.param("dnu_fall_hz") + 1.0 / self.param("dnu_rise_hz"))
        if self.model == SYMMETRIC_EXPONENTIAL:
            return 2.0 * LN2 * self.param("tau_decay_s")
        raise AnalysisError(f"unknown model {self.model!r}")

    def g2_zero(self) -> float:
        """Peak-to-floor ratio at zero delay (normalized g2 scale)."""
        if self.model == DOUBLE_EXPONENTIAL:
            floor = self.param("floor")
            if floor <= 0:
                raise AnalysisError("fitted floor is not positive")
            return 1.0 + self.param("amplitude") / floor
        if self.model == SYMMETRIC_EXPONENTIAL:
            return 1.0 + self.param("contrast")
        raise AnalysisError(f"unknown model {self.model!r}")


# ---------------------------------------------------------------------------
# models with analytic Jacobians
# ---------------------------------------------------------------------------


def _double_exponential(params: np.ndarray, tau: np.ndarray):
    amp, dnu_fall, dnu_rise, tau0, floor = params
    d = tau - tau0
    falling = d >= 0
    # aggressive trial steps may overflow to inf; the solver rejects those
    with np.errstate(over="ignore"):
        e = np.where(falling, np.exp(-TWO_PI * dnu_fall * d), np.exp(TWO_PI * dnu_rise * d))
    f = amp * e + floor
    jac = np.empty((tau.size, 5))
    jac[:, 0] = e
    jac[:, 1] = np.where(falling, -amp * TWO_PI * d * e, 0.0)
    jac[:, 2] = np.where(falling, 0.0, amp * TWO_PI * d * e)
    jac[:, 3] = np.where(falling, amp * TWO_PI * dnu_fall * e, -amp * TWO_PI * dnu_rise * e)
    jac[:, 4] = 1.0
    return f, jac


def _symmetric_exponential(params: np.ndarray, tau: np.ndarray):
    floor, contrast, tau_d, tau0 = params
    d = tau - tau0
    with np.errstate(over="ignore"):
        e = np.exp(-np.abs(d) / tau_d)
    f = floor * (1.0 + contrast * e)
    jac = np.empty((tau.size, 4))
    jac[:, 0] = 1.0 + contrast * e
    jac[:, 1] = floor * e
    jac[:, 2] = floor * contrast * e * np.abs(d) / (tau_d * tau_d)
    jac[:, 3] = floor * contrast * e * np.sign(d) / tau_d
    return f, jac


_MODELS = {
    DOUBLE_EXPONENTIAL: _double_exponential,
    SYMMETRIC_EXPONENTIAL: _symmetric_exponential,
}


def evaluate_model(model: str, params, tau_s) -> np.ndarray:
    """Model curve on a delay grid (seconds)."""
    try:
        fn = _MODELS[model]
    except KeyError:
        raise AnalysisError(f"unknown model {model!r}") from None
    f, _ = fn(np.asarray(params, dtype=float), np.asarray(tau_s, dtype=float))
    return f


def finite_difference_check(model: str, params, tau_s, rel_step: float = 1e-6) -> float:
    """Largest deviation between the analytic Jacobian and central
    differences, relative to the Jacobian scale.  The caller should keep the
    kink position out of ``tau_s``; the model is not differentiable there.
    """
    try:
        fn = _MODELS[model]
    except KeyError:
        raise AnalysisError(f"unknown model {model!r}") from None
    params = np.asarray(params, dtype=float)
    tau = np.asarray(tau_s, dtype=float)
    _, jac = fn(params, tau)
    fd = np.empty_like(jac)
    for k in range(params.size):
        step = rel_step * max(abs(params[k]), 1e-30)
        hi = params.copy()
        lo = params.copy()
        hi[k] += step
        lo[k] -= step
        fd[:, k] = (fn(hi, tau)[0] - fn(lo, tau)[0]) / (2.0 * step)
    scale = max(float(np.abs(jac).max()), 1.0)
    return float(np.abs(jac - fd).max() / scale)


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


def _weights(counts: np.ndarray, tau: np.ndarray, tau0: float, bin_s: float) -> np.ndarray:
    w = 1.0 / np.maximum(counts, 1.0)
    kink = np.abs(tau - tau0) < 0.5 * bin_s
    w[kink] *= 0.5
    return w


def _solve(
    model: str,
    tau: np.ndarray,
    counts: np.ndarray,
    params: np.ndarray,
    bin_s: float,
    tau0_index: int,
    positive: tuple[int, ...],
    max_iter: int = 200,
) -> FitResult:
    fn = _MODELS[model]
    lam = 1e-3
    f, jac = fn(params, tau)
    w = _weights(counts, tau, params[tau0_index], bin_s)
    r = counts - f
    cost = float(np.dot(w, r * r))
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        jtw = jac.T * w
        hess = jtw @ jac
        grad = jtw @ r
        diag = np.diag(hess).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        for _ in range(25):
            try:
                step = np.linalg.solve(hess + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + step
            if any(trial[k] <= 0 for k in positive):
                lam *= 10.0
                continue
            f_t, jac_t = fn(trial, tau)
            w_t = _weights(counts, tau, trial[tau0_index], bin_s)
            r_t = counts - f_t
            cost_t = float(np.dot(w_t, r_t * r_t))
            if cost_t <= cost:
                rel = float(np.max(np.abs(step) / (np.abs(params) + 1e-300)))
                params, f, jac, w, r, cost = trial, f_t, jac_t, w_t, r_t, cost_t
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                if rel < 1e-8:
                    converged = True
                break
            lam *= 10.0
        if converged or not accepted:
            break
    jtw = jac.T * w
    hess = jtw @ jac
    try:
        cov = np.linalg.inv(hess)
        errors = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        errors = np.full(params.size, np.inf)
    return FitResult(
        model=model,
        names=_PARAM_NAMES[model],
        values=params,
        errors=errors,
        residual_norm=cost,
        converged=converged,
        iterations=iteration,
    )


def _floor_estimate(counts: np.ndarray) -> float:
    quarter = max(counts.size // 4, 1)
    return float(np.median(np.concatenate([counts[:quarter], counts[-quarter:]])))


def _smoothed(counts: np.ndarray) -> np.ndarray:
    """Boxcar-smoothed copy for locating a peak that may sit well below the
    single-bin noise level."""
    k = min(max(counts.size // 50, 1), 101)
    if k <= 1:
        return counts
    kernel = np.full(k, 1.0 / k)
    return np.convolve(counts, kernel, mode="same")


def _half_width(tau: np.ndarray, counts: np.ndarray, peak: int, floor: float, sign: int) -> float:
    """Distance from the peak to the half-maximum crossing on one side."""
    half = floor + 0.5 * (counts[peak] - floor)
    i = peak
    while 0 <= i + sign < counts.size and counts[i + sign] > half:
        i += sign
    j = min(max(i + sign, 0), counts.size - 1)
    return abs(tau[j] - tau[peak])


def fit_double_exponential(
    hist: CorrelationHistogram, tau0_init_s: float | None = None
) -> FitResult:
    """Fit the two-sided exponential peak model to a delay histogram.

    The fall side (positive delays beyond the peak) and rise side carry
    independent rate parameters; both are reported as linewidths in Hz.
    ``tau0_init_s`` overrides the automatic peak-position start value.
    """
    tau = hist.bin_centers_ps * 1e-12
    counts = hist.counts.astype(float)
    bin_s = hist.bin_width_ps * 1e-12
    floor = _floor_estimate(counts)
    if tau0_init_s is None:
        peak = int(np.argmax(_smoothed(counts)))
    else:
        peak = int(np.argmin(np.abs(tau - tau0_init_s)))
    amp = counts[peak] - floor
    if amp <= 0 or counts.size < 8:
        init = np.array([max(amp, 1.0), 1e6, 1e6, tau[peak], max(floor, 0.0)])
        return FitResult(
            model=DOUBLE_EXPONENTIAL,
            names=_PARAM_NAMES[DOUBLE_EXPONENTIAL],
            values=init,
            errors=np.full(5, np.inf),
            residual_norm=float("nan"),
            converged=False,
            iterations=0,
        )
    w_fall = max(_half_width(tau, counts, peak, floor, +1), bin_s)
    w_rise = max(_half_width(tau, counts, peak, floor, -1), bin_s)
    init = np.array(
        [amp, LN2 / (TWO_PI * w_fall), LN2 / (TWO_PI * w_rise), tau[peak], max(floor, 1e-3)]
    )
    return _solve(
        DOUBLE_EXPONENTIAL, tau, counts, init, bin_s, tau0_index=3, positive=(0, 1, 2)
    )


def fit_symmetric_exponential(
    hist: CorrelationHistogram,
    tau0_init_s: float | None = None,
    decay_init_s: float | None = None,
) -> FitResult:
    """Fit a symmetric exponential bunching peak, floor * (1 + A e^(-|d|/tau)).

    The contrast A estimates g2(0) - 1 directly because the floor is the
    accidental level of the same histogram.  Bunching peaks often rise only a
    few percent above a noisy floor, so the start position comes from a
    smoothed copy of the counts; pass ``tau0_init_s`` (and optionally
    ``decay_init_s``) when the peak location is known.
    """
    tau = hist.bin_centers_ps * 1e-12
    counts = hist.counts.astype(float)
    bin_s = hist.bin_width_ps * 1e-12
    floor = _floor_estimate(counts)
    smooth = _smoothed(counts)
    if tau0_init_s is None:
        peak = int(np.argmax(smooth))
    else:
        peak = int(np.argmin(np.abs(tau - tau0_init_s)))
    contrast = smooth[peak] / floor - 1.0 if floor > 0 else 0.0
    if floor <= 0 or contrast <= 0 or counts.size < 8:
        init = np.array([max(floor, 1.0), 0.1, 1e-7, tau[peak]])
        return FitResult(
            model=SYMMETRIC_EXPONENTIAL,
            names=_PARAM_NAMES[SYMMETRIC_EXPONENTIAL],
            values=init,
            errors=np.full(4, np.inf),
            residual_norm=float("nan"),
            converged=False,
            iterations=0,
        )
    if decay_init_s is None:
        width = max(
            _half_width(tau, smooth, peak, floor, +1),
            _half_width(tau, smooth, peak, floor, -1),
            bin_s,
        )
        decay_init_s = width / LN2
    init = np.array([floor, contrast, decay_init_s, tau[peak]])
    return _solve(
        SYMMETRIC_EXPONENTIAL, tau, counts, init, bin_s, tau0_index=3, positive=(0, 1, 2)
    )
