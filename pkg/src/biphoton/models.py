"""Closed-form models for the pair source and its correlation measurements.

All functions are pure and use SI units (Hz, seconds) unless a name says
otherwise.  Uncertainties, where supported, are propagated to first order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LN2 = math.log(2.0)


class ModelError(ValueError):
    """Inconsistent or out-of-domain model inputs."""


@dataclass(frozen=True)
class DetectorSpec:
    """Single-photon detector: quantum efficiency, dark rate, dead time."""

    efficiency: float
    dark_rate_hz: float = 0.0
    dead_time_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ModelError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_rate_hz < 0:
            raise ModelError("dark rate must be non-negative")
        if self.dead_time_s < 0:
            raise ModelError("dead time must be non-negative")


# ---------------------------------------------------------------------------
# biphoton wavepacket geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiphotonSpec:
    """Correlation time and bandwidth implied by the two linewidths."""

    signal_linewidth_hz: float
    idler_linewidth_hz: float
    correlation_time_s: float
    bandwidth_hz: float


def biphoton_from_linewidths(dnu_s_hz: float, dnu_i_hz: float) -> BiphotonSpec:
    """Correlation time and biphoton bandwidth of a two-sided exponential
    wavepacket with the given Lorentzian linewidths.

    The correlation time is the full width at half maximum of the
    cross-correlation peak, ln2/(2 pi dnu_s) + ln2/(2 pi dnu_i); the bandwidth
    is the Lorentzian width with that coherence time, ln2/(pi tau_c).
    """
    if dnu_s_hz <= 0 or dnu_i_hz <= 0:
        raise ModelError("linewidths must be positive")
    tau_c = LN2 / (2.0 * math.pi) * (1.0 / dnu_s_hz + 1.0 / dnu_i_hz)
    return BiphotonSpec(dnu_s_hz, dnu_i_hz, tau_c, LN2 / (math.pi * tau_c))


def lorentzian_autocorrelation(dnu_hz: float, tau_s: float) -> float:
    """Autocorrelation of a single-sided exponential wavepacket of Lorentzian
    linewidth ``dnu_hz``: exp(-2 pi dnu |tau|) / (4 pi dnu).

    This is the closed form of integral f(t) f(t + tau) dt with
    f(t) = exp(-2 pi dnu t) for t >= 0; it is symmetric in tau.
    """
    if dnu_hz <= 0:
        raise ModelError("linewidth must be positive")
    return math.exp(-2.0 * math.pi * dnu_hz * abs(tau_s)) / (4.0 * math.pi * dnu_hz)


def window_correction(tau_c_s: float, dtau_s: float) -> float:
    """Ratio (g(window) - 1)/(g(0) - 1) when a correlation peak of exponential
    decay time ``tau_c_s`` is averaged over an integration window ``dtau_s``:
    (tau_c/dtau) * (1 - exp(-dtau/tau_c)).  Tends to 1 for vanishing windows.
    """
    if tau_c_s <= 0:
        raise ModelError("correlation time must be positive")
    if dtau_s < 0:
        raise ModelError("window must be non-negative")
    if dtau_s == 0.0:
        return 1.0
    x = dtau_s / tau_c_s
    return -math.expm1(-x) / x


def two_sided_window_factor(dnu_s_hz: float, dnu_i_hz: float, dtau_s: float) -> float:
    """Same ratio as :func:`window_correction` but for the exact two-sided
    exponential peak (decay constants 1/(2 pi dnu) per side) integrated over a
    window centered on the peak.
    """
    if dtau_s < 0:
        raise ModelError("window must be non-negative")
    if dtau_s == 0.0:
        return 1.0
    tau_s = 1.0 / (2.0 * math.pi * dnu_s_hz)
    tau_i = 1.0 / (2.0 * math.pi * dnu_i_hz)
    w = 0.5 * dtau_s
    # unnormalized window integral of exp(-|tau|/tau_side); the normalized
    # peak density is 1/(tau_s + tau_i), so the ratio collapses to mass/dtau
    mass = -(tau_s * math.expm1(-w / tau_s) + tau_i * math.expm1(-w / tau_i))
    return mass / dtau_s


def two_sided_capture(dnu_s_hz: float, dnu_i_hz: float, dtau_s: float) -> float:
    """Fraction of a two-sided exponential coincidence peak captured by a
    window of width ``dtau_s`` centered on the peak."""
    tau_s = 1.0 / (2.0 * math.pi * dnu_s_hz)
    tau_i = 1.0 / (2.0 * math.pi * dnu_i_hz)
    w = 0.5 * dtau_s
    mass = -(tau_s * math.expm1(-w / tau_s) + tau_i * math.expm1(-w / tau_i))
    return mass / (tau_s + tau_i)


def two_sided_peak_factor(dnu_s_hz: float, dnu_i_hz: float, dtau_s: float) -> float:
    """Ratio of the peak coincidence density to the window-averaged accidental
    density for a two-sided exponential peak.

    Multiplying a window-integrated excess (g2 - 1 measured over ``dtau_s``) by
    this factor converts it to the zero-delay excess.
    """
    if dtau_s <= 0:
        raise ModelError("window must be positive")
    tau_s = 1.0 / (2.0 * math.pi * dnu_s_hz)
    tau_i = 1.0 / (2.0 * math.pi * dnu_i_hz)
    return dtau_s / (tau_s + tau_i)


# ---------------------------------------------------------------------------
# bunching and heralding relations
# ---------------------------------------------------------------------------


def multimode_bunching(n_modes: float) -> float:
    """Zero-delay autocorrelation of thermal light in ``n_modes`` equally
    weighted modes: 1 + 1/N."""
    if n_modes < 1:
        raise ModelError(f"mode number must be >= 1, got {n_modes}")
    return 1.0 + 1.0 / n_modes


def noise_bunching(s_a: float, b_a: float, s_b: float, b_b: float) -> float:
    """Upper limit of a measured thermal bunching peak when each detector sees
    signal rate S and uncorrelated background rate B:
    1 + S_A S_B / ((S_A + B_A)(S_B + B_B)).
    """
    if min(s_a, b_a, s_b, b_b) < 0:
        raise ModelError("rates must be non-negative")
    n_a = s_a + b_a
    n_b = s_b + b_b
    if n_a == 0 or n_b == 0:
        raise ModelError("total rate on each detector must be positive")
    return 1.0 + (s_a * s_b) / (n_a * n_b)


def heralding_efficiency(p_si: float, p_i: float, eta_det_s: float) -> float:
    """Probability that the partner photon is in its fiber when a herald
    fires, with the partner detector efficiency divided out:
    eta_H = p_si / (p_i * eta_det_s)."""
    if p_i <= 0:
        raise ModelError("herald probability must be positive")
    if not 0 < eta_det_s <= 1:
        raise ModelError("detector efficiency must lie in (0, 1]")
    if p_si < 0:
        raise ModelError("coincidence probability must be non-negative")
    return p_si / (p_i * eta_det_s)


def escape_from_heralding(
    eta_h: float, eta_t: float, uncorrelated_fraction: float = 0.0
) -> float:
    """Escape efficiency inferred from a measured heralding efficiency and the
    partner arm transmission, optionally discounting the fraction of heralds
    that carry no partner: eta_esc = eta_H / (eta_T * (1 - f))."""
    if not 0 < eta_t <= 1:
        raise ModelError("arm transmission must lie in (0, 1]")
    if not 0 <= uncorrelated_fraction < 1:
        raise ModelError("uncorrelated fraction must lie in [0, 1)")
    return eta_h / (eta_t * (1.0 - uncorrelated_fraction))


def conditioned_from_unconditioned(g_ss: float, g_ii: float, g_si: float) -> float:
    """Heralded autocorrelation predicted from the unconditioned ones:
    g2 = g_ss * g_ii / g_si."""
    if g_si <= 0:
        raise ModelError("cross-correlation must be positive")
    return g_ss * g_ii / g_si


def cauchy_schwarz(
    g_si: float,
    g_ss: float,
    g_ii: float,
    sigma_si: float = 0.0,
    sigma_ss: float = 0.0,
    sigma_ii: float = 0.0,
) -> tuple[float, float]:
    """Cauchy-Schwarz parameter R = g_si^2 / (g_ss * g_ii) with first-order
    uncertainty propagation.  R > 1 is impossible for classical fields."""
    if min(g_si, g_ss, g_ii) <= 0:
        raise ModelError("correlation values must be positive")
    r = g_si * g_si / (g_ss * g_ii)
    rel = math.sqrt(
        (2.0 * sigma_si / g_si) ** 2 + (sigma_ss / g_ss) ** 2 + (sigma_ii / g_ii) ** 2
    )
    return r, r * rel


# ---------------------------------------------------------------------------
# rate budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateBudget:
    """Created-pair rate and derived quantities inferred from a detected
    coincidence slope and the loss chain."""

    detected_per_s_mw: float
    created_per_s_mw: float
    spectral_brightness_per_s_mw_mhz: float
    creation_prob_per_mw: float
    window_s: float


def rate_budget(
    detected_per_s_mw: float,
    eta_t_s: float,
    eta_det_s: float,
    eta_t_i: float,
    eta_det_i: float,
    eta_esc_s: float,
    eta_esc_i: float,
    bandwidth_hz: float,
    window_s: float,
) -> RateBudget:
    """Work the loss chain backwards from a detected coincidence slope.

    created = detected / (eta_T_s eta_det_s eta_T_i eta_det_i) is the pair
    rate behind the cavity output mirror; dividing further by the escape
    efficiencies and multiplying by the coincidence window gives the creation
    probability per window inside the cavity.
    """
    for name, eta in (
        ("eta_t_s", eta_t_s),
        ("eta_det_s", eta_det_s),
        ("eta_t_i", eta_t_i),
        ("eta_det_i", eta_det_i),
        ("eta_esc_s", eta_esc_s),
        ("eta_esc_i", eta_esc_i),
    ):
        if not 0 < eta <= 1:
            raise ModelError(f"{name} must lie in (0, 1], got {eta}")
    if detected_per_s_mw < 0 or bandwidth_hz <= 0 or window_s <= 0:
        raise ModelError("rates, bandwidth and window must be positive")
    created = detected_per_s_mw / (eta_t_s * eta_det_s * eta_t_i * eta_det_i)
    brightness = created / (bandwidth_hz / 1e6)
    p = created / (eta_esc_s * eta_esc_i) * window_s
    return RateBudget(detected_per_s_mw, created, brightness, p, window_s)


def g2_power_model(
    creation_prob_per_mw: float,
    pump_mw: float,
    eta_s: float,
    eta_i: float,
    dark_prob_s: float = 0.0,
    dark_prob_i: float = 0.0,
    window_factor: float = 1.0,
    *,
    singles_scale_s: float = 1.0,
    singles_scale_i: float = 1.0,
    average_darks: bool = False,
) -> float:
    """Cross-correlation vs pump power for a probabilistic pair source with
    detector noise.

    Per coincidence window: q_si = p P eta_s eta_i, q_s = p P eta_s * scale_s
    + d_s, q_i likewise, and g2 = 1 + q_si / (q_s q_i), scaled onto a finite
    window by ``window_factor`` (1.0 means the zero-delay value; pass e.g.
    :func:`window_correction` or :func:`two_sided_window_factor` output).

    ``average_darks`` replaces both dark probabilities by their mean, a
    modeling variant used for datasets taken with two different noisy
    detectors.  ``singles_scale_s/i`` let the accidental terms include singles
    that do not come from the heralded mode (side modes of a mode cluster).
    With zero darks and unit scales the peak reduces to 1 + 1/(pP).
    """
    if pump_mw < 0 or creation_prob_per_mw < 0:
        raise ModelError("pump power and creation probability must be non-negative")
    if average_darks:
        dark_prob_s = dark_prob_i = 0.5 * (dark_prob_s + dark_prob_i)
    q_pair = creation_prob_per_mw * pump_mw
    q_si = q_pair * eta_s * eta_i
    q_s = q_pair * eta_s * singles_scale_s + dark_prob_s
    q_i = q_pair * eta_i * singles_scale_i + dark_prob_i
    if q_s <= 0 or q_i <= 0:
        raise ModelError("singles probabilities are zero; no accidental floor exists")
    return 1.0 + (q_si / (q_s * q_i)) * window_factor


# ---------------------------------------------------------------------------
# cavity losses and escape efficiency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CavityParams:
    """Measured cavity description: finesse plus mirror reflectivities."""

    finesse: float
    r_hr: float
    r_oc: float
    fsr_hz: float = 423e6

    def solve(
        self, sigma_finesse: float = 0.0, sigma_r_oc: float = 0.0, n_hr: int = 3
    ) -> "CavitySolution":
        return cavity_solve(
            self.finesse, self.r_hr, self.r_oc, sigma_finesse, sigma_r_oc, n_hr
        )


@dataclass(frozen=True)
class CavitySolution:
    """Round-trip reflectivity product, internal loss and escape efficiency
    solved from a measured finesse."""

    finesse: float
    rho: float
    internal_loss: float
    escape_efficiency: float
    sigma_internal_loss: float = 0.0
    sigma_escape_efficiency: float = 0.0


def finesse_from_rho(rho: float) -> float:
    """Finesse of a cavity with round-trip amplitude-squared product ``rho``:
    F = pi rho^(1/4) / (1 - sqrt(rho))."""
    if not 0 < rho < 1:
        raise ModelError("rho must lie in (0, 1)")
    return math.pi * rho**0.25 / (1.0 - math.sqrt(rho))


def escape_from_losses(r_oc: float, internal_loss: float) -> float:
    """Escape efficiency of a cavity photon through the output coupler:
    (1 - R_oc) / (1 - R_oc + L_int)."""
    if not 0 < r_oc < 1:
        raise ModelError("output coupler reflectivity must lie in (0, 1)")
    if internal_loss < 0:
        raise ModelError("internal loss must be non-negative")
    return (1.0 - r_oc) / (1.0 - r_oc + internal_loss)


def _solve_rho(finesse: float) -> float:
    lo, hi = 1e-12, 1.0 - 1e-13
    if not finesse_from_rho(lo) < finesse < finesse_from_rho(hi):
        raise ModelError(f"finesse {finesse} outside solvable range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if finesse_from_rho(mid) < finesse:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cavity_solve(
    finesse: float,
    r_hr: float,
    r_oc: float,
    sigma_finesse: float = 0.0,
    sigma_r_oc: float = 0.0,
    n_hr: int = 3,
) -> CavitySolution:
    """Solve the finesse equation for the round-trip product rho, split off
    the known mirror reflectivities to get the internal loss, and convert to
    an escape efficiency.

    The cavity has ``n_hr`` high reflectors of reflectivity ``r_hr`` plus one
    output coupler ``r_oc``; rho = r_hr^n_hr * r_oc * (1 - L_int).  Input
    uncertainties are propagated by central differences.
    """
    if finesse <= 0:
        raise ModelError("finesse must be positive")
    if not 0 < r_hr <= 1 or not 0 < r_oc < 1:
        raise ModelError("mirror reflectivities must lie in (0, 1)")

    def solve(f: float, roc: float) -> tuple[float, float, float]:
        rho = _solve_rho(f)
        mirror = r_hr**n_hr * roc
        if rho >= mirror:
            raise ModelError(
                f"finesse {f} implies rho={rho:.6f} >= mirror product {mirror:.6f}; "
                "internal loss would be negative"
            )
        l_int = 1.0 - rho / mirror
        return rho, l_int, escape_from_losses(roc, l_int)

    rho, l_int, eta = solve(finesse, r_oc)
    var_l = 0.0
    var_e = 0.0
    if sigma_finesse > 0:
        _, l_hi, e_hi = solve(finesse + sigma_finesse, r_oc)
        _, l_lo, e_lo = solve(finesse - sigma_finesse, r_oc)
        var_l += (0.5 * (l_hi - l_lo)) ** 2
        var_e += (0.5 * (e_hi - e_lo)) ** 2
    if sigma_r_oc > 0:
        _, l_hi, e_hi = solve(finesse, r_oc + sigma_r_oc)
        _, l_lo, e_lo = solve(finesse, r_oc - sigma_r_oc)
        var_l += (0.5 * (l_hi - l_lo)) ** 2
        var_e += (0.5 * (e_hi - e_lo)) ** 2
    return CavitySolution(finesse, rho, l_int, eta, math.sqrt(var_l), math.sqrt(var_e))
