"""Post-processing checks of the solver's quantitative behaviour: the
scaled-norm decay law, the sup-norm bound in the essentially-bounded regime,
the self-similar envelope for kernel-shaped initial data, and the discrete
comparison principle between runs.

Fitted constants here are qualitative: the theory guarantees existence of
constants, not values, so verdicts combine boundedness with loose (5-10%)
shape tolerances, while exact algebraic identities are tested elsewhere at
machine tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import (ExponentReport, SystemParams, REGIME_NO_GUARANTEE,
                        REGIME_SMALL_DATA_BOUNDED, theorem3_check)
from .kernels import KernelSpec, SpectralGrid, eval_density_grid
from .solver import NormSeries

# scaled-norm growth allowed between t = 1 and the horizon
DECAY_GROWTH_SLACK = 0.10
# pointwise slack for the fitted sup-norm bound
LINF_EXCESS_SLACK = 0.05
# pointwise slack for the fitted envelope
ENVELOPE_EXCESS_SLACK = 0.10
# envelope denominator mask threshold, relative to the kernel peak
ENVELOPE_MASK = 1e-12


class InsufficientData(ValueError):
    pass


class RegimeMismatch(ValueError):
    pass


@dataclass
class DecayReport:
    component: int
    s_order: float
    xi: float
    sup_scaled: float
    fitted_slope: float
    slope_target: float
    verdict: bool


@dataclass
class LinfBoundReport:
    component: int
    exponent: float
    c_const: float        # multiplies ||phi||_inf
    c_decay: float        # multiplies t^exponent
    max_excess: float
    verdict: bool


@dataclass
class EnvelopeReport:
    component: int
    fitted_c: float
    fitted_k: float
    max_ratio_violation: float
    verdict: bool
    times: np.ndarray = None
    ratios: np.ndarray = None       # max_x u / [(1+t^rho)^(d/alpha) p(1+t^rho, x)]
    shape_ratios: np.ndarray = None  # max_x u / p(1+t^rho, x); constant for linear runs


@dataclass
class ComparisonReport:
    ordered: bool
    worst_margin: float
    worst_time: float
    worst_index: tuple


def _tail_window(t: np.ndarray, tail_fraction: float) -> np.ndarray:
    start = int(math.floor(t.size * (1.0 - tail_fraction)))
    return np.arange(min(start, t.size - 2), t.size)


def decay_report(series: NormSeries, exps: ExponentReport,
                 tail_fraction: float = 0.25):
    """Scaled-norm boundedness and tail log-log slope per component.

    The window is t >= 1 (the scaled quantity is examined away from the
    initial transient); the verdict requires a finite supremum and a final
    scaled value at most (1 + 10%) of its value at the first node >= 1.
    """
    if exps.regime == REGIME_NO_GUARANTEE or exps.s is None:
        raise RegimeMismatch("decay check needs a regime with norm orders attached")
    win = series.t >= 1.0
    if int(win.sum()) < 10:
        raise InsufficientData(f"only {int(win.sum())} nodes with t >= 1; need at least 10")
    out = []
    tw = series.t[win]
    for i in (0, 1):
        scaled = series.scaled[win, i]
        ls = series.ls[win, i]
        sup = float(np.max(scaled))
        tail = _tail_window(tw, tail_fraction)
        slope = float(np.polyfit(np.log(tw[tail]), np.log(ls[tail]), 1)[0])
        verdict = bool(np.isfinite(sup)
                       and scaled[-1] <= scaled[0] * (1.0 + DECAY_GROWTH_SLACK))
        out.append(DecayReport(component=i + 1, s_order=exps.s[i], xi=exps.xi[i],
                               sup_scaled=sup, fitted_slope=slope,
                               slope_target=-exps.xi[i], verdict=verdict))
    return tuple(out)


def linf_bound_check(series: NormSeries, params: SystemParams, exps: ExponentReport):
    """Fit the sup-norm bound c1 ||phi||_inf + c2 t^e_i, with
    e_i = sigma_i - beta_i xi_j - rho_i d beta_i / (alpha_i s_j) + 1,
    per component by nonnegative least squares over t >= 1.

    The two constants are fitted separately (the bounding constant is not a
    single number across both terms).  Verdict: the recorded sup norm never
    exceeds the fitted bound by more than 5% at any positive time.
    """
    if exps.regime != REGIME_SMALL_DATA_BOUNDED:
        raise RegimeMismatch(f"sup-norm bound requires the bounded regime, got {exps.regime}")
    out = []
    pos = series.t > 0.0
    fit = series.t >= 1.0
    for i in (0, 1):
        j = 1 - i
        e_i = params.sigma[i] - params.beta[i] * exps.xi[j] \
            - params.rho[i] * params.dim * params.beta[i] / (params.alpha[i] * exps.s[j]) + 1.0
        phinf = float(series.linf[0, i])
        y = series.linf[fit, i]
        design = np.column_stack([np.full(y.size, phinf), series.t[fit] ** e_i])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        coef = np.clip(coef, 0.0, None)
        bound = coef[0] * phinf + coef[1] * series.t[pos] ** e_i
        with np.errstate(divide="ignore"):
            excess = float(np.max(series.linf[pos, i] / bound)) - 1.0
        out.append(LinfBoundReport(component=i + 1, exponent=e_i,
                                   c_const=float(coef[0]), c_decay=float(coef[1]),
                                   max_excess=excess,
                                   verdict=excess <= LINF_EXCESS_SLACK))
    return tuple(out)


def selfsimilar_envelope_check(snapshots, params: SystemParams, epsilon: float,
                               grid: SpectralGrid, mask_threshold: float = ENVELOPE_MASK):
    """Envelope ratio analysis for kernel-shaped initial data.

    For each snapshot the ratio R_i(t) = max_x u_i(t, x) / D(t, x) is taken
    over grid points where the envelope denominator
    D(t, x) = (1 + t^rho)^(d/alpha) p(1 + t^rho, x) is at least
    ``mask_threshold`` * p(1 + t^rho, 0), then R_i is fitted as
    c*eps*(1+t)^(-k) over t >= 1.  Verdict: fitted k > 0 and no snapshot
    exceeds the fit by more than 10%.  The prefactor-free shape ratio
    max_x u_i / p(1+t^rho, x) is reported alongside; it is constant in t
    for a decoupled run (raise the mask above the per-step FFT clamp noise,
    about 1e-15 per step relative to the peak, when asserting that).
    """
    applicable, _ = theorem3_check(params)
    if not applicable:
        raise RegimeMismatch("self-similar envelope hypothesis does not hold for these parameters")
    alpha, rho, d = params.alpha[0], params.rho[0], params.dim
    spec = KernelSpec(alpha, d)
    times = np.array([s.time for s in snapshots], dtype=float)
    ratios = np.zeros((times.size, 2))
    shapes = np.zeros((times.size, 2))
    for k, snap in enumerate(snapshots):
        t = snap.time
        kern = eval_density_grid(spec, 1.0 + t**rho, grid)
        peak = float(kern.max())
        prefac = (1.0 + t**rho) ** (d / alpha)
        mask = prefac * kern >= mask_threshold * peak
        for i in (0, 1):
            vals = snap.components()[i][mask] / kern[mask]
            shapes[k, i] = float(vals.max())
            ratios[k, i] = shapes[k, i] / prefac
    out = []
    fit = times >= 1.0
    if int(fit.sum()) < 3:
        raise InsufficientData("need at least 3 snapshots with t >= 1 to fit the envelope")
    for i in (0, 1):
        slope, intercept = np.polyfit(np.log1p(times[fit]), np.log(ratios[fit, i]), 1)
        k_fit = -float(slope)
        c_fit = float(math.exp(intercept) / epsilon)
        bound = c_fit * epsilon * (1.0 + times) ** (-k_fit)
        violation = float(np.max(ratios[:, i] / bound)) - 1.0
        out.append(EnvelopeReport(component=i + 1, fitted_c=c_fit, fitted_k=k_fit,
                                  max_ratio_violation=violation,
                                  verdict=bool(k_fit > 0.0 and violation <= ENVELOPE_EXCESS_SLACK),
                                  times=times, ratios=ratios[:, i].copy(),
                                  shape_ratios=shapes[:, i].copy()))
    return tuple(out)


def comparison_check(upper_snapshots, lower_snapshots, tol_scale: float = 1e-9) -> ComparisonReport:
    """Pointwise ordering of two runs sharing grid and mesh: every shared
    snapshot must satisfy u >= v - tol with tol = tol_scale * ||u||_inf."""
    if len(upper_snapshots) != len(lower_snapshots):
        raise ValueError("runs have different snapshot counts")
    worst = math.inf
    worst_t = math.nan
    worst_idx = ()
    ordered = True
    for up, lo in zip(upper_snapshots, lower_snapshots):
        if up.u1.shape != lo.u1.shape:
            raise ValueError("snapshot grids do not match")
        if up.time != lo.time:
            raise ValueError(f"snapshot times differ: {up.time} vs {lo.time}")
        for i, (a, b) in enumerate(zip(up.components(), lo.components())):
            diff = a - b
            m = float(diff.min())
            if m < worst:
                worst = m
                worst_t = up.time
                worst_idx = (i + 1,) + np.unravel_index(int(diff.argmin()), diff.shape)
            tol = tol_scale * float(np.abs(a).max(initial=0.0))
            if m < -tol:
                ordered = False
    return ComparisonReport(ordered=ordered, worst_margin=worst,
                            worst_time=worst_t, worst_index=worst_idx)
