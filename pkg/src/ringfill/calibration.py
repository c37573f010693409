"""Fit ratio-model parameters from a measurement corpus.

The guard-ring term is fitted from single-ring rows (ratio vs ring OD
width at known diffusion gaps); the fill term is inverted row-by-row
into the Vt lookup table.  With two single-ring rows and the threshold
fixed at the wider ring's width the fit has a closed form; the simplex
solver refines from it and must agree to solver precision.

Everything here is deterministic: no randomness, fixed iteration order,
so identical corpora produce bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .extraction import DeviceContext
from .geometry import DeviceKind
from .measurements import DummyKind, MeasurementRow, RingSpec
from .models import (
    DEFAULT_ODW_TH_NM,
    DEFAULT_V_OV_V,
    DEFAULT_VT_REF_V,
    ModelParams,
    OseParams,
    PolarityTable,
    VtSample,
    VtTable,
    effective_sti_width,
    predict_ratio,
)


class CalibrationError(Exception):
    pass


class Underdetermined(CalibrationError):
    pass


class NonPositiveSolution(CalibrationError):
    pass


class MissingReferenceRow(CalibrationError):
    pass


# ---------------------------------------------------------------------------
# Derivative-free simplex minimizer


@dataclass(frozen=True)
class FitResult:
    params: tuple[float, ...]
    objective_value: float
    evaluations: int
    converged: bool  # False when the evaluation budget ran out
    at_bounds: bool  # best point sits on a bound


def fit_nonlinear(
    objective: Callable[[Sequence[float]], float],
    initial: Sequence[float],
    bounds: Sequence[tuple[float, float]],
    diameter_tol: float = 1e-10,
    max_evaluations: int = 10_000,
) -> FitResult:
    """Nelder-Mead simplex descent within box bounds.

    Candidate points are projected onto the bounds before evaluation.
    Terminates when the simplex diameter drops below ``diameter_tol``
    or the evaluation budget is exhausted (best-so-far returned,
    ``converged=False``).  The result never exceeds objective(initial).
    """
    n = len(initial)
    if len(bounds) != n:
        raise ValueError("bounds length must match parameter count")
    for lo, hi in bounds:
        if lo > hi:
            raise ValueError(f"bound ({lo}, {hi}) is not ordered")

    def clamp(x: list[float]) -> list[float]:
        return [min(max(v, lo), hi) for v, (lo, hi) in zip(x, bounds)]

    evaluations = 0

    def value(x: list[float]) -> float:
        nonlocal evaluations
        evaluations += 1
        return objective(x)

    x0 = clamp(list(map(float, initial)))
    f0 = value(x0)
    if not math.isfinite(f0):
        raise ValueError(f"objective not finite at initial point: {f0}")

    # Initial simplex: perturb each coordinate (scipy-style steps).
    simplex = [x0]
    for i in range(n):
        p = list(x0)
        p[i] = p[i] * 1.05 if p[i] != 0.0 else 0.00025
        simplex.append(clamp(p))
    values = [f0] + [value(p) for p in simplex[1:]]

    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    converged = False
    while evaluations < max_evaluations:
        order = sorted(range(n + 1), key=lambda i: (values[i], i))
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        diameter = max(
            max(abs(a - b) for a, b in zip(simplex[0], simplex[j]))
            for j in range(1, n + 1)
        )
        if diameter < diameter_tol:
            converged = True
            break

        centroid = [
            sum(simplex[i][d] for i in range(n)) / n for d in range(n)
        ]
        worst = simplex[-1]
        reflected = clamp(
            [c + alpha * (c - w) for c, w in zip(centroid, worst)]
        )
        fr = value(reflected)
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = reflected, fr
            continue
        if fr < values[0]:
            expanded = clamp(
                [c + gamma * (r - c) for c, r in zip(centroid, reflected)]
            )
            fe = value(expanded)
            if fe < fr:
                simplex[-1], values[-1] = expanded, fe
            else:
                simplex[-1], values[-1] = reflected, fr
            continue
        contracted = clamp(
            [c + rho * (w - c) for c, w in zip(centroid, worst)]
        )
        fc = value(contracted)
        if fc < values[-1]:
            simplex[-1], values[-1] = contracted, fc
            continue
        best = simplex[0]
        for j in range(1, n + 1):
            simplex[j] = clamp(
                [b + sigma * (p - b) for b, p in zip(best, simplex[j])]
            )
            values[j] = value(simplex[j])

    order = sorted(range(n + 1), key=lambda i: (values[i], i))
    best = simplex[order[0]]
    at_bounds = any(
        v == lo or v == hi for v, (lo, hi) in zip(best, bounds)
    )
    return FitResult(
        params=tuple(best),
        objective_value=values[order[0]],
        evaluations=evaluations,
        converged=converged,
        at_bounds=at_bounds,
    )


# ---------------------------------------------------------------------------
# Guard-ring term


@dataclass(frozen=True)
class RingObservation:
    """One single-ring measurement: geometry plus measured ratio."""

    stiw: float  # device-to-ring diffusion gap, nm
    odw: float  # ring OD frame width, nm
    measured_ratio: float


_K_BOUNDS = (0.0, 100.0)
_C_MU_BOUNDS = (0.0, 1e5)


def closed_form_ose(
    obs: Sequence[RingObservation], odw_th: float
) -> tuple[float, float] | None:
    """Algebraic (k, c_mu) from exactly two rows when one ring is at or
    above the threshold width.  Returns None when not applicable."""
    if len(obs) != 2:
        return None
    wide = [o for o in obs if o.odw >= odw_th]
    narrow = [o for o in obs if o.odw < odw_th]
    if len(wide) != 1 or len(narrow) != 1:
        return None
    w, nv = wide[0], narrow[0]
    if w.measured_ratio <= 1.0 or nv.measured_ratio <= 1.0:
        raise NonPositiveSolution(
            f"single-ring ratios must exceed 1 for a positive fit: "
            f"{w.measured_ratio}, {nv.measured_ratio}"
        )
    c_mu = (w.measured_ratio - 1.0) * w.stiw
    k = (c_mu / (nv.measured_ratio - 1.0) - nv.stiw) / nv.stiw * (nv.odw / odw_th)
    if k < 0:
        raise NonPositiveSolution(
            f"closed form gives k = {k}: narrow ring shows less gain than "
            "the wide one at equal gap"
        )
    return k, c_mu


def calibrate_ose(
    obs: Sequence[RingObservation],
    odw_th: float = DEFAULT_ODW_TH_NM,
    sign: int = +1,
) -> tuple[OseParams, int]:
    """Fit (k, c_mu) minimizing squared ratio error over the observations.

    Returns the fitted parameters and the solver evaluation count.
    ``odw_th`` is fixed configuration, not fitted.
    """
    distinct = {o.odw for o in obs}
    if len(distinct) < 2:
        raise Underdetermined(
            f"need >= 2 single-ring rows with distinct ring widths, got {sorted(distinct)}"
        )

    def objective(x: Sequence[float]) -> float:
        k, c_mu = x
        p = OseParams(k=max(k, 0.0), odw_th=odw_th, c_mu=max(c_mu, 0.0))
        total = 0.0
        for o in obs:
            pred = 1.0 + sign * p.c_mu / effective_sti_width(o.stiw, o.odw, p)
            total += (pred - o.measured_ratio) ** 2
        return total

    closed = closed_form_ose(obs, odw_th)
    if closed is not None:
        initial = closed
    else:
        widest = max(obs, key=lambda o: o.odw)
        initial = (1.0, max((widest.measured_ratio - 1.0) * widest.stiw, 1.0))
    fit = fit_nonlinear(objective, initial, [_K_BOUNDS, _C_MU_BOUNDS])
    k, c_mu = fit.params
    if c_mu <= 0.0:
        raise NonPositiveSolution(
            f"fit drove c_mu to {c_mu}; the corpus shows no positive ring gain"
        )
    return OseParams(k=k, odw_th=odw_th, c_mu=c_mu), fit.evaluations


# ---------------------------------------------------------------------------
# Fill term


def calibrate_vt_table(
    rows: Sequence[tuple[MeasurementRow, tuple[float, float]]],
    vt_ref: float = DEFAULT_VT_REF_V,
    v_ov: float = DEFAULT_V_OV_V,
) -> VtTable:
    """Invert measured ratios into Vt-shift anchors at extracted densities.

    f = (1 - ratio) * v_ov / (2 * vt_ref), so the square-law current
    factor reproduces each training ratio exactly.  One row must be the
    reference with measured ratio exactly 1.00 (its anchor gets f = 0).
    """
    if not any(row.measured_ratio == 1.0 for row, _ in rows):
        raise MissingReferenceRow(
            "no dummy-fill row with measured ratio 1.00 to serve as reference"
        )
    samples = tuple(
        VtSample(d_nod, d_pod, (1.0 - row.measured_ratio) * v_ov / (2.0 * vt_ref))
        for row, (d_nod, d_pod) in rows
    )
    return VtTable(samples=samples, vt_ref=vt_ref, v_ov=v_ov)


# ---------------------------------------------------------------------------
# Whole-corpus calibration


@dataclass(frozen=True)
class ResidualRow:
    row: MeasurementRow
    predicted: float

    @property
    def residual(self) -> float:
        return self.predicted - self.row.measured_ratio


@dataclass(frozen=True)
class CalibrationResult:
    params: dict[DeviceKind, OseParams]
    vt_tables: dict[DeviceKind, VtTable]
    polarity: PolarityTable
    residuals: tuple[ResidualRow, ...]
    max_abs_residual: float
    iterations: int

    @property
    def model_params(self) -> ModelParams:
        return ModelParams(ose=dict(self.params), vt=dict(self.vt_tables),
                           polarity=self.polarity)


def calibrate(
    corpus: Sequence[MeasurementRow],
    contexts: dict[tuple[DeviceKind, RingSpec, DummyKind], DeviceContext],
    odw_th: float = DEFAULT_ODW_TH_NM,
    vt_ref: float = DEFAULT_VT_REF_V,
    v_ov: float = DEFAULT_V_OV_V,
    polarity: PolarityTable | None = None,
) -> CalibrationResult:
    """Fit all model parameters against a corpus with extracted contexts.

    Row partition per device kind: the double-ring row measuring exactly
    1.00 names the reference dummy style; single-ring rows with that
    dummy style train the ring term; double-ring rows train the fill
    table.  Residuals are reported for every corpus row.
    """
    pol = polarity if polarity is not None else PolarityTable()
    for row in corpus:
        if row.key not in contexts:
            raise CalibrationError(f"no extracted context for row {row.key_str}")

    params: dict[DeviceKind, OseParams] = {}
    vt_tables: dict[DeviceKind, VtTable] = {}
    iterations = 0
    kinds = [k for k in DeviceKind if any(r.device_kind == k for r in corpus)]
    for kind in kinds:
        kind_rows = [r for r in corpus if r.device_kind == kind]
        ref_rows = [
            r for r in kind_rows
            if r.ring is RingSpec.DOUBLE and r.measured_ratio == 1.0
        ]
        if not ref_rows:
            raise MissingReferenceRow(
                f"{kind.value}: no double-ring row with measured ratio 1.00"
            )
        ref_dummy = ref_rows[0].dummy

        obs = []
        for r in kind_rows:
            if r.dummy is ref_dummy and r.ring is not RingSpec.DOUBLE:
                ctx = contexts[r.key]
                if not ctx.rings or ctx.sti_width is None:
                    raise CalibrationError(
                        f"row {r.key_str}: fixture context has no guard ring"
                    )
                obs.append(
                    RingObservation(
                        stiw=float(ctx.sti_width),
                        odw=float(ctx.rings[0].od_width),
                        measured_ratio=r.measured_ratio,
                    )
                )
        ose, evals = calibrate_ose(obs, odw_th=odw_th)
        iterations += evals
        params[kind] = ose

        dummy_rows = [
            (r, (contexts[r.key].d_nod, contexts[r.key].d_pod))
            for r in kind_rows
            if r.ring is RingSpec.DOUBLE
        ]
        vt_tables[kind] = calibrate_vt_table(dummy_rows, vt_ref=vt_ref, v_ov=v_ov)

    residuals = []
    for row in corpus:
        ctx = contexts[row.key]
        predicted = predict_ratio(
            ctx, params[row.device_kind], pol, vt_tables[row.device_kind]
        )
        residuals.append(ResidualRow(row=row, predicted=predicted))
    max_abs = max((abs(rr.residual) for rr in residuals), default=0.0)
    return CalibrationResult(
        params=params,
        vt_tables=vt_tables,
        polarity=pol,
        residuals=tuple(residuals),
        max_abs_residual=max_abs,
        iterations=iterations,
    )


def residuals_csv(result: CalibrationResult) -> str:
    """Residual report: one line per corpus row."""
    lines = ["key,measured,predicted,residual"]
    for rr in result.residuals:
        lines.append(
            f"{rr.row.key_str},{rr.row.measured_ratio:.6f},"
            f"{rr.predicted:.9f},{rr.residual:.3e}"
        )
    return "\n".join(lines) + "\n"
