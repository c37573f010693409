"""Ratio models: guard-ring stress and dummy-fill threshold shift.

Two multiplicative factors predict a mirror's current ratio relative to
the double-ring reference configuration:

* a mobility term driven by the diffusion gap to the guard ring, with
  the gap widened by ``1 + k * odw_th / odw`` when the ring's OD frame
  is narrower than the threshold width ``odw_th`` (narrow rings stress
  the channel more);
* a threshold-voltage term from N+/P+ OD fill densities, using a
  measured lookup table ``f`` so that Vt_eff = vt_ref * (1 + f), mapped
  to current through the first-order square law dI/I = -2 dVt / v_ov.

Both factors equal 1 exactly at the reference configuration.
All functions are pure; parameter sets are immutable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .extraction import DeviceContext, Implant, RingClass
from .geometry import DeviceKind

DEFAULT_VT_REF_V = 0.4
DEFAULT_V_OV_V = 0.2
DEFAULT_ODW_TH_NM = 280.0


class EmptyTable(ValueError):
    """Vt lookup table has no samples."""


@dataclass(frozen=True)
class OseParams:
    """Stress-model parameters for one device kind.

    k:       dimensionless narrow-ring gain (0 disables the correction)
    odw_th:  ring OD width threshold, nm; frames at or above it leave
             the diffusion gap unchanged
    c_mu:    first-order mobility coefficient, nm (same unit as widths)
    """

    k: float
    odw_th: float = DEFAULT_ODW_TH_NM
    c_mu: float = 0.0

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.odw_th <= 0:
            raise ValueError(f"odw_th must be > 0, got {self.odw_th}")
        if self.c_mu < 0:
            raise ValueError(f"c_mu must be >= 0, got {self.c_mu}")


def effective_sti_width(stiw: float, odw: float, p: OseParams) -> float:
    """Stress-equivalent diffusion gap.

    Below the threshold width the gap is widened by the narrow-ring
    correction; at or above it the physical gap is returned unchanged.
    The step at ``odw == odw_th`` is intentional (first-order model).
    """
    if stiw <= 0:
        raise ValueError(f"stiw must be > 0, got {stiw}")
    if odw <= 0:
        raise ValueError(f"odw must be > 0, got {odw}")
    if odw < p.odw_th:
        return stiw * (1.0 + p.k * p.odw_th / odw)
    return float(stiw)


@dataclass(frozen=True)
class PolarityTable:
    """Sign of the ring stress contribution per (device kind, implant).

    The measured single-ring configurations all gain current, so every
    default sign is +1.  A double ring nets to ``double_net_sign``
    (default 0: the two implants cancel and the multiplier is exactly 1).
    """

    signs: dict[tuple[DeviceKind, Implant], int] = field(
        default_factory=lambda: {
            (DeviceKind.NMOS, Implant.PPLUS): +1,
            (DeviceKind.NMOS, Implant.NPLUS): +1,
            (DeviceKind.PMOS, Implant.NPLUS): +1,
            (DeviceKind.PMOS, Implant.PPLUS): +1,
        }
    )
    double_net_sign: int = 0

    def sign(self, kind: DeviceKind, implant: Implant) -> int:
        s = self.signs[(kind, implant)]
        if s not in (-1, +1):
            raise ValueError(f"polarity sign must be +-1, got {s}")
        return s


def mobility_multiplier(
    ctx: DeviceContext, p: OseParams, pol: PolarityTable
) -> float:
    """Ring-stress current multiplier: 1 with no ring, exactly 1 for a
    (cancelling) double ring, 1 + sign*c_mu/gap_eff for a single ring."""
    if ctx.ring_class is RingClass.NONE:
        return 1.0
    ring = ctx.rings[0]
    assert ctx.sti_width is not None
    if ctx.ring_class is RingClass.DOUBLE:
        if pol.double_net_sign == 0:
            return 1.0
        eff = effective_sti_width(ctx.sti_width, ring.od_width, p)
        return 1.0 + pol.double_net_sign * p.c_mu / eff
    eff = effective_sti_width(ctx.sti_width, ring.od_width, p)
    return 1.0 + pol.sign(ctx.kind, ring.implant) * p.c_mu / eff


@dataclass(frozen=True)
class VtSample:
    d_nod: float
    d_pod: float
    f: float


@dataclass(frozen=True)
class VtTable:
    """Measured threshold-shift lookup for one device kind.

    ``f`` is the fractional Vt shift at each measured (d_nod, d_pod)
    density point; the reference point has f = 0 by normalization.
    Queries interpolate by inverse-squared-distance weighting over the
    3 nearest samples and are exact at every sample point.
    """

    samples: tuple[VtSample, ...]
    vt_ref: float = DEFAULT_VT_REF_V
    v_ov: float = DEFAULT_V_OV_V

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.vt_ref <= 0 or self.v_ov <= 0:
            raise ValueError(f"vt_ref and v_ov must be > 0: {self.vt_ref}, {self.v_ov}")
        keys = [(s.d_nod, s.d_pod) for s in self.samples]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate (d_nod, d_pod) sample keys: {keys}")
        if self.samples and not any(s.f == 0.0 for s in self.samples):
            raise ValueError("table needs a reference sample with f == 0")

    @property
    def reference_point(self) -> tuple[float, float]:
        for s in self.samples:
            if s.f == 0.0:
                return (s.d_nod, s.d_pod)
        raise EmptyTable("no samples")

    def f_interp(self, d_nod: float, d_pod: float) -> float:
        if not self.samples:
            raise EmptyTable("no samples")
        ranked = sorted(
            ((s.d_nod - d_nod) ** 2 + (s.d_pod - d_pod) ** 2, i)
            for i, s in enumerate(self.samples)
        )
        if ranked[0][0] == 0.0:
            return self.samples[ranked[0][1]].f
        num = 0.0
        den = 0.0
        for d2, i in ranked[:3]:
            w = 1.0 / d2
            num += w * self.samples[i].f
            den += w
        return num / den


def vt_effective(vt_ref: float, d_nod: float, d_pod: float, table: VtTable) -> float:
    """Effective threshold voltage at the given fill densities, volts."""
    for name, v in (("d_nod", d_nod), ("d_pod", d_pod)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0,1], got {v}")
    return vt_ref * (1.0 + table.f_interp(d_nod, d_pod))


def dummy_current_factor(ctx: DeviceContext, table: VtTable) -> float:
    """Fill-driven current multiplier via the square-law link.

    dI/I = -2 dVt / v_ov with dVt = vt_ref * f, so the factor is
    1 - 2 * vt_ref * f / v_ov; exactly 1 at the reference densities.
    """
    f = table.f_interp(ctx.d_nod, ctx.d_pod)
    return 1.0 - 2.0 * table.vt_ref * f / table.v_ov


def predict_ratio(
    ctx: DeviceContext, p: OseParams, pol: PolarityTable, table: VtTable
) -> float:
    """Predicted mirror current ratio relative to the reference config."""
    return mobility_multiplier(ctx, p, pol) * dummy_current_factor(ctx, table)


@dataclass(frozen=True)
class ModelParams:
    """Calibrated parameter bundle for both device kinds."""

    ose: dict[DeviceKind, OseParams]
    vt: dict[DeviceKind, VtTable]
    polarity: PolarityTable = field(default_factory=PolarityTable)

    def predict(self, ctx: DeviceContext) -> float:
        return predict_ratio(ctx, self.ose[ctx.kind], self.polarity, self.vt[ctx.kind])


_KIND_KEYS = {DeviceKind.NMOS: "nmos", DeviceKind.PMOS: "pmos"}


def write_model_json(params: ModelParams) -> str:
    """Serialize to the model parameter file format.

    ``ose.k`` is a plain number when both kinds fitted the same value
    (the usual case), else a per-kind object.
    """
    ks = {key: params.ose[kind].k for kind, key in _KIND_KEYS.items()}
    k_value: float | dict = (
        ks["nmos"] if math.isclose(ks["nmos"], ks["pmos"], rel_tol=0, abs_tol=1e-12)
        else ks
    )
    odw_ths = {params.ose[k].odw_th for k in _KIND_KEYS}
    if len(odw_ths) != 1:
        raise ValueError(f"odw_th must agree across kinds, got {odw_ths}")
    vt_refs = {(params.vt[k].vt_ref, params.vt[k].v_ov) for k in _KIND_KEYS}
    if len(vt_refs) != 1:
        raise ValueError(f"vt_ref/v_ov must agree across kinds, got {vt_refs}")
    vt_ref, v_ov = next(iter(vt_refs))
    doc = {
        "ose": {
            "k": k_value,
            "odw_th_nm": next(iter(odw_ths)),
            "c_mu_nm": {key: params.ose[kind].c_mu for kind, key in _KIND_KEYS.items()},
        },
        "vt": {
            "vt_ref_v": vt_ref,
            "v_ov_v": v_ov,
            "samples": {
                key: [
                    {"d_nod": s.d_nod, "d_pod": s.d_pod, "f": s.f}
                    for s in params.vt[kind].samples
                ]
                for kind, key in _KIND_KEYS.items()
            },
        },
        "polarity": {
            key: {
                imp.value: params.polarity.signs[(kind, imp)] for imp in Implant
            }
            for kind, key in _KIND_KEYS.items()
        }
        | {"double_net_sign": params.polarity.double_net_sign},
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def parse_model_json(text: str) -> ModelParams:
    doc = json.loads(text)
    ose_doc = doc["ose"]
    vt_doc = doc["vt"]
    ose = {}
    vt = {}
    for kind, key in _KIND_KEYS.items():
        k_raw = ose_doc["k"]
        k = k_raw[key] if isinstance(k_raw, dict) else k_raw
        ose[kind] = OseParams(
            k=float(k),
            odw_th=float(ose_doc["odw_th_nm"]),
            c_mu=float(ose_doc["c_mu_nm"][key]),
        )
        vt[kind] = VtTable(
            samples=tuple(
                VtSample(float(s["d_nod"]), float(s["d_pod"]), float(s["f"]))
                for s in vt_doc["samples"][key]
            ),
            vt_ref=float(vt_doc["vt_ref_v"]),
            v_ov=float(vt_doc["v_ov_v"]),
        )
    pol_doc = doc.get("polarity", {})
    signs = {}
    for kind, key in _KIND_KEYS.items():
        for imp in Implant:
            signs[(kind, imp)] = int(pol_doc.get(key, {}).get(imp.value, +1))
    polarity = PolarityTable(
        signs=signs, double_net_sign=int(pol_doc.get("double_net_sign", 0))
    )
    return ModelParams(ose=ose, vt=vt, polarity=polarity)
