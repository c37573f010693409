"""Model core: gap widening, ring polarity, Vt table, ratio composition."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ringfill.extraction import DeviceContext, GuardRingInfo, Implant, RingClass
from ringfill.geometry import DeviceKind, Rect
from ringfill.models import (
    EmptyTable,
    ModelParams,
    OseParams,
    PolarityTable,
    VtSample,
    VtTable,
    dummy_current_factor,
    effective_sti_width,
    mobility_multiplier,
    parse_model_json,
    predict_ratio,
    vt_effective,
    write_model_json,
)


def make_ring(implant: Implant, od_width: int, gap: int = 1000,
              active: Rect = Rect(-500, -500, 500, 500)) -> GuardRingInfo:
    inner = active.expanded(gap)
    return GuardRingInfo(implant, inner, inner.expanded(od_width), od_width)


def make_ctx(kind=DeviceKind.NMOS, rings=(), sti=None, d_nod=0.5, d_pod=0.0,
             ) -> DeviceContext:
    ring_class = {0: RingClass.NONE, 1: RingClass.SINGLE, 2: RingClass.DOUBLE}[
        len(rings)
    ]
    return DeviceContext(
        device_id="MA", kind=kind, rings=tuple(rings), ring_class=ring_class,
        sti_width=sti, d_nod=d_nod, d_pod=d_pod,
    )


class TestEffectiveStiWidth:
    def test_k_zero_identity(self):
        p = OseParams(k=0.0, odw_th=280.0)
        for odw in (10.0, 140.0, 280.0, 1000.0):
            assert effective_sti_width(1000.0, odw, p) == 1000.0

    def test_at_threshold_no_correction(self):
        p = OseParams(k=2.0, odw_th=280.0)
        assert effective_sti_width(1000.0, 280.0, p) == 1000.0

    def test_direct_substitution(self):
        p = OseParams(k=2.0, odw_th=280.0)
        assert effective_sti_width(1000.0, 140.0, p) == 5000.0

    def test_discontinuity_at_threshold(self):
        p = OseParams(k=2.0, odw_th=280.0)
        just_below = effective_sti_width(1000.0, 280.0 - 1e-9, p)
        assert just_below == pytest.approx(1000.0 * 3.0)
        assert effective_sti_width(1000.0, 280.0, p) == 1000.0

    @given(st.floats(0.01, 10.0), st.floats(1.0, 279.0), st.floats(1.0, 1e6))
    def test_never_below_physical_gap(self, k, odw, stiw):
        p = OseParams(k=k, odw_th=280.0)
        assert effective_sti_width(stiw, odw, p) >= stiw

    @given(st.floats(0.1, 10.0), st.floats(0.5, 4.0))
    def test_homogeneous_in_stiw(self, k, lam):
        p = OseParams(k=k, odw_th=280.0)
        base = effective_sti_width(1000.0, 140.0, p)
        scaled = effective_sti_width(1000.0 * lam, 140.0, p)
        assert scaled == pytest.approx(lam * base, rel=1e-12)

    def test_strictly_decreasing_below_threshold(self):
        p = OseParams(k=1.5, odw_th=280.0)
        widths = [20.0, 70.0, 140.0, 210.0, 279.0]
        values = [effective_sti_width(1000.0, w, p) for w in widths]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_domain_enforced(self):
        p = OseParams(k=1.0)
        with pytest.raises(ValueError):
            effective_sti_width(0.0, 100.0, p)
        with pytest.raises(ValueError):
            effective_sti_width(100.0, 0.0, p)

    def test_param_invariants(self):
        with pytest.raises(ValueError):
            OseParams(k=-0.1)
        with pytest.raises(ValueError):
            OseParams(k=1.0, odw_th=0.0)
        with pytest.raises(ValueError):
            OseParams(k=1.0, c_mu=-5.0)


class TestMobilityMultiplier:
    P = OseParams(k=2.0, odw_th=280.0, c_mu=50.0)

    def test_no_ring(self):
        assert mobility_multiplier(make_ctx(), self.P, PolarityTable()) == 1.0

    def test_double_ring_exactly_one(self):
        rings = (make_ring(Implant.PPLUS, 280), make_ring(Implant.NPLUS, 280, gap=2000))
        ctx = make_ctx(rings=rings, sti=1000)
        assert mobility_multiplier(ctx, self.P, PolarityTable()) == 1.0

    def test_single_wide_ring(self):
        ctx = make_ctx(kind=DeviceKind.PMOS, rings=(make_ring(Implant.NPLUS, 280),),
                       sti=1000)
        assert mobility_multiplier(ctx, self.P, PolarityTable()) == pytest.approx(1.05)

    def test_single_narrow_ring(self):
        ctx = make_ctx(kind=DeviceKind.PMOS, rings=(make_ring(Implant.NPLUS, 140),),
                       sti=1000)
        assert mobility_multiplier(ctx, self.P, PolarityTable()) == pytest.approx(1.01)

    def test_negative_polarity_reduces(self):
        pol = PolarityTable(signs={(DeviceKind.NMOS, Implant.NPLUS): -1,
                                   (DeviceKind.NMOS, Implant.PPLUS): -1,
                                   (DeviceKind.PMOS, Implant.NPLUS): -1,
                                   (DeviceKind.PMOS, Implant.PPLUS): -1})
        ctx = make_ctx(rings=(make_ring(Implant.PPLUS, 280),), sti=1000)
        assert mobility_multiplier(ctx, self.P, pol) == pytest.approx(0.95)

    def test_ratio_ordering_below_threshold(self):
        # wider ring (still below threshold) -> larger multiplier
        pol = PolarityTable()
        values = []
        for odw in (70, 140, 210, 280):
            ctx = make_ctx(rings=(make_ring(Implant.PPLUS, odw),), sti=1000)
            values.append(mobility_multiplier(ctx, self.P, pol))
        assert all(a < b for a, b in zip(values, values[1:]))


def nmos_table() -> VtTable:
    # Anchors as calibration produces them from the corpus densities.
    return VtTable(
        samples=(
            VtSample(0.55, 0.001, 0.0),  # reference fill
            VtSample(0.001, 0.55, -0.0225),
            VtSample(0.275, 0.276, -0.025),
        ),
        vt_ref=0.4,
        v_ov=0.2,
    )


class TestVtTable:
    def test_empty_table_error(self):
        t = VtTable(samples=())
        with pytest.raises(EmptyTable):
            t.f_interp(0.5, 0.5)

    def test_exact_at_every_sample(self):
        t = nmos_table()
        for s in t.samples:
            assert t.f_interp(s.d_nod, s.d_pod) == s.f

    def test_reference_point(self):
        assert nmos_table().reference_point == (0.55, 0.001)

    def test_duplicate_keys_rejected(self):
        with pytest.raises(ValueError):
            VtTable(samples=(VtSample(0.5, 0.5, 0.0), VtSample(0.5, 0.5, 0.1)))

    def test_requires_zero_reference(self):
        with pytest.raises(ValueError):
            VtTable(samples=(VtSample(0.5, 0.5, 0.01),))

    def test_identity_table(self):
        t = VtTable(samples=(VtSample(0.3, 0.3, 0.0), VtSample(0.7, 0.1, 0.0)))
        assert vt_effective(0.4, 0.5, 0.2, t) == 0.4

    def test_vt_effective_at_anchor(self):
        t = nmos_table()
        # f = -0.0225 at the P+ fill anchor: Vt drops by 9 mV from 400 mV
        vt = vt_effective(0.4, 0.001, 0.55, t)
        assert vt == pytest.approx(0.4 * (1 - 0.0225))
        assert vt - 0.4 == pytest.approx(-0.009)

    def test_vt_effective_domain(self):
        with pytest.raises(ValueError):
            vt_effective(0.4, 1.5, 0.0, nmos_table())

    def test_interpolation_bounded_by_anchor_values(self):
        t = nmos_table()
        fs = [s.f for s in t.samples]
        for q in ((0.4, 0.2), (0.1, 0.4), (0.3, 0.3), (0.0, 0.0), (1.0, 1.0)):
            f = t.f_interp(*q)
            assert min(fs) <= f <= max(fs)


class TestDummyCurrentFactor:
    def test_reference_is_exactly_one(self):
        ctx = make_ctx(d_nod=0.55, d_pod=0.001)
        assert dummy_current_factor(ctx, nmos_table()) == 1.0

    def test_pplus_anchor(self):
        ctx = make_ctx(d_nod=0.001, d_pod=0.55)
        assert dummy_current_factor(ctx, nmos_table()) == pytest.approx(1.09)

    def test_mixed_anchor(self):
        ctx = make_ctx(d_nod=0.275, d_pod=0.276)
        assert dummy_current_factor(ctx, nmos_table()) == pytest.approx(1.10)

    @given(st.floats(0.1, 1.0), st.floats(0.05, 1.0))
    def test_reference_unity_for_any_link_constants(self, vt_ref, v_ov):
        t = VtTable(samples=(VtSample(0.5, 0.1, 0.0),), vt_ref=vt_ref, v_ov=v_ov)
        ctx = make_ctx(d_nod=0.5, d_pod=0.1)
        assert dummy_current_factor(ctx, t) == 1.0


class TestPredictRatio:
    P = OseParams(k=2.0, odw_th=280.0, c_mu=50.0)

    def test_reference_configuration(self):
        rings = (make_ring(Implant.PPLUS, 280), make_ring(Implant.NPLUS, 280, gap=2000))
        ctx = make_ctx(rings=rings, sti=1000, d_nod=0.55, d_pod=0.001)
        assert predict_ratio(ctx, self.P, PolarityTable(), nmos_table()) == 1.0

    def test_single_ring_times_reference_fill(self):
        ctx = make_ctx(rings=(make_ring(Implant.PPLUS, 280),), sti=1000,
                       d_nod=0.55, d_pod=0.001)
        assert predict_ratio(ctx, self.P, PolarityTable(), nmos_table()) == \
            pytest.approx(1.05)

    def test_double_ring_fill_only(self):
        rings = (make_ring(Implant.PPLUS, 280), make_ring(Implant.NPLUS, 280, gap=2000))
        ctx = make_ctx(rings=rings, sti=1000, d_nod=0.001, d_pod=0.55)
        assert predict_ratio(ctx, self.P, PolarityTable(), nmos_table()) == \
            pytest.approx(1.09)


class TestModelJson:
    def bundle(self) -> ModelParams:
        p = OseParams(k=2.0, odw_th=280.0, c_mu=50.0)
        return ModelParams(
            ose={DeviceKind.NMOS: p, DeviceKind.PMOS: p},
            vt={DeviceKind.NMOS: nmos_table(),
                DeviceKind.PMOS: VtTable(samples=(VtSample(0.1, 0.55, 0.0),),
                                         vt_ref=0.4, v_ov=0.2)},
        )

    def test_round_trip(self):
        params = self.bundle()
        again = parse_model_json(write_model_json(params))
        assert again.ose == params.ose
        assert again.vt == params.vt
        assert again.polarity == params.polarity

    def test_scalar_k_in_file(self):
        import json as _json

        doc = _json.loads(write_model_json(self.bundle()))
        assert doc["ose"]["k"] == 2.0
        assert doc["ose"]["c_mu_nm"] == {"nmos": 50.0, "pmos": 50.0}
        assert doc["vt"]["vt_ref_v"] == 0.4

    def test_per_kind_k_when_fits_differ(self):
        import json as _json

        params = self.bundle()
        mixed = ModelParams(
            ose={DeviceKind.NMOS: OseParams(k=2.0, odw_th=280.0, c_mu=50.0),
                 DeviceKind.PMOS: OseParams(k=1.5, odw_th=280.0, c_mu=40.0)},
            vt=params.vt,
        )
        doc = _json.loads(write_model_json(mixed))
        assert doc["ose"]["k"] == {"nmos": 2.0, "pmos": 1.5}
        assert parse_model_json(write_model_json(mixed)).ose == mixed.ose

    def test_predict_helper_dispatches_by_kind(self):
        params = self.bundle()
        ctx = make_ctx(kind=DeviceKind.NMOS, d_nod=0.55, d_pod=0.001)
        assert params.predict(ctx) == 1.0
