import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dvarskit import FlagPolicy, InvalidInputError, QcReport, SimulationSpec, compute_report, flag_outliers, simulate_ar1_volume
from dvarskit.report import read_report, report_to_json, report_to_tsv, write_report
from dvarskit.simulate import Spike


class TestPolicy:
    @pytest.mark.parametrize("text, kind, thr", [("abs=1.5", "abs", 1.5), ("zrobust=5", "zrobust", 5.0)])
    def test_parse(self, text, kind, thr):
        p = FlagPolicy.parse(text)
        assert (p.kind, p.threshold) == (kind, thr) and str(p) == text

    def test_none(self):
        assert FlagPolicy.parse("none").kind == "none"

    @pytest.mark.parametrize("text", ["abs", "z=3", "abs=x", "zrobust=inf"])
    def test_bad(self, text):
        with pytest.raises(InvalidInputError):
            FlagPolicy.parse(text)


class TestFlag:
    def test_constant_abs(self):
        assert not flag_outliers(np.ones(10), FlagPolicy("abs", 1.5)).flags.any()

    def test_abs(self):
        assert list(flag_outliers([1, 1, 10], FlagPolicy("abs", 1.5)).flags) == [False, False, True]

    def test_robust_z_by_hand(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
        # median 3, MAD 1 -> z = (x - 3) / 1.4826
        assert list(flag_outliers(x, FlagPolicy("zrobust", 1.0)).flags) == [False, False, False, False, True]
        assert list(flag_outliers(x, FlagPolicy("zrobust", 0.6)).flags) == [False, False, False, True, True]

    def test_mad_zero_fallback(self):
        res = flag_outliers([1.0, 1.0, 1.0, 1.4, 1.6], FlagPolicy("zrobust", 5.0))
        assert list(res.flags) == [False, False, False, False, True]
        assert res.policy == FlagPolicy("abs", 1.5) and "fell back" in res.warning

    def test_none(self):
        assert not flag_outliers([1, 100], FlagPolicy("none", float("nan"))).flags.any()

    @given(arrays(np.float64, st.integers(3, 40), elements=st.floats(0, 10)), st.floats(0.1, 10))
    def test_scale_invariant(self, x, c):
        p = FlagPolicy("zrobust", 3.0)
        a, b = flag_outliers(x, p), flag_outliers(c * x, p)
        if a.warning is None and b.warning is None:
            z = (x - np.median(x)) / (1.4826 * np.median(np.abs(x - np.median(x))))
            # skip values sitting on the threshold, where rounding decides
            clear = np.abs(z - 3.0) > 1e-9
            assert np.array_equal(a.flags[clear], b.flags[clear])

    @given(arrays(np.float64, st.integers(3, 40), elements=st.floats(0, 10)), st.floats(-5, 5))
    def test_literal_definition_under_shift(self, x, b):
        p = FlagPolicy("zrobust", 2.0)
        shifted = x + b
        med = np.median(shifted)
        mad = np.median(np.abs(shifted - med))
        res = flag_outliers(shifted, p)
        if mad > 0:
            assert np.array_equal(res.flags, (shifted - med) / (1.4826 * mad) > 2.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_spike_ensemble(self, seed):
        spec = SimulationSpec((20, 10, 10), 200, mu=(500, 1500), sigma=(5, 20), rho=(0, 0.5),
                              seed=1000 + seed, artifacts=(Spike(100, 2.0),))
        v, _ = simulate_ar1_volume(spec)
        r = compute_report(v, mask_strategy="all")
        assert r.summary["flagged_frames"] == [100, 101]


def make_report(n=4, flagged=(2,)):
    flags = np.zeros(n, dtype=int)
    flags[list(flagged)] = 1
    return QcReport(
        np.linspace(1, 2, n) * np.pi,
        np.linspace(0.9, 1.1, n) / 3,
        None,
        flags,
        meta={"tool": "dvarskit", "I": 10, "T": n + 1},
        summary={"n_flagged": len(flagged)},
    )


class TestReport:
    def test_tsv_layout(self):
        text = report_to_tsv(make_report(2, flagged=()))
        lines = text.split("\n")
        assert lines[0] == "frame\tdvars\tdvars_star\tdvars_star_star\tflag"
        assert len(lines) == 4 and lines[-1] == "" and "\r" not in text
        assert lines[1] == "2\t3.14159\t0.3\tn/a\t0"

    def test_flag_column(self):
        rows = report_to_tsv(make_report(4, flagged=(2,))).splitlines()[1:]
        assert [r.split("\t")[-1] for r in rows] == ["0", "0", "1", "0"]
        assert rows[2].split("\t")[0] == "4"

    def test_json_roundtrip(self, tmp_path):
        r = make_report()
        write_report(r, tmp_path / "r.json", "json")
        back = read_report(tmp_path / "r.json")
        assert back.records() == r.records()
        assert back.meta == r.meta
        doc = json.loads((tmp_path / "r.json").read_text())
        assert set(doc) == {"meta", "summary", "frames"}

    def test_tsv_roundtrip_six_digits(self, tmp_path):
        r = make_report()
        write_report(r, tmp_path / "r.tsv", "tsv")
        back = read_report(tmp_path / "r.tsv")
        np.testing.assert_allclose(back.dvars, r.dvars, rtol=5e-6)
        assert back.dvars_star_star is None and np.array_equal(back.flags, r.flags)

    def test_deterministic_bytes(self, tmp_path):
        for fmt in ("tsv", "json"):
            write_report(make_report(), tmp_path / "a", fmt)
            write_report(make_report(), tmp_path / "b", fmt)
            assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_json_meta_fields(self):
        v, _ = simulate_ar1_volume(SimulationSpec((5, 5, 2), 30, seed=1))
        doc = json.loads(report_to_json(compute_report(v, input_path="x.nii")))
        meta = doc["meta"]
        for key in ("version", "input", "mask", "estimator", "I", "T"):
            assert key in meta
        assert meta["I"] == 50 and meta["T"] == 30 and meta["input"] == "x.nii"
        assert "not robust" in meta["noise_params"]["rho_estimator"]
        assert len(doc["frames"]) == 29

    def test_unwritable(self, tmp_path):
        from dvarskit import DvarsError

        with pytest.raises(DvarsError, match="cannot write"):
            write_report(make_report(), tmp_path / "missing" / "r.tsv")

    def test_length_checked(self):
        with pytest.raises(InvalidInputError):
            QcReport(np.ones(3), np.ones(2), None, np.zeros(3))


class TestPipeline:
    def test_graceful_degradation(self, two_voxel):
        r = compute_report(two_voxel, mask_strategy="all", detrend=True)
        np.testing.assert_allclose(r.dvars, np.sqrt([2, 2.5]))
        assert r.dvars_star is None and r.dvars_star_star is None
        assert any("skipped" in w for w in r.meta["warnings"])

    def test_two_voxel_without_detrend(self, two_voxel):
        r = compute_report(two_voxel, mask_strategy="all")
        assert r.dvars_star is not None and r.dvars_star_star is not None

    def test_variant_selection(self, small_null):
        v, _ = small_null
        r = compute_report(v, variants=("raw",), policy=FlagPolicy("none", float("nan")))
        assert r.dvars_star is None and r.dvars_star_star is None and r.meta["noise_params"] is None

    def test_constant_voxels_dropped_for_standardized(self):
        data = np.random.default_rng(0).normal(100, 1, size=(6, 50))
        data[0] = 100.0
        from dvarskit import TimeSeriesVolume

        v = TimeSeriesVolume(data, (6, 1, 1))
        r = compute_report(v, mask_strategy="all")
        assert r.meta["I"] == 6 and r.meta["noise_params"]["n_voxels"] == 5

    def test_external_params(self, small_null):
        v, truth = small_null
        r = compute_report(v, mask_strategy="all", params=truth)
        assert r.meta["noise_params"]["sigma_estimator"] == "true"
