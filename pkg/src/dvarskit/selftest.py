"""Built-in calibration checks, run by ``dvarskit selftest``.

These are reduced-size versions of the acceptance checks. Each check
returns ``(passed, detail)``; nothing here raises on failure.
"""

from __future__ import annotations

import contextlib
import os
from unittest import mock

import numpy as np

from . import dvars_core as dv
from . import stats
from .pipeline import compute_report
from .qc import FlagPolicy
from .report import report_to_json
from .simulate import SimulationSpec, Spike, simulate_ar1_volume
from .volume import Mask, TimeSeriesVolume

SEEDS = (11, 12, 13)
DIMS = (20, 10, 10)
FRAMES = 300


def _null(seed: int, artifacts=()):
    spec = SimulationSpec(DIMS, FRAMES, mu=(500, 1500), sigma=(5, 20), rho=(0, 0.5),
                          seed=seed, artifacts=tuple(artifacts))
    return simulate_ar1_volume(spec)


def _all(v: TimeSeriesVolume) -> Mask:
    return Mask(np.ones(v.n_voxels, dtype=bool), v.dims)


def check_null_calibration():
    est_means, true_sq = [], []
    for seed in SEEDS:
        v, truth = _null(seed)
        m = _all(v)
        est_means.append(dv.dvars_standardized(v, m, dv.estimate_noise_params(v, m)).values.mean())
        true_sq.append(np.mean(dv.dvars_standardized(v, m, truth).values ** 2))
    ok = all(0.95 <= x <= 1.05 for x in est_means) and all(0.97 <= x <= 1.03 for x in true_sq)
    return ok, f"mean DVARS* {min(est_means):.4f}..{max(est_means):.4f}; mean DVARS*^2 (true) {min(true_sq):.4f}..{max(true_sq):.4f}"


def check_voxel_calibration():
    vals = []
    for seed in SEEDS:
        v, truth = _null(seed)
        vals.append(np.mean(dv.dvars_voxel_standardized(v, _all(v), truth).values ** 2))
    return all(0.97 <= x <= 1.03 for x in vals), f"mean DVARS**^2 (true) {min(vals):.4f}..{max(vals):.4f}"


def _three(v, m):
    p = dv.estimate_noise_params(v, m)
    return (dv.dvars(v, m).values, dv.dvars_standardized(v, m, p).values,
            dv.dvars_voxel_standardized(v, m, p).values)


def _rel(a, b):
    return float(np.max(np.abs(a - b) / np.abs(b)))


def check_mu_cancellation():
    v, _ = _null(SEEDS[0])
    m = _all(v)
    mu = np.random.default_rng(0).uniform(-5000, 5000, v.n_voxels)
    base = _three(v, m)
    shifted = _three(v.with_data(v.data + mu[:, None]), m)
    err = max(_rel(a, b) for a, b in zip(shifted, base))
    return err < 1e-10, f"max relative change {err:.2e}"


def check_scale_invariance():
    v, _ = _null(SEEDS[0])
    m = _all(v)
    base = _three(v, m)
    raw_err = std_err = 0.0
    for c in (0.01, 1.0, 1000.0):
        scaled = _three(v.with_data(v.data * c), m)
        raw_err = max(raw_err, _rel(scaled[0], abs(c) * base[0]))
        std_err = max(std_err, _rel(scaled[1], base[1]), _rel(scaled[2], base[2]))
    return raw_err < 1e-12 and std_err < 1e-6, f"raw {raw_err:.2e}, standardized {std_err:.2e}"


def check_hand_oracle():
    v = TimeSeriesVolume([[1, 3, 2], [2, 2, 4]], (2, 1, 1))
    got = dv.dvars(v, _all(v)).values
    err = float(np.max(np.abs(got - np.sqrt([2.0, 2.5]))))
    return err < 1e-12, f"max abs error {err:.1e}"


def check_difference_variance():
    worst = 0.0
    for k, (sigma, rho) in enumerate([(s, r) for s in (1.0, 10.0) for r in (0.0, 0.3, 0.7)]):
        v, _ = simulate_ar1_volume(SimulationSpec((1, 1, 1), 100_000, mu=0.0, sigma=sigma, rho=rho, seed=100 + k))
        emp = np.var(np.diff(v.data[0]), ddof=1)
        worst = max(worst, abs(emp / stats.diff_variance_predicted(sigma, rho) - 1))
    return worst < 0.05, f"worst relative error {worst:.4f}"


def check_robust_sigma():
    rng = np.random.default_rng(7)
    x = rng.normal(0, 10, 100_000)
    bad = rng.random(x.size) < 0.05
    x[bad] = np.where(rng.random(bad.sum()) < 0.5, -100.0, 100.0)
    r_err = abs(stats.robust_sd_iqr(x) / 10 - 1)
    s_err = abs(stats.sample_sd(x) / 10 - 1)
    clean = rng.normal(0, 10, 2000)
    agree = abs(stats.robust_sd_iqr(clean) / stats.sample_sd(clean) - 1)
    ok = r_err < 0.10 and s_err > 0.50 and agree < 0.05
    return ok, f"contaminated: robust {r_err:.3f}, sample {s_err:.3f}; clean disagreement {agree:.3f}"


def check_spike_detection():
    spike = FRAMES // 2
    misses = false_pos = 0
    for seed in SEEDS:
        v, _ = _null(seed, [Spike(spike, 2.0)])
        flagged = set(compute_report(v, mask_strategy="all").summary["flagged_frames"])
        misses += len({spike, spike + 1} - flagged)
        false_pos += len(flagged - {spike, spike + 1})
    return misses == 0 and false_pos == 0, f"missed {misses}, false positives {false_pos}"


@contextlib.contextmanager
def _threads(n: int):
    old = os.environ.get("DVARS_THREADS")
    os.environ["DVARS_THREADS"] = str(n)
    try:
        yield
    finally:
        if old is None:
            del os.environ["DVARS_THREADS"]
        else:
            os.environ["DVARS_THREADS"] = old


def check_determinism():
    outputs = []
    for n in (1, 4, 1):
        with _threads(n):
            v, _ = _null(SEEDS[1], [Spike(50, 2.0)])
            r = compute_report(v, mask_strategy="all", policy=FlagPolicy("zrobust", 5.0))
            outputs.append(v.data.tobytes() + report_to_json(r).encode())
    same = all(o == outputs[0] for o in outputs)
    return same, "identical across runs and DVARS_THREADS in {1, 4}" if same else "outputs differ"


CHECKS = [
    ("null calibration (DVARS*)", check_null_calibration),
    ("null calibration (DVARS**)", check_voxel_calibration),
    ("mean cancellation", check_mu_cancellation),
    ("scale invariance", check_scale_invariance),
    ("hand oracle", check_hand_oracle),
    ("difference-variance law", check_difference_variance),
    ("robust sigma", check_robust_sigma),
    ("spike detection", check_spike_detection),
    ("determinism", check_determinism),
]


def run_selftest(out, inject_fault: bool = False) -> bool:
    """Run every check, write one line per check to `out`, return overall pass.

    `inject_fault` inflates the DVARS* null variance by 21% as a negative
    control; the calibration checks must then fail.
    """
    ctx = contextlib.nullcontext()
    if inject_fault:
        orig = dv.expected_dvars_sq
        ctx = mock.patch.object(dv, "expected_dvars_sq", lambda p: 1.21 * orig(p))
    results = []
    with ctx:
        for k, (name, fn) in enumerate(CHECKS, start=1):
            try:
                ok, detail = fn()
            except Exception as exc:  # a crashing check is a failed check
                ok, detail = False, f"error: {exc}"
            results.append(ok)
            out.write(f"{'PASS' if ok else 'FAIL'}  {k}. {name:<28s} {detail}\n")
    passed = all(results)
    out.write(f"{sum(results)}/{len(results)} checks passed\n")
    return passed
