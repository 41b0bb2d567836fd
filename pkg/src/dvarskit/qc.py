"""Outlier flagging of standardized DVARS and the per-run QC report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError

MAD_TO_SD = 1.4826
FALLBACK_ABS = 1.5


@dataclass(frozen=True)
class FlagPolicy:
    """``abs`` (value > threshold), ``zrobust`` (robust z-score > threshold) or ``none``."""

    kind: str = "zrobust"
    threshold: float = 5.0

    def __str__(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}={self.threshold:g}"

    @classmethod
    def parse(cls, text: str) -> "FlagPolicy":
        text = text.strip()
        if text == "none":
            return cls("none", math.nan)
        kind, sep, value = text.partition("=")
        if not sep or kind not in ("abs", "zrobust"):
            raise InvalidInputError(f"flag policy must be abs=T, zrobust=Z or none, got {text!r}")
        try:
            threshold = float(value)
        except ValueError:
            raise InvalidInputError(f"flag policy threshold is not a number: {value!r}") from None
        if not math.isfinite(threshold):
            raise InvalidInputError(f"flag policy threshold must be finite, got {value!r}")
        return cls(kind, threshold)


DEFAULT_POLICY = FlagPolicy("zrobust", 5.0)


class FlagResult(NamedTuple):
    flags: np.ndarray
    policy: FlagPolicy
    warning: str | None = None


def flag_outliers(values, policy: FlagPolicy = DEFAULT_POLICY) -> FlagResult:
    """Flag frames of a DVARS* series.

    Robust z is ``(value - median) / (1.4826 * MAD)``. When the MAD is zero
    the robust policy falls back to ``abs=1.5`` and says so in
    ``FlagResult.warning``.
    """
    x = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if policy.kind == "none":
        return FlagResult(np.zeros(x.shape, dtype=bool), policy)
    if policy.kind == "abs":
        return FlagResult(x > policy.threshold, policy)
    if policy.kind != "zrobust":
        raise InvalidInputError(f"unknown flag policy {policy.kind!r}")
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    if mad == 0:
        fallback = FlagPolicy("abs", FALLBACK_ABS)
        msg = f"MAD of DVARS* is zero; robust-z flagging fell back to {fallback}"
        return FlagResult(x > FALLBACK_ABS, fallback, msg)
    z = (x - med) / (MAD_TO_SD * mad)
    return FlagResult(z > policy.threshold, policy)


@dataclass
class QcReport:
    """Per-frame DVARS values and flags for frames 2..T, plus run metadata.

    Variants that were not computed are ``None``.
    """

    dvars: np.ndarray
    dvars_star: np.ndarray | None
    dvars_star_star: np.ndarray | None
    flags: np.ndarray
    meta: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dvars = np.asarray(self.dvars, dtype=np.float64)
        n = self.dvars.size
        for name in ("dvars_star", "dvars_star_star"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64)
                if arr.size != n:
                    raise InvalidInputError(f"{name} has {arr.size} frames, expected {n}")
                setattr(self, name, arr)
        self.flags = np.asarray(self.flags).astype(np.int64)
        if self.flags.size != n:
            raise InvalidInputError(f"flags have {self.flags.size} frames, expected {n}")

    @property
    def frames(self) -> np.ndarray:
        return np.arange(2, self.dvars.size + 2)

    @property
    def n_flagged(self) -> int:
        return int(self.flags.sum())

    def records(self) -> list[dict]:
        def col(arr, k):
            return None if arr is None else float(arr[k])

        return [
            {
                "frame": int(t),
                "dvars": float(self.dvars[k]),
                "dvars_star": col(self.dvars_star, k),
                "dvars_star_star": col(self.dvars_star_star, k),
                "flag": int(self.flags[k]),
            }
            for k, t in enumerate(self.frames)
        ]


def summarize(report: QcReport) -> dict:
    """Time means and medians of each available variant, plus flag count."""
    out = {}
    for name in ("dvars", "dvars_star", "dvars_star_star"):
        arr = getattr(report, name)
        if arr is None:
            out[name] = None
        else:
            out[name] = {"mean": float(np.mean(arr)), "median": float(np.median(arr))}
    out["n_flagged"] = report.n_flagged
    out["flagged_frames"] = [int(t) for t in report.frames[report.flags == 1]]
    return out
