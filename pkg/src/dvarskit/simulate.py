"""Synthetic volumes: per-voxel constant mean plus stationary AR(1) noise.

Random numbers come from numpy's PCG64 bit generator. Each voxel gets its own
stream, ``SeedSequence(seed, spawn_key=(voxel,))``, so a voxel's trace does
not depend on how many voxels there are or in which order they are made.
Normal deviates are the inverse normal CDF (`scipy.special.ndtri`) of the
stream's uniform doubles, which keeps the mapping from seed to sample fixed
and documented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtri

from .dvars_core import VoxelNoiseParams
from .errors import InvalidInputError
from .volume import Mask, TimeSeriesVolume

# spawn_key offsets keep artifact streams apart from voxel streams
_SPIKE_STREAM = 2**40


def _uniform_open(gen: np.random.Generator, n: int) -> np.ndarray:
    # random() is in [0, 1); shift by half an ulp of 2**-53 to stay inside (0, 1)
    return gen.random(n) + 2.0**-54


def _normals(gen: np.random.Generator, n: int) -> np.ndarray:
    return ndtri(_uniform_open(gen, n))


@dataclass(frozen=True)
class Spike:
    """Extra Normal(0, (factor * sigma_i)**2) noise at one 1-based frame."""

    frame: int
    factor: float


@dataclass(frozen=True)
class Drift:
    """Adds ``slope * t`` at 1-based frame t."""

    slope: float


@dataclass(frozen=True)
class SimulationSpec:
    """Parameters of a synthetic run.

    `mu`, `sigma` and `rho` are either a single value or a ``(low, high)``
    range sampled uniformly per voxel.
    """

    dims: tuple[int, int, int]
    n_frames: int
    mu: float | tuple[float, float] = 1000.0
    sigma: float | tuple[float, float] = 10.0
    rho: float | tuple[float, float] = 0.3
    seed: int = 0
    artifacts: tuple = field(default_factory=tuple)
    tr: float | None = None

    def validate(self) -> None:
        """Raise `InvalidInputError` naming every invalid field."""
        problems = []
        try:
            dims = tuple(int(d) for d in self.dims)
            if len(dims) != 3 or min(dims) < 1:
                raise ValueError
        except (TypeError, ValueError):
            problems.append(f"dims: need three positive integers, got {self.dims!r}")
        if int(self.n_frames) < 2:
            problems.append(f"frames: need at least 2, got {self.n_frames}")
        lo, hi = _bounds(self.mu)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            problems.append(f"mu: invalid value/range {self.mu!r}")
        lo, hi = _bounds(self.sigma)
        if not (np.isfinite(hi) and 0 < lo <= hi):
            problems.append(f"sigma: must be > 0 (range low <= high), got {self.sigma!r}")
        lo, hi = _bounds(self.rho)
        if not (-1 < lo <= hi < 1):
            problems.append(f"rho: must lie strictly inside (-1, 1) for stationarity, got {self.rho!r}")
        if not 0 <= int(self.seed) < 2**64:
            problems.append(f"seed: must be a 64-bit unsigned integer, got {self.seed}")
        for a in self.artifacts:
            if isinstance(a, Spike):
                if not 1 <= a.frame <= int(self.n_frames):
                    problems.append(f"spike: frame {a.frame} outside 1..{self.n_frames}")
                if not a.factor >= 0:
                    problems.append(f"spike: factor must be >= 0, got {a.factor}")
            elif isinstance(a, Drift):
                if not np.isfinite(a.slope):
                    problems.append(f"drift: slope must be finite, got {a.slope}")
            else:
                problems.append(f"artifacts: unknown artifact {a!r}")
        if problems:
            raise InvalidInputError("invalid simulation spec: " + "; ".join(problems))


def _bounds(value) -> tuple[float, float]:
    if isinstance(value, (tuple, list)):
        if len(value) != 2:
            return (np.nan, np.nan)
        return (float(value[0]), float(value[1]))
    return (float(value), float(value))


def _draw(value, u: float) -> float:
    lo, hi = _bounds(value)
    return lo + (hi - lo) * u


def simulate_ar1_volume(spec: SimulationSpec) -> tuple[TimeSeriesVolume, VoxelNoiseParams]:
    """Generate ``Y[i, t] = mu_i + e[i, t]`` with stationary AR(1) noise.

    ``e[i, 1] ~ N(0, sigma_i**2)`` and
    ``e[i, t] = rho_i e[i, t-1] + N(0, sigma_i**2 (1 - rho_i**2))``.
    Artifacts in ``spec.artifacts`` are applied in order. Returns the volume
    and the true parameters of every voxel.
    """
    spec.validate()
    dims = tuple(int(d) for d in spec.dims)
    n_vox = dims[0] * dims[1] * dims[2]
    n_t = int(spec.n_frames)
    data = np.empty((n_vox, n_t))
    mu = np.empty(n_vox)
    sigma = np.empty(n_vox)
    rho = np.empty(n_vox)
    for i in range(n_vox):
        ss = np.random.SeedSequence(int(spec.seed), spawn_key=(i,))
        gen = np.random.Generator(np.random.PCG64(ss))
        u = gen.random(3)
        mu[i] = _draw(spec.mu, u[0])
        sigma[i] = _draw(spec.sigma, u[1])
        rho[i] = _draw(spec.rho, u[2])
        z = _normals(gen, n_t)
        z *= sigma[i] * np.sqrt(1.0 - rho[i] ** 2)
        z[0] /= np.sqrt(1.0 - rho[i] ** 2)
        data[i] = lfilter([1.0], [1.0, -rho[i]], z) + mu[i]

    vol = TimeSeriesVolume(data, dims, tr=spec.tr, source=f"simulated(seed={spec.seed})")
    truth = VoxelNoiseParams(np.arange(n_vox), sigma, rho, dims, source="true")
    for k, art in enumerate(spec.artifacts):
        if isinstance(art, Spike):
            vol = inject_spike(vol, art.frame, art.factor, sigma, seed=spec.seed, stream=k)
        else:
            vol = inject_drift(vol, art.slope)
    return vol, truth


def inject_spike(v: TimeSeriesVolume, frame: int, factor: float, sigma, mask: Mask | None = None,
                 seed: int = 0, stream: int = 0) -> TimeSeriesVolume:
    """Add independent Normal(0, (factor * sigma_i)**2) noise at one 1-based frame.

    `sigma` gives sigma_i for every voxel (length ``n_voxels``). Only voxels in
    `mask` (default: all) are touched. ``factor == 0`` returns `v` unchanged.
    """
    frame = int(frame)
    if not 1 <= frame <= v.n_frames:
        raise InvalidInputError(f"spike frame {frame} outside 1..{v.n_frames}")
    if not factor >= 0:
        raise InvalidInputError(f"spike factor must be >= 0, got {factor}")
    if factor == 0:
        return v
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (v.n_voxels,))
    voxels = np.arange(v.n_voxels) if mask is None else mask.indices
    ss = np.random.SeedSequence(int(seed), spawn_key=(_SPIKE_STREAM + int(stream), frame))
    z = _normals(np.random.Generator(np.random.PCG64(ss)), v.n_voxels)
    data = v.data.copy()
    data[voxels, frame - 1] += factor * sigma[voxels] * z[voxels]
    return v.with_data(data)


def inject_drift(v: TimeSeriesVolume, slope: float) -> TimeSeriesVolume:
    """Add a linear trend ``slope * t`` (t = 1..T) to every voxel."""
    if slope == 0:
        return v
    t = np.arange(1, v.n_frames + 1, dtype=np.float64)
    return v.with_data(v.data + slope * t[None, :])


def _numbers(key: str, text: str, problems: list[str]):
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        problems.append(f"{key}: not a number list: {text!r}")
        return None
    if len(vals) not in (1, 2):
        problems.append(f"{key}: expected one value or a 'low high' range, got {text!r}")
        return None
    return vals[0] if len(vals) == 1 else (vals[0], vals[1])


def parse_spec(text: str) -> SimulationSpec:
    """Parse a ``key = value`` simulation config.

    Recognised keys: ``dims`` (three integers), ``frames``, ``mu``, ``sigma``,
    ``rho`` (value or ``low high``), ``seed``, ``tr``, ``spikes``
    (comma-separated ``frame:factor``) and ``drift`` (slope per frame).
    Lines starting with ``#`` are comments.
    """
    import configparser

    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string("[spec]\n" + text)
    except configparser.Error as exc:
        raise InvalidInputError(f"cannot parse simulation spec: {exc}") from None
    sec = cp["spec"]
    known = {"dims", "frames", "mu", "sigma", "rho", "seed", "tr", "spikes", "drift"}
    problems = [f"{k}: unknown key" for k in sec if k not in known]
    for required in ("dims", "frames"):
        if required not in sec:
            problems.append(f"{required}: missing")

    kwargs: dict = {}
    if "dims" in sec:
        try:
            kwargs["dims"] = tuple(int(x) for x in sec["dims"].replace(",", " ").split())
        except ValueError:
            problems.append(f"dims: not integers: {sec['dims']!r}")
    if "frames" in sec:
        try:
            kwargs["n_frames"] = int(sec["frames"])
        except ValueError:
            problems.append(f"frames: not an integer: {sec['frames']!r}")
    for key in ("mu", "sigma", "rho"):
        if key in sec:
            val = _numbers(key, sec[key], problems)
            if val is not None:
                kwargs[key] = val
    if "seed" in sec:
        try:
            kwargs["seed"] = int(sec["seed"])
        except ValueError:
            problems.append(f"seed: not an integer: {sec['seed']!r}")
    if "tr" in sec:
        try:
            kwargs["tr"] = float(sec["tr"])
        except ValueError:
            problems.append(f"tr: not a number: {sec['tr']!r}")
    artifacts = []
    for item in filter(None, (s.strip() for s in sec.get("spikes", "").split(","))):
        frame, sep, factor = item.partition(":")
        try:
            artifacts.append(Spike(int(frame), float(factor) if sep else 1.0))
        except ValueError:
            problems.append(f"spikes: bad entry {item!r}, expected frame:factor")
    if "drift" in sec:
        try:
            artifacts.append(Drift(float(sec["drift"])))
        except ValueError:
            problems.append(f"drift: not a number: {sec['drift']!r}")
    kwargs["artifacts"] = tuple(artifacts)
    if problems:
        raise InvalidInputError("invalid simulation spec: " + "; ".join(problems))
    spec = SimulationSpec(**kwargs)
    spec.validate()
    return spec
