"""Channel scenario generation for the downlink NOMA cell.

A scenario is one snapshot of the system: K single-antenna users dropped
uniformly over an annulus around an N-antenna base station, distance-sorted
channel vectors combining log-distance path loss with Rayleigh fading, plus
the noise powers and the transmit power budget.  All randomness flows from a
single 64-bit seed so that every downstream result is reproducible.

Two modelling choices are not pinned down by the usual parameter tables and
are therefore explicit here:

* the path-loss formula ``a + b*log10(d)`` takes ``d`` in kilometers (the
  meter reading gives physically absurd losses at cell scale), and
* small-scale fading is i.i.d. circularly-symmetric complex Gaussian with
  unit variance (Rayleigh envelope), the standard NLOS default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ScenarioConfig",
    "Scenario",
    "ScenarioFormatError",
    "path_loss_db",
    "noise_power_w",
    "dbm_to_watts",
    "watts_to_dbm",
    "generate_scenario",
    "save_scenario",
    "load_scenario",
]

SCENARIO_FORMAT_VERSION = 1


class ScenarioFormatError(ValueError):
    """Raised when a scenario file is malformed or violates an invariant."""


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * np.log10(p_w) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Cell and radio parameters; defaults are the simulation table values."""

    K: int = 8
    N: int = 4
    cell_radius_m: float = 200.0
    min_distance_m: float = 10.0
    bandwidth_hz: float = 20e6
    noise_psd_dbm_hz: float = -174.0
    pathloss_a: float = 145.4   # dB offset at 1 km
    pathloss_b: float = 37.5    # dB per decade of distance
    p_max_dbm: float = 38.0
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not (0.0 < self.min_distance_m < self.cell_radius_m):
            raise ValueError(
                "need 0 < min_distance_m < cell_radius_m, got "
                f"min_distance_m={self.min_distance_m}, cell_radius_m={self.cell_radius_m}"
            )
        if self.bandwidth_hz <= 0:
            raise ValueError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")


@dataclass(frozen=True)
class Scenario:
    """One channel realization, immutable and safe to share across workers.

    ``channels[k]`` is the length-N complex gain vector of user k in linear
    scale (path loss already applied); ``distances_m`` is sorted
    non-decreasing and users are indexed in that order, so user 0 is the
    nearest to the base station.
    """

    K: int
    N: int
    distances_m: np.ndarray        # shape (K,), non-decreasing
    channels: np.ndarray           # shape (K, N), complex128
    noise_w: np.ndarray            # shape (K,), strictly positive
    p_max_w: float
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "distances_m", np.asarray(self.distances_m, dtype=float))
        object.__setattr__(self, "channels", np.asarray(self.channels, dtype=complex))
        object.__setattr__(self, "noise_w", np.asarray(self.noise_w, dtype=float))
        if self.distances_m.shape != (self.K,):
            raise ValueError(f"distances_m must have shape ({self.K},), got {self.distances_m.shape}")
        if self.channels.shape != (self.K, self.N):
            raise ValueError(f"channels must have shape ({self.K}, {self.N}), got {self.channels.shape}")
        if self.noise_w.shape != (self.K,):
            raise ValueError(f"noise_w must have shape ({self.K},), got {self.noise_w.shape}")
        if np.any(np.diff(self.distances_m) < 0):
            raise ValueError("distances_m must be non-decreasing (users are indexed by distance)")
        if np.any(self.noise_w <= 0):
            raise ValueError("all noise powers must be strictly positive")
        if not self.p_max_w > 0:
            raise ValueError(f"p_max_w must be positive, got {self.p_max_w}")
        self.distances_m.setflags(write=False)
        self.channels.setflags(write=False)
        self.noise_w.setflags(write=False)

    def with_power_budget(self, p_max_w: float) -> "Scenario":
        """Same channel realization under a different power budget."""
        return replace(self, p_max_w=float(p_max_w))

    def content_hash(self) -> str:
        """SHA-256 over all defining fields; used for common-random-number audits."""
        h = hashlib.sha256()
        h.update(np.int64(self.K).tobytes())
        h.update(np.int64(self.N).tobytes())
        h.update(self.distances_m.tobytes())
        h.update(np.ascontiguousarray(self.channels).tobytes())
        h.update(self.noise_w.tobytes())
        h.update(np.float64(self.p_max_w).tobytes())
        return h.hexdigest()


def path_loss_db(d_m: float, config: ScenarioConfig) -> float:
    """Log-distance path loss in dB; the distance is interpreted in km.

    Raises ValueError when the distance falls below the configured minimum.
    """
    if d_m < config.min_distance_m:
        raise ValueError(
            f"distance {d_m} m is below the minimum BS-to-user distance {config.min_distance_m} m"
        )
    return config.pathloss_a + config.pathloss_b * np.log10(d_m / 1000.0)


def noise_power_w(config: ScenarioConfig) -> float:
    """Thermal noise power over the full system bandwidth, in watts."""
    noise_dbm = config.noise_psd_dbm_hz + 10.0 * np.log10(config.bandwidth_hz)
    return dbm_to_watts(noise_dbm)


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Draw one channel realization.

    Radii are area-uniform over the annulus [min_distance, cell_radius]
    (angles are irrelevant to the channel statistics and are not drawn),
    users are sorted by distance and re-indexed, and each channel is
    ``sqrt(10^(-PL/10)) * g`` with g i.i.d. unit-variance complex Gaussian.
    The same seed always yields a bit-identical scenario.
    """
    rng = np.random.default_rng(config.seed)
    lo2 = config.min_distance_m**2
    hi2 = config.cell_radius_m**2
    radii = np.sqrt(lo2 + rng.uniform(0.0, 1.0, size=config.K) * (hi2 - lo2))
    radii.sort()

    gains = 10.0 ** (-np.array([path_loss_db(d, config) for d in radii]) / 10.0)
    fading = (
        rng.standard_normal((config.K, config.N)) + 1j * rng.standard_normal((config.K, config.N))
    ) / np.sqrt(2.0)
    channels = np.sqrt(gains)[:, None] * fading

    noise = np.full(config.K, noise_power_w(config))
    return Scenario(
        K=config.K,
        N=config.N,
        distances_m=radii,
        channels=channels,
        noise_w=noise,
        p_max_w=dbm_to_watts(config.p_max_dbm),
        seed=config.seed,
    )


def _scenario_to_dict(s: Scenario) -> dict:
    return {
        "format_version": SCENARIO_FORMAT_VERSION,
        "k": s.K,
        "n": s.N,
        "distances_m": s.distances_m.tolist(),
        "noise_w": s.noise_w.tolist(),
        "p_max_w": s.p_max_w,
        "seed": s.seed,
        "channels": [[[float(v.real), float(v.imag)] for v in row] for row in s.channels],
    }


def save_scenario(s: Scenario, path) -> None:
    """Write a scenario as a self-describing JSON document (bit-exact round trip)."""
    with open(path, "w") as fh:
        json.dump(_scenario_to_dict(s), fh, indent=1)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    """Read a scenario file, validating the schema and every invariant."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"{path}: not valid JSON at line {exc.lineno}: {exc.msg}") from exc

    def require(field_name):
        if field_name not in doc:
            raise ScenarioFormatError(f"{path}: missing field '{field_name}'")
        return doc[field_name]

    version = require("format_version")
    if version != SCENARIO_FORMAT_VERSION:
        raise ScenarioFormatError(f"{path}: unsupported format_version {version}")
    k = require("k")
    n = require("n")
    channels_raw = require("channels")
    if len(channels_raw) != k:
        raise ScenarioFormatError(f"{path}: field 'channels' has {len(channels_raw)} rows, expected k={k}")
    for i, row in enumerate(channels_raw):
        if len(row) != n:
            raise ScenarioFormatError(f"{path}: channels[{i}] has {len(row)} entries, expected n={n}")
    channels = np.array([[complex(re, im) for re, im in row] for row in channels_raw])
    distances = np.asarray(require("distances_m"), dtype=float)
    if distances.shape != (k,):
        raise ScenarioFormatError(f"{path}: field 'distances_m' has length {distances.size}, expected k={k}")
    if np.any(np.diff(distances) < 0):
        raise ScenarioFormatError(
            f"{path}: distances_m is not sorted non-decreasing; users must be indexed by distance"
        )
    noise = np.asarray(require("noise_w"), dtype=float)
    if noise.shape != (k,):
        raise ScenarioFormatError(f"{path}: field 'noise_w' has length {noise.size}, expected k={k}")
    try:
        return Scenario(
            K=k,
            N=n,
            distances_m=distances,
            channels=channels,
            noise_w=noise,
            p_max_w=require("p_max_w"),
            seed=doc.get("seed"),
        )
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
