"""Topology and channel generation for uplink network simulations.

Propagation model: distance path loss ``PL(d) = a*log10(d) + b`` in dB,
log-normal shadowing (one draw per user/BS pair, shared across bands by
default), and unit-variance Rayleigh fading drawn i.i.d. per band by
default.  The complex coefficient for user u, BS b, band k is

    h[u, b, k] = sqrt(10 ** ((-PL(d_ub) + S_ub) / 10)) * g[u, b, k]

with g circularly-symmetric complex Gaussian.  All powers are linear
milliwatts internally; dB and dBm appear only at I/O boundaries.

Randomness is derived from ``numpy.random.SeedSequence`` with entropy
``[master_seed, stream_id, realization_index]``, so realizations are
independent, reproducible, and order-independent under parallel execution.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, fields, asdict

import numpy as np

logger = logging.getLogger(__name__)

# Stream ids for seed derivation; one stream per independent random source.
STREAM_TOPOLOGY = 0
STREAM_SHADOWING = 1
STREAM_FADING = 2
STREAM_KMEANS = 3

# Transmit-to-receive distances are clamped to this floor before the
# path-loss formula, which diverges at zero.
MIN_DISTANCE_M = 1.0


class ConfigError(ValueError):
    """Invalid simulation configuration; `field` names the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class SimulationConfig:
    """Experiment parameters.  Defaults reproduce the reference scenario:

    6 BSs and 50 users uniform on a 2000 m square, 10 bands of 20 kHz,
    noise density -174 dBm/Hz, per-user budget 23 dBm, 8 dB shadowing.
    """

    num_bs: int = 6
    num_users: int = 50
    side_length: float = 2000.0
    num_bands: int = 10
    band_width: float = 20_000.0
    noise_psd_dbm_hz: float = -174.0
    power_budget_dbm: float = 23.0
    pathloss_a: float = 35.0
    pathloss_b: float = 34.0
    shadowing_sigma_db: float = 8.0
    num_realizations: int = 500
    master_seed: int = 0
    # Stored for documentation; absorbed by the path-loss constants.
    carrier_freq_mhz: float = 1800.0
    # Correlation toggles for the random propagation terms.
    shadowing_shared_across_bands: bool = True
    fading_iid_across_bands: bool = True

    def __post_init__(self):
        for name in ("num_bs", "num_users", "num_bands", "num_realizations"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(name, f"must be an integer, got {v!r}")
            if v < 1:
                raise ConfigError(name, f"must be >= 1, got {v}")
        for name in ("side_length", "band_width"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(name, f"must be a number, got {v!r}")
            setattr(self, name, float(v))
            if getattr(self, name) <= 0:
                raise ConfigError(name, f"must be > 0, got {v}")
        for name in ("noise_psd_dbm_hz", "power_budget_dbm", "pathloss_a",
                     "pathloss_b", "shadowing_sigma_db", "carrier_freq_mhz"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(name, f"must be a number, got {v!r}")
            setattr(self, name, float(v))
        if self.shadowing_sigma_db < 0:
            raise ConfigError("shadowing_sigma_db",
                              f"must be >= 0, got {self.shadowing_sigma_db}")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int):
            raise ConfigError("master_seed",
                              f"must be an integer, got {self.master_seed!r}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed",
                              f"must fit in 64 unsigned bits, got {self.master_seed}")
        for name in ("shadowing_shared_across_bands", "fading_iid_across_bands"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(name, "must be a boolean")

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        if not isinstance(data, dict):
            raise ConfigError("config", "top-level JSON value must be an object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown config field")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "SimulationConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def noise_power_mw(self) -> float:
        """Per-band noise power in mW: 10^(psd/10) * band_width."""
        return dbm_to_mw(self.noise_psd_dbm_hz) * self.band_width

    @property
    def power_budget_mw(self) -> float:
        return dbm_to_mw(self.power_budget_dbm)


@dataclass
class Topology:
    """BS/user positions in meters and per-user budgets in mW."""

    bs_positions: np.ndarray    # (num_bs, 2)
    user_positions: np.ndarray  # (num_users, 2)
    power_budgets: np.ndarray   # (num_users,)


@dataclass
class ChannelTensor:
    """Complex channel coefficients h[u, b, k] plus per-band noise/bandwidth."""

    h: np.ndarray            # (num_users, num_bs, num_bands) complex
    noise_power: np.ndarray  # (num_bands,) mW
    band_widths: np.ndarray  # (num_bands,) Hz


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0:
        raise ValueError(f"power must be positive to express in dBm, got {mw}")
    return 10.0 * np.log10(mw)


def derive_rng(master_seed: int, stream_id: int, realization_index: int) -> np.random.Generator:
    """Independent generator for (seed, stream, realization)."""
    ss = np.random.SeedSequence([master_seed, stream_id, realization_index])
    return np.random.default_rng(ss)


def pathloss_db(d, a: float = 35.0, b: float = 34.0):
    """Distance path loss a*log10(d) + b in dB; d in meters, elementwise."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = a * np.log10(d) + b
    return float(out) if out.ndim == 0 else out


def generate_topology(cfg: SimulationConfig, realization_index: int) -> Topology:
    """Uniform BS and user placements on the square, budgets in mW."""
    if not 0 <= realization_index < cfg.num_realizations:
        raise ValueError(
            f"realization_index {realization_index} outside [0, {cfg.num_realizations})")
    rng = derive_rng(cfg.master_seed, STREAM_TOPOLOGY, realization_index)
    bs = rng.uniform(0.0, cfg.side_length, size=(cfg.num_bs, 2))
    users = rng.uniform(0.0, cfg.side_length, size=(cfg.num_users, 2))
    budgets = np.full(cfg.num_users, cfg.power_budget_mw)
    return Topology(bs_positions=bs, user_positions=users, power_budgets=budgets)


def shadowing_db(cfg: SimulationConfig, realization_index: int) -> np.ndarray:
    """Log-normal shadowing draws in dB, shape (num_users, num_bs, num_bands).

    With ``shadowing_shared_across_bands`` (default) a single draw per
    (user, BS) pair is broadcast across bands.
    """
    rng = derive_rng(cfg.master_seed, STREAM_SHADOWING, realization_index)
    u, b, k = cfg.num_users, cfg.num_bs, cfg.num_bands
    if cfg.shadowing_shared_across_bands:
        s = rng.normal(0.0, cfg.shadowing_sigma_db, size=(u, b))
        return np.repeat(s[:, :, None], k, axis=2)
    return rng.normal(0.0, cfg.shadowing_sigma_db, size=(u, b, k))


def rayleigh_fading(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with E[|g|^2] = 1."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def generate_channels(cfg: SimulationConfig, topo: Topology,
                      realization_index: int) -> ChannelTensor:
    """Channel tensor for one realization; bit-reproducible per (seed, index)."""
    diff = topo.user_positions[:, None, :] - topo.bs_positions[None, :, :]
    d = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
    n_clamped = int(np.count_nonzero(d < MIN_DISTANCE_M))
    if n_clamped:
        logger.warning(
            "clamped %d user-BS distance(s) below %.1f m before path loss",
            n_clamped, MIN_DISTANCE_M)
        d = np.maximum(d, MIN_DISTANCE_M)
    pl = pathloss_db(d, cfg.pathloss_a, cfg.pathloss_b)          # (U, B)
    shadow = shadowing_db(cfg, realization_index)                # (U, B, K)
    amplitude = np.sqrt(10.0 ** ((-pl[:, :, None] + shadow) / 10.0))

    rng = derive_rng(cfg.master_seed, STREAM_FADING, realization_index)
    u, b, k = cfg.num_users, cfg.num_bs, cfg.num_bands
    if cfg.fading_iid_across_bands:
        g = rayleigh_fading(rng, (u, b, k))
    else:
        g = np.repeat(rayleigh_fading(rng, (u, b))[:, :, None], k, axis=2)

    noise = np.full(cfg.num_bands, cfg.noise_power_mw)
    widths = np.full(cfg.num_bands, cfg.band_width)
    return ChannelTensor(h=amplitude * g, noise_power=noise, band_widths=widths)
