"""Cellular deployments and the uplink PHY model.

A deployment is an ``l x l`` square tiled by 20 m cells with one BS at
each cell centre.  Users transmit to the BS with the strongest path gain
using a power that lands exactly ``(1 + alpha) * phi_hat * B * N0`` at
that BS, where ``phi_hat`` is the SINR at which the finite-blocklength
error rate equals the reliability target.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import InvalidArgument, NumericalFailure

CELL_SIDE_M = 20.0
SCENARIO_FORMAT = "sigsdp.scenario"
SCENARIO_VERSION = 1


def dbm_to_watt(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class PhyConfig:
    """Physical-layer constants.

    Defaults reproduce the evaluation setup: 5 MHz at 4 GHz, 0.125 ms
    slots, 800-bit packets, a 1e-5 error target, alpha = 1, -94 dBm of
    noise over the band and a 10 dB sensitivity floor (gamma = 0.1).
    """

    bandwidth_hz: float = 5e6
    noise_psd: float = dbm_to_watt(-94.0) / 5e6
    slot_duration_s: float = 0.125e-3
    packet_bits: int = 800
    max_error_rate: float = 1e-5
    power_margin: float = 1.0
    sensitivity_ratio: float = 0.1
    carrier_mhz: float = 4000.0

    def __post_init__(self):
        for name in ("bandwidth_hz", "noise_psd", "slot_duration_s", "power_margin", "carrier_mhz"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive, got {getattr(self, name)!r}")
        if int(self.packet_bits) != self.packet_bits or self.packet_bits < 1:
            raise InvalidArgument(f"packet_bits must be a positive integer, got {self.packet_bits!r}")
        if not 0.0 < self.max_error_rate < 1.0:
            raise InvalidArgument(f"max_error_rate must lie in (0, 1), got {self.max_error_rate!r}")
        if self.sensitivity_ratio < 0:
            raise InvalidArgument("sensitivity_ratio must be nonnegative")
        if self.symbols_per_slot < 1.0:
            raise InvalidArgument("slot_duration_s * bandwidth_hz must be at least 1")

    @property
    def noise_power(self) -> float:
        """Noise power over the band, ``B * N0`` in watts."""
        return self.bandwidth_hz * self.noise_psd

    @property
    def symbols_per_slot(self) -> float:
        return self.slot_duration_s * self.bandwidth_hz

    def to_dict(self) -> dict:
        return {
            "bandwidth_hz": self.bandwidth_hz,
            "noise_psd": self.noise_psd,
            "slot_duration_s": self.slot_duration_s,
            "packet_bits": int(self.packet_bits),
            "max_error_rate": self.max_error_rate,
            "power_margin": self.power_margin,
            "sensitivity_ratio": self.sensitivity_ratio,
            "carrier_mhz": self.carrier_mhz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhyConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def path_gain(distance_m, carrier_mhz):
    """Log-distance gain in linear scale: -28 log10(d+1) - 20 log10(f) + 12 dB."""
    db = -28.0 * np.log10(np.asarray(distance_m, dtype=float) + 1.0) - 20.0 * math.log10(carrier_mhz) + 12.0
    return 10.0 ** (db / 10.0)


def gain_matrix(user_positions, bs_positions, carrier_mhz):
    diff = np.asarray(user_positions, float)[:, None, :] - np.asarray(bs_positions, float)[None, :, :]
    return path_gain(np.hypot(diff[..., 0], diff[..., 1]), carrier_mhz)


def bs_grid(side_m):
    n = int(round(side_m / CELL_SIDE_M))
    centres = CELL_SIDE_M * np.arange(1, n + 1) - CELL_SIDE_M / 2
    ax, ay = np.meshgrid(centres, centres, indexing="ij")
    return np.column_stack([ax.ravel(), ay.ravel()])


@dataclass(frozen=True)
class Scenario:
    side_m: float
    bs_positions: np.ndarray
    user_positions: np.ndarray
    path_gain: np.ndarray
    phy: PhyConfig = field(default_factory=PhyConfig)

    def __post_init__(self):
        bs = _frozen(self.bs_positions).reshape(-1, 2)
        users = _frozen(self.user_positions).reshape(-1, 2)
        gains = _frozen(self.path_gain).reshape(len(users), len(bs))
        object.__setattr__(self, "bs_positions", bs)
        object.__setattr__(self, "user_positions", users)
        object.__setattr__(self, "path_gain", gains)
        if len(bs) == 0:
            raise InvalidArgument("scenario needs at least one BS")
        if gains.size and not (np.all(gains > 0) and np.all(gains <= 1)):
            raise InvalidArgument("path gains must lie in (0, 1]")
        if users.size and (users.min() < 0 or users.max() > self.side_m):
            raise InvalidArgument("every user must lie inside [0, side_m]^2")

    @property
    def n_users(self) -> int:
        return len(self.user_positions)

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @classmethod
    def from_positions(cls, side_m, bs_positions, user_positions, phy=None) -> "Scenario":
        phy = phy or PhyConfig()
        users = np.asarray(user_positions, float).reshape(-1, 2)
        gains = gain_matrix(users, bs_positions, phy.carrier_mhz)
        return cls(side_m, bs_positions, users, gains, phy)

    def with_users(self, user_positions) -> "Scenario":
        """Copy with users moved and gains recomputed."""
        users = np.asarray(user_positions, float).reshape(-1, 2)
        return replace(self, user_positions=users,
                       path_gain=gain_matrix(users, self.bs_positions, self.phy.carrier_mhz))

    def to_json(self, include_gains=True) -> str:
        doc = {
            "format": SCENARIO_FORMAT,
            "version": SCENARIO_VERSION,
            "side_m": self.side_m,
            "phy": self.phy.to_dict(),
            "bs_positions": self.bs_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
        }
        if include_gains:
            doc["path_gain"] = self.path_gain.tolist()
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        if doc.get("format") != SCENARIO_FORMAT:
            raise InvalidArgument(f"not a scenario document: format={doc.get('format')!r}")
        if doc.get("version") != SCENARIO_VERSION:
            raise InvalidArgument(f"unsupported scenario version {doc.get('version')!r}")
        phy = PhyConfig.from_dict(doc["phy"])
        users = np.asarray(doc["user_positions"], float).reshape(-1, 2)
        if doc.get("path_gain") is not None:
            return cls(doc["side_m"], doc["bs_positions"], users, doc["path_gain"], phy)
        return cls.from_positions(doc["side_m"], doc["bs_positions"], users, phy)


def generate_scenario(side_m, density, seed, phy=None) -> Scenario:
    """Uniform random users over an ``side_m`` square covered by a 20 m BS grid.

    ``K = round(density * side_m**2)``; the result depends only on the
    arguments.
    """
    if side_m <= 0 or not math.isclose(side_m / CELL_SIDE_M, round(side_m / CELL_SIDE_M)):
        raise InvalidArgument(f"side_m must be a positive multiple of {CELL_SIDE_M:g} m, got {side_m!r}")
    if not density > 0:
        raise InvalidArgument(f"density must be positive, got {density!r}")
    n_users = int(round(density * side_m ** 2))
    rng = np.random.default_rng(seed)
    users = rng.uniform(0.0, side_m, size=(n_users, 2))
    return Scenario.from_positions(float(side_m), bs_grid(side_m), users, phy)


def q_function(x):
    """Standard normal tail probability."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _normal_argument(sinr, phy):
    n = phy.symbols_per_slot
    return (-phy.packet_bits * math.log(2.0) + n * np.log1p(sinr)) / np.sqrt(n * (1.0 - 1.0 / (1.0 + sinr) ** 2))


def decoding_error_rate(sinr, phy: PhyConfig):
    """Finite-blocklength packet error rate at the given linear SINR.

    Accepts scalars or arrays; every entry must be positive.
    """
    s = np.asarray(sinr, dtype=float)
    if np.any(~(s > 0)):
        raise InvalidArgument("SINR must be positive")
    out = q_function(_normal_argument(s, phy))
    return float(out) if out.ndim == 0 else out


def solve_sinr_threshold(phy: PhyConfig, lo=1e-6, hi=1e6) -> float:
    """SINR at which :func:`decoding_error_rate` meets ``phy.max_error_rate``.

    The root is bracketed on a log-SINR axis; the bracket end on the
    reliable side is returned so the error at the threshold never
    exceeds the target.
    """
    target = phy.max_error_rate
    if not 0.0 < target <= 0.5:
        raise InvalidArgument("max_error_rate must lie in (0, 0.5]")

    def excess(u):
        # log-domain keeps the tail resolvable down to ~1e-300
        return special.log_ndtr(-_normal_argument(math.exp(u), phy)) - math.log(target)

    a, b = math.log(lo), math.log(hi)
    fa, fb = excess(a), excess(b)
    if not (fa > 0 > fb):
        raise NumericalFailure("error-rate target not bracketed by the SINR interval",
                               {"bracket": (lo, hi), "excess": (fa, fb)})
    for it in range(200):
        mid = 0.5 * (a + b)
        if excess(mid) > 0:
            a = mid
        else:
            b = mid
        if b - a < 1e-15 * max(1.0, abs(b)):
            break
    phi = math.exp(b)
    err = decoding_error_rate(phi, phy)
    if abs(err - target) > 1e-3 * target:
        raise NumericalFailure("bisection did not reach the error-rate tolerance",
                               {"phi": phi, "error": err, "iterations": it + 1})
    return phi


@dataclass(frozen=True)
class PowerProfile:
    assoc: np.ndarray
    tx_power: np.ndarray
    sinr_threshold: float

    def __post_init__(self):
        object.__setattr__(self, "assoc", _frozen(self.assoc, int))
        object.__setattr__(self, "tx_power", _frozen(self.tx_power))


def power_profile(scenario: Scenario, sinr_threshold=None) -> PowerProfile:
    """Max-gain association and target-received-power transmit powers."""
    phy = scenario.phy
    phi = solve_sinr_threshold(phy) if sinr_threshold is None else sinr_threshold
    g = scenario.path_gain
    assoc = np.argmax(g, axis=1)  # first maximum wins -> lowest BS index on ties
    own = g[np.arange(len(assoc)), assoc]
    tx = (1.0 + phy.power_margin) * phi * phy.noise_power / own
    return PowerProfile(assoc, tx, phi)

