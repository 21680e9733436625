"""Physical network model: geometry, path loss, SINR, and rate bookkeeping.

Servers are indexed 0..N-1 with the B base stations first and the U
potential D2D relays after them; user u receives through node B+u.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .patterns import Pattern

DISTANCE_FLOOR_M = 1.0
EFFICIENCY_FLOOR = 1e-12  # bits/s/Hz below this are treated as zero


@dataclass(frozen=True)
class PathLossParams:
    """Coefficients of the a*log10(d_m) + b + w_db*n_w model (dB)."""

    a: float = 37.6
    b: float = 35.3
    w_db: float = 5.0


@dataclass(frozen=True)
class Scenario:
    """Static downlink network description.

    positions holds all B+U node coordinates in meters (BSs first);
    walls[n, u] is the wall count on the link from server n to user u.
    """

    num_bs: int
    num_due: int
    positions: np.ndarray
    tx_power_dbm: np.ndarray
    bandwidth_hz: float = 2.0e7
    noise_psd_dbm_hz: float = -174.0
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    walls: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.num_bs < 1 or self.num_due < 1:
            raise ValueError("need at least one BS and one DUE")
        n = self.num_servers
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (n, 2):
            raise ValueError(f"positions must be ({n}, 2), got {pos.shape}")
        pw = np.asarray(self.tx_power_dbm, dtype=float)
        if pw.shape != (n,):
            raise ValueError(f"tx_power_dbm must have {n} entries")
        if not np.all(np.isfinite(pw)):
            raise ValueError("transmit powers must be finite")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth must be positive")
        walls = self.walls
        if walls is None:
            walls = np.zeros((n, self.num_due), dtype=int)
        else:
            walls = np.asarray(walls, dtype=int)
            if walls.shape != (n, self.num_due):
                raise ValueError(f"walls must be ({n}, {self.num_due})")
            if np.any(walls < 0):
                raise ValueError("wall counts must be nonnegative")
        for name, arr in (("positions", pos), ("tx_power_dbm", pw), ("walls", walls)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_servers(self) -> int:
        return self.num_bs + self.num_due

    def powers_w(self) -> np.ndarray:
        return dbm_to_watts(self.tx_power_dbm)

    def to_dict(self) -> dict:
        return {
            "num_bs": self.num_bs,
            "num_due": self.num_due,
            "positions_m": self.positions.tolist(),
            "tx_power_dbm": self.tx_power_dbm.tolist(),
            "bandwidth_hz": self.bandwidth_hz,
            "noise_psd_dbm_hz": self.noise_psd_dbm_hz,
            "pathloss": {"a": self.pathloss.a, "b": self.pathloss.b, "w_db": self.pathloss.w_db},
            "walls": self.walls.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        pl = d.get("pathloss", {})
        return cls(
            num_bs=int(d["num_bs"]),
            num_due=int(d["num_due"]),
            positions=np.asarray(d["positions_m"], dtype=float),
            tx_power_dbm=np.asarray(d["tx_power_dbm"], dtype=float),
            bandwidth_hz=float(d.get("bandwidth_hz", 2.0e7)),
            noise_psd_dbm_hz=float(d.get("noise_psd_dbm_hz", -174.0)),
            pathloss=PathLossParams(
                a=float(pl.get("a", 37.6)), b=float(pl.get("b", 35.3)), w_db=float(pl.get("w_db", 5.0))
            ),
            walls=np.asarray(d["walls"], dtype=int) if d.get("walls") is not None else None,
            seed=d.get("seed"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GainMatrix:
    """Linear power gains g[n, u] plus the noise power over the full band."""

    g: np.ndarray
    noise_power_w: float
    clamped_links: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=float)
        if np.any(g < 0):
            raise ValueError("gains must be nonnegative")
        if not self.noise_power_w > 0:
            raise ValueError("noise power must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)


@dataclass(frozen=True)
class RateTable:
    """Spectral efficiencies c[u, n, i] for an ordered list of patterns."""

    patterns: tuple[Pattern, ...]
    c: np.ndarray
    bandwidth_hz: float
    num_bs: int

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def num_users(self) -> int:
        return self.c.shape[0]

    @property
    def num_servers(self) -> int:
        return self.c.shape[1]

    @property
    def num_patterns(self) -> int:
        return self.c.shape[2]


@dataclass(frozen=True)
class Rates:
    """Per-user received, per-server relay-serving, and effective rates (bits/s)."""

    r_bar: np.ndarray
    r_tilde: np.ndarray
    r_eff: np.ndarray


def dbm_to_watts(p_dbm: float | np.ndarray) -> float | np.ndarray:
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0) / 1000.0


def path_loss_db(d_m: float, n_w: int = 0, params: PathLossParams = PathLossParams()) -> float:
    """Distance- and wall-dependent attenuation in dB."""
    if d_m <= 0:
        raise ValueError("distance must be positive")
    if n_w < 0:
        raise ValueError("wall count must be nonnegative")
    return params.a * np.log10(d_m) + params.b + params.w_db * n_w


def build_gains(scenario: Scenario) -> GainMatrix:
    """Average channel gains for every server-to-user link.

    Distances below the 1 m floor are clamped (and reported); the
    self-link g[B+u, u] is forced to zero since a DUE never serves itself.
    """
    b = scenario.num_bs
    n, u = scenario.num_servers, scenario.num_due
    rx = scenario.positions[b:]  # user u receives at node B+u
    tx = scenario.positions
    d = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=2)
    clamped = []
    for ni in range(n):
        for ui in range(u):
            if ni == b + ui:
                continue
            if d[ni, ui] < DISTANCE_FLOOR_M:
                clamped.append((ni, ui))
    d = np.maximum(d, DISTANCE_FLOOR_M)
    pl = scenario.pathloss.a * np.log10(d) + scenario.pathloss.b + scenario.pathloss.w_db * scenario.walls
    g = 10.0 ** (-pl / 10.0)
    for ui in range(u):
        g[b + ui, ui] = 0.0
    noise_dbm = scenario.noise_psd_dbm_hz + 10.0 * np.log10(scenario.bandwidth_hz)
    return GainMatrix(g=g, noise_power_w=float(dbm_to_watts(noise_dbm)), clamped_links=tuple(clamped))


def sinr(u: int, n: int, pattern: Pattern, gains: GainMatrix, powers_w: np.ndarray) -> float:
    """SINR of the server-n to user-u link under the given reuse pattern."""
    if not pattern.is_active(n):
        return 0.0
    active = np.array(pattern.active_set, dtype=int)
    rx_power = powers_w[active] * gains.g[active, u]
    signal = powers_w[n] * gains.g[n, u]
    interference = rx_power.sum() - signal
    return float(signal / (gains.noise_power_w + interference))


def spectral_efficiency(
    u: int, n: int, pattern: Pattern, gains: GainMatrix, powers_w: np.ndarray, num_bs: int
) -> float:
    """Link efficiency in bits/s/Hz; zero while user u's own relay transmits."""
    if pattern.is_active(num_bs + u):
        return 0.0
    val = float(np.log2(1.0 + sinr(u, n, pattern, gains, powers_w)))
    return val if val >= EFFICIENCY_FLOOR else 0.0


def pattern_efficiencies(scenario: Scenario, gains: GainMatrix, pattern: Pattern) -> np.ndarray:
    """Efficiency slice c[u, n] for a single pattern, vectorized."""
    b = scenario.num_bs
    powers = scenario.powers_w()
    active = pattern.bits().astype(float)  # (N,)
    rx = powers[:, None] * gains.g * active[:, None]  # (N, U) received power per link
    total = rx.sum(axis=0)  # (U,)
    denom = gains.noise_power_w + (total[None, :] - rx)
    snr = np.where(active[:, None] > 0, rx / denom, 0.0)
    c = np.log2(1.0 + snr).T  # (U, N)
    silenced = active[b:] > 0  # user transmitting as relay cannot receive
    c[silenced, :] = 0.0
    c[c < EFFICIENCY_FLOOR] = 0.0
    return c


def build_rate_table(scenario: Scenario, gains: GainMatrix, patterns: Sequence[Pattern]) -> RateTable:
    """Efficiency tensor over a duplicate-free pattern list."""
    pats = tuple(patterns)
    if not pats:
        raise ValueError("pattern list must be nonempty")
    if len({p.mask for p in pats}) != len(pats):
        raise ValueError("duplicate patterns")
    c = np.stack([pattern_efficiencies(scenario, gains, p) for p in pats], axis=2)
    return RateTable(patterns=pats, c=c, bandwidth_hz=scenario.bandwidth_hz, num_bs=scenario.num_bs)


def rates_from_allocation(rate_table: RateTable, x: np.ndarray, y: np.ndarray) -> Rates:
    """Average, relay-serving, and effective rates for a time allocation.

    x is unused numerically (rates depend on y alone) but kept in the
    signature so callers hand over the full allocation pair.
    """
    del x
    w = rate_table.bandwidth_hz
    contrib = y * rate_table.c  # (U, N, I)
    r_bar = w * contrib.sum(axis=(1, 2))
    r_tilde = w * contrib.sum(axis=(0, 2))
    r_eff = r_bar - r_tilde[rate_table.num_bs :]
    return Rates(r_bar=r_bar, r_tilde=r_tilde, r_eff=r_eff)
