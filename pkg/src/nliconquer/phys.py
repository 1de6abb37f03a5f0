"""Physical constants, transponder arithmetic, and link/channel data types.

Frequencies are carried in GHz at the API surface and converted to Hz only
inside the integration kernels. Span lengths are km, powers are dBm or W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

PLANCK_J_S = 6.62607015e-34
REF_FREQ_HZ = 193.41e12

SLOT_GHZ = 12.5
CENTER_GRID_GHZ = 6.25
BAND_SLOTS = 400

FEC_OVERHEAD = 0.40
GUARD_FACTOR = 1.10
REF_SYMBOL_RATE_GBD = 35.0
SYMBOL_RATE_MIN_GBD = 10.0
SYMBOL_RATE_MAX_GBD = 90.0

MOD_BITS = {"QPSK": 2, "16QAM": 4, "32QAM": 5, "64QAM": 6}
DATA_RATES_GBPS = tuple(range(100, 601, 50))


def symbol_rate_gbd(data_rate_gbps: float, modulation: str) -> float:
    """Symbol rate in GBd for a net data rate carried on dual-pol modulation.

    Raises ValueError when the resulting rate falls outside the transponder
    range [10, 90] GBd.
    """
    if modulation not in MOD_BITS:
        raise ValueError(f"unknown modulation {modulation!r}")
    bits = MOD_BITS[modulation]
    rate = data_rate_gbps * (1.0 + FEC_OVERHEAD) / (2.0 * bits)
    if not SYMBOL_RATE_MIN_GBD <= rate <= SYMBOL_RATE_MAX_GBD:
        raise ValueError(
            f"{data_rate_gbps} Gbps on {modulation} needs {rate:.2f} GBd, "
            f"outside [{SYMBOL_RATE_MIN_GBD:g}, {SYMBOL_RATE_MAX_GBD:g}]"
        )
    return rate


def _build_valid_combos() -> tuple[tuple[str, int], ...]:
    out = []
    for mod in MOD_BITS:
        for rate in DATA_RATES_GBPS:
            try:
                symbol_rate_gbd(rate, mod)
            except ValueError:
                continue
            out.append((mod, rate))
    return tuple(out)


VALID_COMBOS = _build_valid_combos()


def launch_power_dbm(rate_gbd: float) -> float:
    """Launch power equalizing power spectral density across symbol rates."""
    return 10.0 * math.log10(rate_gbd / REF_SYMBOL_RATE_GBD)


def dbm_to_w(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def w_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


def slot_footprint(rate_gbd: float) -> int:
    """Number of 12.5 GHz slots a carrier occupies, guard band included."""
    return math.ceil(rate_gbd * GUARD_FACTOR / SLOT_GHZ)


def alpha_per_km(alpha_db_km: float) -> float:
    """Power attenuation coefficient in 1/km from the dB/km figure."""
    return alpha_db_km * math.log(10.0) / 10.0


def effective_length_km(alpha_db_km: float, span_km: float) -> float:
    a = alpha_per_km(alpha_db_km)
    return (1.0 - math.exp(-a * span_km)) / a


def asymptotic_effective_length_km(alpha_db_km: float) -> float:
    return 1.0 / alpha_per_km(alpha_db_km)


@dataclass(frozen=True)
class FiberParams:
    """Homogeneous fiber and amplifier parameters used link-wide."""

    alpha_db_km: float = 0.2
    beta2_ps2_km: float = -21.7
    gamma_per_w_km: float = 1.3
    noise_figure_db: float = 5.0

    def __post_init__(self) -> None:
        if self.alpha_db_km <= 0.0:
            raise ConfigError("alpha_db_km must be positive")
        if self.beta2_ps2_km == 0.0:
            raise ConfigError("beta2_ps2_km must be nonzero")
        if self.gamma_per_w_km <= 0.0:
            raise ConfigError("gamma_per_w_km must be positive")

    @property
    def alpha_per_km(self) -> float:
        return alpha_per_km(self.alpha_db_km)

    @property
    def beta2_s2_km(self) -> float:
        return self.beta2_ps2_km * 1e-24

    def as_dict(self) -> dict:
        return {
            "alpha_db_km": self.alpha_db_km,
            "beta2_ps2_km": self.beta2_ps2_km,
            "gamma_per_w_km": self.gamma_per_w_km,
            "noise_figure_db": self.noise_figure_db,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FiberParams":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown fiber parameter(s): {sorted(bad)}")
        return cls(**raw)


def ase_variance_w(
    fiber: FiberParams, span_km: float, n_spans: int, bandwidth_hz: float
) -> float:
    """Amplifier noise variance over a chain of identical spans.

    Each amplifier exactly compensates its span loss; noise adds linearly.
    """
    gain = 10.0 ** (fiber.alpha_db_km * span_km / 10.0)
    nf = 10.0 ** (fiber.noise_figure_db / 10.0)
    return n_spans * (gain - 1.0) * nf * PLANCK_J_S * REF_FREQ_HZ * bandwidth_hz


@dataclass(frozen=True)
class Channel:
    """A carrier occupying a contiguous run of slots on the flex grid."""

    start_slot: int
    slot_count: int
    modulation: str
    data_rate_gbps: int

    def __post_init__(self) -> None:
        if self.start_slot < 0 or self.slot_count <= 0:
            raise ValueError("channel slots out of range")
        needed = slot_footprint(self.symbol_rate_gbd)
        if self.slot_count < needed:
            raise ValueError(
                f"{self.slot_count} slots cannot hold "
                f"{self.symbol_rate_gbd:.2f} GBd (needs {needed})"
            )

    @property
    def symbol_rate_gbd(self) -> float:
        return symbol_rate_gbd(self.data_rate_gbps, self.modulation)

    @property
    def center_freq_ghz(self) -> float:
        # start and mid-count land on the 6.25 GHz center grid
        return (self.start_slot + self.slot_count / 2.0) * SLOT_GHZ

    @property
    def launch_power_dbm(self) -> float:
        return launch_power_dbm(self.symbol_rate_gbd)

    @property
    def launch_power_w(self) -> float:
        return dbm_to_w(self.launch_power_dbm)

    def as_dict(self) -> dict:
        return {
            "start_slot": self.start_slot,
            "slot_count": self.slot_count,
            "modulation": self.modulation,
            "data_rate_gbps": self.data_rate_gbps,
        }


def make_channel(start_slot: int, modulation: str, data_rate_gbps: int) -> Channel:
    """Channel sized to the exact footprint of its symbol rate."""
    fp = slot_footprint(symbol_rate_gbd(data_rate_gbps, modulation))
    return Channel(start_slot, fp, modulation, data_rate_gbps)


@dataclass(frozen=True)
class LinkConfig:
    """Point-to-point link: identical spans and a set of co-propagating channels."""

    span_km: float
    n_spans: int
    channels: tuple[Channel, ...]
    band_slots: int = BAND_SLOTS

    def __post_init__(self) -> None:
        if self.span_km <= 0.0 or self.n_spans < 1:
            raise ValueError("span_km must be positive and n_spans >= 1")
        ordered = sorted(self.channels, key=lambda c: c.start_slot)
        prev_end = 0
        for ch in ordered:
            if ch.start_slot < prev_end:
                raise ValueError("overlapping channels")
            prev_end = ch.start_slot + ch.slot_count
        if prev_end > self.band_slots:
            raise ValueError("channel beyond band edge")

    @property
    def occupied_slots(self) -> int:
        return sum(c.slot_count for c in self.channels)

    def as_dict(self) -> dict:
        return {
            "span_km": self.span_km,
            "n_spans": self.n_spans,
            "band_slots": self.band_slots,
            "channels": [c.as_dict() for c in self.channels],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LinkConfig":
        chans = tuple(Channel(**c) for c in raw["channels"])
        return cls(
            span_km=raw["span_km"],
            n_spans=raw["n_spans"],
            channels=chans,
            band_slots=raw.get("band_slots", BAND_SLOTS),
        )
