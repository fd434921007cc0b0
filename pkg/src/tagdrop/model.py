"""Closed-form reliability model for unslotted backscatter tag networks.

A population of K receiver-less tags shares one channel. Each tag wakes at a
uniformly random instant in every cycle of duration T_cycle and backscatters
one fixed packet; an inventory period T_R contains L such cycles. A tag is
"dropped" when none of its L packets of an inventory period is recovered, and
the tag drop rate (TDR) is the expected fraction of dropped tags.

Two corruption mechanisms are modeled:

* collisions, summarized by the collision zone parameter alpha: two packets
  whose overlap fraction exceeds alpha corrupt each other, so the corrupting
  condition on wakeup instants is |t_i - t_j| < (1 - alpha) * T_p;
* channel noise, a memoryless bit flip probability (BER) applied to the data
  symbols, countered by repeating the tag ID n_rep times inside the packet.

Everything in this module is a pure function of its scalar arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "MAJORITY",
    "ERASURE",
    "DECODERS",
    "PacketSpec",
    "NetworkConfig",
    "OccupancyMetrics",
    "ChannelModel",
    "TdrValue",
    "packet_duration",
    "occupied_bandwidth",
    "occupancies",
    "config_from_occupancy",
    "drop_rate_exact",
    "drop_rate_approx",
    "tdr_exact",
    "tdr_approx_cycle",
    "tdr_approx_slot",
    "approximation_valid",
    "bit_majority_failure",
    "bit_erasure_failure",
    "bit_repetition_failure",
    "packet_error_rate",
    "optimal_cycles",
]

# Decoding rules for the repeated tag ID. "majority" takes a bitwise majority
# vote across the n_rep copies, counting even splits as failures. "erasure"
# models a receiver that can flag corrupted symbols, so a bit is lost only
# when every one of its copies is corrupted.
MAJORITY = "majority"
ERASURE = "erasure"
DECODERS = (MAJORITY, ERASURE)

# A TDR is just a probability; the functions below guarantee values in [0, 1].
TdrValue = float

# Quadratic TDR approximations track the exact expression to within 5 percent
# (relative) only while beta*K*D_cycle stays below this threshold.
APPROX_VALIDITY_LIMIT = 0.35


@dataclass(frozen=True)
class PacketSpec:
    """Geometry and rate of the fixed tag packet.

    The packet is a preamble followed by n_rep repetitions of the tag ID.
    With square-wave load modulation the occupied bandwidth is six times the
    symbol rate.
    """

    n_rep: int
    symbol_rate_baud: float
    preamble_symbols: int = 40
    id_symbols: int = 16

    def __post_init__(self) -> None:
        if self.n_rep < 1:
            raise ValueError(f"n_rep must be >= 1, got {self.n_rep}")
        if self.symbol_rate_baud <= 0:
            raise ValueError(f"symbol_rate_baud must be > 0, got {self.symbol_rate_baud}")
        if self.preamble_symbols < 0:
            raise ValueError("preamble_symbols must be >= 0")
        if self.id_symbols < 1:
            raise ValueError("id_symbols must be >= 1")

    @property
    def total_symbols(self) -> int:
        return self.preamble_symbols + self.id_symbols * self.n_rep

    @property
    def duration_s(self) -> float:
        return packet_duration(self)

    @property
    def bandwidth_hz(self) -> float:
        return occupied_bandwidth(self)


@dataclass(frozen=True)
class NetworkConfig:
    """Population and timing of one network: K tags, L cycles per inventory."""

    k_tags: int
    cycles: int
    inventory_period_s: float
    packet: PacketSpec

    def __post_init__(self) -> None:
        if self.k_tags < 1:
            raise ValueError(f"k_tags must be >= 1, got {self.k_tags}")
        if self.cycles < 1:
            raise ValueError(f"cycles must be >= 1, got {self.cycles}")
        if self.inventory_period_s <= 0:
            raise ValueError("inventory_period_s must be > 0")
        if packet_duration(self.packet) > self.t_cycle_s:
            raise ValueError(
                f"packet duration {packet_duration(self.packet):.6g} s does not fit in "
                f"cycle of {self.t_cycle_s:.6g} s (L={self.cycles}, T_R={self.inventory_period_s:.6g} s)"
            )

    @property
    def t_cycle_s(self) -> float:
        return self.inventory_period_s / self.cycles


@dataclass(frozen=True)
class OccupancyMetrics:
    """Fraction of a cycle, an inventory, and the slot budget a tag occupies.

    d_cycle = T_p / T_cycle, d_inv = T_p / T_R, d_slot = K * d_inv. The three
    satisfy K * d_cycle = L * d_slot.
    """

    d_cycle: float
    d_inv: float
    d_slot: float


@dataclass(frozen=True)
class ChannelModel:
    """Channel abstraction: collision zone parameter and bit error rate."""

    alpha: float
    ber: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.ber <= 0.5:
            raise ValueError(f"ber must be in [0, 0.5], got {self.ber}")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha


def packet_duration(spec: PacketSpec) -> float:
    """Packet duration in seconds: (preamble + id * n_rep) / symbol rate."""
    return (spec.preamble_symbols + spec.id_symbols * spec.n_rep) / spec.symbol_rate_baud


def occupied_bandwidth(spec: PacketSpec) -> float:
    """Occupied bandwidth in hertz for square-wave modulation (6 * R_s)."""
    return 6.0 * spec.symbol_rate_baud


def occupancies(config: NetworkConfig) -> OccupancyMetrics:
    """Cycle, inventory and slot occupancy of one tag.

    All three are derived from the single ratio T_p / T_R so that the
    identity K * d_cycle = L * d_slot survives floating point evaluation.
    """
    d_inv = packet_duration(config.packet) / config.inventory_period_s
    return OccupancyMetrics(
        d_cycle=d_inv * config.cycles,
        d_inv=d_inv,
        d_slot=d_inv * config.k_tags,
    )


def config_from_occupancy(
    k_tags: int,
    cycles: int,
    d_cycle: float,
    n_rep: int = 10,
    symbol_rate_baud: float = 200e3,
    preamble_symbols: int = 40,
    id_symbols: int = 16,
) -> NetworkConfig:
    """Build a config realizing a given cycle occupancy.

    Useful when only the dimensionless operating point (K, L, d_cycle)
    matters: the inventory period is chosen so the packet occupies exactly
    d_cycle of each cycle.
    """
    if not 0.0 < d_cycle <= 1.0:
        raise ValueError(f"d_cycle must be in (0, 1], got {d_cycle}")
    packet = PacketSpec(
        n_rep=n_rep,
        symbol_rate_baud=symbol_rate_baud,
        preamble_symbols=preamble_symbols,
        id_symbols=id_symbols,
    )
    t_r = cycles * packet_duration(packet) / d_cycle
    return NetworkConfig(k_tags=k_tags, cycles=cycles, inventory_period_s=t_r, packet=packet)


def drop_rate_exact(k_tags: int, cycles: int, d_cycle: float, alpha: float) -> TdrValue:
    """Collision-limited TDR: (1 - (1 - beta*d_cycle)^(2(K-1)))^L.

    A packet survives a cycle when no other wakeup lands within
    (1 - alpha) * T_p of its own; with K - 1 independent uniform interferers
    the per-cycle survival is (1 - beta*d_cycle)^(2(K-1)), and a tag drops
    when all L of its packets are corrupted.
    """
    beta = 1.0 - alpha
    survive_cycle = (1.0 - beta * d_cycle) ** (2 * (k_tags - 1))
    return (1.0 - survive_cycle) ** cycles


def drop_rate_approx(cycles: int, occupancy_product: float) -> TdrValue:
    """Quadratic approximation (2x - 2x^2)^L with x = beta*K*d_cycle.

    The raw polynomial leaves [0, 1] outside its validity range, so its value
    is clamped there before the L-th power is taken.
    """
    x = occupancy_product
    inner = 2.0 * x - 2.0 * x * x
    inner = min(max(inner, 0.0), 1.0)
    return inner**cycles


def tdr_exact(config: NetworkConfig, channel: ChannelModel) -> TdrValue:
    """Exact collision-limited TDR of a configured network (BER ignored)."""
    return drop_rate_exact(
        config.k_tags, config.cycles, occupancies(config).d_cycle, channel.alpha
    )


def tdr_approx_cycle(config: NetworkConfig, channel: ChannelModel) -> TdrValue:
    """Large-K approximation of tdr_exact in terms of K and d_cycle.

    Intended for K >> 1; at small populations it overestimates (it is
    positive even for K = 1, where the exact TDR is zero).
    """
    d_cycle = occupancies(config).d_cycle
    return drop_rate_approx(config.cycles, channel.beta * config.k_tags * d_cycle)


def tdr_approx_slot(cycles: int, d_slot: float, alpha: float) -> TdrValue:
    """Slot-occupancy form of the approximation: [2bLD - 2(bLD)^2]^L.

    Identical to tdr_approx_cycle under K * d_cycle = L * d_slot, which makes
    the approximate TDR a function of the slot occupancy alone, independent
    of the number of tags. Meaningful while beta * L * d_slot < 0.5.
    """
    return drop_rate_approx(cycles, (1.0 - alpha) * cycles * d_slot)


def approximation_valid(config: NetworkConfig, channel: ChannelModel) -> bool:
    """True when beta*K*d_cycle is strictly below the 0.35 validity limit."""
    d_cycle = occupancies(config).d_cycle
    return channel.beta * config.k_tags * d_cycle < APPROX_VALIDITY_LIMIT


def bit_majority_failure(n_rep: int, ber: float) -> float:
    """Probability that a bitwise majority vote over n_rep copies is wrong.

    Each copy is flipped independently with probability ber; even splits
    count as failures. Exact binomial tail sum.
    """
    if n_rep < 1:
        raise ValueError(f"n_rep must be >= 1, got {n_rep}")
    if not 0.0 <= ber <= 0.5:
        raise ValueError(f"ber must be in [0, 0.5], got {ber}")
    threshold = (n_rep + 1) // 2  # even n_rep: equals n_rep/2, so ties fail
    return sum(
        math.comb(n_rep, j) * ber**j * (1.0 - ber) ** (n_rep - j)
        for j in range(threshold, n_rep + 1)
    )


def bit_erasure_failure(n_rep: int, ber: float) -> float:
    """Bit loss probability under erasure decoding: all copies corrupted.

    Models a receiver that can tell which symbols were hit (soft decisions,
    erasure flags), so one clean copy recovers the bit: ber ** n_rep.
    """
    if n_rep < 1:
        raise ValueError(f"n_rep must be >= 1, got {n_rep}")
    if not 0.0 <= ber <= 0.5:
        raise ValueError(f"ber must be in [0, 0.5], got {ber}")
    return ber**n_rep


def bit_repetition_failure(n_rep: int, ber: float, decoder: str = MAJORITY) -> float:
    """Per-bit failure probability for the selected decoding rule."""
    if decoder == MAJORITY:
        return bit_majority_failure(n_rep, ber)
    if decoder == ERASURE:
        return bit_erasure_failure(n_rep, ber)
    raise ValueError(f"unknown decoder {decoder!r}, expected one of {DECODERS}")


def packet_error_rate(spec: PacketSpec, ber: float, decoder: str = MAJORITY) -> float:
    """Probability the tag ID cannot be recovered from a collision-free packet.

    The preamble is assumed detected (collision effects are absorbed by the
    collision zone parameter); the packet fails when any of the id_symbols
    bit positions fails after repetition decoding.
    """
    q = bit_repetition_failure(spec.n_rep, ber, decoder)
    return 1.0 - (1.0 - q) ** spec.id_symbols


def optimal_cycles(d_slot: float, alpha: float, l_max: int) -> int:
    """Cycle count in {1..l_max} minimizing the slot-form approximate TDR.

    Ties go to the smaller L (fewer wakeups costs the tags less energy).
    Only meaningful while beta * L * d_slot stays within the approximation's
    range; see tdr_approx_slot.
    """
    if l_max < 1:
        raise ValueError(f"l_max must be >= 1, got {l_max}")
    best_l = 1
    best_tdr = tdr_approx_slot(1, d_slot, alpha)
    for l in range(2, l_max + 1):
        tdr = tdr_approx_slot(l, d_slot, alpha)
        if tdr < best_tdr:
            best_l, best_tdr = l, tdr
    return best_l
