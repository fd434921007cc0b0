"""Seeded Monte Carlo engine for inventory-period simulation.

Each trial simulates one inventory period: every tag wakes at a uniformly
random instant in each of the L cycles, its packet is corrupted when another
packet lands within (1 - alpha) * T_p of it, and surviving packets then go
through bit-level noise injection and repetition decoding. A tag succeeds
when at least one of its L packets comes through intact.

Reproducibility contract: random streams are derived from the seed with
counter-based keys (one Philox stream per fixed-size trial chunk and
purpose), so results are bit-identical across runs and across any degree of
parallelism. Collision detection sorts wakeups per cycle, O(K log K), which
keeps thousand-tag populations cheap.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import (
    DECODERS,
    MAJORITY,
    ChannelModel,
    NetworkConfig,
    packet_duration,
)

__all__ = [
    "PER_CYCLE",
    "CONTINUOUS_TIMELINE",
    "HARMLESS",
    "ERASED",
    "SimOptions",
    "TdrEstimate",
    "overlap_fraction",
    "simulate_inventory",
    "estimate_tdr",
    "TrialBatch",
]

# Collision scopes: check overlaps only among packets of the same cycle
# (matches the analytic derivation), or on the continuous timeline where
# packets may spill across cycle boundaries.
PER_CYCLE = "per_cycle"
CONTINUOUS_TIMELINE = "continuous_timeline"

# Sub-threshold overlap handling: overlaps of at most alpha either leave the
# packet bits untouched beyond channel noise ("harmless", the default, since
# alpha already aggregates collision damage) or turn the overlapped symbols
# into coin flips ("erased"). In continuous-timeline scope the erased damage
# is taken from the nearest neighbour regardless of tag, a conservative
# simplification for the rare own-packet-adjacent case.
HARMLESS = "harmless"
ERASED = "erased"

_CHUNK = 512  # trials per random-stream chunk; fixed so layouts never shift


@dataclass(frozen=True)
class SimOptions:
    """Knobs of one simulation run."""

    trials: int
    seed: int = 0
    collision_scope: str = PER_CYCLE
    subthreshold_overlap: str = HARMLESS
    decoder: str = MAJORITY

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.collision_scope not in (PER_CYCLE, CONTINUOUS_TIMELINE):
            raise ValueError(f"unknown collision_scope {self.collision_scope!r}")
        if self.subthreshold_overlap not in (HARMLESS, ERASED):
            raise ValueError(f"unknown subthreshold_overlap {self.subthreshold_overlap!r}")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")


@dataclass(frozen=True)
class TdrEstimate:
    """Empirical TDR with its binomial standard error."""

    tdr: float
    trials: int
    dropped_tag_inventories: int
    total_tag_inventories: int
    std_error: float
    seed: int


def overlap_fraction(t_i: float, t_j: float, t_p: float) -> float:
    """Fraction of packet duration two equal-length packets overlap.

    Corruption corresponds to a fraction strictly above alpha, i.e. to
    |t_i - t_j| < (1 - alpha) * t_p; the engine tests the time-domain form
    so the boundary case is decided without a division.
    """
    if t_p <= 0:
        raise ValueError(f"t_p must be > 0, got {t_p}")
    return max(0.0, t_p - abs(t_i - t_j)) / t_p


def _streams(seed: int, chunk_index: int, purpose: int, subkey: int = 0) -> np.random.Generator:
    """Counter-keyed generator: identical regardless of evaluation order."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index, purpose, subkey))
    return np.random.Generator(np.random.Philox(ss))


def _chunk_sizes(trials: int) -> list[int]:
    sizes = [_CHUNK] * (trials // _CHUNK)
    if trials % _CHUNK:
        sizes.append(trials % _CHUNK)
    return sizes


# ---------------------------------------------------------------------------
# collision stage
# ---------------------------------------------------------------------------


def _collisions_per_cycle(wakeups: np.ndarray, window: float, want_overlaps: bool):
    """Corruption mask for per-cycle scope.

    wakeups has shape (n, l, k) in seconds within the cycle. A packet is
    corrupted when its nearest neighbour in the same cycle is strictly
    closer than window = (1 - alpha) * T_p.
    """
    n, l, k = wakeups.shape
    flat = wakeups.reshape(n * l, k)
    order = np.argsort(flat, axis=1)
    srt = np.take_along_axis(flat, order, axis=1)
    gaps = np.diff(srt, axis=1)
    inf = np.full((n * l, 1), np.inf)
    left = np.concatenate([inf, gaps], axis=1)
    right = np.concatenate([gaps, inf], axis=1)
    corrupted_sorted = (left < window) | (right < window)
    corrupted = np.empty_like(corrupted_sorted)
    np.put_along_axis(corrupted, order, corrupted_sorted, axis=1)
    if not want_overlaps:
        return corrupted.reshape(n, l, k), None, None
    # nearest-neighbour gaps on each side, for sub-threshold erasure damage
    left_gap = np.empty_like(flat)
    right_gap = np.empty_like(flat)
    np.put_along_axis(left_gap, order, left, axis=1)
    np.put_along_axis(right_gap, order, right, axis=1)
    return (
        corrupted.reshape(n, l, k),
        left_gap.reshape(n, l, k),
        right_gap.reshape(n, l, k),
    )


def _collisions_timeline(wakeups: np.ndarray, t_cycle: float, window: float, want_overlaps: bool):
    """Corruption mask for continuous-timeline scope.

    Packets live at cycle_index * t_cycle + wakeup and may collide across
    cycle boundaries. A tag's own consecutive packets can sit arbitrarily
    close but do not corrupt each other (a tag transmits serially), so a
    packet is corrupted when its time window holds more packets than its own
    tag accounts for.
    """
    n, l, k = wakeups.shape
    offsets = (np.arange(l) * t_cycle)[None, :, None]
    absolute = wakeups + offsets  # (n, l, k); increasing along axis 1 per tag

    # same-tag packets within the window: only cycle-adjacent ones can be
    same_gaps = np.diff(absolute, axis=1)  # (n, l-1, k)
    prev_same = np.zeros((n, l, k), dtype=np.int64)
    next_same = np.zeros((n, l, k), dtype=np.int64)
    if l > 1:
        prev_same[:, 1:, :] = same_gaps < window
        next_same[:, :-1, :] = same_gaps < window

    flat = absolute.reshape(n, l * k)
    own = (prev_same + next_same).reshape(n, l * k)
    corrupted = np.empty((n, l * k), dtype=bool)
    left_gap = right_gap = None
    if want_overlaps:
        left_gap = np.full((n, l * k), np.inf)
        right_gap = np.full((n, l * k), np.inf)
    for i in range(n):
        row = flat[i]
        order = np.argsort(row)
        srt = row[order]
        lo = np.searchsorted(srt, srt - window, side="right")
        hi = np.searchsorted(srt, srt + window, side="left")
        neighbours = hi - lo - 1
        corrupted_sorted = neighbours > own[i][order]
        corrupted[i][order] = corrupted_sorted
        if want_overlaps:
            gaps = np.diff(srt)
            lg = np.concatenate([[np.inf], gaps])
            rg = np.concatenate([gaps, [np.inf]])
            left_gap[i][order] = lg
            right_gap[i][order] = rg
    corrupted = corrupted.reshape(n, l, k)
    if not want_overlaps:
        return corrupted, None, None
    return corrupted, left_gap.reshape(n, l, k), right_gap.reshape(n, l, k)


# ---------------------------------------------------------------------------
# decode stage
# ---------------------------------------------------------------------------


def _fail_threshold(n_rep: int, decoder: str) -> int:
    # majority: (n+1)//2 flipped copies lose the vote (even splits included);
    # erasure: a bit is lost only when every copy is hit
    return (n_rep + 1) // 2 if decoder == MAJORITY else n_rep


def _decode_survivors(
    rng: np.random.Generator,
    n_packets: int,
    n_rep: int,
    id_symbols: int,
    ber: float,
    decoder: str,
    erased_copies: np.ndarray | None = None,
) -> np.ndarray:
    """Per-packet ID recovery after bit noise and repetition decoding.

    Draws the number of corrupted copies of every bit position and applies
    the decoder's failure threshold. erased_copies, when given, is the
    per-packet count of ID copies whose symbols fell inside a sub-threshold
    overlap; those copies corrupt with probability 1/2 instead of ber.
    """
    if n_packets == 0:
        return np.zeros(0, dtype=bool)
    threshold = _fail_threshold(n_rep, decoder)
    if erased_copies is None or not erased_copies.any():
        if ber == 0.0:
            return np.ones(n_packets, dtype=bool)
        counts = rng.binomial(n_rep, ber, size=(n_packets, id_symbols))
        return ~(counts >= threshold).any(axis=1)
    ok = np.empty(n_packets, dtype=bool)
    for hit in np.unique(erased_copies):
        sel = erased_copies == hit
        m = int(sel.sum())
        clean = n_rep - int(hit)
        counts = np.zeros((m, id_symbols), dtype=np.int64)
        if clean > 0 and ber > 0.0:
            counts += rng.binomial(clean, ber, size=(m, id_symbols))
        if hit > 0:
            counts += rng.binomial(int(hit), 0.5, size=(m, id_symbols))
        ok[sel] = ~(counts >= threshold).any(axis=1)
    return ok


def _erased_copy_counts(
    left_gap: np.ndarray,
    right_gap: np.ndarray,
    t_p: float,
    n_rep: int,
    preamble: int,
    id_symbols: int,
) -> np.ndarray:
    """ID copies touched by sub-threshold overlaps, per packet.

    The overlapped span is mapped onto the symbol layout: a head overlap eats
    the preamble first, a tail overlap eats the last ID copies. The preamble
    itself is assumed still detectable (alpha absorbs preamble loss).
    """
    total = preamble + id_symbols * n_rep
    head = np.clip((t_p - left_gap) / t_p, 0.0, 1.0)
    tail = np.clip((t_p - right_gap) / t_p, 0.0, 1.0)
    head_syms = np.ceil(head * total).astype(np.int64)
    tail_syms = np.ceil(tail * total).astype(np.int64)
    head_copies = np.clip(np.ceil((head_syms - preamble) / id_symbols), 0, n_rep)
    tail_copies = np.clip(np.ceil(tail_syms / id_symbols), 0, n_rep)
    return np.minimum(head_copies + tail_copies, n_rep).astype(np.int64)


# ---------------------------------------------------------------------------
# batched engine
# ---------------------------------------------------------------------------


class TrialBatch:
    """Collision outcomes of a block of trials, reusable across BER values.

    The collision stage depends only on (config, alpha, scope, seed), so a
    design search that walks a BER grid can pay for it once and re-run just
    the decode stage. Decode draws are keyed by (chunk, gamma_index) which
    keeps every estimate independent of evaluation order.
    """

    def __init__(self, config: NetworkConfig, alpha: float, options: SimOptions, workers: int = 1):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {alpha}")
        t_p = packet_duration(config.packet)
        if t_p > config.t_cycle_s:
            raise ValueError("packet does not fit in a cycle")
        self.config = config
        self.alpha = alpha
        self.options = options
        want_overlaps = options.subthreshold_overlap == ERASED
        window = (1.0 - alpha) * t_p
        sizes = _chunk_sizes(options.trials)

        def build(args):
            idx, size = args
            rng = _streams(options.seed, idx, purpose=0)
            wakeups = rng.random((size, config.cycles, config.k_tags)) * config.t_cycle_s
            if config.k_tags == 1:
                corrupted = np.zeros_like(wakeups, dtype=bool)
                lg = rg = None
                if want_overlaps:
                    lg = np.full(wakeups.shape, np.inf)
                    rg = np.full(wakeups.shape, np.inf)
                return corrupted, lg, rg
            if options.collision_scope == PER_CYCLE:
                return _collisions_per_cycle(wakeups, window, want_overlaps)
            return _collisions_timeline(wakeups, config.t_cycle_s, window, want_overlaps)

        jobs = list(enumerate(sizes))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(build, jobs))
        else:
            results = [build(j) for j in jobs]
        self._corrupted = [r[0] for r in results]
        self._left_gap = [r[1] for r in results]
        self._right_gap = [r[2] for r in results]
        self._t_p = t_p

    def estimate(
        self,
        ber: float,
        trials: int | None = None,
        gamma_index: int = 0,
        workers: int = 1,
    ) -> TdrEstimate:
        """Empirical TDR at the given BER over the first `trials` trials."""
        cfg, opts = self.config, self.options
        total_trials = opts.trials if trials is None else trials
        if not 1 <= total_trials <= opts.trials:
            raise ValueError("trials outside the simulated batch")
        spec = cfg.packet
        remaining = total_trials
        dropped = 0

        def run(args):
            idx, corrupted, left_gap, right_gap, size = args
            survivors = ~corrupted[:size]
            erased_all = None
            if opts.subthreshold_overlap == ERASED:
                erased_all = _erased_copy_counts(
                    left_gap[:size],
                    right_gap[:size],
                    self._t_p,
                    spec.n_rep,
                    spec.preamble_symbols,
                    spec.id_symbols,
                )
            if ber == 0.0 and erased_all is None:
                # noiseless channel decodes every collision-free packet
                return size * cfg.k_tags - int(survivors.any(axis=1).sum())
            rng = _streams(opts.seed, idx, purpose=1, subkey=gamma_index)
            # a tag needs one good packet, so decode cycle by cycle and drop
            # tags from the working set once they succeed
            pending = np.ones((size, cfg.k_tags), dtype=bool)
            for c in range(cfg.cycles):
                cand = survivors[:, c, :] & pending
                flat = np.flatnonzero(cand.reshape(-1))
                if flat.size == 0:
                    continue
                erased = None
                if erased_all is not None:
                    erased = erased_all[:, c, :].reshape(-1)[flat]
                decode_ok = _decode_survivors(
                    rng, flat.size, spec.n_rep, spec.id_symbols, ber, opts.decoder, erased
                )
                pending.reshape(-1)[flat[decode_ok]] = False
            return int(pending.sum())

        jobs = []
        for idx, corrupted in enumerate(self._corrupted):
            if remaining <= 0:
                break
            size = min(corrupted.shape[0], remaining)
            jobs.append((idx, corrupted, self._left_gap[idx], self._right_gap[idx], size))
            remaining -= size
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                dropped = sum(pool.map(run, jobs))
        else:
            dropped = sum(run(j) for j in jobs)

        total = total_trials * cfg.k_tags
        tdr = dropped / total
        return TdrEstimate(
            tdr=tdr,
            trials=total_trials,
            dropped_tag_inventories=dropped,
            total_tag_inventories=total,
            std_error=math.sqrt(tdr * (1.0 - tdr) / total),
            seed=opts.seed,
        )


def simulate_inventory(
    config: NetworkConfig,
    channel: ChannelModel,
    options: SimOptions,
    stream: np.random.Generator,
) -> np.ndarray:
    """One inventory period; returns a boolean success flag per tag.

    Draws wakeups for all L cycles from the given stream, applies pairwise
    collision corruption and then bit-level decoding of the survivors. Used
    directly for fine-grained tests; estimate_tdr runs the same kernels in
    chunked form.
    """
    t_p = packet_duration(config.packet)
    if t_p > config.t_cycle_s:
        raise ValueError("packet does not fit in a cycle")
    want_overlaps = options.subthreshold_overlap == ERASED
    window = channel.beta * t_p
    wakeups = stream.random((1, config.cycles, config.k_tags)) * config.t_cycle_s
    if config.k_tags == 1:
        corrupted = np.zeros_like(wakeups, dtype=bool)
        left_gap = right_gap = np.full(wakeups.shape, np.inf) if want_overlaps else None
    elif options.collision_scope == PER_CYCLE:
        corrupted, left_gap, right_gap = _collisions_per_cycle(wakeups, window, want_overlaps)
    else:
        corrupted, left_gap, right_gap = _collisions_timeline(
            wakeups, config.t_cycle_s, window, want_overlaps
        )
    spec = config.packet
    flat_ok = ~corrupted.reshape(-1)
    erased = None
    if want_overlaps:
        counts = _erased_copy_counts(
            left_gap.reshape(-1),
            right_gap.reshape(-1),
            t_p,
            spec.n_rep,
            spec.preamble_symbols,
            spec.id_symbols,
        )
        erased = counts[flat_ok]
    decode_ok = _decode_survivors(
        stream, int(flat_ok.sum()), spec.n_rep, spec.id_symbols, channel.ber, options.decoder, erased
    )
    packet_ok = np.zeros(flat_ok.shape, dtype=bool)
    packet_ok[flat_ok] = decode_ok
    return packet_ok.reshape(config.cycles, config.k_tags).any(axis=0)


def estimate_tdr(
    config: NetworkConfig,
    channel: ChannelModel,
    options: SimOptions,
    workers: int = 1,
) -> TdrEstimate:
    """Monte Carlo TDR over options.trials independent inventory periods.

    Deterministic for a fixed seed, independent of chunking or worker count.
    """
    batch = TrialBatch(config, channel.alpha, options, workers=workers)
    return batch.estimate(channel.ber, workers=workers)
