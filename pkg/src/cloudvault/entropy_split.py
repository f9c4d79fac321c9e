"""Content-aware chunk planning that starves each stored piece of information.

A chunk that statistically resembles the whole file is a good approximation
of it; a chunk that diverges from it is a bad one. Splitting therefore
maximizes, over all block-aligned C-way splits, the smallest divergence
between the file's byte distribution and any single chunk's, so even the
best-looking chunk an attacker can grab approximates the file as poorly as
possible. The search is a dynamic program over (block position, chunks used)
with max-min composition and is exact: it returns the same objective as
brute-force enumeration of every admissible split.

Distribution planning scatters the chunks round-robin over a seed-shuffled
node order and draws the true chunk sequence as a uniform random permutation.
The permutation never leaves the local machine; an attacker who captures the
full storage set still faces all chunk_count! orderings.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


class EntropySplitError(Exception):
    pass


class EmptyInput(EntropySplitError):
    """A byte distribution with zero total has no probabilities."""


class InfeasibleSplit(EntropySplitError):
    """Requested chunk count cannot be cut from the file at this granularity."""


class NoNodes(EntropySplitError):
    """Distribution planning needs at least one storage node."""


DEFAULT_BLOCK_SIZE = 4096


@dataclass(frozen=True)
class ByteDistribution:
    """Histogram over the 256 byte values."""

    counts: tuple[int, ...]
    total: int

    @classmethod
    def from_bytes(cls, data: bytes) -> "ByteDistribution":
        counts = [0] * 256
        for b in data:
            counts[b] += 1
        return cls(counts=tuple(counts), total=len(data))

    def smoothed(self) -> tuple[float, ...]:
        """Add-one smoothed probabilities; defined even for unseen symbols."""
        if self.total == 0:
            raise EmptyInput("empty distribution")
        denom = self.total + 256
        return tuple((c + 1) / denom for c in self.counts)


def relative_entropy(file_dist: ByteDistribution, chunk_dist: ByteDistribution) -> float:
    """D(P_file || P_chunk) in nats, both sides add-one smoothed.

    This is the information lost when the chunk's byte statistics stand in
    for the file's. Always finite thanks to smoothing, and zero exactly when
    the two histograms coincide.
    """
    pf = file_dist.smoothed()
    pc = chunk_dist.smoothed()
    return sum(p * math.log(p / q) for p, q in zip(pf, pc))


class SplitMode(enum.Enum):
    ENTROPY_DP = "entropy-dp"
    FIXED_SIZE = "fixed-size"


@dataclass(frozen=True)
class SplitPlan:
    """Where to cut, how many chunks, and the achieved max-min divergence."""

    cut_points: tuple[int, ...]
    chunk_count: int
    objective: float
    mode: SplitMode

    def chunks(self, data: bytes) -> list[bytes]:
        """Cut ``data`` per the plan. Chunks cover the input exactly."""
        bounds = [0, *self.cut_points, len(data)]
        out = [data[a:b] for a, b in zip(bounds, bounds[1:])]
        assert b"".join(out) == data
        return out


def block_boundaries(length: int, block_size: int) -> list[int]:
    """Admissible cut positions: multiples of block_size, plus both ends."""
    if block_size < 1:
        raise ValueError("block size must be positive")
    bounds = list(range(0, length, block_size))
    bounds.append(length)
    return bounds


def pairwise_chunk_divergence(data: bytes, block_size: int) -> np.ndarray:
    """Divergence of every block-aligned chunk from the whole file.

    Entry [a, b] is relative_entropy(file, data[bounds[a]:bounds[b]]) for
    a < b over the boundary list of ``block_boundaries``; the lower triangle
    is NaN. plan_split maximizes over exactly this table, so an enumeration
    that reads the same table reproduces its objective bit for bit.
    """
    if not data:
        raise EmptyInput("empty input")
    bounds = block_boundaries(len(data), block_size)
    nb = len(bounds) - 1
    arr = np.frombuffer(data, dtype=np.uint8)
    hist = np.zeros((nb, 256), dtype=np.int64)
    for i in range(nb):
        hist[i] = np.bincount(arr[bounds[i] : bounds[i + 1]], minlength=256)
    prefix = np.zeros((nb + 1, 256), dtype=np.int64)
    np.cumsum(hist, axis=0, out=prefix[1:])

    seg = prefix[None, :, :] - prefix[:, None, :]
    valid = np.tri(nb + 1, nb + 1, -1, dtype=bool).T  # b > a
    seg = np.where(valid[:, :, None], seg, 0)
    totals = seg.sum(axis=2)

    pf = (prefix[nb] + 1) / (len(data) + 256)
    log_pf = np.log(pf)
    pc = (seg + 1) / (totals + 256)[:, :, None]
    kl = (pf[None, None, :] * (log_pf[None, None, :] - np.log(pc))).sum(axis=2)
    kl[~valid] = np.nan
    return kl


def plan_split(data: bytes, chunk_count: int, block_size: int = DEFAULT_BLOCK_SIZE) -> SplitPlan:
    """Choose cut points maximizing the minimum per-chunk divergence.

    Cut points land on multiples of ``block_size``; the final chunk absorbs
    any tail remainder. A single-chunk request is always feasible; for more
    chunks the file must hold at least chunk_count full blocks.

    Raises:
        EmptyInput: no data.
        InfeasibleSplit: chunk_count < 1, or chunk_count * block_size
            exceeds the file length (chunk_count >= 2).
    """
    if not data:
        raise EmptyInput("empty input")
    if chunk_count < 1:
        raise InfeasibleSplit("chunk count must be at least 1")
    if chunk_count == 1:
        dist = ByteDistribution.from_bytes(data)
        return SplitPlan((), 1, relative_entropy(dist, dist), SplitMode.ENTROPY_DP)
    if chunk_count * block_size > len(data):
        raise InfeasibleSplit(
            f"{chunk_count} chunks at block size {block_size} need "
            f"{chunk_count * block_size} bytes, have {len(data)}"
        )

    bounds = block_boundaries(len(data), block_size)
    nb = len(bounds) - 1
    kl = pairwise_chunk_divergence(data, block_size)

    # dp[c][b]: best achievable min-divergence splitting blocks [0, b) into c
    # chunks. Max-min composes monotonically, so the per-cell max over the
    # last cut position is globally optimal.
    neg = float("-inf")
    dp = [[neg] * (nb + 1) for _ in range(chunk_count + 1)]
    parent = [[-1] * (nb + 1) for _ in range(chunk_count + 1)]
    for b in range(1, nb + 1):
        dp[1][b] = float(kl[0, b])
    for c in range(2, chunk_count + 1):
        for b in range(c, nb + 1):
            best, arg = neg, -1
            for a in range(c - 1, b):
                v = min(dp[c - 1][a], float(kl[a, b]))
                if v > best:
                    best, arg = v, a
            dp[c][b] = best
            parent[c][b] = arg

    cuts_blocks = []
    b = nb
    for c in range(chunk_count, 1, -1):
        b = parent[c][b]
        cuts_blocks.append(b)
    cuts_blocks.reverse()
    cut_points = tuple(bounds[i] for i in cuts_blocks)
    return SplitPlan(cut_points, chunk_count, dp[chunk_count][nb], SplitMode.ENTROPY_DP)


def plan_fixed(data: bytes, chunk_count: int) -> SplitPlan:
    """Equal-size split with no content awareness (degenerate mode).

    The first ``len(data) % chunk_count`` chunks take the extra byte. The
    objective is still reported as the min per-chunk divergence so the two
    modes are comparable in reports.
    """
    if not data:
        raise EmptyInput("empty input")
    if not 1 <= chunk_count <= len(data):
        raise InfeasibleSplit(f"cannot cut {len(data)} bytes into {chunk_count} chunks")
    base, extra = divmod(len(data), chunk_count)
    cuts = []
    pos = 0
    for i in range(chunk_count - 1):
        pos += base + (1 if i < extra else 0)
        cuts.append(pos)
    plan = SplitPlan(tuple(cuts), chunk_count, 0.0, SplitMode.FIXED_SIZE)
    fdist = ByteDistribution.from_bytes(data)
    objective = min(
        relative_entropy(fdist, ByteDistribution.from_bytes(c)) for c in plan.chunks(data)
    )
    return SplitPlan(tuple(cuts), chunk_count, objective, SplitMode.FIXED_SIZE)


@dataclass(frozen=True)
class DistributionPlan:
    """Placement of storage slots onto nodes plus the secret true order.

    ``assignment[slot]`` names the (provider, node) that stores slot
    ``slot``. ``sequence_permutation[i]`` is the slot holding the i-th chunk
    of the file in true order; it stays local.
    """

    assignment: tuple[tuple[str, str], ...]
    sequence_permutation: tuple[int, ...]


def draw_permutation(rng: random.Random, count: int) -> tuple[int, ...]:
    perm = list(range(count))
    rng.shuffle(perm)
    return tuple(perm)


def plan_distribution(
    plan: SplitPlan,
    nodes: Sequence[tuple[str, str]],
    rng: random.Random,
) -> DistributionPlan:
    """Assign chunk slots to nodes and draw the sequence secret.

    Nodes are shuffled once with the supplied generator, then slots go
    round-robin over the shuffled order, so every node's load differs by at
    most one slot. The permutation is drawn after the shuffle; with the same
    seed the whole plan is reproducible.

    Raises:
        NoNodes: empty node list.
    """
    if not nodes:
        raise NoNodes("no storage nodes available")
    ring = list(nodes)
    rng.shuffle(ring)
    assignment = tuple(ring[s % len(ring)] for s in range(plan.chunk_count))
    perm = draw_permutation(rng, plan.chunk_count)
    return DistributionPlan(assignment=assignment, sequence_permutation=perm)


def scatter(chunks: Sequence[bytes], permutation: Sequence[int]) -> list[bytes]:
    """Arrange true-order chunks into slot order for storage."""
    if sorted(permutation) != list(range(len(chunks))):
        raise ValueError("not a permutation of the chunk indices")
    slots: list[bytes] = [b""] * len(chunks)
    for i, chunk in enumerate(chunks):
        slots[permutation[i]] = chunk
    return slots


def reassemble(slot_chunks: Sequence[bytes], permutation: Sequence[int]) -> bytes:
    """Inverse of ``scatter``: rebuild the file from slot-ordered chunks."""
    if sorted(permutation) != list(range(len(slot_chunks))):
        raise ValueError("not a permutation of the slot indices")
    return b"".join(slot_chunks[s] for s in permutation)


def recovery_probability(chunk_count: int, known_storage_set: bool = True) -> Fraction:
    """Chance that a single uniformly guessed ordering rebuilds the file.

    An insider who captured the storage set must still name the true
    sequence among chunk_count! candidates, so the success probability is
    exactly 1 / chunk_count!. Without the storage set the attacker also has
    to find the right chunks first, which this model does not quantify; the
    same value is returned as an upper bound.
    """
    if chunk_count < 1:
        raise ValueError("chunk count must be at least 1")
    del known_storage_set  # outsiders do no better than the insider bound
    return Fraction(1, math.factorial(chunk_count))
