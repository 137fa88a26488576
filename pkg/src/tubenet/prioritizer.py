"""Ordering OD requests: urgency classes, profit segments, shuffled sequences.

Requests are grouped by urgency, each group is cut into profit segments whose
spread stays within ``epsilon_v``, and planning sequences are drawn by
permuting requests only inside their segment.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .scenario import ODRequest, Urgency

SATURATION = 2**63 - 1


@dataclass(frozen=True)
class PrioritySpec:
    epsilon_v: float = 1000.0
    K: int = 1
    rng_seed: int = 0
    use_urgency: bool = True

    def __post_init__(self):
        if not self.epsilon_v > 0:
            raise ValueError("epsilon_v must be > 0")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be an integer >= 1")


@dataclass(frozen=True)
class ODSequence:
    ids: tuple[str, ...]
    segments: tuple[tuple[str, ...], ...] = field(repr=False)
    index: int = 0

    @property
    def boundaries(self) -> list[int]:
        """Offsets where each segment starts."""
        out, pos = [], 0
        for seg in self.segments:
            out.append(pos)
            pos += len(seg)
        return out


def group_by_urgency(requests: Iterable[ODRequest]) -> list[list[ODRequest]]:
    groups: list[list[ODRequest]] = [[] for _ in Urgency]
    for r in requests:
        groups[Urgency(r.urgency).rank].append(r)
    return groups


def _sort_key(r: ODRequest):
    return (-r.profit, r.id)


def segment_by_profit(class_list: Iterable[ODRequest], epsilon_v: float) -> list[list[ODRequest]]:
    """Greedy cut of the descending-profit order.

    A segment is anchored at its largest profit; the next request opens a new
    segment once it falls more than ``epsilon_v`` below that anchor.
    """
    segs: list[list[ODRequest]] = []
    for r in sorted(class_list, key=_sort_key):
        if segs and segs[-1][0].profit - r.profit <= epsilon_v:
            segs[-1].append(r)
        else:
            segs.append([r])
    return segs


def count_arrangements(segments: Iterable[Sequence]) -> tuple[int, bool]:
    """Product of segment-size factorials, saturated at 2**63-1.

    Returns ``(count, exact)``; ``exact`` is False when saturation kicked in.
    """
    total = 1
    for seg in segments:
        total *= math.factorial(len(seg))
        if total > SATURATION:
            return SATURATION, False
    return total, True


def build_segments(requests: Sequence[ODRequest], spec: PrioritySpec) -> list[list[ODRequest]]:
    if spec.use_urgency:
        classes = group_by_urgency(requests)
    else:
        classes = [list(requests)]
    out = []
    for cls in classes:
        out.extend(segment_by_profit(cls, spec.epsilon_v))
    return out


def _unrank(rank: int, items: list) -> list:
    """Permutation number ``rank`` (factorial number system) of ``items``."""
    pool = list(items)
    out = []
    for k in range(len(pool), 0, -1):
        f = math.factorial(k - 1)
        i, rank = divmod(rank, f)
        out.append(pool.pop(i))
    return out


def decode_sequence(index: int, segments: Sequence[Sequence[ODRequest]]) -> ODSequence:
    ordered: list[list[ODRequest]] = []
    for seg in segments:
        n = math.factorial(len(seg))
        index, sub = divmod(index, n)
        ordered.append(_unrank(sub, list(seg)))
    ids = tuple(r.id for seg in ordered for r in seg)
    return ODSequence(ids=ids, segments=tuple(tuple(r.id for r in seg) for seg in ordered))


def generate_sequences(requests: Sequence[ODRequest], spec: PrioritySpec) -> list[ODSequence]:
    """``K`` distinct planning sequences (fewer if the structure allows fewer).

    Each sequence is an arrangement number drawn without replacement from
    ``range(S_g)`` and decoded segment by segment, so every arrangement is
    equally likely and the draw is fixed by ``rng_seed``.
    """
    segments = build_segments(requests, spec)
    total, _ = count_arrangements(segments)
    k = min(spec.K, total)
    picks = random.Random(spec.rng_seed).sample(range(total), k)
    out = []
    for idx in picks:
        seq = decode_sequence(idx, segments)
        out.append(ODSequence(ids=seq.ids, segments=seq.segments, index=idx))
    return out
