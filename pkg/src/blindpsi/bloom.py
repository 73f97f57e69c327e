"""Bloom-filter set encoding, index dictionaries and the classical AND oracle."""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


def k_opt(M: int, N: int) -> int:
    """Optimal hash count ``max(1, floor(M/N * ln 2))``."""
    if M < 1 or N < 1:
        raise ValueError(f"M and N must be positive, got M={M}, N={N}")
    if M < N:
        raise ValueError(f"filter size M={M} smaller than item count N={N}")
    return max(1, math.floor(M / N * math.log(2)))


def false_positive_rate(M: int, N: int, K: int) -> float:
    """Standard estimate ``(1 - e^{-KN/M})^K`` for one non-member query."""
    return (1.0 - math.exp(-K * N / M)) ** K


def _as_bytes(item) -> bytes:
    return item if isinstance(item, bytes) else str(item).encode("utf-8")


@dataclass(frozen=True)
class BloomParams:
    """Shared filter configuration both clients must agree on."""

    M: int
    K: int
    hash_seed: int

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ValueError(f"need M >= 1 and K >= 1, got M={self.M}, K={self.K}")
        if not 0 <= self.hash_seed < 2**64:
            raise ValueError("hash_seed must fit in 64 bits")

    @classmethod
    def for_protocol(cls, lam: int, m: int, hash_seed: int) -> "BloomParams":
        M = lam * m
        return cls(M=M, K=k_opt(M, m), hash_seed=hash_seed)


def indices(params: BloomParams, item) -> list[int]:
    """Double-hashing family ``h_i = (h1 + i*h2) mod M`` for ``i < K``.

    ``h1``/``h2`` are the two little-endian 64-bit halves of a BLAKE2b digest
    keyed by the hash seed; ``h2`` is forced odd.
    """
    digest = hashlib.blake2b(
        _as_bytes(item), digest_size=16, key=params.hash_seed.to_bytes(8, "little")
    ).digest()
    h1 = int.from_bytes(digest[:8], "little")
    h2 = int.from_bytes(digest[8:], "little") | 1
    return [(h1 + i * h2) % params.M for i in range(params.K)]


@dataclass
class BloomFilter:
    params: BloomParams
    bits: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bits is None:
            self.bits = np.zeros(self.params.M, dtype=np.uint8)
        elif len(self.bits) != self.params.M:
            raise ValueError("bit vector length differs from M")

    @classmethod
    def from_items(cls, params: BloomParams, items: Iterable) -> "BloomFilter":
        bf = cls(params)
        for x in items:
            bf.insert(x)
        return bf

    def insert(self, item) -> "BloomFilter":
        self.bits[indices(self.params, item)] = 1
        return self

    def contains(self, item) -> bool:
        return bool(np.all(self.bits[indices(self.params, item)]))

    __contains__ = contains


class ItemDictionary:
    """Maps the sorted index tuple of an item back to the item(s)."""

    def __init__(self, params: BloomParams, items: Iterable = ()):
        self.params = params
        self._table: dict[tuple, list] = defaultdict(list)
        for x in items:
            self.add(x)

    def add(self, item) -> None:
        key = tuple(sorted(indices(self.params, item)))
        if item not in self._table[key]:
            self._table[key].append(item)

    def lookup(self, idx: Iterable[int]) -> list:
        return list(self._table.get(tuple(sorted(idx)), ()))

    def items_matching(self, bits: np.ndarray) -> set:
        """Items whose every index is set in ``bits``."""
        bits = np.asarray(bits)
        found = set()
        for key, items in self._table.items():
            if all(bits[i] for i in key):
                found.update(items)
        return found

    def __len__(self) -> int:
        return sum(len(v) for v in self._table.values())


def intersect_classical(fa: BloomFilter, fb: BloomFilter, da: ItemDictionary,
                        items_a: Iterable | None = None) -> set:
    """Reference result: items of A whose indices are all set in ``fa AND fb``."""
    if fa.params != fb.params or da.params != fa.params:
        raise ValueError("filters and dictionary must share (M, K, hash_seed)")
    anded = fa.bits & fb.bits
    found = da.items_matching(anded)
    if items_a is not None:
        found &= set(items_a)
    return found


def read_set_file(path) -> list[str]:
    """One item per line, UTF-8; only the trailing newline is stripped."""
    text = Path(path).read_bytes().decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    seen, items = set(), []
    for line in lines:
        if line not in seen:
            seen.add(line)
            items.append(line)
    return items
