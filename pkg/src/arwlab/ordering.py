"""Order policies: which pending unit of work acts next.

A unit is a hashable, orderable token (a site for ARW particles, a
``(site, kind)`` pair for network messages). Policies only decide the order;
by the abelian property the final outcome does not depend on it.
"""

from __future__ import annotations

import heapq
from collections import Counter, deque

import numpy as np


class Policy:
    name = "base"

    def push(self, token) -> None:
        raise NotImplementedError

    def pop(self):
        raise NotImplementedError

    def __len__(self) -> int:
        raise NotImplementedError


class FIFO(Policy):
    """First in, first out by activation event."""

    name = "fifo"

    def __init__(self):
        self._q = deque()

    def push(self, token):
        self._q.append(token)

    def pop(self):
        return self._q.popleft()

    def __len__(self):
        return len(self._q)


class UniformRandom(Policy):
    """Uniformly random pending unit (the i.i.d. particle-index sequence)."""

    name = "random"

    def __init__(self, seed: int = 0):
        self._items = []
        self._rng = np.random.default_rng(seed)
        self._buf = np.empty(0)
        self._pos = 0

    def _u(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.random(256)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def push(self, token):
        self._items.append(token)

    def pop(self):
        i = int(self._u() * len(self._items))
        items = self._items
        items[i], items[-1] = items[-1], items[i]
        return items.pop()

    def __len__(self):
        return len(self._items)


class Sweep(Policy):
    """Smallest pending token first (lexicographic site sweep)."""

    name = "sweep"

    def __init__(self):
        self._heap = []
        self._count = Counter()
        self._n = 0

    def push(self, token):
        if self._count[token] == 0:
            heapq.heappush(self._heap, token)
        self._count[token] += 1
        self._n += 1

    def pop(self):
        token = self._heap[0]
        self._count[token] -= 1
        if self._count[token] == 0:
            heapq.heappop(self._heap)
            del self._count[token]
        self._n -= 1
        return token

    def __len__(self):
        return self._n


class MaxLoad(Policy):
    """Adversarial: the token with the most pending units first, ties to the smallest."""

    name = "maxload"

    def __init__(self):
        self._count = Counter()
        self._n = 0

    def push(self, token):
        self._count[token] += 1
        self._n += 1

    def pop(self):
        token = min(self._count, key=lambda t: (-self._count[t], t))
        self._count[token] -= 1
        if self._count[token] == 0:
            del self._count[token]
        self._n -= 1
        return token

    def __len__(self):
        return self._n


POLICIES = {"fifo": FIFO, "random": UniformRandom, "sweep": Sweep, "maxload": MaxLoad}


def make_policy(name: str | Policy, seed: int = 0) -> Policy:
    if isinstance(name, Policy):
        return name
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown order policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(seed) if cls is UniformRandom else cls()
