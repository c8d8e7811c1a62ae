"""Cheating data owners.

Every cheat here first fixes a fake dataset and then follows the protocol
honestly with it.  Any other deviation in the partial-view phase (odd flag
sets, a mismatched inverse permutation) yields a dataset the same way, so
this covers the whole strategy space.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..data import HistogramDataset
from ..errors import ConfigurationError
from ..rng import as_rng

KINDS = ("honest", "modify", "add")


@dataclass(frozen=True)
class CheatStrategy:
    kind: str = "honest"
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown strategy {self.kind!r}")
        if self.kind == "modify" and not 0 <= self.rate <= 1:
            raise ConfigurationError("modifying rate must lie in [0, 1]")
        if self.kind == "add" and self.rate <= 0:
            raise ConfigurationError("adding rate must be positive")

    @classmethod
    def parse(cls, text):
        """'honest', 'modify:0.2' or 'add:0.5'."""
        kind, _, rate = text.partition(":")
        return cls(kind, float(rate) if rate else 0.0)

    def count(self, N):
        """Records replaced (modify) or added (add): floor(rate * N)."""
        return math.floor(Fraction(repr(float(self.rate))) * N)

    def __str__(self):
        return self.kind if self.kind == "honest" else f"{self.kind}:{self.rate:g}"


def _outside(ds, count, rng):
    free = ds.absent
    if count > len(free):
        raise ConfigurationError(
            f"need {count} labels outside the dataset but the domain has only {len(free)}"
        )
    # prefix of a shuffle: with one seed, larger counts extend smaller ones
    return rng.permutation(free)[:count]


def replace_records(ds, count, seed=None):
    """Swap ``count`` random records for labels outside the dataset; size stays N."""
    rng = as_rng(seed)
    dropped = rng.permutation(ds.labels)[:count]
    added = _outside(ds, count, rng)
    ind = ds.indicator.copy()
    ind[dropped] = 0
    ind[added] = 1
    return HistogramDataset(ind, ds.domain)


def add_records(ds, count, seed=None):
    rng = as_rng(seed)
    ind = ds.indicator.copy()
    ind[_outside(ds, count, rng)] = 1
    return HistogramDataset(ind, ds.domain)


def fake_dataset(ds, strategy, seed=None):
    if strategy.kind == "honest":
        return ds
    count = strategy.count(ds.N)
    if strategy.kind == "modify":
        return replace_records(ds, count, seed)
    return add_records(ds, count, seed)


def keep_true(ds, n, seed=None):
    """Same-size dataset holding only n of the true records."""
    if not 0 <= n <= ds.N:
        raise ConfigurationError(f"n={n} must lie in [0, N={ds.N}]")
    return replace_records(ds, ds.N - n, seed)
