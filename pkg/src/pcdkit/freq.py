"""Frequency-table container shared by the fitting and diagnostic layers.

A FrequencyTable holds observed counts per nonnegative integer value —
the natural shape both of published count-data tables and of aggregated
raw samples.  Fitters consume it as a weighted sample without ever
materializing the individual observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["FrequencyTable", "as_frequency_table"]


@dataclass(frozen=True)
class FrequencyTable:
    """Observed counts per value, with values strictly increasing."""

    values: np.ndarray
    counts: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        counts = np.asarray(self.counts)
        if values.ndim != 1 or counts.ndim != 1 or values.size != counts.size:
            raise ValueError("values and counts must be matching 1-d arrays")
        if values.size == 0:
            raise ValueError("frequency table is empty")
        if not np.issubdtype(values.dtype, np.integer):
            if not np.all(values == np.floor(values)):
                raise ValueError("values must be integers")
            values = values.astype(np.int64)
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.floor(counts)):
                raise ValueError("counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(values < 0):
            raise ValueError("values must be nonnegative")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(np.diff(values) <= 0):
            raise ValueError("values must be strictly increasing")
        total = int(counts.sum())
        if total <= 0:
            raise ValueError("total count must be positive")
        values.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", total)

    @classmethod
    def from_sample(cls, sample) -> "FrequencyTable":
        """Aggregate a raw integer sample into a frequency table."""
        sample = np.asarray(sample)
        if sample.size == 0:
            raise ValueError("sample is empty")
        if not np.issubdtype(sample.dtype, np.integer):
            if not np.all(sample == np.floor(sample)):
                raise ValueError("sample entries must be integers")
            sample = sample.astype(np.int64)
        values, counts = np.unique(sample, return_counts=True)
        return cls(values=values, counts=counts)

    @classmethod
    def from_pairs(cls, pairs) -> "FrequencyTable":
        """Build from an iterable of (value, count) pairs."""
        pairs = list(pairs)
        if not pairs:
            raise ValueError("no (value, count) pairs given")
        values = np.array([p[0] for p in pairs])
        counts = np.array([p[1] for p in pairs])
        return cls(values=values, counts=counts)

    @property
    def entries(self) -> list[tuple[int, int]]:
        return [(int(v), int(c)) for v, c in zip(self.values, self.counts)]

    def mean(self) -> float:
        return float(np.dot(self.values, self.counts) / self.n)

    def raw_moment(self, order: int) -> float:
        return float(np.dot(np.asarray(self.values, dtype=float) ** order,
                            self.counts) / self.n)

    def variance(self) -> float:
        m = self.mean()
        return self.raw_moment(2) - m * m

    def to_sample(self) -> np.ndarray:
        """Expand back to a raw sample (test and sampling convenience)."""
        return np.repeat(self.values, self.counts)


def as_frequency_table(sample) -> FrequencyTable:
    """Normalize raw samples or tables to a FrequencyTable."""
    if isinstance(sample, FrequencyTable):
        return sample
    return FrequencyTable.from_sample(sample)
