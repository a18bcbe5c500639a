"""Observed-data containers and preprocessing of count tables.

The pipeline is ``load_count_matrix -> filter_features -> to_composition ->
mclr_transform``; the result is an :class:`AbundanceMatrix` whose zeros mark
truncated observations.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DuplicateId,
    EmptyAfterFilter,
    EmptyMatrix,
    InputError,
    NegativeCount,
    ParseFailure,
    ZeroRowSum,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ZERO_FRACTION = 0.9
DEFAULT_MCLR_EPSILON = 1.0
# clr values closer than this (relative) are rounding copies of one real number
_TIE_RTOL = 1e-11


def _check_unique(labels, axis):
    seen = set()
    for lab in labels:
        if lab in seen:
            raise DuplicateId(f"duplicate {axis} id {lab!r}")
        seen.add(lab)


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CountMatrix:
    """Raw nonnegative integer table, samples in rows and features in columns."""

    values: np.ndarray
    sample_ids: tuple
    feature_ids: tuple

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise InputError("count matrix must be two-dimensional")
        n, p = values.shape
        if n < 2 or p < 1:
            raise EmptyMatrix(f"need at least 2 samples and 1 feature, got {n}x{p}")
        if not np.issubdtype(values.dtype, np.integer):
            if not np.all(np.isfinite(values)) or np.any(values != np.round(values)):
                raise InputError("counts must be finite integers")
        if np.any(values < 0):
            i, j = map(int, np.argwhere(values < 0)[0])
            raise NegativeCount(self.sample_ids[i], self.feature_ids[j], i + 2, j + 2)
        object.__setattr__(self, "values", _readonly(values.astype(np.int64)))
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "feature_ids", tuple(str(f) for f in self.feature_ids))
        if len(self.sample_ids) != n or len(self.feature_ids) != p:
            raise InputError("label count does not match matrix shape")
        _check_unique(self.sample_ids, "sample")
        _check_unique(self.feature_ids, "feature")

    @property
    def shape(self):
        return self.values.shape

    def zero_fractions(self) -> np.ndarray:
        return (self.values == 0).mean(axis=0)


@dataclass(frozen=True)
class CompositionMatrix:
    """Row-normalised relative abundances."""

    values: np.ndarray
    row_sums_original: np.ndarray
    sample_ids: tuple = ()
    feature_ids: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InputError("composition must be two-dimensional")
        if np.any(v < 0) or np.any(v > 1):
            raise InputError("composition entries must lie in [0, 1]")
        sums = v.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-12):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise InputError(f"row {bad} does not sum to one")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "row_sums_original", _readonly(np.asarray(self.row_sums_original, dtype=np.int64)))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))


@dataclass(frozen=True)
class AbundanceMatrix:
    """Real-valued observations with zeros marking truncated entries.

    Nonzero entries must be strictly positive so zeros are the column minima.
    """

    values: np.ndarray
    feature_ids: tuple = ()
    sample_ids: tuple = ()
    zero_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InputError("abundance matrix must be two-dimensional")
        if not np.all(np.isfinite(v)):
            raise InputError("abundance matrix contains non-finite values")
        if np.any(v < 0):
            raise InputError("abundance matrix must be nonnegative")
        n, p = v.shape
        fids = tuple(self.feature_ids) or tuple(f"F{j + 1}" for j in range(p))
        sids = tuple(self.sample_ids) or tuple(f"S{i + 1}" for i in range(n))
        if len(fids) != p or len(sids) != n:
            raise InputError("label count does not match matrix shape")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "feature_ids", fids)
        object.__setattr__(self, "sample_ids", sids)
        object.__setattr__(self, "zero_mask", _readonly(v == 0))

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def from_array(cls, values, feature_ids=(), sample_ids=()):
        return cls(np.asarray(values, dtype=float), tuple(feature_ids), tuple(sample_ids))


def _parse_count(cell, row, col):
    text = cell.strip()
    try:
        value = int(text)
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise ParseFailure(f"cannot parse {cell!r} as a count", row, col) from None
        if not math.isfinite(f) or f != int(f):
            raise ParseFailure(f"cannot parse {cell!r} as an integer count", row, col) from None
        value = int(f)
    return value


def load_count_matrix(path, delimiter: str = ",") -> CountMatrix:
    """Read a delimited count table.

    The first row holds feature names and the first column sample ids.
    Errors carry 1-based file coordinates.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise EmptyMatrix(f"{path}: no data rows")
    header = rows[0]
    feature_ids = [h.strip() for h in header[1:]]
    if not feature_ids:
        raise EmptyMatrix(f"{path}: no feature columns")
    sample_ids, data = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseFailure(f"expected {len(header)} fields, found {len(row)}", r)
        sid = row[0].strip()
        values = []
        for c, cell in enumerate(row[1:], start=2):
            v = _parse_count(cell, r, c)
            if v < 0:
                raise NegativeCount(sid, feature_ids[c - 2], r, c)
            values.append(v)
        sample_ids.append(sid)
        data.append(values)
    if len(feature_ids) < 2:
        raise EmptyMatrix(f"{path}: need at least 2 feature columns")
    return CountMatrix(np.array(data, dtype=np.int64), tuple(sample_ids), tuple(feature_ids))


def filter_features(counts: CountMatrix, max_zero_fraction: float = DEFAULT_MAX_ZERO_FRACTION):
    """Keep features whose zero fraction is strictly below the threshold.

    Returns
    -------
    filtered : CountMatrix
    dropped : list of str
        Ids of the removed features, in their original order.
    """
    if not 0.0 <= max_zero_fraction <= 1.0:
        raise InputError("max_zero_fraction must lie in [0, 1]")
    zf = counts.zero_fractions()
    # max_zero_fraction == 1 keeps everything, including all-zero columns
    keep = np.ones(zf.shape, bool) if max_zero_fraction >= 1.0 else zf < max_zero_fraction
    dropped = [f for f, k in zip(counts.feature_ids, keep) if not k]
    if not keep.any():
        raise EmptyAfterFilter(f"all {len(keep)} features have zero fraction >= {max_zero_fraction}")
    if dropped:
        logger.info("dropped %d features: %s", len(dropped), ", ".join(dropped))
    filtered = CountMatrix(
        counts.values[:, keep],
        counts.sample_ids,
        tuple(f for f, k in zip(counts.feature_ids, keep) if k),
    )
    return filtered, dropped


def to_composition(counts: CountMatrix) -> CompositionMatrix:
    totals = counts.values.sum(axis=1)
    if np.any(totals == 0):
        raise ZeroRowSum(counts.sample_ids[int(np.argmax(totals == 0))])
    values = counts.values / totals[:, None]
    # exact renormalisation keeps row sums within rounding of 1
    values = values / values.sum(axis=1, keepdims=True)
    return CompositionMatrix(values, totals, counts.sample_ids, counts.feature_ids)


def mclr_transform(comp: CompositionMatrix, epsilon: float = DEFAULT_MCLR_EPSILON) -> AbundanceMatrix:
    """Modified centred log-ratio: clr over the nonzero entries of each row,
    then one global positive shift so every nonzero output is >= ``epsilon``.
    Zeros stay zero.
    """
    if not epsilon > 0:
        raise InputError("mclr epsilon must be positive")
    v = comp.values
    nz = v > 0
    logs = np.zeros_like(v)
    logs[nz] = np.log(v[nz])
    k = nz.sum(axis=1)
    gmean_log = np.where(k > 0, logs.sum(axis=1) / np.maximum(k, 1), 0.0)
    clr = np.where(nz, logs - gmean_log[:, None], 0.0)
    clr = _snap_column_ties(clr, nz)
    shift = max(0.0, -clr[nz].min()) + epsilon if nz.any() else epsilon
    out = np.where(nz, clr + shift, 0.0)
    return AbundanceMatrix(out, comp.feature_ids, comp.sample_ids)


def _snap_column_ties(clr, nz):
    """Give near-equal nonzero entries of a column one common value.

    Mathematically tied clr values from different rows can come out a few
    ulps apart; left alone, the global shift would merge some of them and
    not others, so the column ranks would depend on ``epsilon``.
    """
    out = clr.copy()
    for j in range(clr.shape[1]):
        rows = np.flatnonzero(nz[:, j])
        if rows.size < 2:
            continue
        col = clr[rows, j]
        order = np.argsort(col, kind="stable")
        s = col[order]
        close = np.diff(s) <= _TIE_RTOL * np.maximum(1.0, np.abs(s[1:]))
        if not close.any():
            continue
        # each run of close neighbours takes the value of its first member
        start = np.concatenate(([True], ~close))
        s = s[np.maximum.accumulate(np.where(start, np.arange(s.size), 0))]
        col[order] = s
        out[rows, j] = col
    return out


def counts_to_abundance(
    counts: CountMatrix,
    epsilon: float = DEFAULT_MCLR_EPSILON,
) -> AbundanceMatrix:
    return mclr_transform(to_composition(counts), epsilon)


def write_count_matrix(counts: CountMatrix, path, delimiter: str = ",") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["id", *counts.feature_ids])
        for sid, row in zip(counts.sample_ids, counts.values):
            w.writerow([sid, *map(int, row)])


def as_count_matrix(values, sample_ids: Sequence[str] | None = None, feature_ids: Sequence[str] | None = None) -> CountMatrix:
    values = np.asarray(values)
    n, p = values.shape
    return CountMatrix(
        values,
        tuple(sample_ids) if sample_ids is not None else tuple(f"S{i + 1}" for i in range(n)),
        tuple(feature_ids) if feature_ids is not None else tuple(f"F{j + 1}" for j in range(p)),
    )
