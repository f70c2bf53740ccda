"""Coded categorical data: schemas, datasets, structural-zero patterns.

Cells are stored as integer level codes in an ``(n, p)`` array with
``MISSING = -1``.  Level codes follow the lexicographic order of the level
labels, so code 0 is always the alphabetically first label (this is also the
reference level used by the GLM fitters).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ContractViolation,
    DegenerateTruthError,
    FormatError,
    SchemaError,
)

MISSING = -1
WILDCARD = -1

# Above this many cells the structural-zero lookup table is not built.
_MAX_LOOKUP_CELLS = 1 << 22


@dataclass(frozen=True)
class Schema:
    """Ordered variables, each with an ordered tuple of level labels."""

    variables: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        variables = tuple((str(name), tuple(str(l) for l in levels))
                          for name, levels in self.variables)
        object.__setattr__(self, "variables", variables)
        if not variables:
            raise SchemaError("schema has no variables")
        names = [name for name, _ in variables]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate variable names: {dup}")
        for name, levels in variables:
            if len(levels) < 2:
                raise SchemaError(
                    f"variable {name!r} has {len(levels)} level(s); at least 2 "
                    "are required (supply a schema sidecar to declare unseen levels)")
            if any(l == "" for l in levels):
                raise SchemaError(f"variable {name!r} has an empty level label")
            if len(set(levels)) != len(levels):
                raise SchemaError(f"variable {name!r} has duplicate levels")

    @classmethod
    def from_levels(cls, mapping: dict[str, Iterable[str]] | Sequence[tuple[str, Iterable[str]]],
                    sort: bool = True) -> "Schema":
        items = mapping.items() if isinstance(mapping, dict) else mapping
        return cls(tuple((name, tuple(sorted(set(levels))) if sort else tuple(levels))
                         for name, levels in items))

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.variables]

    @property
    def levels(self) -> list[tuple[str, ...]]:
        return [levels for _, levels in self.variables]

    @property
    def p(self) -> int:
        return len(self.variables)

    @property
    def d(self) -> np.ndarray:
        return np.array([len(levels) for _, levels in self.variables], dtype=np.int64)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def code(self, name: str, label: str) -> int:
        levels = self.levels[self.index(name)]
        try:
            return levels.index(label)
        except ValueError:
            raise SchemaError(f"unknown level {label!r} for variable {name!r}") from None

    def subset(self, names: Sequence[str]) -> "Schema":
        return Schema(tuple(self.variables[self.index(n)] for n in names))

    def to_json(self) -> dict:
        return {"variables": [{"name": n, "levels": list(l)} for n, l in self.variables]}

    @classmethod
    def from_json(cls, obj: dict) -> "Schema":
        try:
            return cls(tuple((v["name"], tuple(v["levels"])) for v in obj["variables"]))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from None


def load_schema(path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return Schema.from_json(json.load(fh))


def dump_schema(schema: Schema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    """An ``(n, p)`` table of level codes bound to a schema.

    ``codes`` is copied on construction and made read-only.
    """

    schema: Schema
    codes: np.ndarray

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.int64, copy=True)
        if codes.ndim == 1 and codes.size == 0:
            codes = codes.reshape(0, self.schema.p)
        if codes.ndim != 2 or codes.shape[1] != self.schema.p:
            raise FormatError(
                f"codes must have shape (n, {self.schema.p}); got {codes.shape}")
        d = self.schema.d
        bad = (codes < MISSING) | (codes >= d[None, :])
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise SchemaError(
                f"invalid code {codes[i, j]} at row {i}, variable {self.schema.names[j]!r}")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def p(self) -> int:
        return self.schema.p

    @property
    def missing(self) -> np.ndarray:
        return self.codes == MISSING

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def labels(self, missing_token: str | None = None) -> list[list[str | None]]:
        """Decode to labels; missing cells become ``missing_token``."""
        levels = self.schema.levels
        return [[missing_token if c == MISSING else levels[j][c] for j, c in enumerate(row)]
                for row in self.codes.tolist()]

    @classmethod
    def from_labels(cls, schema: Schema, rows: Iterable[Sequence[str | None]],
                    missing_token: str | None = None) -> "CategoricalDataset":
        lookup = [{lab: k for k, lab in enumerate(levels)} for levels in schema.levels]
        codes = []
        for i, row in enumerate(rows):
            if len(row) != schema.p:
                raise FormatError(f"row {i} has {len(row)} fields, expected {schema.p}")
            coded = []
            for j, value in enumerate(row):
                if value is None or value == missing_token or value == "":
                    coded.append(MISSING)
                    continue
                try:
                    coded.append(lookup[j][value])
                except KeyError:
                    raise SchemaError(f"row {i}: unknown level {value!r} for variable "
                                      f"{schema.names[j]!r}") from None
            codes.append(coded)
        return cls(schema, np.array(codes, dtype=np.int64).reshape(len(codes), schema.p))

    def with_codes(self, codes: np.ndarray) -> "CategoricalDataset":
        return CategoricalDataset(self.schema, codes)

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.schema.index(name)]

    def equals(self, other: "CategoricalDataset") -> bool:
        return self.schema == other.schema and np.array_equal(self.codes, other.codes)


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file (no header row)") from None
        rows = []
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"{path}: data row {i} has {len(row)} fields, header has {len(header)}")
            rows.append(row)
    return header, rows


def load_csv(path, missing_token: str = "NA", schema: Schema | None = None) -> CategoricalDataset:
    """Read a categorical CSV file.

    Without ``schema`` the levels of each column are the observed labels in
    lexicographic order.  With ``schema`` the header must list the schema's
    variables in order and every label must be a declared level.
    """
    header, rows = _read_rows(path)
    if schema is None:
        observed: dict[str, set[str]] = {name: set() for name in header}
        if len(observed) != len(header):
            raise SchemaError(f"{path}: duplicate column names in header")
        for row in rows:
            for name, value in zip(header, row):
                if value != missing_token and value != "":
                    observed[name].add(value)
        for name, levels in observed.items():
            if not levels:
                raise SchemaError(f"{path}: column {name!r} has no observed levels")
        schema = Schema.from_levels([(name, observed[name]) for name in header])
    elif header != schema.names:
        raise FormatError(f"{path}: header {header} does not match schema order {schema.names}")
    return CategoricalDataset.from_labels(schema, rows, missing_token)


def write_csv(data: CategoricalDataset, path, missing_token: str = "NA") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(data.schema.names)
        writer.writerows(data.labels(missing_token))


def union_schema(paths: Sequence, missing_token: str = "NA") -> Schema:
    """Infer one schema covering several CSV files with identical headers."""
    header0 = None
    observed: dict[str, set[str]] = {}
    for path in paths:
        header, rows = _read_rows(path)
        if header0 is None:
            header0 = header
            observed = {name: set() for name in header}
        elif header != header0:
            raise SchemaError(f"{path}: header {header} differs from {header0}")
        for row in rows:
            for name, value in zip(header, row):
                if value != missing_token and value != "":
                    observed[name].add(value)
    if header0 is None:
        raise SchemaError("no input files")
    for name, levels in observed.items():
        if not levels:
            raise SchemaError(f"column {name!r} has no observed levels in any input")
    return Schema.from_levels([(name, observed[name]) for name in header0])


@dataclass(frozen=True, eq=False)
class DisallowedPatternSet:
    """Structural-zero patterns: fixed level codes plus ``WILDCARD`` entries."""

    schema: Schema
    patterns: np.ndarray
    _mask: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        pats = np.array(self.patterns, dtype=np.int64, copy=True).reshape(-1, self.schema.p)
        d = self.schema.d
        if ((pats < WILDCARD) | (pats >= d[None, :])).any():
            raise SchemaError("pattern entry out of range for schema")
        allwild = (pats == WILDCARD).all(axis=1)
        if allwild.any():
            raise SchemaError(
                f"pattern {int(np.flatnonzero(allwild)[0])} has no fixed entries")
        pats.setflags(write=False)
        object.__setattr__(self, "patterns", pats)
        if int(np.prod(d, dtype=np.float64)) <= _MAX_LOOKUP_CELLS:
            object.__setattr__(self, "_mask", self._build_mask())

    def __len__(self) -> int:
        return self.patterns.shape[0]

    def _build_mask(self) -> np.ndarray:
        d = tuple(int(x) for x in self.schema.d)
        mask = np.zeros(d, dtype=bool)
        for pat in self.patterns:
            mask[tuple(slice(None) if c == WILDCARD else int(c) for c in pat)] = True
        return mask.ravel()

    @property
    def cell_mask(self) -> np.ndarray | None:
        """Flat boolean table over all cells (C order), or None if too large."""
        return self._mask

    def matches(self, records: np.ndarray) -> np.ndarray:
        """Vectorized membership test for complete records of shape ``(n, p)``."""
        records = np.asarray(records, dtype=np.int64)
        if records.ndim == 1:
            records = records[None, :]
        if len(self) == 0 or records.shape[0] == 0:
            return np.zeros(records.shape[0], dtype=bool)
        if self._mask is not None:
            flat = np.ravel_multi_index(records.T, tuple(int(x) for x in self.schema.d))
            return self._mask[flat]
        pats = self.patterns
        hit = (records[:, None, :] == pats[None, :, :]) | (pats[None, :, :] == WILDCARD)
        return hit.all(axis=2).any(axis=1)


def empty_mcz(schema: Schema) -> DisallowedPatternSet:
    return DisallowedPatternSet(schema, np.zeros((0, schema.p), dtype=np.int64))


def load_mcz(path, schema: Schema, placeholder_token: str = "NA") -> DisallowedPatternSet:
    header, rows = _read_rows(path)
    if header != schema.names:
        raise FormatError(
            f"{path}: MCZ columns {header} must match the data's variable order {schema.names}")
    patterns = []
    for i, row in enumerate(rows):
        pat = []
        for j, value in enumerate(row):
            if value == placeholder_token or value == "":
                pat.append(WILDCARD)
                continue
            levels = schema.levels[j]
            if value not in levels:
                raise SchemaError(f"{path}: row {i}, column {header[j]!r}: "
                                  f"unknown level {value!r}")
            pat.append(levels.index(value))
        if all(c == WILDCARD for c in pat):
            raise SchemaError(f"{path}: row {i} is all placeholders")
        patterns.append(pat)
    return DisallowedPatternSet(schema, np.array(patterns, dtype=np.int64).reshape(-1, schema.p))


def write_mcz(mcz: DisallowedPatternSet, path, placeholder_token: str = "NA") -> None:
    levels = mcz.schema.levels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(mcz.schema.names)
        for pat in mcz.patterns.tolist():
            writer.writerow([placeholder_token if c == WILDCARD else levels[j][c]
                             for j, c in enumerate(pat)])


def matches_mcz(record: Sequence[int], mcz: DisallowedPatternSet) -> bool:
    """True iff some pattern agrees with ``record`` on all its fixed entries."""
    record = np.asarray(record, dtype=np.int64)
    if (record == MISSING).any():
        raise ContractViolation("matches_mcz needs a complete record (found MISSING)")
    return bool(mcz.matches(record[None, :])[0])


def inject_mcar(data: CategoricalDataset, rate: float, seed: int) -> CategoricalDataset:
    """Independently blank each cell with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ContractViolation(f"MCAR rate must lie in [0, 1], got {rate}")
    rng = np.random.default_rng(seed)
    hole = rng.random(data.codes.shape) < rate
    codes = data.codes.copy()
    codes[hole] = MISSING
    return data.with_codes(codes)


@dataclass(frozen=True, eq=False)
class MixtureTruth:
    """A finite latent class model used to generate test data.

    ``component_pmfs[k][j]`` is the pmf of variable ``j`` in class ``k``.
    """

    weights: np.ndarray
    component_pmfs: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0 or (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ContractViolation("weights must be a probability vector")
        comps = tuple(tuple(np.asarray(v, dtype=np.float64) for v in comp)
                      for comp in self.component_pmfs)
        if len(comps) != w.size:
            raise ContractViolation("one component per weight is required")
        p = len(comps[0])
        for comp in comps:
            if len(comp) != p:
                raise ContractViolation("components disagree on the number of variables")
            for j, v in enumerate(comp):
                if v.size != comps[0][j].size or (v < 0).any() or abs(v.sum() - 1.0) > 1e-12:
                    raise ContractViolation(f"component pmf for variable {j} is invalid")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "component_pmfs", comps)

    @property
    def n_classes(self) -> int:
        return self.weights.size

    @property
    def theta(self) -> list[np.ndarray]:
        """Per-variable ``(K, d_j)`` arrays."""
        p = len(self.component_pmfs[0])
        return [np.stack([comp[j] for comp in self.component_pmfs]) for j in range(p)]

    def check_schema(self, schema: Schema) -> None:
        d = [v.size for v in self.component_pmfs[0]]
        if d != schema.d.tolist():
            raise ContractViolation(f"truth level counts {d} do not match schema {schema.d.tolist()}")

    def to_json(self, schema: Schema | None = None) -> dict:
        out = {"weights": self.weights.tolist(),
               "components": [[v.tolist() for v in comp] for comp in self.component_pmfs]}
        if schema is not None:
            out.update(schema.to_json())
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "MixtureTruth":
        return cls(np.asarray(obj["weights"]), tuple(tuple(comp) for comp in obj["components"]))


def _categorical_rows(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    # cum: (n, d) row-wise cumulative pmfs
    return np.minimum((cum <= u[:, None]).sum(axis=1), cum.shape[1] - 1)


def _draw_records(truth: MixtureTruth, n: int, rng: np.random.Generator) -> np.ndarray:
    wcum = np.cumsum(truth.weights)
    wcum /= wcum[-1]
    z = np.minimum(np.searchsorted(wcum, rng.random(n), side="right"), truth.n_classes - 1)
    out = np.empty((n, len(truth.component_pmfs[0])), dtype=np.int64)
    for j, th in enumerate(truth.theta):
        cum = np.cumsum(th, axis=1)
        cum /= cum[:, -1:]
        out[:, j] = _categorical_rows(cum[z], rng.random(n))
    return out


def generate_from_mixture(truth: MixtureTruth, n: int, schema: Schema, seed: int,
                          mcz: DisallowedPatternSet | None = None,
                          max_rejections: int = 10**6) -> CategoricalDataset:
    """Draw ``n`` i.i.d. complete records from ``truth``.

    With ``mcz`` the draws come from the mixture truncated to records outside
    the pattern set (rejection sampling).
    """
    truth.check_schema(schema)
    rng = np.random.default_rng(seed)
    if mcz is None or len(mcz) == 0:
        return CategoricalDataset(schema, _draw_records(truth, n, rng))
    kept: list[np.ndarray] = []
    have = 0
    run = 0
    batch = max(64, n)
    while have < n:
        recs = _draw_records(truth, batch, rng)
        bad = mcz.matches(recs)
        # longest run of consecutive rejections, including the carry-over
        if bad.all():
            run += batch
        else:
            good_idx = np.flatnonzero(~bad)
            gaps = np.diff(np.concatenate(([-1], good_idx))) - 1
            gaps[0] += run
            if gaps.max() >= max_rejections:
                run = int(gaps.max())
            else:
                run = batch - 1 - int(good_idx[-1])
        if run >= max_rejections:
            raise DegenerateTruthError(
                f"{max_rejections} consecutive draws fell inside the structural zeros")
        good = recs[~bad]
        kept.append(good[: n - have])
        have += min(good.shape[0], n - have)
        batch = min(max(64, 2 * batch), max_rejections)
    return CategoricalDataset(schema, np.concatenate(kept, axis=0))
