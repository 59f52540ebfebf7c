"""Datasets: the 5x5 Gaussian-grid benchmark and schema-driven tabular CSVs.

A :class:`Dataset` always holds *normalized* numerical columns in [0, 1],
concatenated one-hot categorical blocks and integer labels.  The schema
carries the min/max needed to map numerical columns back to data units.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyDataset, InvalidConfig, InvalidSchema, ParseError, SchemaMismatch
from .featuremap import make_rng

COLUMN_KINDS = ("numerical", "categorical", "ordinal", "label")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    levels: tuple = ()
    min: float | None = None
    max: float | None = None

    @property
    def is_categorical(self) -> bool:
        return self.kind in ("categorical", "ordinal")


@dataclass(frozen=True)
class Schema:
    columns: tuple

    def __post_init__(self):
        cols = tuple(c if isinstance(c, Column) else Column(**c) for c in self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise InvalidSchema("duplicate column names")
        for c in cols:
            if c.kind not in COLUMN_KINDS:
                raise InvalidSchema(f"column {c.name!r}: unknown kind {c.kind!r}")
            if (c.is_categorical or c.kind == "label") and len(c.levels) < 2:
                raise InvalidSchema(f"column {c.name!r} needs at least 2 levels")
            if len(set(c.levels)) != len(c.levels):
                raise InvalidSchema(f"column {c.name!r} has duplicate levels")
        if sum(c.kind == "label" for c in cols) != 1:
            raise InvalidSchema("schema must have exactly one label column")

    @property
    def names(self):
        return [c.name for c in self.columns]

    @property
    def numerical(self):
        return [c for c in self.columns if c.kind == "numerical"]

    @property
    def categorical(self):
        return [c for c in self.columns if c.is_categorical]

    @property
    def label(self) -> Column:
        return next(c for c in self.columns if c.kind == "label")

    @property
    def cat_blocks(self) -> tuple:
        return tuple(len(c.levels) for c in self.categorical)

    @property
    def d_num(self) -> int:
        return len(self.numerical)

    @property
    def d_cat(self) -> int:
        return sum(self.cat_blocks)

    @property
    def num_classes(self) -> int:
        return len(self.label.levels)

    @property
    def fitted(self) -> bool:
        return all(c.min is not None and c.max is not None for c in self.numerical)

    def bounds(self):
        lo = np.array([c.min for c in self.numerical], dtype=np.float64)
        hi = np.array([c.max for c in self.numerical], dtype=np.float64)
        return lo, hi

    def with_bounds(self, lo, hi) -> "Schema":
        it = iter(zip(lo, hi))
        cols = []
        for c in self.columns:
            if c.kind == "numerical":
                a, b = next(it)
                c = replace(c, min=float(a), max=float(b))
            cols.append(c)
        return Schema(tuple(cols))

    def to_dict(self) -> dict:
        out = []
        for c in self.columns:
            entry = {"name": c.name, "kind": c.kind}
            if c.levels:
                entry["levels"] = list(c.levels)
            if c.min is not None:
                entry["min"] = c.min
            if c.max is not None:
                entry["max"] = c.max
            out.append(entry)
        return {"columns": out}

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        try:
            cols = tuple(Column(name=e["name"], kind=e["kind"], levels=tuple(e.get("levels", ())),
                                min=e.get("min"), max=e.get("max")) for e in d["columns"])
        except (KeyError, TypeError) as exc:
            raise InvalidSchema(f"malformed schema: {exc}") from exc
        return cls(cols)

    @classmethod
    def load(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise InvalidSchema(f"{path}: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def compatible_with(self, other: "Schema") -> bool:
        strip = lambda s: [(c.name, c.kind, c.levels) for c in s.columns]  # noqa: E731
        return strip(self) == strip(other)


def normalize(values, lo, hi):
    span = np.where(hi > lo, hi - lo, 1.0)
    return (np.asarray(values, dtype=np.float64) - lo) / span


def denormalize(values, lo, hi):
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.asarray(values, dtype=np.float64) * span + lo


@dataclass(frozen=True)
class Dataset:
    x_num: np.ndarray
    x_cat: np.ndarray
    y: np.ndarray
    schema: Schema
    provenance: str = "real"

    def __post_init__(self):
        n = len(self.y)
        x_num = np.asarray(self.x_num, dtype=np.float64).reshape(n, self.schema.d_num)
        x_cat = np.asarray(self.x_cat, dtype=np.float64).reshape(n, self.schema.d_cat)
        y = np.asarray(self.y, dtype=np.int64)
        for a in (x_num, x_cat, y):
            a.setflags(write=False)
        object.__setattr__(self, "x_num", x_num)
        object.__setattr__(self, "x_cat", x_cat)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return len(self.y)

    @property
    def num_classes(self) -> int:
        return self.schema.num_classes

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.num_classes)

    def numeric_raw(self) -> np.ndarray:
        lo, hi = self.schema.bounds()
        return denormalize(self.x_num, lo, hi)

    def features(self) -> np.ndarray:
        return np.concatenate([self.x_num, self.x_cat], axis=1)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.x_num[idx], self.x_cat[idx], self.y[idx], self.schema, self.provenance)

    def write_csv(self, path) -> None:
        schema = self.schema
        raw = self.numeric_raw()
        cat_idx = []
        start = 0
        for width in schema.cat_blocks:
            cat_idx.append(np.argmax(self.x_cat[:, start:start + width], axis=1))
            start += width
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(schema.names)
            for i in range(len(self)):
                row, k_num, k_cat = [], 0, 0
                for c in schema.columns:
                    if c.kind == "numerical":
                        row.append(repr(float(raw[i, k_num])))
                        k_num += 1
                    elif c.is_categorical:
                        row.append(c.levels[cat_idx[k_cat][i]])
                        k_cat += 1
                    else:
                        row.append(c.levels[self.y[i]])
                writer.writerow(row)


# --- tabular ingestion ----------------------------------------------------

def load_tabular(csv_path, schema) -> Dataset:
    """Read a CSV whose header matches ``schema`` (a Schema or a path to one).

    If the schema carries no numerical bounds they are fitted on this file,
    which makes them data-dependent and not privatized; a warning says so.
    Values outside fitted bounds are clipped.
    """
    if not isinstance(schema, Schema):
        schema = Schema.load(schema)
    level_index = {c.name: {lv: k for k, lv in enumerate(c.levels)}
                   for c in schema.columns if c.levels}

    num_rows, cat_rows, labels = [], [], []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{csv_path}: missing header row (line 1)") from None
        header = [h.strip() for h in header]
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise SchemaMismatch(f"{csv_path}: missing column(s) {', '.join(missing)}")
        extra = [h for h in header if h not in schema.names]
        if extra:
            raise SchemaMismatch(f"{csv_path}: column(s) not in schema: {', '.join(extra)}")
        pos = [header.index(n) for n in schema.names]

        for row_no, row in enumerate(reader, start=1):
            line = row_no + 1
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{csv_path}: row {row_no} (line {line}) has {len(row)} "
                                 f"fields, expected {len(header)}")
            nums, cats = [], []
            for c, p in zip(schema.columns, pos):
                cell = row[p].strip()
                if c.kind == "numerical":
                    try:
                        nums.append(float(cell))
                    except ValueError:
                        raise ParseError(f"{csv_path}: row {row_no} (line {line}), column "
                                         f"{c.name!r}: cannot parse {cell!r} as a number") from None
                else:
                    k = level_index[c.name].get(cell)
                    if k is None:
                        raise SchemaMismatch(f"{csv_path}: row {row_no} (line {line}), column "
                                             f"{c.name!r}: unknown level {cell!r}")
                    if c.kind == "label":
                        labels.append(k)
                    else:
                        cats.append(k)
            num_rows.append(nums)
            cat_rows.append(cats)

    n = len(labels)
    raw = np.array(num_rows, dtype=np.float64).reshape(n, schema.d_num)
    if not schema.fitted:
        if n == 0:
            raise EmptyDataset(f"{csv_path}: cannot fit numerical bounds on an empty file")
        warnings.warn("numerical min/max fitted on the data file; this step is not privatized",
                      stacklevel=2)
        schema = schema.with_bounds(raw.min(axis=0), raw.max(axis=0))
    lo, hi = schema.bounds()
    x_num = np.clip(normalize(raw, lo, hi), 0.0, 1.0)

    x_cat = np.zeros((n, schema.d_cat))
    offsets = np.cumsum((0,) + schema.cat_blocks[:-1]) if schema.cat_blocks else ()
    cat_arr = np.array(cat_rows, dtype=np.int64).reshape(n, len(schema.cat_blocks))
    for b, off in enumerate(offsets):
        x_cat[np.arange(n), off + cat_arr[:, b]] = 1.0
    return Dataset(x_num, x_cat, np.array(labels, dtype=np.int64), schema, "real")


def undersample(ds: Dataset, rate: float, seed: int) -> Dataset:
    """Subsample the majority class to ceil(rate * count); ties go to the lowest class index."""
    if not 0 < rate <= 1:
        raise InvalidConfig(f"undersampling rate must lie in (0, 1], got {rate}", "undersample")
    counts = ds.class_counts()
    major = int(np.argmax(counts))  # argmax returns the first maximum
    keep_n = math.ceil(rate * counts[major])
    if keep_n >= counts[major]:
        return ds
    members = np.flatnonzero(ds.y == major)
    kept = make_rng(seed).choice(members, size=keep_n, replace=False)
    mask = ds.y != major
    mask[kept] = True
    return ds.subset(np.flatnonzero(mask))


# --- Gaussian grid --------------------------------------------------------

@dataclass(frozen=True)
class GridMixture:
    spacing: float = 1.0
    std: float = 0.2
    grid_size: int = 5
    samples_per_component: int = 4000
    test_fraction: float = 0.1
    means: np.ndarray = field(init=False, repr=False)
    component_class: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.spacing > 0 and self.std > 0):
            raise InvalidConfig("grid spacing and std must be positive", "spacing" if not self.spacing > 0 else "std")
        if self.grid_size < 1 or self.samples_per_component < 1:
            raise InvalidConfig("grid_size and samples_per_component must be >= 1", "grid_size")
        if not 0 <= self.test_fraction < 1:
            raise InvalidConfig("test_fraction must lie in [0, 1)", "test_fraction")
        coords = (np.arange(self.grid_size) - (self.grid_size - 1) / 2.0) * self.spacing
        rows, cols = np.meshgrid(np.arange(self.grid_size), np.arange(self.grid_size), indexing="ij")
        means = np.stack([coords[cols.ravel()], coords[rows.ravel()]], axis=1)
        # class c owns grid row c
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "component_class", rows.ravel().copy())

    @property
    def num_components(self) -> int:
        return self.grid_size**2

    @property
    def num_classes(self) -> int:
        return self.grid_size

    @property
    def half_width(self) -> float:
        """Public coordinate bound used to normalize grid data."""
        return (self.grid_size - 1) / 2.0 * self.spacing + 6.0 * self.std

    def schema(self) -> Schema:
        h = self.half_width
        return Schema((
            Column("x0", "numerical", min=-h, max=h),
            Column("x1", "numerical", min=-h, max=h),
            Column("label", "label", levels=tuple(str(c) for c in range(self.num_classes))),
        ))

    def log_density(self, x, y) -> np.ndarray:
        """log p(x, y) with weight 1/K per component and isotropic std."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        sq = ((x[:, None, :] - self.means[None, :, :]) ** 2).sum(-1)
        log_norm = -math.log(self.num_components) - math.log(2 * math.pi * self.std**2)
        logp = log_norm - sq / (2 * self.std**2)
        member = self.component_class[None, :] == y[:, None]
        logp = np.where(member, logp, -np.inf)
        return logsumexp(logp, axis=1)


def _grid_dataset(raw, y, mixture, provenance="real"):
    schema = mixture.schema()
    lo, hi = schema.bounds()
    x_num = np.clip(normalize(raw, lo, hi), 0.0, 1.0)
    return Dataset(x_num, np.zeros((len(y), 0)), y, schema, provenance)


def make_gaussian_grid(seed: int, mixture: GridMixture | None = None):
    """Draw the grid benchmark; returns ``(train, test, mixture)``.

    Rows are ordered by component: component ``j`` contributes a contiguous
    block of ``(1 - test_fraction) * samples_per_component`` training rows.
    """
    mixture = mixture or GridMixture()
    rng = make_rng(seed)
    per = mixture.samples_per_component
    n_test = int(round(mixture.test_fraction * per))
    train_x, test_x, train_y, test_y = [], [], [], []
    for j in range(mixture.num_components):
        pts = mixture.means[j] + mixture.std * rng.standard_normal((per, 2))
        train_x.append(pts[: per - n_test])
        test_x.append(pts[per - n_test:])
        train_y.append(np.full(per - n_test, mixture.component_class[j]))
        test_y.append(np.full(n_test, mixture.component_class[j]))
    train = _grid_dataset(np.concatenate(train_x), np.concatenate(train_y), mixture)
    test = _grid_dataset(np.concatenate(test_x), np.concatenate(test_y), mixture)
    return train, test, mixture


def nll(points, labels, mixture: GridMixture) -> float:
    """Mean negative log joint density of labeled 2-d samples under the mixture."""
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        raise EmptyDataset("NLL of an empty sample")
    return float(-np.mean(mixture.log_density(points, labels)))

