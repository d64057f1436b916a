"""CSV ingestion and output, plus the bundled Arctic lake dataset."""

import csv
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError, DataError
from .model import CompositionalDataset

TRANSFORMS = ("identity", "log")


@dataclass
class RunConfig:
    input: str = None
    parts: tuple = ()
    covariates: tuple = ()
    transforms: dict = field(default_factory=dict)  # covariate -> "log"
    constraint: str = "sum"
    method: str = "gamma"
    out: str = "."
    plot: bool = False
    zero_adjust: float = None
    seed: int = None

    def __post_init__(self):
        self.parts = tuple(self.parts)
        self.covariates = tuple(self.covariates)
        if len(self.parts) < 2:
            raise ConfigError("at least two part columns are needed")
        for name, t in self.transforms.items():
            if t not in TRANSFORMS:
                raise ConfigError(f"unknown transform {t!r} for {name!r}")
            if name not in self.covariates:
                raise ConfigError(f"transform given for {name!r}, which is not a covariate")

    def covariate_label(self, name):
        t = self.transforms.get(name, "identity")
        return name if t == "identity" else f"{t}({name})"


def arctic_lake_path():
    return str(resources.files("compql") / "data" / "arctic_lake.csv")


ARCTIC_LAKE_ALIAS = "@arctic-lake"


def resolve_input(path):
    return arctic_lake_path() if path == ARCTIC_LAKE_ALIAS else path


def arctic_lake(log_depth=True):
    """The Arctic lake sediment data (sand, silt, clay; covariate depth or log depth)."""
    cfg = RunConfig(
        input=arctic_lake_path(),
        parts=("sand", "silt", "clay"),
        covariates=("depth",),
        transforms={"depth": "log"} if log_depth else {},
    )
    return parse_csv(cfg.input, cfg)


def _number(text, lineno, column):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise DataError(f"line {lineno}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"line {lineno}: column {column!r} is not finite")
    return v


def parse_csv(path, config):
    """Read a CSV with a header row into a :class:`CompositionalDataset`.

    Totals are the row sums of the part columns.  Row order is preserved.

    Raises
    ------
    ConfigError
        A configured column is missing from the header.
    DataError
        Empty file, non-numeric or negative part values, zero totals, or a
        log transform applied to a nonpositive covariate.  Messages give the
        1-based line number.
    """
    path = resolve_input(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        missing = [c for c in config.parts + config.covariates if c not in header]
        if missing:
            raise ConfigError(f"{path}: missing column(s): {', '.join(missing)}")
        pidx = [header.index(c) for c in config.parts]
        cidx = [header.index(c) for c in config.covariates]
        raw, cov = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) < len(header):
                raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            y = [_number(row[j], lineno, header[j]) for j in pidx]
            if any(v < 0 for v in y):
                raise DataError(f"line {lineno}: negative part value")
            if sum(y) <= 0:
                raise DataError(f"line {lineno}: parts sum to zero")
            x = []
            for j in cidx:
                v = _number(row[j], lineno, header[j])
                if config.transforms.get(header[j]) == "log":
                    if v <= 0:
                        raise DataError(f"line {lineno}: log of nonpositive {header[j]!r}")
                    v = math.log(v)
                x.append(v)
            raw.append(y)
            cov.append(x)
    if not raw:
        raise DataError(f"{path}: no data rows")
    return CompositionalDataset(
        np.array(raw),
        np.array(cov).reshape(len(raw), len(cidx)),
        part_names=config.parts,
        covariate_names=tuple(config.covariate_label(c) for c in config.covariates),
    )


def write_dataset_csv(data, path):
    """Write raw parts and (already transformed) covariates with ``repr`` precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.part_names) + list(data.covariate_names))
        for y, x in zip(data.raw, data.covariates):
            w.writerow([repr(float(v)) for v in y] + [repr(float(v)) for v in x])


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_matrix(path, names, M):
    write_rows(path, [""] + list(names), [[n] + [float(v) for v in row] for n, row in zip(names, M)])
