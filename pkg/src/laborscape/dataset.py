"""Loading, validation and canonical serialisation of the input tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._io import atomic_open, fmt_float
from .errors import (
    DuplicateKey,
    EmptyCity,
    MalformedRow,
    NegativeCount,
    NonPositiveSize,
    OutOfRangeCoordinate,
)

ATTRIBUTE_COLUMNS = ("city", "size", "elite", "universities", "bullet_trains", "lat", "lon")
_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class OccupationId:
    code: str
    label: str = ""

    def __post_init__(self):
        if not self.code:
            raise ValueError("occupation code must be non-empty")
        if not self.label:
            object.__setattr__(self, "label", self.code)


class CountTable:
    """Dense city x category matrix of non-negative integer counts.

    Rows and columns keep their file order. The count matrix is read-only
    after construction.
    """

    kind = "category"

    def __init__(self, cities: Sequence[str], codes: Sequence[str], counts, labels: Mapping[str, str] | None = None):
        counts = np.array(counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape != (len(cities), len(codes)):
            raise ValueError(f"counts shape {counts.shape} does not match {len(cities)} x {len(codes)}")
        if len(cities) == 0 or len(codes) == 0:
            raise ValueError("table needs at least one city and one category")
        for name, seq in (("city", cities), (self.kind, codes)):
            dupes = _duplicates(seq)
            if dupes:
                raise DuplicateKey(f"duplicate {name} id(s): {', '.join(dupes)}")
        if (counts < 0).any():
            m, j = np.argwhere(counts < 0)[0]
            raise NegativeCount("<array>", int(m), codes[j], int(counts[m, j]))
        empty = [cities[m] for m in np.flatnonzero(counts.sum(axis=1) == 0)]
        if empty:
            raise EmptyCity(f"cities with zero total count: {', '.join(empty)}")
        counts.setflags(write=False)
        self.cities = tuple(cities)
        self.codes = tuple(codes)
        self.counts = counts
        labels = dict(labels or {})
        self.occupations = tuple(OccupationId(c, labels.get(c, "")) for c in self.codes)
        self._city_index = {c: i for i, c in enumerate(self.cities)}
        self._code_index = {c: i for i, c in enumerate(self.codes)}

    def __repr__(self):
        return f"{type(self).__name__}({len(self.cities)} cities x {len(self.codes)} {self.kind}s)"

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.cities == other.cities
            and self.codes == other.codes
            and np.array_equal(self.counts, other.counts)
        )

    @property
    def shape(self):
        return self.counts.shape

    def city_index(self, city: str) -> int:
        try:
            return self._city_index[city]
        except KeyError:
            raise KeyError(f"unknown city {city!r}") from None

    def code_index(self, code: str) -> int:
        try:
            return self._code_index[code]
        except KeyError:
            raise KeyError(f"unknown {self.kind} {code!r}") from None

    def row(self, city: str) -> np.ndarray:
        return self.counts[self.city_index(city)]

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def present(self, city: str) -> set[str]:
        """Categories with a positive count in ``city``."""
        row = self.row(city)
        return {self.codes[j] for j in np.flatnonzero(row > 0)}

    def column(self, code: str) -> np.ndarray:
        return self.counts[:, self.code_index(code)]

    def aggregate(self, mapping: Mapping[str, str]) -> "CountTable":
        """Sum columns into coarser groups (e.g. subsectors into sectors)."""
        groups: list[str] = []
        for code in self.codes:
            if code not in mapping:
                raise KeyError(f"{self.kind} {code!r} has no entry in the mapping")
            if mapping[code] not in groups:
                groups.append(mapping[code])
        out = np.zeros((len(self.cities), len(groups)), dtype=np.int64)
        for j, code in enumerate(self.codes):
            out[:, groups.index(mapping[code])] += self.counts[:, j]
        return type(self)(self.cities, groups, out)


class EmploymentTable(CountTable):
    kind = "occupation"


class IndustryTable(CountTable):
    kind = "industry"


class RiskTable(Mapping[str, float]):
    """Occupation code -> probability of computerisation."""

    def __init__(self, values: Mapping[str, float] | Iterable[tuple[str, float]]):
        items = list(values.items()) if isinstance(values, Mapping) else list(values)
        data: dict[str, float] = {}
        for code, p in items:
            if code in data:
                raise DuplicateKey(f"duplicate occupation code {code!r} in risk table")
            p = float(p)
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise ValueError(f"risk for {code!r} is {p}, outside [0, 1]")
            data[code] = p
        self._data = MappingProxyType(data)

    def __getitem__(self, code):
        return self._data[code]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"RiskTable({len(self)} occupations)"

    def vector(self, codes: Sequence[str]) -> np.ndarray:
        return np.array([self._data[c] for c in codes], dtype=np.float64)


@dataclass(frozen=True)
class CityAttributes:
    city: str
    size: int | None = None
    elite: bool | None = None
    universities: int | None = None
    bullet_trains: float | None = None
    lat: float | None = None
    lon: float | None = None
    extras: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.size is not None and self.size <= 0:
            raise NonPositiveSize(f"{self.city}: size must be positive, got {self.size}")
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise OutOfRangeCoordinate(f"{self.city}: latitude {self.lat} outside [-90, 90]")
        if self.lon is not None and not -180.0 <= self.lon <= 180.0:
            raise OutOfRangeCoordinate(f"{self.city}: longitude {self.lon} outside [-180, 180]")
        if self.universities is not None and self.universities < 0:
            raise ValueError(f"{self.city}: negative university count")
        if self.bullet_trains is not None and self.bullet_trains < 0:
            raise ValueError(f"{self.city}: negative bullet-train frequency")
        object.__setattr__(self, "extras", MappingProxyType(dict(self.extras)))

    @property
    def has_coordinates(self) -> bool:
        return self.lat is not None and self.lon is not None


@dataclass(frozen=True)
class JoinReport:
    missing_risk: tuple[str, ...] = ()
    unused_risk: tuple[str, ...] = ()
    missing_attributes: tuple[str, ...] = ()
    unused_attributes: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.missing_risk or self.unused_risk or self.missing_attributes or self.unused_attributes)

    def as_dict(self) -> dict[str, list[str]]:
        return {
            "missing_risk": list(self.missing_risk),
            "unused_risk": list(self.unused_risk),
            "missing_attributes": list(self.missing_attributes),
            "unused_attributes": list(self.unused_attributes),
        }


# --------------------------------------------------------------------------
# readers


def _duplicates(seq):
    seen, dupes = set(), []
    for item in seq:
        if item in seen and item not in dupes:
            dupes.append(item)
        seen.add(item)
    return dupes


def _rows(path):
    """Yield (line_number, fields) for a UTF-8 CSV, skipping blank lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            yield reader.line_num, [f.strip() for f in fields]


def _parse_count(text, path, line, column):
    text = text.replace("−", "-")
    try:
        value = int(text)
    except ValueError:
        raise MalformedRow(path, line, f"count {text!r} in column {column!r} is not an integer") from None
    if value < 0:
        raise NegativeCount(path, line, column, value)
    return value


def _read_header(rows, path, expected=None):
    try:
        line, header = next(rows)
    except StopIteration:
        raise MalformedRow(path, 1, "file is empty") from None
    if expected is not None and [h.lower() for h in header] != list(expected):
        raise MalformedRow(path, line, f"expected header {','.join(expected)}, got {','.join(header)}")
    return header


def _load_counts(path, schema, table_cls, labels=None):
    path = Path(path)
    rows = _rows(path)
    if schema == "wide":
        header = _read_header(rows, path)
        if header[0].lower() != "city":
            raise MalformedRow(path, 1, "first column of a wide table must be 'city'")
        codes = header[1:]
        dupes = _duplicates(codes)
        if dupes:
            raise DuplicateKey(f"{path}: duplicate column(s) {', '.join(dupes)}")
        cities, matrix, lines = [], [], {}
        for line, fields in rows:
            if len(fields) != len(header):
                raise MalformedRow(path, line, f"expected {len(header)} fields, got {len(fields)}")
            city = fields[0]
            if not city:
                raise MalformedRow(path, line, "empty city id")
            if city in lines:
                raise DuplicateKey(f"{path}:{line}: city {city!r} already defined on line {lines[city]}")
            lines[city] = line
            cities.append(city)
            matrix.append([_parse_count(v, path, line, c) for v, c in zip(fields[1:], codes)])
    elif schema == "long":
        _read_header(rows, path, ("city", "code", "count"))
        cities, codes, cells, lines = [], [], {}, {}
        for line, fields in rows:
            if len(fields) != 3:
                raise MalformedRow(path, line, f"expected 3 fields, got {len(fields)}")
            city, code, raw = fields
            if not city or not code:
                raise MalformedRow(path, line, "empty city or code")
            if (city, code) in cells:
                raise DuplicateKey(f"{path}:{line}: ({city}, {code}) already given on line {lines[city, code]}")
            lines[city, code] = line
            cells[city, code] = _parse_count(raw, path, line, code)
            if city not in lines:
                lines[city] = line
                cities.append(city)
            if code not in codes:
                codes.append(code)
        matrix = [[cells.get((c, j), 0) for j in codes] for c in cities]
    else:
        raise ValueError(f"unknown schema {schema!r}; use 'wide' or 'long'")
    if not cities or not codes:
        raise MalformedRow(path, 1, "table has no data rows or no category columns")
    counts = np.array(matrix, dtype=np.int64)
    empty = [cities[m] for m in np.flatnonzero(counts.sum(axis=1) == 0)]
    if empty:
        m = cities.index(empty[0])
        where = lines[empty[0]] if schema == "wide" else "-"
        raise EmptyCity(f"{path}:{where}: city {cities[m]!r} has zero total count")
    return table_cls(cities, codes, counts, labels)


def load_employment(path, schema: str = "wide", labels: Mapping[str, str] | None = None) -> EmploymentTable:
    """Read a city x occupation table in wide or long layout."""
    return _load_counts(path, schema, EmploymentTable, labels)


def load_industry(path, schema: str = "wide") -> IndustryTable:
    return _load_counts(path, schema, IndustryTable)


def load_risk(path) -> RiskTable:
    path = Path(path)
    rows = _rows(path)
    _read_header(rows, path, ("code", "probability"))
    items, seen = [], {}
    for line, fields in rows:
        if len(fields) != 2:
            raise MalformedRow(path, line, f"expected 2 fields, got {len(fields)}")
        code, raw = fields
        if code in seen:
            raise DuplicateKey(f"{path}:{line}: code {code!r} already given on line {seen[code]}")
        seen[code] = line
        try:
            p = float(raw)
        except ValueError:
            raise MalformedRow(path, line, f"probability {raw!r} is not a number") from None
        if not 0.0 <= p <= 1.0:
            raise MalformedRow(path, line, f"probability {p} outside [0, 1]")
        items.append((code, p))
    return RiskTable(items)


def load_labels(path) -> dict[str, str]:
    """Optional ``code,label`` file used to decorate network exports."""
    path = Path(path)
    rows = _rows(path)
    _read_header(rows, path, ("code", "label"))
    return {fields[0]: fields[1] for _, fields in rows}


def _parse_bool(text, path, line):
    low = text.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise MalformedRow(path, line, f"cannot read {text!r} as a boolean flag")


def _parse_number(text, path, line, column, kind=float):
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(path, line, f"{column}={text!r} is not a number") from None
    if kind is int:
        if not value.is_integer():
            raise MalformedRow(path, line, f"{column}={text!r} is not an integer")
        return int(value)
    return value


def load_city_attributes(path) -> list[CityAttributes]:
    """Read per-city covariates. Empty cells stay ``None``; unknown columns land in ``extras``."""
    path = Path(path)
    rows = _rows(path)
    header = [h.lower() for h in _read_header(rows, path)]
    if header[0] != "city":
        raise MalformedRow(path, 1, "first column of an attributes file must be 'city'")
    dupes = _duplicates(header)
    if dupes:
        raise DuplicateKey(f"{path}: duplicate column(s) {', '.join(dupes)}")
    out, seen = [], {}
    for line, fields in rows:
        if len(fields) != len(header):
            raise MalformedRow(path, line, f"expected {len(header)} fields, got {len(fields)}")
        rec = dict(zip(header, fields))
        city = rec.pop("city")
        if city in seen:
            raise DuplicateKey(f"{path}:{line}: city {city!r} already defined on line {seen[city]}")
        seen[city] = line
        kwargs = {}
        extras = {}
        for col, raw in rec.items():
            if raw == "":
                continue
            if col == "elite":
                kwargs["elite"] = _parse_bool(raw, path, line)
            elif col in ("size", "universities"):
                kwargs[col] = _parse_number(raw, path, line, col, int)
            elif col in ("bullet_trains", "lat", "lon"):
                kwargs[col] = _parse_number(raw, path, line, col)
            else:
                extras[col] = _parse_number(raw, path, line, col)
        try:
            out.append(CityAttributes(city, extras=extras, **kwargs))
        except (OutOfRangeCoordinate, NonPositiveSize) as exc:
            raise type(exc)(f"{path}:{line}: {exc}") from None
    return out


def validate_join(emp: EmploymentTable, risk: Mapping[str, float], attrs: Sequence[CityAttributes]) -> JoinReport:
    """Cross-check the keys of the three inputs. Never raises, never mutates."""
    risk_codes = set(risk)
    emp_codes = set(emp.codes)
    attr_cities = [a.city for a in attrs]
    emp_cities = set(emp.cities)
    return JoinReport(
        missing_risk=tuple(c for c in emp.codes if c not in risk_codes),
        unused_risk=tuple(sorted(risk_codes - emp_codes)),
        missing_attributes=tuple(c for c in emp.cities if c not in set(attr_cities)),
        unused_attributes=tuple(c for c in attr_cities if c not in emp_cities),
    )


def attributes_by_city(attrs: Sequence[CityAttributes]) -> dict[str, CityAttributes]:
    return {a.city: a for a in attrs}


def city_sizes(emp: EmploymentTable, attrs: Sequence[CityAttributes] | None = None) -> np.ndarray:
    """Size per city in ``emp`` order: the attribute value if given, else the row total."""
    sizes = emp.totals().astype(np.float64)
    if attrs:
        lookup = attributes_by_city(attrs)
        for m, city in enumerate(emp.cities):
            a = lookup.get(city)
            if a is not None and a.size is not None:
                sizes[m] = a.size
    return sizes


# --------------------------------------------------------------------------
# writers (canonical formatting: '\n' line ends, repr floats, no padding)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    with atomic_open(path) as fh:
        fh.write(csv_text(header, rows))


def write_counts(table: CountTable, path, schema: str = "wide"):
    if schema == "wide":
        write_csv(path, ["city", *table.codes], ([c, *table.counts[m].tolist()] for m, c in enumerate(table.cities)))
    elif schema == "long":
        write_csv(
            path,
            ["city", "code", "count"],
            (
                (c, code, int(table.counts[m, j]))
                for m, c in enumerate(table.cities)
                for j, code in enumerate(table.codes)
                if table.counts[m, j] > 0
            ),
        )
    else:
        raise ValueError(f"unknown schema {schema!r}")


def write_risk(risk: Mapping[str, float], path):
    write_csv(path, ["code", "probability"], ((c, float(p)) for c, p in risk.items()))


def write_city_attributes(attrs: Sequence[CityAttributes], path):
    extras = []
    for a in attrs:
        for k in a.extras:
            if k not in extras:
                extras.append(k)
    header = [*ATTRIBUTE_COLUMNS, *extras]
    rows = (
        [a.city, a.size, a.elite, a.universities, a.bullet_trains, a.lat, a.lon, *(a.extras.get(k) for k in extras)]
        for a in attrs
    )
    write_csv(path, header, rows)
