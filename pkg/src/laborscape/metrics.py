"""Per-city scalar metrics and the location-quotient (RCA) matrix."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import CountTable, EmploymentTable, IndustryTable, write_csv
from .errors import EmptyCity, EmptyTable, MissingRisk


@dataclass(frozen=True)
class CityMetricVector:
    city: str
    impact_rate: float
    job_diversity: float
    industry_diversity: float | None = None


class RcaMatrix:
    def __init__(self, cities: Sequence[str], codes: Sequence[str], values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        values.setflags(write=False)
        self.cities = tuple(cities)
        self.codes = tuple(codes)
        self.values = values

    def __repr__(self):
        return f"RcaMatrix({len(self.cities)} x {len(self.codes)})"

    def advantaged(self, city: str, cutoff: float = 1.0) -> list[str]:
        row = self.values[self.cities.index(city)]
        return [self.codes[j] for j in np.flatnonzero(row >= cutoff)]

    def long_rows(self):
        for m, city in enumerate(self.cities):
            for j, code in enumerate(self.codes):
                yield city, code, float(self.values[m, j])


def impact_rate(emp: EmploymentTable, risk: Mapping[str, float], city: str, default: float | None = None) -> float:
    """Employment-weighted mean computerisation probability of a city's jobs.

    ``default`` fills in occupations absent from ``risk``; without it a
    missing occupation with positive count raises ``MissingRisk``.
    """
    row = emp.row(city)
    total = row.sum()
    if total <= 0:
        raise EmptyCity(f"{city!r} has zero total employment")
    idx = np.flatnonzero(row > 0)
    probs = np.empty(idx.size)
    for n, j in enumerate(idx):
        code = emp.codes[j]
        if code in risk:
            probs[n] = risk[code]
        elif default is not None:
            probs[n] = default
        else:
            raise MissingRisk(f"no risk value for occupation {code!r} (present in {city!r})")
    weights = row[idx].astype(np.float64)
    value = float(weights @ probs / total)
    # guard the convex-combination bound against last-ulp rounding
    return min(max(value, float(probs.min())), float(probs.max()))


def impact_rates(emp: EmploymentTable, risk: Mapping[str, float], default: float | None = None) -> np.ndarray:
    return np.array([impact_rate(emp, risk, c, default) for c in emp.cities])


def normalized_entropy(counts) -> float:
    """Shannon entropy of the positive entries, divided by log of their number.

    One positive category (or none) gives 0.
    """
    counts = np.asarray(counts, dtype=np.float64)
    pos = counts[counts > 0]
    if pos.size <= 1:
        return 0.0
    p = pos / pos.sum()
    h = float(-(p * np.log(p)).sum() / np.log(pos.size))
    return min(max(h, 0.0), 1.0)


def _diversity(table: CountTable, city: str) -> float:
    row = table.row(city)
    if row.sum() <= 0:
        raise EmptyCity(f"{city!r} has zero total count")
    return normalized_entropy(row)


def job_diversity(emp: EmploymentTable, city: str) -> float:
    return _diversity(emp, city)


def industry_diversity(ind: IndustryTable, city: str) -> float:
    return _diversity(ind, city)


def rca(emp: CountTable) -> RcaMatrix:
    """Balassa location quotient: city share of an occupation over the national share."""
    x = emp.counts.astype(np.float64)
    grand = x.sum()
    if grand <= 0:
        raise EmptyTable("employment table has zero grand total")
    city_tot = x.sum(axis=1, keepdims=True)
    occ_tot = x.sum(axis=0, keepdims=True)
    national_share = occ_tot / grand
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(
            (occ_tot > 0) & (city_tot > 0),
            (x / np.where(city_tot > 0, city_tot, 1.0)) / np.where(national_share > 0, national_share, 1.0),
            0.0,
        )
    return RcaMatrix(emp.cities, emp.codes, values)


def city_metrics(
    emp: EmploymentTable,
    risk: Mapping[str, float],
    ind: IndustryTable | None = None,
    default: float | None = None,
) -> list[CityMetricVector]:
    out = []
    for city in emp.cities:
        ind_div = None
        if ind is not None and city in ind.cities:
            ind_div = industry_diversity(ind, city)
        out.append(CityMetricVector(city, impact_rate(emp, risk, city, default), job_diversity(emp, city), ind_div))
    return out


METRIC_HEADER = ["city", "impact_rate", "job_diversity", "industry_diversity"]


def metric_rows(vectors: Sequence[CityMetricVector]):
    return [[v.city, v.impact_rate, v.job_diversity, v.industry_diversity] for v in vectors]


def write_metrics(vectors: Sequence[CityMetricVector], path):
    write_csv(path, METRIC_HEADER, metric_rows(vectors))


def write_rca(matrix: RcaMatrix, path):
    write_csv(path, ["city", "code", "rca"], matrix.long_rows())
