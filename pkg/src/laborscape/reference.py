"""Bundled per-city reference values for 102 Chinese cities.

Columns: university count ('985'/'211' projects), daily bullet-train
frequency, published expected impact rate (percent, two decimals), elite
flag and premium flag exactly as marked in the source table. The two
cities both named Taizhou are disambiguated by province.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources

from .dataset import CityAttributes


@dataclass(frozen=True)
class ReferenceCity:
    city: str
    universities: int
    bullet_trains: int
    impact_pct: Decimal
    elite: bool
    premium: bool

    @property
    def impact_rate(self) -> float:
        return float(self.impact_pct / 100)


def load_table_s1() -> list[ReferenceCity]:
    text = resources.files("laborscape.data").joinpath("table_s1.csv").read_text(encoding="utf-8")
    reader = csv.DictReader(text.splitlines())
    return [
        ReferenceCity(
            row["city"],
            int(row["universities"]),
            int(row["bullet_trains"]),
            Decimal(row["impact_rate_pct"]),
            row["elite"] == "1",
            row["premium"] == "1",
        )
        for row in reader
    ]


def reference_attributes(cities: list[ReferenceCity] | None = None) -> list[CityAttributes]:
    cities = cities if cities is not None else load_table_s1()
    return [
        CityAttributes(c.city, elite=c.elite, universities=c.universities, bullet_trains=float(c.bullet_trains))
        for c in cities
    ]


def summary(cities: list[ReferenceCity] | None = None) -> dict:
    cities = cities if cities is not None else load_table_s1()
    impacts = [c.impact_pct for c in cities]
    return {
        "n_cities": len(cities),
        "mean_impact_rate": float(sum(impacts) / len(impacts) / 100),
        "n_elite": sum(c.elite for c in cities),
        "n_premium": sum(c.premium for c in cities),
        "n_elite_and_premium": sum(c.elite and c.premium for c in cities),
        "impact_pct": {c.city: str(c.impact_pct) for c in cities},
    }
