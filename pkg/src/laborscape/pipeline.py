"""End-to-end orchestration shared by every CLI command.

Each table printed by ``laborscape metric ...`` is produced by the same
function that writes the corresponding report file, so the two are
identical row for row.
"""
from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from . import crosswalk as cw
from . import dataset as ds
from . import metrics as mt
from . import occspace as oc
from . import regress as rg
from . import structure as st
from ._accel import BACKEND
from ._io import atomic_open
from .errors import InputError, LaborscapeError, MissingRisk, UnknownMetric

log = logging.getLogger(__name__)

PATH_FIELDS = (
    "employment",
    "industry",
    "risk",
    "attributes",
    "labels",
    "votes",
    "source_risk",
    "adjudications",
    "zero_override",
    "sector_map",
    "elite_coordinates",
)
REQUIRED_PATHS = ("employment", "risk", "attributes")


class StageError(LaborscapeError):
    """A pipeline stage failed; carries the stage name and the exit code of the cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


@contextlib.contextmanager
def stage(name: str):
    log.debug("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except (LaborscapeError, KeyError, ValueError, OSError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class PipelineConfig:
    employment: Path | None = None
    employment_schema: str = "wide"
    industry: Path | None = None
    industry_schema: str = "wide"
    risk: Path | None = None
    attributes: Path | None = None
    labels: Path | None = None
    votes: Path | None = None
    source_risk: Path | None = None
    adjudications: Path | None = None
    zero_override: Path | None = None
    sector_map: Path | None = None
    elite_coordinates: Path | None = None
    advantage_cutoff: float = 1.0
    proximity_threshold: float = 0.66
    seed: int = 0
    kmeans_restarts: int = 10
    kmeans_scaling: str = "minmax"
    significance: float = 0.05
    vote_threshold: int = 2
    n_components: int = 2
    missing_risk_default: float | None = None
    output_dir: Path | None = None

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: not valid JSON ({exc})") from None
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise InputError(f"{path}: unknown config key(s): {', '.join(unknown)}")
        base = path.parent
        for key in (*PATH_FIELDS, "output_dir"):
            if raw.get(key) is not None:
                p = Path(raw[key])
                raw[key] = p if p.is_absolute() else base / p
        return cls(**raw)

    def override(self, **kwargs) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def check(self):
        if not 0.0 <= self.proximity_threshold <= 1.0:
            raise InputError("proximity_threshold must lie in [0, 1]")
        if self.advantage_cutoff <= 0:
            raise InputError("advantage_cutoff must be positive")
        if not 0.0 < self.significance < 1.0:
            raise InputError("significance must lie in (0, 1)")
        if self.seed < 0:
            raise InputError("seed must be a non-negative integer")
        if self.kmeans_restarts < 1:
            raise InputError("kmeans_restarts must be >= 1")
        if self.vote_threshold < 1:
            raise InputError("vote_threshold must be >= 1")
        if self.missing_risk_default is not None and not 0.0 <= self.missing_risk_default <= 1.0:
            raise InputError("missing_risk_default must lie in [0, 1]")
        for key in PATH_FIELDS:
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise InputError(f"{key} file not found: {p}")

    def parameters(self) -> dict:
        """Non-path settings, echoed into the manifest."""
        out = {}
        for f in fields(self):
            if f.name not in PATH_FIELDS and f.name != "output_dir":
                v = getattr(self, f.name)
                out[f.name] = v
        return out


def toy_config_path() -> Path:
    return Path(str(resources.files("laborscape.data").joinpath("toy", "config.json")))


def resolve_config(path) -> PipelineConfig:
    if str(path) == "toy":
        path = toy_config_path()
    return PipelineConfig.from_file(path)


# --------------------------------------------------------------------------
# the standard regression battery: (name, response, predictor, log_x, log_y)

CITY_REGRESSIONS = (
    ("impact_vs_size", "impact_rate", "size", True, False),
    ("job_diversity_vs_size", "job_diversity", "size", True, False),
    ("impact_vs_job_diversity", "impact_rate", "job_diversity", False, False),
    ("position_vs_size", "position", "size", True, False),
    ("fixed_assets_vs_size", "fixed_assets", "size", True, True),
    ("industry_diversity_vs_distance", "industry_diversity", "distance_to_elite", True, False),
    ("net_population_gain_vs_distance", "net_population_gain", "distance_to_elite", True, False),
    ("job_diversity_vs_industry_diversity", "job_diversity", "industry_diversity", False, False),
    ("vocational_teachers_vs_size", "vocational_teachers", "size", True, True),
    ("vocational_schools_vs_size", "vocational_schools", "size", True, True),
)
SIMPSON_ANALYSES = ("impact_vs_size",)
SINGLE_METRICS = ("impact", "diversity", "rca", "proximity", "scaling", "simpson", "distance")


@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)

    def csv(self) -> str:
        return ds.csv_text(self.header, self.rows)

    def records(self) -> list[dict]:
        out = []
        for row in self.rows:
            rec = {}
            for k, v in zip(self.header, row):
                if isinstance(v, (float, np.floating)):
                    v = None if math.isnan(v) else float(v)
                elif isinstance(v, np.integer):
                    v = int(v)
                rec[k] = v
            out.append(rec)
        return out


class Pipeline:
    """Lazily evaluated stages over one configuration."""

    def __init__(self, config: PipelineConfig):
        self.config = config

    # -- inputs -----------------------------------------------------------

    @cached_property
    def inputs_checked(self) -> bool:
        risk = self.config.risk
        if risk is None or not Path(risk).exists():
            what = "does not name a risk file" if risk is None else f"names a risk file that does not exist: {risk}"
            raise StageError("validate_join", InputError(f"config {what}"))
        missing = [k for k in REQUIRED_PATHS if getattr(self.config, k) is None]
        if missing:
            raise StageError("load", InputError(f"config does not name a {' / '.join(missing)} file"))
        with stage("load"):
            self.config.check()
        return True

    @cached_property
    def labels(self) -> dict:
        if self.config.labels is None:
            return {}
        with stage("load"):
            return ds.load_labels(self.config.labels)

    @cached_property
    def employment(self) -> ds.EmploymentTable:
        self.inputs_checked
        with stage("load"):
            return ds.load_employment(self.config.employment, self.config.employment_schema, self.labels)

    @cached_property
    def industry(self) -> ds.IndustryTable | None:
        self.inputs_checked
        if self.config.industry is None:
            return None
        with stage("load"):
            return ds.load_industry(self.config.industry, self.config.industry_schema)

    @cached_property
    def risk(self) -> ds.RiskTable:
        self.inputs_checked
        with stage("load"):
            return ds.load_risk(self.config.risk)

    @cached_property
    def attributes(self) -> list[ds.CityAttributes]:
        self.inputs_checked
        with stage("load"):
            return ds.load_city_attributes(self.config.attributes)

    @cached_property
    def join_report(self) -> ds.JoinReport:
        with stage("validate_join"):
            report = ds.validate_join(self.employment, self.risk, self.attributes)
            if report.missing_risk and self.config.missing_risk_default is None:
                raise MissingRisk(
                    f"{len(report.missing_risk)} occupation(s) have no risk value "
                    f"({', '.join(report.missing_risk[:10])}); set missing_risk_default to proceed"
                )
            if report.missing_attributes:
                raise InputError(f"cities without attributes: {', '.join(report.missing_attributes)}")
            for code in report.missing_risk:
                log.warning("occupation %s has no risk; using default %s", code, self.config.missing_risk_default)
            return report

    @cached_property
    def cities(self) -> list[str]:
        return sorted(self.employment.cities)

    @cached_property
    def attrs_by_city(self) -> dict:
        return ds.attributes_by_city(self.attributes)

    @cached_property
    def sizes(self) -> dict[str, float]:
        s = ds.city_sizes(self.employment, self.attributes)
        return {c: float(v) for c, v in zip(self.employment.cities, s)}

    # -- crosswalk ----------------------------------------------------------

    @cached_property
    def crosswalk(self):
        c = self.config
        if c.votes is None:
            raise StageError("crosswalk", InputError("config does not name a votes file"))
        with stage("crosswalk"):
            votes = cw.load_votes(c.votes)
            adjud = cw.load_adjudications(c.adjudications) if c.adjudications else {}
            overrides = cw.load_code_list(c.zero_override) if c.zero_override else []
            matrix = cw.build_crosswalk(votes, c.vote_threshold, adjud, overrides)
            return matrix, overrides

    @cached_property
    def transferred_risk(self) -> ds.RiskTable:
        if self.config.source_risk is None:
            raise StageError("crosswalk", InputError("config does not name a source_risk file"))
        matrix, overrides = self.crosswalk
        with stage("crosswalk"):
            return cw.transfer_risk(matrix, ds.load_risk(self.config.source_risk), overrides)

    # -- metrics -------------------------------------------------------------

    @cached_property
    def city_metrics(self) -> list[mt.CityMetricVector]:
        self.join_report
        with stage("metrics"):
            vecs = mt.city_metrics(self.employment, self.risk, self.industry, self.config.missing_risk_default)
        return sorted(vecs, key=lambda v: v.city)

    @cached_property
    def rca(self) -> mt.RcaMatrix:
        with stage("metrics"):
            return mt.rca(self.employment)

    # -- occupation space ------------------------------------------------------

    @cached_property
    def proximity(self) -> oc.ProximityMatrix:
        with stage("occspace"):
            return oc.proximity(self.rca, self.config.advantage_cutoff)

    @cached_property
    def network(self) -> oc.OccupationNetwork:
        with stage("occspace"):
            return oc.build_network(self.proximity, self.config.proximity_threshold)

    @cached_property
    def closeness(self) -> dict[str, float]:
        with stage("occspace"):
            return oc.closeness(self.network)

    @cached_property
    def overlays(self) -> list[oc.CityOverlay]:
        with stage("occspace"):
            items = oc.overlays(self.network, self.rca, self.closeness, self.config.advantage_cutoff)
        return sorted(items, key=lambda o: o.city)

    # -- structure -----------------------------------------------------------

    @cached_property
    def sector_map(self) -> dict | None:
        if self.config.sector_map is None:
            return None
        with stage("structure"):
            return st.load_sector_map(self.config.sector_map)

    @cached_property
    def pca(self) -> st.PcaResult | None:
        if self.industry is None:
            return None
        with stage("structure"):
            return st.pca_industry(self.industry, self.config.n_components, self.sector_map)

    @cached_property
    def premium(self) -> st.CityGrouping:
        self.join_report
        with stage("structure"):
            attrs = [self.attrs_by_city[c] for c in self.cities]
            return st.kmeans_premium(
                attrs, seed=self.config.seed, n_init=self.config.kmeans_restarts, scaling=self.config.kmeans_scaling
            )

    @cached_property
    def elite(self) -> st.CityGrouping:
        self.join_report
        with stage("structure"):
            return st.group_by_admin([self.attrs_by_city[c] for c in self.cities])

    def grouping(self, scheme: str | None) -> st.CityGrouping | None:
        if scheme in (None, "", "none", rg.POOLED):
            return None
        if scheme == "premium":
            return self.premium
        if scheme == "elite":
            return self.elite
        raise InputError(f"unknown grouping {scheme!r}; use premium or elite")

    @cached_property
    def elite_locations(self) -> list[tuple[float, float]]:
        with stage("structure"):
            if self.config.elite_coordinates is not None:
                return [(lat, lon) for _, lat, lon in st.load_elite_coordinates(self.config.elite_coordinates)]
            return [(a.lat, a.lon) for a in self.attributes if a.elite and a.has_coordinates]

    @cached_property
    def distances(self) -> dict[str, float] | None:
        self.join_report
        attrs = [self.attrs_by_city[c] for c in self.cities]
        if not self.elite_locations or not all(a.has_coordinates for a in attrs):
            return None
        with stage("structure"):
            return st.distance_to_nearest_elite(attrs, self.elite_locations)

    # -- regressions -----------------------------------------------------------

    @cached_property
    def variables(self) -> dict[str, dict[str, float]]:
        """Every per-city variable a regression may name."""
        v: dict[str, dict[str, float]] = {"size": dict(self.sizes)}
        v["impact_rate"] = {m.city: m.impact_rate for m in self.city_metrics}
        v["job_diversity"] = {m.city: m.job_diversity for m in self.city_metrics}
        if self.industry is not None:
            v["industry_diversity"] = {
                m.city: m.industry_diversity for m in self.city_metrics if m.industry_diversity is not None
            }
        v["position"] = {o.city: o.position for o in self.overlays}
        if self.distances is not None:
            # cities sitting on an elite location have distance 0, which log10 cannot take
            v["distance_to_elite"] = {c: d for c, d in self.distances.items() if d > 0}
        for a in self.attributes:
            if a.city not in self.sizes:
                continue
            if a.universities is not None:
                v.setdefault("universities", {})[a.city] = float(a.universities)
            if a.bullet_trains is not None:
                v.setdefault("bullet_trains", {})[a.city] = float(a.bullet_trains)
            for k, val in a.extras.items():
                v.setdefault(k, {})[a.city] = float(val)
        return v

    def available_regressions(self):
        return [r for r in CITY_REGRESSIONS if r[1] in self.variables and r[2] in self.variables]

    def regression(self, name: str, scheme: str | None) -> list[rg.RegressionResult]:
        spec = self._spec(name, scheme)
        with stage("regress"):
            return rg.fit(spec, self.variables)

    def _spec(self, name, scheme):
        table = {r[0]: r for r in CITY_REGRESSIONS}
        if name not in table:
            raise InputError(f"unknown analysis {name!r}")
        _, y, x, lx, ly = table[name]
        return rg.RegressionSpec(y, x, lx, ly, self.grouping(scheme))

    def custom_regression(self, response, predictor, log_x=False, log_y=False, scheme=None):
        for name in (response, predictor):
            if name not in self.variables:
                raise InputError(f"unknown variable {name!r}; known: {', '.join(sorted(self.variables))}")
        spec = rg.RegressionSpec(response, predictor, log_x, log_y, self.grouping(scheme))
        with stage("regress"):
            return rg.fit(spec, self.variables)

    def simpson(self, name: str, scheme: str) -> rg.SimpsonReport:
        spec = self._spec(name, scheme)
        with stage("regress"):
            return rg.simpson_check(spec, self.variables, self.config.significance)

    @cached_property
    def risk_vs_closeness(self) -> rg.RegressionResult:
        """Occupation-level fit of computerisation risk on closeness centrality."""
        codes = sorted(c for c in self.network.nodes if c in self.risk)
        with stage("regress"):
            return rg.ols([self.closeness[c] for c in codes], [self.risk[c] for c in codes])

    def scaling_rows(self, scheme: str | None) -> list[tuple[str, rg.RegressionResult]]:
        sizes = [self.sizes[c] for c in self.employment.cities]
        with stage("regress"):
            return rg.scaling_table(self.employment, sizes, self.grouping(scheme))

    # -- tables (shared by report and single-metric commands) ------------------

    def table(self, metric: str, occupation: str | None = None, group: str | None = None) -> Table:
        if metric == "impact":
            return Table(["city", "impact_rate"], [[m.city, m.impact_rate] for m in self.city_metrics])
        if metric == "diversity":
            return Table(
                ["city", "job_diversity", "industry_diversity"],
                [[m.city, m.job_diversity, m.industry_diversity] for m in self.city_metrics],
            )
        if metric == "rca":
            rows = sorted(self.rca.long_rows())
            return Table(["city", "code", "rca"], [list(r) for r in rows])
        if metric == "proximity":
            return Table(["code_i", "code_j", "phi"], sorted(list(r) for r in self.proximity.long_rows()))
        if metric == "scaling":
            rows = [
                [code, group or rg.POOLED, *res.row()]
                for code, res in self.scaling_rows(group)
                if occupation is None or code == occupation
            ]
            if occupation is not None and not rows:
                raise InputError(f"unknown occupation {occupation!r}")
            return Table(["code", "scheme", *rg.RESULT_HEADER], rows)
        if metric == "distance":
            if self.distances is None:
                raise StageError("structure", InputError("no elite coordinates or city coordinates available"))
            return Table(["city", "distance_km"], [[c, d] for c, d in sorted(self.distances.items())])
        if metric == "simpson":
            rep = self.simpson("impact_vs_size", group or "premium")
            return simpson_table(rep)
        raise UnknownMetric(f"unknown metric {metric!r}; valid: {', '.join(SINGLE_METRICS)}")


def simpson_table(rep: rg.SimpsonReport) -> Table:
    rows = [r.row() for r in rep.groups] + [rep.pooled.row()]
    rows.append(["verdict", rep.verdict, "", "", "", ""])
    return Table(list(rg.RESULT_HEADER), rows)


# --------------------------------------------------------------------------
# report


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_text(path: Path, text: str):
    with atomic_open(path) as fh:
        fh.write(text)


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return o.name
    raise TypeError(type(o).__name__)


def _clean(obj):
    """Replace NaN with None so the JSON stays strict."""
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def run_report(config: PipelineConfig, out_dir) -> dict:
    """Write every report file under ``out_dir`` and return the manifest."""
    out = Path(out_dir)
    p = Pipeline(config)
    written: list[Path] = []

    def put_table(rel, table: Table):
        path = out / rel
        _write_text(path, table.csv())
        written.append(path)

    p.join_report
    with stage("report"):
        out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "join_report.json", p.join_report.as_dict())
    written.append(out / "join_report.json")

    mt.write_metrics(p.city_metrics, out / "city_metrics.csv")
    written.append(out / "city_metrics.csv")
    for name in ("impact", "diversity", "rca", "proximity"):
        put_table(f"tables/{name}.csv", p.table(name))
    if p.distances is not None:
        put_table("tables/distance.csv", p.table("distance"))

    with stage("occspace"):
        written += oc.export_network(p.network, p.closeness, p.risk, out / "network.edgelist", "edgelist", p.labels)
        written += oc.export_network(p.network, p.closeness, p.risk, out / "network.json", "json", p.labels)
        written += oc.export_network(p.network, p.closeness, p.risk, out / "network.graphml", "graph-xml", p.labels)
        oc.write_overlays(p.overlays, out / "overlays.csv")
    written.append(out / "overlays.csv")

    with stage("structure"):
        st.write_groupings([p.premium, p.elite], out / "groupings.csv")
        written.append(out / "groupings.csv")
        if p.pca is not None:
            names = ("pca_loadings.csv", "pca_scores.csv", "pca_explained.csv")
            st.write_pca(p.pca, *(out / n for n in names))
            written += [out / n for n in names]

    scaling = Table(["code", "scheme", *rg.RESULT_HEADER])
    for scheme in (None, "premium", "elite"):
        scaling.rows += p.table("scaling", group=scheme).rows
    put_table("scaling_exponents.csv", scaling)

    for name, *_ in p.available_regressions():
        for scheme in (None, "premium", "elite"):
            tag = scheme or rg.POOLED
            put_table(f"regress/{name}__{tag}.csv", Table(list(rg.RESULT_HEADER), [r.row() for r in p.regression(name, scheme)]))
    put_table("regress/risk_vs_closeness__pooled.csv", Table(list(rg.RESULT_HEADER), [p.risk_vs_closeness.row()]))

    for name in SIMPSON_ANALYSES:
        for scheme in ("premium", "elite"):
            try:
                rep = p.simpson(name, scheme)
            except StageError as exc:
                log.warning("simpson %s/%s skipped: %s", name, scheme, exc)
                _write_json(out / f"simpson/{name}__{scheme}.json", {"spec": name, "error": str(exc.cause)})
            else:
                _write_json(out / f"simpson/{name}__{scheme}.json", _clean(rep.as_dict()))
                _write_text(out / f"simpson/{name}__{scheme}.csv", simpson_table(rep).csv())
                written.append(out / f"simpson/{name}__{scheme}.csv")
            written.append(out / f"simpson/{name}__{scheme}.json")

    inputs = {}
    for key in PATH_FIELDS:
        path = getattr(config, key)
        if path is not None:
            inputs[key] = {"file": Path(path).name, "sha256": _sha256(Path(path))}
    manifest = {
        "seed": config.seed,
        "parameters": config.parameters(),
        "inputs": inputs,
        "outputs": [
            {"file": f.relative_to(out).as_posix(), "sha256": _sha256(f)} for f in sorted(set(written))
        ],
    }
    _write_json(out / "manifest.json", manifest)
    log.info("report written to %s (%d files, backend %s)", out, len(written), BACKEND)
    return manifest


def run_crosswalk(config: PipelineConfig, out_dir) -> dict:
    out = Path(out_dir)
    p = Pipeline(config)
    matrix, overrides = p.crosswalk
    with stage("crosswalk"):
        out.mkdir(parents=True, exist_ok=True)
        cw.write_crosswalk(matrix, out / "crosswalk.csv", out / "crosswalk_tags.csv")
        pending = [t for t in matrix.pending if t not in set(overrides)]
        summary = {"targets": len(matrix.targets), "pending": pending, "overrides": list(overrides)}
        if config.source_risk is not None and not pending:
            ds.write_risk(p.transferred_risk, out / "risk.csv")
            summary["risk_file"] = "risk.csv"
    return summary


def asdict_result(r: rg.RegressionResult) -> dict:
    return _clean(asdict(r))
