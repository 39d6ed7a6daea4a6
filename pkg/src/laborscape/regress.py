"""Simple OLS, scaling exponents, grouped fits and Simpson's-paradox detection."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc

from . import kernels
from .dataset import write_csv
from .errors import NonPositiveUnderLog, TooFewPoints, ZeroVariance

POOLED = "pooled"
PARADOX = "PARADOX"
NO_PARADOX = "NO_PARADOX"


@dataclass(frozen=True)
class RegressionResult:
    group: str
    beta: float
    intercept: float
    p_value: float
    r_squared: float
    n: int
    stderr: float = math.nan
    note: str = ""

    @property
    def ok(self) -> bool:
        return not self.note

    def row(self):
        return [self.group, self.beta, self.intercept, self.p_value, self.r_squared, self.n]


RESULT_HEADER = ["group", "beta", "intercept", "p_value", "r_squared", "n"]


def t_two_sided(t: float, df: int) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom.

    Uses the regularised incomplete beta identity
    P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2).
    """
    if math.isinf(t):
        return 0.0
    if math.isnan(t):
        return 1.0
    x = df / (df + t * t)
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, x))))


def ols(xs, ys, group: str = POOLED) -> RegressionResult:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    n = x.size
    if n < 3:
        raise TooFewPoints(f"group {group!r}: need at least 3 points, got {n}")
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    if sxx <= 0 or not np.isfinite(sxx):
        raise ZeroVariance(f"group {group!r}: predictor has zero variance")
    beta = float(dx @ dy) / sxx
    intercept = float(ym - beta * xm)
    resid = y - (intercept + beta * x)
    sse = float(resid @ resid)
    sst = float(dy @ dy)
    df = n - 2
    if sst <= 0:
        # constant response: flat fit, nothing explained
        return RegressionResult(group, 0.0, float(ym), 1.0, 0.0, n, 0.0)
    r2 = min(1.0, max(0.0, 1.0 - sse / sst))
    se = math.sqrt(sse / df / sxx)
    if se == 0.0:
        p = 0.0 if beta != 0 else 1.0
    else:
        p = t_two_sided(beta / se, df)
    return RegressionResult(group, beta, intercept, p, r2, n, se)


def permutation_pvalue(xs, ys, n_draws: int = 1_000_000, seed: int = 0) -> float:
    """Two-sided Monte Carlo permutation p-value for the OLS slope."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.ascontiguousarray(ys, dtype=np.float64)
    xc = np.ascontiguousarray(x - x.mean())
    hits = kernels.permutation_kernel(xc, y, int(n_draws), int(seed))
    return hits / n_draws


# --------------------------------------------------------------------------
# specs over named per-city metrics


@dataclass(frozen=True)
class RegressionSpec:
    response: str
    predictor: str
    log_x: bool = False
    log_y: bool = False
    grouping: object | None = None  # structure.CityGrouping

    def __post_init__(self):
        if self.response == self.predictor:
            raise ValueError("response and predictor must differ")

    @property
    def label(self) -> str:
        x = f"log10({self.predictor})" if self.log_x else self.predictor
        y = f"log10({self.response})" if self.log_y else self.response
        return f"{y} ~ {x}"


def _column(data, name, cities, log):
    col = data[name]
    vals = np.array([float(col[c]) for c in cities], dtype=np.float64)
    if log:
        bad = np.flatnonzero(~(vals > 0))
        if bad.size:
            raise NonPositiveUnderLog(name, cities[bad[0]], vals[bad[0]])
        vals = np.log10(vals)
    return vals


def _cities_for(spec, data):
    """Sorted cities having both variables (and a group label, if grouped)."""
    for name in (spec.response, spec.predictor):
        if name not in data:
            raise KeyError(f"unknown variable {name!r}")
    common = set(data[spec.response]) & set(data[spec.predictor])
    common = {c for c in common if data[spec.response][c] is not None and data[spec.predictor][c] is not None}
    if spec.grouping is not None:
        common &= set(spec.grouping.labels)
    return sorted(common)


def _safe_ols(x, y, group):
    try:
        return ols(x, y, group)
    except (TooFewPoints, ZeroVariance) as exc:
        return RegressionResult(group, math.nan, math.nan, math.nan, math.nan, int(np.size(x)), note=f"{type(exc).__name__}: {exc}")


def fit(spec: RegressionSpec, data: Mapping[str, Mapping[str, float]]) -> list[RegressionResult]:
    """One result per group (sorted by label) followed by the pooled fit.

    Groups that cannot be fitted come back with NaN statistics and a
    ``note`` naming the error; the other groups are unaffected.
    """
    cities = _cities_for(spec, data)
    x = _column(data, spec.predictor, cities, spec.log_x)
    y = _column(data, spec.response, cities, spec.log_y)
    out = []
    if spec.grouping is not None:
        labels = np.array([spec.grouping.labels[c] for c in cities])
        for lab in sorted(set(spec.grouping.labels.values())):
            mask = labels == lab
            out.append(_safe_ols(x[mask], y[mask], lab))
    out.append(_safe_ols(x, y, POOLED) if spec.grouping is not None else ols(x, y, POOLED))
    return out


def scaling_exponent(city_sizes, occupation_counts, group: str = POOLED) -> RegressionResult:
    """Slope of log10(count) on log10(size) over the cities where the occupation is present."""
    sizes = np.asarray(city_sizes, dtype=np.float64)
    counts = np.asarray(occupation_counts, dtype=np.float64)
    if sizes.shape != counts.shape:
        raise ValueError("sizes and counts must align")
    present = counts > 0
    if (sizes[present] <= 0).any():
        raise NonPositiveUnderLog("size", group, float(sizes[present][sizes[present] <= 0][0]))
    if present.sum() < 3:
        raise TooFewPoints(f"occupation present in {int(present.sum())} cities; need 3")
    return ols(np.log10(sizes[present]), np.log10(counts[present]), group)


def scaling_table(emp, sizes, grouping=None) -> list[tuple[str, RegressionResult]]:
    """Scaling exponent per occupation (and per group when ``grouping`` is given)."""
    sizes = np.asarray(sizes, dtype=np.float64)
    cities = list(emp.cities)
    out = []
    if grouping is None:
        splits = [(POOLED, np.ones(len(cities), dtype=bool))]
    else:
        labs = np.array([grouping.labels.get(c, "") for c in cities])
        splits = [(lab, labs == lab) for lab in sorted(set(grouping.labels.values()))]
    for code in sorted(emp.codes):
        col = emp.column(code)
        for lab, mask in splits:
            try:
                res = scaling_exponent(sizes[mask], col[mask], lab)
            except (TooFewPoints, ZeroVariance) as exc:
                res = RegressionResult(lab, math.nan, math.nan, math.nan, math.nan, int((col[mask] > 0).sum()), note=f"{type(exc).__name__}: {exc}")
            out.append((code, res))
    return out


# --------------------------------------------------------------------------
# Simpson's paradox


@dataclass(frozen=True)
class SimpsonReport:
    spec_label: str
    pooled: RegressionResult
    groups: tuple[RegressionResult, ...]
    verdict: str
    reasons: tuple[str, ...]
    criteria: Mapping[str, object] = field(default_factory=dict)

    def as_dict(self):
        return {
            "spec": self.spec_label,
            "pooled": asdict(self.pooled),
            "groups": [asdict(g) for g in self.groups],
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "criteria": dict(self.criteria),
        }


def _sign(v):
    return 0 if v == 0 else (1 if v > 0 else -1)


def simpson_check(spec: RegressionSpec, data, significance: float = 0.05) -> SimpsonReport:
    """Flag a pooled null-or-reversed trend that hides opposite, significant group trends.

    PARADOX requires all of:
      * the pooled slope is insignificant, or its sign differs from both group slopes;
      * both group slopes are significant at ``significance``;
      * the two group slopes have opposite signs.
    """
    if spec.grouping is None:
        raise ValueError("simpson_check needs a grouping")
    results = fit(spec, data)
    groups, pooled = tuple(results[:-1]), results[-1]
    if len(groups) != 2:
        raise ValueError(f"need exactly 2 groups, got {len(groups)}")
    for g in groups:
        if not g.ok:
            raise TooFewPoints(g.note) if g.note.startswith("TooFewPoints") else ZeroVariance(g.note)
    a, b = groups
    pooled_hidden = pooled.p_value > significance or (
        _sign(pooled.beta) != _sign(a.beta) and _sign(pooled.beta) != _sign(b.beta)
    )
    both_sig = a.p_value < significance and b.p_value < significance
    opposite = _sign(a.beta) * _sign(b.beta) < 0
    reasons = []
    if not pooled_hidden:
        reasons.append(
            f"pooled slope {pooled.beta:.6g} is significant (p={pooled.p_value:.4g}) and agrees in sign with a group"
        )
    if not both_sig:
        weak = [g.group for g in groups if not g.p_value < significance]
        reasons.append(f"group slope(s) not significant at {significance}: {', '.join(weak)}")
    if not opposite:
        reasons.append(f"group slopes agree in sign ({a.beta:.6g}, {b.beta:.6g})")
    verdict = PARADOX if not reasons else NO_PARADOX
    if verdict == PARADOX:
        reasons = [
            f"pooled p={pooled.p_value:.4g}; {a.group} beta={a.beta:.6g} (p={a.p_value:.4g}); "
            f"{b.group} beta={b.beta:.6g} (p={b.p_value:.4g})"
        ]
    criteria = {
        "significance": significance,
        "pooled_condition": "pooled p > significance OR sign(pooled beta) differs from both group betas",
        "group_condition": "both group p < significance",
        "sign_condition": "group betas have opposite signs",
    }
    return SimpsonReport(spec.label, pooled, groups, verdict, tuple(reasons), criteria)


def write_results(results: Sequence[RegressionResult], path):
    write_csv(path, RESULT_HEADER, (r.row() for r in results))


__all__ = [
    "RegressionResult",
    "RegressionSpec",
    "SimpsonReport",
    "fit",
    "ols",
    "permutation_pvalue",
    "scaling_exponent",
    "scaling_table",
    "simpson_check",
    "t_two_sided",
]
