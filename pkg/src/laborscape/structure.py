"""Industrial structure (PCA), resource-based clustering, admin grouping, distance to elite cities."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .dataset import CityAttributes, IndustryTable, _read_header, _rows, write_csv
from .errors import (
    DegenerateClustering,
    DegenerateData,
    MalformedRow,
    MissingCoordinates,
    MissingFeature,
    MissingFlag,
    OutOfRangeCoordinate,
)

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
PREMIUM, NON_PREMIUM = "premium", "non-premium"
ELITE, NON_ELITE = "elite", "non-elite"


@dataclass(frozen=True)
class PcaResult:
    components: np.ndarray  # (n_components, n_features), rows are unit loading vectors
    explained_ratio: np.ndarray
    scores: np.ndarray  # (n_samples, n_components)
    mean: np.ndarray
    features: tuple[str, ...] = ()
    samples: tuple[str, ...] = ()


@dataclass(frozen=True)
class CityGrouping:
    scheme: str
    labels: Mapping[str, str]
    centroids: Mapping[str, tuple] = field(default_factory=dict)

    @property
    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for city, lab in self.labels.items():
            out.setdefault(lab, []).append(city)
        return out

    def members(self, label: str) -> list[str]:
        return [c for c, lab in self.labels.items() if lab == label]


# --------------------------------------------------------------------------
# PCA


def pca(data, n_components: int | None = None, scale: bool = False) -> PcaResult:
    """Eigen-decomposition of the sample covariance (divisor n-1) of centred columns.

    Ties between equal eigenvalues keep column order. Each loading vector is
    signed so that its largest-magnitude entry is positive.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PCA needs a 2-D array with at least two rows")
    n, p = x.shape
    k = p if n_components is None else int(n_components)
    if not 1 <= k <= p:
        raise ValueError(f"n_components must be in 1..{p}")
    mean = x.mean(axis=0)
    xc = x - mean
    if scale:
        sd = xc.std(axis=0, ddof=1)
        xc = xc / np.where(sd > 0, sd, 1.0)
    cov = xc.T @ xc / (n - 1)
    total = float(np.trace(cov))
    if total <= 0:
        raise DegenerateData("every column has zero variance")
    vals, vecs = np.linalg.eigh(cov)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    # eigh returns ascending order; reversing flips ties, so restore column order within ties
    order = np.lexsort((np.argmax(np.abs(vecs), axis=0), -np.round(vals / total, 12)))
    vals, vecs = np.clip(vals[order], 0.0, None), vecs[:, order]
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(p)])
    vecs = vecs * np.where(signs == 0, 1.0, signs)
    components = vecs[:, :k].T.copy()
    return PcaResult(
        components=components,
        explained_ratio=vals[:k] / total,
        scores=xc @ components.T,
        mean=mean,
    )


def pca_industry(
    ind: IndustryTable,
    n_components: int = 2,
    sector_map: Mapping[str, str] | None = None,
    scale: bool = False,
) -> PcaResult:
    """PCA of city employment shares across industries."""
    if sector_map:
        ind = ind.aggregate(sector_map)
    counts = ind.counts.astype(np.float64)
    shares = counts / counts.sum(axis=1, keepdims=True)
    res = pca(shares, n_components, scale)
    return PcaResult(res.components, res.explained_ratio, res.scores, res.mean, ind.codes, ind.cities)


def write_pca(res: PcaResult, loadings_path, scores_path, explained_path):
    k = res.components.shape[0]
    pcs = [f"pc{i + 1}" for i in range(k)]
    write_csv(loadings_path, ["sector", *pcs], ([s, *res.components[:, j].tolist()] for j, s in enumerate(res.features)))
    write_csv(scores_path, ["city", *pcs], ([c, *res.scores[m].tolist()] for m, c in enumerate(res.samples)))
    write_csv(explained_path, ["pc", "ratio"], zip(pcs, res.explained_ratio.tolist()))


# --------------------------------------------------------------------------
# k-means


def _kmeans_pp(points, k, rng):
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min([((points - c) ** 2).sum(axis=1) for c in centers], axis=0)
        tot = d2.sum()
        idx = rng.integers(n) if tot <= 0 else rng.choice(n, p=d2 / tot)
        centers.append(points[idx])
    return np.array(centers, dtype=np.float64)


def kmeans(points, k: int = 2, seed: int = 0, n_init: int = 10, max_iter: int = 300):
    """Seeded k-means++ restarts of Lloyd's algorithm; keeps the lowest within-cluster SSE.

    Returns ``(labels, centroids, sse)``.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if len(np.unique(pts, axis=0)) < k:
        raise DegenerateClustering(f"fewer than {k} distinct points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        init = _kmeans_pp(pts, k, rng)
        labels, cent, sse = kernels.lloyd_kernel(pts, init, max_iter)
        if len(np.unique(labels)) < k:
            continue
        if best is None or sse < best[2]:
            best = (np.asarray(labels), np.asarray(cent), float(sse))
    if best is None:
        raise DegenerateClustering("every restart collapsed to fewer clusters")
    return best


def zscore(x):
    x = np.asarray(x, dtype=np.float64)
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def minmax(x):
    x = np.asarray(x, dtype=np.float64)
    lo, span = x.min(axis=0), np.ptp(x, axis=0)
    return (x - lo) / np.where(span > 0, span, 1.0)


def rescale(x, scaling: str = "minmax"):
    if scaling == "minmax":
        return minmax(x)
    if scaling == "zscore":
        return zscore(x)
    if scaling == "none":
        return np.asarray(x, dtype=np.float64)
    raise ValueError(f"unknown scaling {scaling!r}; use minmax, zscore or none")


def kmeans_premium(
    attrs: Sequence[CityAttributes],
    features: Sequence[str] = ("universities", "bullet_trains"),
    seed: int = 0,
    n_init: int = 10,
    scaling: str = "minmax",
) -> CityGrouping:
    """Two-way split on rescaled resource features.

    ``scaling`` is ``minmax`` (each feature mapped onto [0, 1]), ``zscore``
    or ``none``. The cluster whose centroid lies farther from the origin in
    the rescaled space is labelled premium. Cities are put in a canonical
    order before clustering, so the result does not depend on input order.
    """
    if len(attrs) < 2:
        raise ValueError("need at least two cities")
    rows = []
    for a in attrs:
        vals = []
        for f in features:
            v = getattr(a, f, None) if f in ("universities", "bullet_trains", "size") else a.extras.get(f)
            if v is None:
                raise MissingFeature(f"{a.city!r} has no value for {f!r}")
            vals.append(float(v))
        rows.append(vals)
    raw = np.array(rows)
    cities = [a.city for a in attrs]
    order = sorted(range(len(cities)), key=lambda m: (tuple(raw[m]), cities[m]))
    z = rescale(raw[order], scaling)
    labels, cent, _ = kmeans(z, 2, seed, n_init)
    premium_cluster = int(np.argmax(np.linalg.norm(cent, axis=1)))
    out = {}
    for pos, m in enumerate(order):
        out[cities[m]] = PREMIUM if labels[pos] == premium_cluster else NON_PREMIUM
    centroids = {
        PREMIUM: tuple(cent[premium_cluster].tolist()),
        NON_PREMIUM: tuple(cent[1 - premium_cluster].tolist()),
    }
    return CityGrouping("premium", {c: out[c] for c in cities}, centroids)


def group_by_admin(attrs: Sequence[CityAttributes]) -> CityGrouping:
    missing = [a.city for a in attrs if a.elite is None]
    if missing:
        raise MissingFlag(f"no elite flag for: {', '.join(missing)}")
    labels = {a.city: ELITE if a.elite else NON_ELITE for a in attrs}
    n_elite = sum(lab == ELITE for lab in labels.values())
    if n_elite in (0, len(labels)):
        log.warning("administrative grouping has an empty group (%d elite of %d)", n_elite, len(labels))
    return CityGrouping("elite", labels)


def write_groupings(groupings: Sequence[CityGrouping], path):
    write_csv(
        path,
        ["city", "scheme", "label"],
        ((c, g.scheme, lab) for g in groupings for c, lab in sorted(g.labels.items())),
    )


# --------------------------------------------------------------------------
# great-circle distance


def haversine(lat1, lon1, lat2, lon2, radius: float = EARTH_RADIUS_KM):
    """Great-circle distance in km; broadcasts over array inputs."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def distance_to_nearest_elite(
    attrs: Sequence[CityAttributes], elite_list: Sequence[tuple[float, float]]
) -> dict[str, float]:
    """Distance from each city to the closest entry of ``elite_list`` (which may lie outside the data)."""
    if not elite_list:
        raise ValueError("elite coordinate list is empty")
    missing = [a.city for a in attrs if not a.has_coordinates]
    if missing:
        raise MissingCoordinates(f"no coordinates for: {', '.join(missing)}")
    elite = np.asarray(elite_list, dtype=np.float64)
    lat = np.array([a.lat for a in attrs])[:, None]
    lon = np.array([a.lon for a in attrs])[:, None]
    d = haversine(lat, lon, elite[None, :, 0], elite[None, :, 1]).min(axis=1)
    return {a.city: float(v) for a, v in zip(attrs, d)}


def load_elite_coordinates(path) -> list[tuple[str, float, float]]:
    path = Path(path)
    rows = _rows(path)
    _read_header(rows, path, ("name", "lat", "lon"))
    out = []
    for line, fields in rows:
        if len(fields) != 3:
            raise MalformedRow(path, line, f"expected 3 fields, got {len(fields)}")
        try:
            lat, lon = float(fields[1]), float(fields[2])
        except ValueError:
            raise MalformedRow(path, line, "latitude/longitude must be numbers") from None
        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
            raise OutOfRangeCoordinate(f"{path}:{line}: ({lat}, {lon}) out of range")
        out.append((fields[0], lat, lon))
    return out


def load_sector_map(path) -> dict[str, str]:
    """``subsector,sector`` rows folding fine industry codes into PCA sectors."""
    path = Path(path)
    rows = _rows(path)
    _read_header(rows, path, ("subsector", "sector"))
    return {fields[0]: fields[1] for _, fields in rows}


def write_distances(dist: Mapping[str, float], path):
    write_csv(path, ["city", "distance_km"], sorted(dist.items()))
