"""Occupation space: proximity, maximum-spanning-tree backbone, closeness, city overlays."""
from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from ._io import atomic_open, fmt_float
from .dataset import write_csv
from .errors import NoAdvantagedOccupations
from .metrics import RcaMatrix

MST = "mst"
THRESHOLD = "threshold"


class ProximityMatrix:
    def __init__(self, codes: Sequence[str], values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(codes), len(codes)):
            raise ValueError("proximity matrix must be square over the occupation codes")
        values.setflags(write=False)
        self.codes = tuple(codes)
        self.values = values

    def __repr__(self):
        return f"ProximityMatrix({len(self.codes)} occupations)"

    def __getitem__(self, pair):
        i, j = (self.codes.index(c) for c in pair)
        return float(self.values[i, j])

    def long_rows(self):
        """Upper triangle, positive entries only."""
        n = len(self.codes)
        for i in range(n):
            for j in range(i + 1, n):
                if self.values[i, j] > 0:
                    yield self.codes[i], self.codes[j], float(self.values[i, j])


class Edge(NamedTuple):
    src: str
    dst: str
    weight: float
    tag: str


@dataclass(frozen=True)
class OccupationNetwork:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    threshold: float

    def __repr__(self):
        n_mst = sum(e.tag == MST for e in self.edges)
        return f"OccupationNetwork({len(self.nodes)} nodes, {n_mst} mst + {len(self.edges) - n_mst} threshold edges)"

    def csr(self):
        """Undirected adjacency as (indptr, indices) over ``nodes`` order."""
        index = {c: i for i, c in enumerate(self.nodes)}
        n = len(self.nodes)
        src = np.array([index[e.src] for e in self.edges] + [index[e.dst] for e in self.edges], dtype=np.int64)
        dst = np.array([index[e.dst] for e in self.edges] + [index[e.src] for e in self.edges], dtype=np.int64)
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst

    def degree(self) -> dict[str, int]:
        deg = dict.fromkeys(self.nodes, 0)
        for e in self.edges:
            deg[e.src] += 1
            deg[e.dst] += 1
        return deg


@dataclass(frozen=True)
class CityOverlay:
    city: str
    advantaged: frozenset
    position: float


def proximity(rca: RcaMatrix, advantage_cutoff: float = 1.0) -> ProximityMatrix:
    """Minimum of the two conditional probabilities of joint advantage."""
    adv = np.ascontiguousarray(rca.values >= advantage_cutoff, dtype=np.uint8)
    return ProximityMatrix(rca.codes, kernels.proximity_kernel(adv))


def _ranked_pairs(prox: ProximityMatrix):
    """Positive-proximity pairs, strongest first, ties broken by code pair."""
    iu, ju = np.triu_indices(len(prox.codes), k=1)
    w = prox.values[iu, ju]
    pos = w > 0
    iu, ju, w = iu[pos], ju[pos], w[pos]
    rank = np.empty(len(prox.codes), dtype=np.int64)
    rank[np.argsort(np.array(prox.codes, dtype=object), kind="stable")] = np.arange(len(prox.codes))
    ri, rj = rank[iu], rank[ju]
    order = np.lexsort((np.maximum(ri, rj), np.minimum(ri, rj), -w))
    return iu[order], ju[order], w[order]


def build_network(prox: ProximityMatrix, threshold: float = 0.66) -> OccupationNetwork:
    """Maximum spanning forest of the positive-proximity graph plus every pair above ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    iu, ju, w = _ranked_pairs(prox)
    keep = kernels.kruskal_kernel(iu.astype(np.int64), ju.astype(np.int64), len(prox.codes))
    edges = []
    for i, j, weight, in_tree in zip(iu.tolist(), ju.tolist(), w.tolist(), keep.tolist()):
        if in_tree or weight > threshold:
            a, b = sorted((prox.codes[i], prox.codes[j]))
            edges.append(Edge(a, b, weight, MST if in_tree else THRESHOLD))
    edges.sort(key=lambda e: (e.src, e.dst))
    return OccupationNetwork(prox.codes, tuple(edges), threshold)


def closeness(net: OccupationNetwork) -> dict[str, float]:
    """Wasserman-Faust closeness on the unweighted network; isolated nodes get 0."""
    indptr, indices = net.csr()
    values = kernels.closeness_kernel(indptr, indices, len(net.nodes))
    return {c: float(v) for c, v in zip(net.nodes, values)}


def overlay(
    net: OccupationNetwork,
    rca: RcaMatrix,
    closeness_map: Mapping[str, float],
    city: str,
    advantage_cutoff: float = 1.0,
) -> CityOverlay:
    """Mean closeness of the occupations in which ``city`` holds an advantage."""
    if city not in rca.cities:
        raise KeyError(f"unknown city {city!r}")
    nodes = set(net.nodes)
    advantaged = frozenset(c for c in rca.advantaged(city, advantage_cutoff) if c in nodes)
    if not advantaged:
        raise NoAdvantagedOccupations(f"{city!r} has no occupation with RCA >= {advantage_cutoff}")
    position = float(np.mean([closeness_map[c] for c in sorted(advantaged)]))
    return CityOverlay(city, advantaged, position)


def overlays(net, rca, closeness_map, advantage_cutoff=1.0) -> list[CityOverlay]:
    return [overlay(net, rca, closeness_map, c, advantage_cutoff) for c in rca.cities]


# --------------------------------------------------------------------------
# export


def _node_records(net, closeness_map, risk, labels):
    labels = labels or {}
    for code in net.nodes:
        yield {
            "code": code,
            "label": labels.get(code, code),
            "closeness": float(closeness_map.get(code, 0.0)),
            "risk": None if risk is None or code not in risk else float(risk[code]),
        }


def _fmt_float(x):
    return "" if x is None else fmt_float(x)


def nodes_sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".nodes.csv")


def export_network(
    net: OccupationNetwork,
    closeness_map: Mapping[str, float],
    risk: Mapping[str, float] | None,
    path,
    format: str = "edgelist",
    labels: Mapping[str, str] | None = None,
) -> list[Path]:
    """Write the network; returns every file written.

    ``edgelist`` writes ``src dst weight tag`` lines plus a
    ``<stem>.nodes.csv`` sidecar; ``json`` and ``graph-xml`` (GraphML) are
    single self-contained documents.
    """
    path = Path(path)
    nodes = list(_node_records(net, closeness_map, risk, labels))
    if format == "edgelist":
        with atomic_open(path) as fh:
            for e in net.edges:
                fh.write(f"{e.src} {e.dst} {fmt_float(e.weight)} {e.tag}\n")
        side = nodes_sidecar_path(path)
        write_csv(
            side,
            ["code", "label", "closeness", "risk"],
            ([n["code"], n["label"], _fmt_float(n["closeness"]), _fmt_float(n["risk"])] for n in nodes),
        )
        return [path, side]
    if format == "json":
        doc = {
            "nodes": nodes,
            "edges": [{"source": e.src, "target": e.dst, "weight": e.weight, "tag": e.tag} for e in net.edges],
        }
        with atomic_open(path) as fh:
            json.dump(doc, fh, indent=2, ensure_ascii=False)
            fh.write("\n")
        return [path]
    if format == "graph-xml":
        root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
        for key, target, name, typ in (
            ("d0", "node", "label", "string"),
            ("d1", "node", "closeness", "double"),
            ("d2", "node", "risk", "double"),
            ("d3", "edge", "weight", "double"),
            ("d4", "edge", "tag", "string"),
        ):
            ET.SubElement(root, "key", {"id": key, "for": target, "attr.name": name, "attr.type": typ})
        graph = ET.SubElement(root, "graph", id="occupation_space", edgedefault="undirected")
        for n in nodes:
            el = ET.SubElement(graph, "node", id=n["code"])
            ET.SubElement(el, "data", key="d0").text = n["label"]
            ET.SubElement(el, "data", key="d1").text = fmt_float(n["closeness"])
            if n["risk"] is not None:
                ET.SubElement(el, "data", key="d2").text = fmt_float(n["risk"])
        for e in net.edges:
            el = ET.SubElement(graph, "edge", source=e.src, target=e.dst)
            ET.SubElement(el, "data", key="d3").text = fmt_float(e.weight)
            ET.SubElement(el, "data", key="d4").text = e.tag
        ET.indent(root)
        with atomic_open(path, "wb") as fh:
            ET.ElementTree(root).write(fh, encoding="utf-8", xml_declaration=True)
        return [path]
    raise ValueError(f"unknown export format {format!r}; use edgelist, json or graph-xml")


def write_overlays(items: Sequence[CityOverlay], path):
    write_csv(path, ["city", "position", "n_advantaged"], ((o.city, o.position, len(o.advantaged)) for o in items))


def write_proximity(prox: ProximityMatrix, path):
    write_csv(path, ["code_i", "code_j", "phi"], prox.long_rows())
