"""Multi-annotator occupation correspondence and transfer of risk scores.

Annotators each map a target occupation to any number of source
occupations. Per-pair vote counts are aggregated into a binary matrix:
pairs with at least ``threshold`` votes are kept; target rows where no pair
reaches the threshold go to a manual adjudication queue.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import RiskTable, _read_header, _rows, write_csv
from .errors import (
    DuplicateKey,
    MalformedRow,
    MissingSourceRisk,
    RowNotPending,
    UnknownSourceId,
    UnresolvedRow,
)

CONSENSUS = "consensus"
ADJUDICATED = "adjudicated"
OVERRIDE = "override"
PENDING = "pending"


@dataclass(frozen=True)
class VoteMatrix:
    targets: tuple[str, ...]
    sources: tuple[str, ...]
    votes: np.ndarray
    n_annotators: int = 3

    def __post_init__(self):
        votes = np.array(self.votes, dtype=np.int64)
        if votes.shape != (len(self.targets), len(self.sources)):
            raise ValueError(f"votes shape {votes.shape} != {len(self.targets)} x {len(self.sources)}")
        if votes.size and (votes.min() < 0 or votes.max() > self.n_annotators):
            raise ValueError(f"vote counts must lie in 0..{self.n_annotators}")
        votes.setflags(write=False)
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "votes", votes)


@dataclass(frozen=True)
class CrosswalkMatrix:
    targets: tuple[str, ...]
    sources: tuple[str, ...]
    matrix: np.ndarray
    tags: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.uint8)
        if m.shape != (len(self.targets), len(self.sources)):
            raise ValueError("matrix shape does not match targets x sources")
        if m.size and m.max() > 1:
            raise ValueError("crosswalk entries must be 0 or 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "tags", dict(self.tags))

    @property
    def pending(self) -> list[str]:
        return [t for t in self.targets if self.tags.get(t) == PENDING]

    def matches(self, target: str) -> list[str]:
        row = self.matrix[self.targets.index(target)]
        return [self.sources[k] for k in np.flatnonzero(row)]

    def with_overrides(self, ids: Iterable[str]) -> "CrosswalkMatrix":
        tags = dict(self.tags)
        for t in ids:
            if t not in tags:
                raise KeyError(f"unknown target occupation {t!r}")
            tags[t] = OVERRIDE
        return CrosswalkMatrix(self.targets, self.sources, self.matrix, tags)


def aggregate_votes(votes: VoteMatrix, threshold: int = 2) -> tuple[CrosswalkMatrix, list[str]]:
    """Binarise votes at ``threshold``; rows with no qualifying pair are queued."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    keep = votes.votes >= threshold
    tags = {}
    queue = []
    for j, target in enumerate(votes.targets):
        if keep[j].any():
            tags[target] = CONSENSUS
        else:
            tags[target] = PENDING
            queue.append(target)
    cw = CrosswalkMatrix(votes.targets, votes.sources, keep.astype(np.uint8), tags)
    return cw, queue


def resolve(crosswalk: CrosswalkMatrix, row_id: str, chosen: Iterable[str]) -> CrosswalkMatrix:
    """Record an adjudicated decision for one pending row."""
    chosen = set(chosen)
    if row_id not in crosswalk.targets:
        raise KeyError(f"unknown target occupation {row_id!r}")
    if crosswalk.tags.get(row_id) != PENDING:
        raise RowNotPending(f"{row_id!r} is tagged {crosswalk.tags.get(row_id)!r}, not pending")
    if not chosen:
        raise ValueError("at least one source occupation must be chosen")
    unknown = sorted(chosen - set(crosswalk.sources))
    if unknown:
        raise UnknownSourceId(f"unknown source occupation(s): {', '.join(unknown)}")
    m = crosswalk.matrix.copy()
    j = crosswalk.targets.index(row_id)
    m[j] = 0
    for k, s in enumerate(crosswalk.sources):
        if s in chosen:
            m[j, k] = 1
    tags = dict(crosswalk.tags)
    tags[row_id] = ADJUDICATED
    return CrosswalkMatrix(crosswalk.targets, crosswalk.sources, m, tags)


def transfer_risk(
    crosswalk: CrosswalkMatrix, source_risk: Mapping[str, float], zero_override: Iterable[str] = ()
) -> RiskTable:
    """Target risk = unweighted mean of the matched sources' risks; overrides get 0."""
    zero_override = set(zero_override)
    unknown = sorted(zero_override - set(crosswalk.targets))
    if unknown:
        raise KeyError(f"override list names unknown target(s): {', '.join(unknown)}")
    out = []
    for j, target in enumerate(crosswalk.targets):
        if target in zero_override or crosswalk.tags.get(target) == OVERRIDE:
            out.append((target, 0.0))
            continue
        idx = np.flatnonzero(crosswalk.matrix[j])
        if idx.size == 0:
            raise UnresolvedRow(f"{target!r} has no matched source occupation and no override")
        matched = [crosswalk.sources[k] for k in idx]
        missing = [s for s in matched if s not in source_risk]
        if missing:
            raise MissingSourceRisk(f"{target!r}: no risk for source(s) {', '.join(missing)}")
        out.append((target, float(np.mean([source_risk[s] for s in matched]))))
    return RiskTable(out)


# --------------------------------------------------------------------------
# file formats


def load_votes(path, n_annotators: int = 3) -> VoteMatrix:
    """Long format ``target_code,source_code,votes``; unlisted pairs have 0 votes."""
    path = Path(path)
    rows = _rows(path)
    _read_header(rows, path, ("target_code", "source_code", "votes"))
    targets: list[str] = []
    sources: list[str] = []
    cells: dict[tuple[str, str], int] = {}
    for line, fields in rows:
        if len(fields) != 3:
            raise MalformedRow(path, line, f"expected 3 fields, got {len(fields)}")
        t, s, raw = fields
        try:
            v = int(raw)
        except ValueError:
            raise MalformedRow(path, line, f"vote count {raw!r} is not an integer") from None
        if not 0 <= v <= n_annotators:
            raise MalformedRow(path, line, f"vote count {v} outside 0..{n_annotators}")
        if (t, s) in cells:
            raise DuplicateKey(f"{path}:{line}: pair ({t}, {s}) listed twice")
        cells[t, s] = v
        if t not in targets:
            targets.append(t)
        if s not in sources:
            sources.append(s)
    votes = np.zeros((len(targets), len(sources)), dtype=np.int64)
    for (t, s), v in cells.items():
        votes[targets.index(t), sources.index(s)] = v
    return VoteMatrix(tuple(targets), tuple(sources), votes, n_annotators)


def load_code_list(path) -> list[str]:
    """One code per line; blank lines and ``#`` comments ignored."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                out.append(line)
    return out


def load_adjudications(path) -> dict[str, set[str]]:
    """``target_code,source_code`` pairs chosen by hand for queued rows."""
    path = Path(path)
    rows = _rows(path)
    _read_header(rows, path, ("target_code", "source_code"))
    out: dict[str, set[str]] = {}
    for line, fields in rows:
        if len(fields) != 2:
            raise MalformedRow(path, line, f"expected 2 fields, got {len(fields)}")
        out.setdefault(fields[0], set()).add(fields[1])
    return out


def write_crosswalk(crosswalk: CrosswalkMatrix, path, tags_path):
    write_csv(
        path,
        ["target_code", "source_code"],
        ((crosswalk.targets[j], crosswalk.sources[k]) for j, k in np.argwhere(crosswalk.matrix == 1)),
    )
    write_csv(tags_path, ["target_code", "tag"], ((t, crosswalk.tags.get(t, PENDING)) for t in crosswalk.targets))


def build_crosswalk(
    votes: VoteMatrix,
    threshold: int = 2,
    adjudications: Mapping[str, Iterable[str]] | None = None,
    overrides: Sequence[str] = (),
) -> CrosswalkMatrix:
    """Aggregate, apply every adjudication, then tag overrides."""
    cw, _ = aggregate_votes(votes, threshold)
    for target, chosen in (adjudications or {}).items():
        cw = resolve(cw, target, chosen)
    return cw.with_overrides(overrides)
