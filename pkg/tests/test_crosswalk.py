import numpy as np
import pytest

from laborscape import crosswalk as cx
from laborscape.errors import MissingSourceRisk, RowNotPending, UnknownSourceId, UnresolvedRow


def votes(rows, sources=("s1", "s2", "s3", "s4")):
    return cx.VoteMatrix([f"t{i}" for i in range(len(rows))], list(sources), rows)


def test_threshold_keeps_two_of_four():
    cw, queue = cx.aggregate_votes(votes([[3, 2, 1, 0]]), threshold=2)
    assert cw.matches("t0") == ["s1", "s2"]
    assert queue == []
    assert cw.tags["t0"] == cx.CONSENSUS


def test_weak_rows_are_queued():
    cw, queue = cx.aggregate_votes(votes([[1, 1, 0, 1], [0, 3, 0, 0], [0, 0, 0, 0]]))
    assert queue == ["t0", "t2"]
    assert cw.pending == ["t0", "t2"]
    assert cw.matrix[0].sum() == 0


def test_resolve_and_errors():
    cw, _ = cx.aggregate_votes(votes([[1, 0, 0, 0], [2, 0, 0, 0]]))
    done = cx.resolve(cw, "t0", ["s3", "s4"])
    assert done.matches("t0") == ["s3", "s4"]
    assert done.tags["t0"] == cx.ADJUDICATED
    assert cw.tags["t0"] == cx.PENDING  # original untouched
    with pytest.raises(RowNotPending):
        cx.resolve(cw, "t1", ["s1"])
    with pytest.raises(UnknownSourceId):
        cx.resolve(cw, "t0", ["nope"])


def test_transfer_mean_and_override():
    cw, _ = cx.aggregate_votes(votes([[2, 3, 0, 0], [0, 0, 0, 0]]))
    risk = cx.transfer_risk(cw, {"s1": 0.8, "s2": 0.4}, zero_override=["t1"])
    assert risk["t0"] == pytest.approx(0.6, abs=1e-12)
    assert risk["t1"] == 0.0


def test_transfer_errors():
    cw, _ = cx.aggregate_votes(votes([[2, 0, 0, 0], [0, 0, 0, 0]]))
    with pytest.raises(UnresolvedRow):
        cx.transfer_risk(cw, {"s1": 0.5})
    with pytest.raises(MissingSourceRisk):
        cx.transfer_risk(cw, {}, zero_override=["t1"])


def test_override_tag_via_build():
    v = votes([[3, 0, 0, 0], [0, 1, 0, 0]])
    cw = cx.build_crosswalk(v, 2, adjudications={"t1": {"s2"}}, overrides=["t0"])
    assert cw.tags == {"t0": cx.OVERRIDE, "t1": cx.ADJUDICATED}
    risk = cx.transfer_risk(cw, {"s1": 0.9, "s2": 0.3})
    assert risk["t0"] == 0.0 and risk["t1"] == pytest.approx(0.3)


def test_vote_range_checked():
    with pytest.raises(ValueError):
        votes([[4, 0, 0, 0]])


def test_toy_files_round_trip(tmp_path, toy_dir):
    v = cx.load_votes(toy_dir / "votes.csv")
    adj = cx.load_adjudications(toy_dir / "adjudications.csv")
    over = cx.load_code_list(toy_dir / "zero_override.txt")
    cw = cx.build_crosswalk(v, 2, adj, over)
    assert cw.pending == []
    cx.write_crosswalk(cw, tmp_path / "cw.csv", tmp_path / "tags.csv")
    text = (tmp_path / "tags.csv").read_text()
    assert "1-01,override" in text
    assert "4-03,adjudicated" in text
    assert np.isin(cw.matrix, (0, 1)).all()
