"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest, or directly with ``python tests/test_acceptance.py`` for
just the summary lines.
"""
import itertools
import json
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from laborscape import crosswalk as cx
from laborscape import dataset as ds
from laborscape import metrics as mt
from laborscape import occspace as oc
from laborscape import reference
from laborscape import regress as rg
from laborscape import structure as st
from laborscape.metrics import RcaMatrix


class Check:
    def __init__(self):
        self.failures = []
        self.notes = []

    def expect(self, cond, what):
        if not cond:
            self.failures.append(what)

    def note(self, text):
        self.notes.append(text)


def _line(num, title, chk, elapsed):
    status = "PASS" if not chk.failures else "FAIL"
    detail = "; ".join(chk.failures) if chk.failures else "; ".join(chk.notes)
    return f"[{status}] criterion {num:>2} {title} ({elapsed:.2f}s){': ' + detail if detail else ''}"


# --------------------------------------------------------------------------


def c01_entropy(chk):
    worst = max(abs(mt.normalized_entropy(np.full(n, 7)) - 1.0) for n in range(2, 101))
    chk.expect(worst <= 1e-12, f"uniform max |H-1| = {worst:.3g}")
    chk.expect(mt.normalized_entropy([42]) == 0.0, "single category != 0")
    h = mt.normalized_entropy([3, 1])
    chk.expect(abs(h - 0.8113) <= 1e-4, f"H(3,1) = {h:.6f}")
    chk.note(f"max |H-1| = {worst:.1e}, H(3,1) = {h:.6f}")
    return 1.0


def c02_rca_identity(chk):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        m, n = rng.integers(2, 9), rng.integers(2, 9)
        counts = rng.integers(0, 50, size=(m, n)) * (rng.random((m, n)) < 0.7)
        counts[:, 0] += 1  # no empty cities
        emp = ds.EmploymentTable([f"c{i}" for i in range(m)], [f"o{j}" for j in range(n)], counts)
        x = counts.astype(float)
        total = (x.sum(axis=1) / x.sum()) @ mt.rca(emp).values
        pos = x.sum(axis=0) > 0
        worst = max(worst, float(np.abs(total[pos] - 1).max()))
    chk.expect(worst <= 1e-9, f"max deviation {worst:.3g}")
    chk.note(f"50 tables, max |sum-1| = {worst:.1e}")
    return 1.0


def _prufer_trees(n):
    if n == 2:
        return np.array([[[0, 1]]])
    out = []
    for seq in itertools.product(range(n), repeat=n - 2):
        deg = [1] * n
        for v in seq:
            deg[v] += 1
        edges = []
        for v in seq:
            leaf = deg.index(1)
            edges.append((leaf, v))
            deg[leaf] -= 1
            deg[v] -= 1
        edges.append(tuple(i for i in range(n) if deg[i] == 1))
        out.append(edges)
    return np.array(out)


def _phi_by_sets(adv):
    n = adv.shape[1]
    sets = [set(np.flatnonzero(adv[:, i])) for i in range(n)]
    phi = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        big = max(len(sets[i]), len(sets[j]))
        if big:
            phi[i, j] = phi[j, i] = len(sets[i] & sets[j]) / big
    return phi


def c03_mst_oracle(chk):
    trees = {n: _prufer_trees(n) for n in range(2, 8)}
    rng = np.random.default_rng(3)
    bad_phi = bad_mst = 0
    for _ in range(200):
        n_occ = int(rng.integers(2, 8))
        n_cities = int(rng.integers(2, 12))
        adv = (rng.random((n_cities, n_occ)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
        rca = RcaMatrix([f"c{i}" for i in range(n_cities)], [f"o{j}" for j in range(n_occ)], adv.astype(float))
        prox = oc.proximity(rca)
        if not np.allclose(prox.values, _phi_by_sets(adv), atol=1e-12, rtol=0):
            bad_phi += 1
        net = oc.build_network(prox, threshold=1.0)
        got = sum(e.weight for e in net.edges if e.tag == oc.MST)
        t = trees[n_occ]
        # absent pairs weigh 0, so the best spanning tree of K_n equals the best forest
        best = prox.values[t[..., 0], t[..., 1]].sum(axis=1).max()
        if abs(got - best) > 1e-12:
            bad_mst += 1
    chk.expect(bad_phi == 0, f"{bad_phi}/200 proximity mismatches")
    chk.expect(bad_mst == 0, f"{bad_mst}/200 spanning-tree weight mismatches")
    chk.note("200 trials, proximity and tree weight exact")
    return 30.0


def c04_ols(chk):
    x = np.linspace(0.5, 9.5, 19)
    worst = 0.0
    for beta, alpha in [(2.5, -1.0), (-0.37, 4.2), (1e-3, 0.0), (12.0, 100.0)]:
        r = rg.ols(x, alpha + beta * x)
        worst = max(worst, abs(r.beta - beta), abs(r.intercept - alpha))
    chk.expect(worst <= 1e-9, f"planted slope error {worst:.3g}")
    rng = np.random.default_rng(4)
    xs = rng.normal(size=25)
    ys = 0.3 * xs + rng.normal(size=25)
    p_t = rg.ols(xs, ys).p_value
    p_perm = rg.permutation_pvalue(xs, ys, n_draws=1_000_000, seed=4)
    chk.expect(abs(p_t - p_perm) <= 0.01, f"t p={p_t:.4f} vs permutation p={p_perm:.4f}")
    chk.note(f"slope err {worst:.1e}; t p={p_t:.4f}, permutation p={p_perm:.4f}")
    return 60.0


def c05_scaling(chk):
    sizes = np.geomspace(2e4, 3e7, 40)
    errs = []
    for beta in (0.8, 1.0, 1.2):
        r = rg.scaling_exponent(sizes, sizes**beta)
        errs.append(abs(r.beta - beta))
    chk.expect(max(errs) <= 1e-9, f"exponent errors {errs}")
    chk.note(f"max exponent error {max(errs):.1e}")
    return None


def simpson_fixture():
    rng = np.random.default_rng(6)
    x = np.tile(np.linspace(1, 20, 20), 2)
    slope = np.r_[np.full(20, 0.05), np.full(20, -0.05)]
    y = 0.8 + slope * (x - x.mean()) + rng.normal(0, 0.03, 40)
    cities = [f"city{i:02d}" for i in range(40)]
    grouping = st.CityGrouping("fixture", {c: ("A" if i < 20 else "B") for i, c in enumerate(cities)})
    data = {"impact": dict(zip(cities, y)), "size": dict(zip(cities, x))}
    return rg.RegressionSpec("impact", "size", grouping=grouping), data


def c06_simpson(chk):
    spec, data = simpson_fixture()
    rep = rg.simpson_check(spec, data, 0.05)
    chk.expect(rep.verdict == rg.PARADOX, f"verdict {rep.verdict}: {'; '.join(rep.reasons)}")
    chk.expect(rep.pooled.p_value > 0.05, f"pooled p={rep.pooled.p_value:.3g}")
    for g in rep.groups:
        chk.expect(g.p_value < 0.05, f"group {g.group} p={g.p_value:.3g}")
    slopes = "; ".join(f"{g.group} beta={g.beta:.4f} p={g.p_value:.1e}" for g in rep.groups)
    chk.note(f"pooled beta={rep.pooled.beta:.4f} p={rep.pooled.p_value:.2f}; {slopes}")
    return None


def c07_pca(chk):
    x = np.random.default_rng(7).normal(size=(40, 5))
    full = st.pca(x)
    s = float(full.explained_ratio.sum())
    chk.expect(abs(s - 1) <= 1e-9, f"ratio sum {s!r}")
    recon = float(np.abs(full.scores @ full.components + full.mean - x).max())
    chk.expect(recon < 1e-9, f"reconstruction error {recon:.3g}")
    t = np.linspace(-2, 3, 9)
    r1 = st.pca(np.column_stack([t, -3 * t]))
    chk.expect(np.allclose(r1.explained_ratio, [1.0, 0.0], atol=1e-12), f"rank-1 ratios {r1.explained_ratio}")
    sym = st.pca(np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]]))
    chk.expect(np.allclose(sym.explained_ratio, [0.5, 0.5], atol=1e-12), f"symmetric ratios {sym.explained_ratio}")
    chk.note(f"sum={s:.15f}, reconstruction {recon:.1e}")
    return None


def c08_reference(chk):
    summ = reference.summary()
    mean = summ["mean_impact_rate"]
    chk.expect(0.75 <= mean <= 0.80, f"mean impact {mean:.4f}")
    chk.expect(summ["impact_pct"]["Beijing"] == "63.83", f"Beijing {summ['impact_pct']['Beijing']}")
    chk.expect(summ["n_elite"] == 19, f"{summ['n_elite']} elite cities flagged in the shipped table, expected 19")
    chk.note(f"mean {mean:.4f}, Beijing 63.83, {summ['n_elite']} elite")
    return None


def c09_crosswalk(chk):
    votes = cx.VoteMatrix(["t0", "t1", "t2"], ["s1", "s2", "s3", "s4"], [[3, 2, 1, 0], [1, 1, 0, 1], [0, 0, 0, 0]])
    cw, queue = cx.aggregate_votes(votes, threshold=2)
    chk.expect(cw.matches("t0") == ["s1", "s2"], f"kept {cw.matches('t0')}")
    chk.expect(queue == ["t1", "t2"], f"queue {queue}")
    cw = cx.resolve(cw, "t1", ["s3"])
    risk = cx.transfer_risk(cw, {"s1": 0.8, "s2": 0.4, "s3": 0.9}, zero_override=["t2"])
    chk.expect(abs(risk["t0"] - 0.6) < 1e-12, f"transfer {risk['t0']}")
    chk.expect(risk["t2"] == 0.0, f"override {risk['t2']}")
    chk.note("2 kept, weak rows queued, mean 0.6, override 0.0")
    return None


def c10_determinism(chk):
    with tempfile.TemporaryDirectory() as tmp:
        digests = []
        t0 = time.perf_counter()
        for run in ("a", "b"):
            out = Path(tmp) / run
            proc = subprocess.run(
                [sys.executable, "-m", "laborscape.cli", "report", "--out", str(out)],
                capture_output=True,
                text=True,
            )
            if proc.returncode != 0:
                chk.expect(False, f"report exited {proc.returncode}: {proc.stderr.strip()}")
                return 10.0
            digests.append((out / "manifest.json").read_bytes())
        elapsed = time.perf_counter() - t0
        n_files = len(json.loads(digests[0])["outputs"])
    chk.expect(digests[0] == digests[1], "manifests differ")
    chk.note(f"{n_files} outputs, identical manifests, two runs in {elapsed:.2f}s")
    return 10.0


def c11_centrality_risk(chk):
    core = [f"C{i}" for i in range(4)]
    edges = list(zip(core, core[1:]))  # core is a chain, so closeness varies along it
    leaves = []
    for i, c in enumerate(core):
        for k in range(2 + i % 2):
            leaf = f"P{i}{k}"
            leaves.append(leaf)
            edges.append((c, leaf))
    nodes = tuple(sorted(core + leaves))
    net = oc.OccupationNetwork(nodes, tuple(oc.Edge(*sorted(e), 1.0, oc.MST) for e in edges), 0.66)
    close = oc.closeness(net)
    risk = {c: 0.2 for c in core} | {p: 0.9 for p in leaves}
    r = rg.ols([close[c] for c in nodes], [risk[c] for c in nodes])
    chk.expect(r.beta < 0, f"beta {r.beta:.4f}")
    chk.expect(r.p_value < 0.05, f"p {r.p_value:.3g}")
    chk.note(f"beta={r.beta:.3f}, p={r.p_value:.2e}")
    return None


CRITERIA = [
    (1, "entropy suite", c01_entropy),
    (2, "RCA identity", c02_rca_identity),
    (3, "proximity / spanning-tree oracle", c03_mst_oracle),
    (4, "OLS exactness and permutation p-value", c04_ols),
    (5, "scaling exponents", c05_scaling),
    (6, "Simpson detection", c06_simpson),
    (7, "PCA", c07_pca),
    (8, "reference table check", c08_reference),
    (9, "crosswalk", c09_crosswalk),
    (10, "end-to-end determinism", c10_determinism),
    (11, "centrality-risk direction", c11_centrality_risk),
]


def run_one(num, title, fn):
    chk = Check()
    t0 = time.perf_counter()
    budget = fn(chk)
    elapsed = time.perf_counter() - t0
    if budget is not None and elapsed >= budget:
        chk.failures.append(f"took {elapsed:.1f}s, budget {budget:.0f}s")
    return chk, _line(num, title, chk, elapsed)


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"criterion_{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(num, title, fn, capsys):
    chk, line = run_one(num, title, fn)
    with capsys.disabled():
        print("\n" + line)
    assert not chk.failures, line


if __name__ == "__main__":
    failed = 0
    for num, title, fn in CRITERIA:
        chk, line = run_one(num, title, fn)
        print(line, flush=True)
        failed += bool(chk.failures)
    sys.exit(1 if failed else 0)
