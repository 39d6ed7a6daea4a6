"""The numba loop kernels and the numpy fallbacks must agree."""
import numpy as np
import pytest

from laborscape import kernels as k
from laborscape import occspace as oc


@pytest.mark.parametrize("seed", range(5))
def test_proximity_parity(seed):
    adv = (np.random.default_rng(seed).random((20, 15)) < 0.3).astype(np.uint8)
    np.testing.assert_allclose(k.proximity_loops(adv), k.proximity_numpy(adv), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_kruskal_parity(seed):
    rng = np.random.default_rng(seed)
    n = 12
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < 0.4
    src, dst = iu[keep].astype(np.int64), ju[keep].astype(np.int64)
    order = rng.permutation(src.size)
    src, dst = src[order], dst[order]
    a = np.asarray(k.kruskal_loops(src, dst, n), dtype=bool)
    b = np.asarray(k.kruskal_numpy(src, dst, n), dtype=bool)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("seed", range(5))
def test_closeness_parity(seed):
    rng = np.random.default_rng(seed)
    nodes = tuple(f"n{i:02d}" for i in range(25))
    edges = tuple(
        oc.Edge(a, b, 1.0, oc.MST) for i, a in enumerate(nodes) for b in nodes[i + 1:] if rng.random() < 0.08
    )
    indptr, indices = oc.OccupationNetwork(nodes, edges, 0.66).csr()
    np.testing.assert_allclose(
        k.closeness_loops(indptr, indices, len(nodes)), k.closeness_numpy(indptr, indices, len(nodes)), atol=1e-14
    )


def test_lloyd_parity():
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(0, 1, (30, 2)), rng.normal(4, 1, (30, 2))])
    init = pts[[0, 45]].copy()
    la, ca, sa = k.lloyd_loops(pts, init.copy(), 100)
    lb, cb, sb = k.lloyd_numpy(pts, init.copy(), 100)
    np.testing.assert_array_equal(la, lb)
    np.testing.assert_allclose(ca, cb, atol=1e-12)
    assert sa == pytest.approx(sb)


def test_permutation_backends_agree_statistically():
    rng = np.random.default_rng(9)
    x = rng.normal(size=25)
    y = 0.3 * x + rng.normal(size=25)
    xc = np.ascontiguousarray(x - x.mean())
    n = 100_000
    pa = k.permutation_loops(xc, y, n, 3) / n
    pb = k.permutation_numpy(xc, y, n, 3) / n
    assert pa == pytest.approx(pb, abs=0.01)
