"""Hot inner loops, each with a numba version and a pure-numpy version.

The public names at the bottom of this module are bound to whichever
backend ``_accel`` selected. Both versions are always importable
(``*_loops`` / ``*_numpy``) so the test-suite and the benchmark can compare
them side by side.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

# --------------------------------------------------------------------------
# proximity: co-occurrence of advantage across cities


def _proximity_loops_py(adv):
    n_cities, n_occ = adv.shape
    ubiquity = np.zeros(n_occ, dtype=np.int64)
    for m in range(n_cities):
        for i in range(n_occ):
            if adv[m, i]:
                ubiquity[i] += 1
    phi = np.zeros((n_occ, n_occ), dtype=np.float64)
    for i in range(n_occ):
        if ubiquity[i] == 0:
            continue
        for j in range(i + 1, n_occ):
            if ubiquity[j] == 0:
                continue
            both = 0
            for m in range(n_cities):
                if adv[m, i] and adv[m, j]:
                    both += 1
            larger = ubiquity[i] if ubiquity[i] > ubiquity[j] else ubiquity[j]
            v = both / larger
            phi[i, j] = v
            phi[j, i] = v
    return phi


def proximity_numpy(adv):
    """phi[i, j] = |C_i & C_j| / max(|C_i|, |C_j|), zero diagonal."""
    a = np.ascontiguousarray(adv, dtype=np.float64)
    both = a.T @ a
    ubiquity = np.diag(both).copy()
    larger = np.maximum.outer(ubiquity, ubiquity)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(larger > 0, both / np.where(larger > 0, larger, 1.0), 0.0)
    np.fill_diagonal(phi, 0.0)
    return phi


# --------------------------------------------------------------------------
# Kruskal edge selection over a pre-sorted edge list


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def _kruskal_loops_py(src, dst, n_nodes):
    parent = np.arange(n_nodes)
    rank = np.zeros(n_nodes, dtype=np.int64)
    keep = np.zeros(src.shape[0], dtype=np.bool_)
    for e in range(src.shape[0]):
        a = _find(parent, src[e])
        b = _find(parent, dst[e])
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        keep[e] = True
    return keep


def kruskal_numpy(src, dst, n_nodes):
    # union-find is inherently sequential; this is the interpreted fallback
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    keep = np.zeros(len(src), dtype=bool)
    for e, (u, v) in enumerate(zip(src.tolist(), dst.tolist())):
        a, b = find(u), find(v)
        if a != b:
            parent[max(a, b)] = min(a, b)
            keep[e] = True
    return keep


# --------------------------------------------------------------------------
# closeness centrality (Wasserman-Faust) by BFS on a CSR adjacency


def _closeness_loops_py(indptr, indices, n_nodes):
    out = np.zeros(n_nodes, dtype=np.float64)
    if n_nodes < 2:
        return out
    dist = np.empty(n_nodes, dtype=np.int64)
    queue = np.empty(n_nodes, dtype=np.int64)
    for s in range(n_nodes):
        dist[:] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        total = 0
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    total += dist[u]
                    queue[tail] = u
                    tail += 1
        reach = tail - 1
        if total > 0:
            out[s] = (reach / (n_nodes - 1)) * (reach / total)
    return out


def closeness_numpy(indptr, indices, n_nodes):
    """All-sources BFS done as boolean frontier expansion on a dense matrix."""
    out = np.zeros(n_nodes, dtype=np.float64)
    if n_nodes < 2:
        return out
    adj = np.zeros((n_nodes, n_nodes), dtype=np.float64)
    rows = np.repeat(np.arange(n_nodes), np.diff(indptr))
    adj[rows, indices] = 1.0
    reached = np.eye(n_nodes, dtype=bool)
    frontier = reached.astype(np.float64)
    total = np.zeros(n_nodes, dtype=np.int64)
    depth = 0
    while frontier.any():
        depth += 1
        nxt = ((frontier @ adj) > 0) & ~reached
        total += depth * nxt.sum(axis=1)
        reached |= nxt
        frontier = nxt.astype(np.float64)
    reach = reached.sum(axis=1) - 1
    ok = total > 0
    out[ok] = (reach[ok] / (n_nodes - 1)) * (reach[ok] / total[ok])
    return out


# --------------------------------------------------------------------------
# permutation null for an OLS slope


def _permutation_loops_py(xc, y, n_draws, seed):
    # the slope is proportional to sum(xc * y) because xc is centred
    np.random.seed(seed)
    n = xc.shape[0]
    obs = 0.0
    for i in range(n):
        obs += xc[i] * y[i]
    obs = abs(obs)
    tol = 1e-12 * (abs(obs) + 1.0)
    perm = y.copy()
    hits = 0
    for _ in range(n_draws):
        for i in range(n - 1, 0, -1):
            j = np.random.randint(0, i + 1)
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        s = 0.0
        for i in range(n):
            s += xc[i] * perm[i]
        if abs(s) >= obs - tol:
            hits += 1
    return hits


def permutation_numpy(xc, y, n_draws, seed, chunk=50_000):
    rng = np.random.default_rng(seed)
    obs = abs(float(xc @ y))
    tol = 1e-12 * (obs + 1.0)
    hits = 0
    done = 0
    while done < n_draws:
        size = min(chunk, n_draws - done)
        perms = rng.permuted(np.broadcast_to(y, (size, y.shape[0])), axis=1)
        hits += int(np.count_nonzero(np.abs(perms @ xc) >= obs - tol))
        done += size
    return hits


# --------------------------------------------------------------------------
# Lloyd iterations for k-means from a given initialisation


def _lloyd_loops_py(points, centroids, max_iter):
    n, d = points.shape
    k = centroids.shape[0]
    cent = centroids.copy()
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        changed = False
        for p in range(n):
            best = -1
            best_d = np.inf
            for c in range(k):
                acc = 0.0
                for f in range(d):
                    diff = points[p, f] - cent[c, f]
                    acc += diff * diff
                if acc < best_d:
                    best_d = acc
                    best = c
            if labels[p] != best:
                labels[p] = best
                changed = True
        for c in range(k):
            cnt = 0
            acc_c = np.zeros(d)
            for p in range(n):
                if labels[p] == c:
                    cnt += 1
                    for f in range(d):
                        acc_c[f] += points[p, f]
            if cnt > 0:
                for f in range(d):
                    cent[c, f] = acc_c[f] / cnt
        if not changed:
            break
    sse = 0.0
    for p in range(n):
        for f in range(d):
            diff = points[p, f] - cent[labels[p], f]
            sse += diff * diff
    return labels, cent, sse


def lloyd_numpy(points, centroids, max_iter):
    cent = centroids.astype(np.float64).copy()
    labels = np.full(points.shape[0], -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - cent[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        changed = not np.array_equal(new, labels)
        labels = new
        for c in range(cent.shape[0]):
            members = points[labels == c]
            if len(members):
                cent[c] = members.sum(axis=0) / len(members)
        if not changed:
            break
    sse = float(((points - cent[labels]) ** 2).sum())
    return labels, cent, sse


# --------------------------------------------------------------------------
# backend binding

if HAVE_NUMBA:
    _find = njit(cache=True)(_find)
    proximity_loops = njit(cache=True)(_proximity_loops_py)
    kruskal_loops = njit(cache=True)(_kruskal_loops_py)
    closeness_loops = njit(cache=True)(_closeness_loops_py)
    permutation_loops = njit(cache=True)(_permutation_loops_py)
    lloyd_loops = njit(cache=True)(_lloyd_loops_py)

    proximity_kernel = proximity_loops
    kruskal_kernel = kruskal_loops
    closeness_kernel = closeness_loops
    permutation_kernel = permutation_loops
    lloyd_kernel = lloyd_loops
else:
    proximity_loops = _proximity_loops_py
    kruskal_loops = _kruskal_loops_py
    closeness_loops = _closeness_loops_py
    permutation_loops = _permutation_loops_py
    lloyd_loops = _lloyd_loops_py

    proximity_kernel = proximity_numpy
    kruskal_kernel = kruskal_numpy
    closeness_kernel = closeness_numpy
    permutation_kernel = permutation_numpy
    lloyd_kernel = lloyd_numpy
