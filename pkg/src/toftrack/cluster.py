"""Hierarchical density-based clustering with noise (from scratch).

Pipeline: core distances (k-th neighbor, self excluded) -> mutual
reachability distances -> minimum spanning tree (Prim over the implicit
complete graph) -> single-linkage hierarchy (edges sorted by weight, ties by
lower then higher point index) -> condensed tree at ``min_cluster_size`` ->
excess-of-mass cluster extraction with lambda = 1/distance.

Departure worth knowing about: the hierarchy root competes in the
excess-of-mass selection like any other cluster (its birth lambda is the
lambda of the final merge). A single compact blob therefore yields one
cluster rather than all-noise, which is what a one-object scene needs, while
two well-separated blobs still yield two (the root's stability collapses to
zero when the bridging edge is the final merge).

Points falling out of the hierarchy above every selected cluster are labeled
noise (-1). Cluster labels are renumbered by minimum member index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

_TINY = 1e-12  # distance floor so duplicate points keep lambda finite


@dataclass(frozen=True)
class ClusterParams:
    min_cluster_size: int = 15
    min_samples: int = 5

    def __post_init__(self) -> None:
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")


@dataclass
class ClusterResult:
    labels: np.ndarray     # (N,) int64; -1 = noise, clusters 0..m-1
    centroids: np.ndarray  # (m, 3) arithmetic means
    sizes: np.ndarray      # (m,) member counts

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def core_distances(points: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest neighbor (self excluded)."""
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    n = len(pts)
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    if n < min_samples + 1:
        raise ValueError(
            f"need at least min_samples + 1 = {min_samples + 1} points, got {n}"
        )
    dist, _ = cKDTree(pts).query(pts, k=min_samples + 1)
    return dist[:, min_samples]


def mutual_reachability(a, b, core_a: float, core_b: float) -> float:
    """max(core(a), core(b), |a - b|)."""
    d = float(np.linalg.norm(np.asarray(a, np.float64) - np.asarray(b, np.float64)))
    return max(core_a, core_b, d)


@njit(cache=True, fastmath=True)
def _prim_mst(pts, core):
    """MST of the complete mutual-reachability graph, O(n^2) Prim."""
    n = pts.shape[0]
    in_tree = np.zeros(n, np.bool_)
    best = np.full(n, np.inf)
    src = np.zeros(n, np.int64)
    ea = np.empty(n - 1, np.int64)
    eb = np.empty(n - 1, np.int64)
    ew = np.empty(n - 1, np.float64)
    cur = 0
    in_tree[0] = True
    for it in range(n - 1):
        cx = pts[cur, 0]
        cy = pts[cur, 1]
        cz = pts[cur, 2]
        ccore = core[cur]
        bi = -1
        bw = np.inf
        for j in range(n):
            if in_tree[j]:
                continue
            dx = cx - pts[j, 0]
            dy = cy - pts[j, 1]
            dz = cz - pts[j, 2]
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            if ccore > d:
                d = ccore
            if core[j] > d:
                d = core[j]
            if d < best[j]:
                best[j] = d
                src[j] = cur
            if best[j] < bw:
                bw = best[j]
                bi = j
        ea[it] = src[bi]
        eb[it] = bi
        ew[it] = bw
        in_tree[bi] = True
        best[bi] = np.inf
        cur = bi
    return ea, eb, ew


@njit(cache=True)
def _single_linkage(ea, eb, ew, n):
    """Union-find agglomeration of sorted MST edges into a merge table.

    Merge t creates node n + t joining the components' current root nodes.
    Returns (left, right, dist, size) indexed by merge order.
    """
    uf = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, np.int64)
    left = np.empty(n - 1, np.int64)
    right = np.empty(n - 1, np.int64)
    dist = np.empty(n - 1, np.float64)
    out_size = np.empty(n - 1, np.int64)
    for t in range(n - 1):
        ra = ea[t]
        while uf[ra] != ra:
            uf[ra] = uf[uf[ra]]
            ra = uf[ra]
        rb = eb[t]
        while uf[rb] != rb:
            uf[rb] = uf[uf[rb]]
            rb = uf[rb]
        node = n + t
        uf[ra] = node
        uf[rb] = node
        left[t] = ra
        right[t] = rb
        dist[t] = ew[t]
        size[node] = size[ra] + size[rb]
        out_size[t] = size[node]
    return left, right, dist, out_size


def _subtree_leaves(node: int, n: int, left, right) -> list[int]:
    leaves = []
    stack = [node]
    while stack:
        v = stack.pop()
        if v < n:
            leaves.append(v)
        else:
            stack.append(left[v - n])
            stack.append(right[v - n])
    return leaves


def _condense(left, right, dist, n: int, min_cluster_size: int):
    """Condense the merge tree: clusters persist only while >= min_cluster_size.

    Returns per-point fallout rows (parent cluster, lambda) and per-cluster
    rows (parent, lambda, size) plus the root's birth lambda. Cluster 0 is the
    root; new clusters are numbered in creation order, parents before children.
    """
    lam_of = 1.0 / np.maximum(dist, _TINY)
    root = 2 * n - 2

    point_parent = np.empty(n, np.int64)
    point_lam = np.empty(n, np.float64)
    cl_parent: list[int] = []
    cl_lam: list[float] = []
    cl_size: list[int] = []

    def new_cluster(parent: int, lam: float, size: int) -> int:
        cl_parent.append(parent)
        cl_lam.append(lam)
        cl_size.append(size)
        return len(cl_parent)  # root is 0, first created cluster is 1

    def fall_out(node: int, cluster: int, lam: float) -> None:
        for leaf in _subtree_leaves(node, n, left, right):
            point_parent[leaf] = cluster
            point_lam[leaf] = lam

    sizes = np.ones(2 * n - 1, np.int64)
    for t in range(n - 1):
        sizes[n + t] = sizes[left[t]] + sizes[right[t]]

    stack: list[tuple[int, int]] = [(root, 0)]
    while stack:
        node, cluster = stack.pop()
        t = node - n
        lam = lam_of[t]
        l, r = left[t], right[t]
        big_l = sizes[l] >= min_cluster_size
        big_r = sizes[r] >= min_cluster_size
        if big_l and big_r:
            for child in (l, r):
                sub = new_cluster(cluster, lam, int(sizes[child]))
                stack.append((child, sub))
        elif big_l or big_r:
            keep, drop = (l, r) if big_l else (r, l)
            fall_out(drop, cluster, lam)
            stack.append((keep, cluster))
        else:
            fall_out(l, cluster, lam)
            fall_out(r, cluster, lam)

    root_birth = lam_of[root - n]
    return (
        point_parent,
        point_lam,
        np.asarray(cl_parent, np.int64),
        np.asarray(cl_lam, np.float64),
        np.asarray(cl_size, np.int64),
        root_birth,
    )


def _extract_eom(point_parent, point_lam, cl_parent, cl_lam, cl_size, root_birth):
    """Excess-of-mass selection; returns the set of selected cluster ids."""
    n_clusters = 1 + len(cl_parent)
    birth = np.empty(n_clusters)
    birth[0] = root_birth
    if n_clusters > 1:
        birth[1:] = cl_lam

    stability = np.zeros(n_clusters)
    np.add.at(stability, point_parent, point_lam - birth[point_parent])
    if n_clusters > 1:
        np.add.at(stability, cl_parent, (cl_lam - birth[cl_parent]) * cl_size)

    children: list[list[int]] = [[] for _ in range(n_clusters)]
    for child, parent in enumerate(cl_parent, start=1):
        children[parent].append(child)

    is_cluster = np.ones(n_clusters, bool)
    for c in range(n_clusters - 1, -1, -1):
        child_sum = sum(stability[d] for d in children[c])
        if child_sum > stability[c]:
            stability[c] = child_sum
            is_cluster[c] = False

    # Top-down cut: the shallowest surviving clusters win, nothing below them.
    selected: set[int] = set()
    stack = [0]
    while stack:
        c = stack.pop()
        if is_cluster[c]:
            selected.add(c)
        else:
            stack.extend(children[c])
    return selected


def cluster(points: np.ndarray, params: ClusterParams = ClusterParams()) -> ClusterResult:
    """Full clustering of a point set; small inputs come back as all noise."""
    pts = np.ascontiguousarray(np.asarray(points, np.float64).reshape(-1, 3))
    n = len(pts)
    labels = np.full(n, -1, np.int64)
    if n < max(params.min_cluster_size, params.min_samples + 1):
        return ClusterResult(labels, np.empty((0, 3)), np.empty(0, np.int64))

    core = core_distances(pts, params.min_samples)
    ea, eb, ew = _prim_mst(pts, core)

    a = np.minimum(ea, eb)
    b = np.maximum(ea, eb)
    order = np.lexsort((b, a, ew))
    left, right, dist, _ = _single_linkage(a[order], b[order], ew[order], n)

    point_parent, point_lam, cl_parent, cl_lam, cl_size, root_birth = _condense(
        left, right, dist, n, params.min_cluster_size
    )
    selected = _extract_eom(
        point_parent, point_lam, cl_parent, cl_lam, cl_size, root_birth
    )

    # cover[c] = selected ancestor-or-self of cluster c, else -1
    n_clusters = 1 + len(cl_parent)
    cover = np.full(n_clusters, -1, np.int64)
    if 0 in selected:
        cover[0] = 0
    for child, parent in enumerate(cl_parent, start=1):
        if cover[parent] != -1:
            cover[child] = cover[parent]
        elif child in selected:
            cover[child] = child
    raw = cover[point_parent]

    # renumber clusters by minimum member index
    final = np.full(n, -1, np.int64)
    next_label = 0
    remap: dict[int, int] = {}
    for i in range(n):
        r = raw[i]
        if r == -1:
            continue
        if r not in remap:
            remap[r] = next_label
            next_label += 1
        final[i] = remap[r]

    cents = centroids(final, pts)
    sizes = np.bincount(final[final >= 0], minlength=next_label).astype(np.int64)
    return ClusterResult(final, cents, sizes)


def centroids(labels: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Arithmetic mean of member points per cluster label 0..m-1."""
    labels = np.asarray(labels)
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    m = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
    out = np.empty((m, 3))
    for c in range(m):
        out[c] = pts[labels == c].mean(axis=0)
    return out
