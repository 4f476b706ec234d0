"""K-means: monotonicity, micro-scale global optimality, determinism."""

import itertools

import numpy as np
import pytest

from rahp import EmbeddingMatrix, PrePartition, SuperEntityMap, build_super_map, kmeans
from rahp.clustering import _apportion, _partitions
from rahp.errors import MalformedHeader, NameCountMismatch, TooManyClusters


def brute_force_sse(points, m):
    """Global minimum SSE by enumerating every partition into m clusters."""
    n = len(points)
    best = np.inf
    for assign in itertools.product(range(m), repeat=n):
        if len(set(assign)) != m:
            continue
        sse = 0.0
        for j in range(m):
            members = points[[i for i, a in enumerate(assign) if a == j]]
            c = members.mean(axis=0)
            sse += float(((members - c) ** 2).sum())
        best = min(best, sse)
    return best


def result_sse(points, result):
    sse = 0.0
    for i, lab in enumerate(result.labels):
        sse += float(((points[i] - result.centroids[lab]) ** 2).sum())
    return sse


def test_partition_enumeration_counts():
    # Stirling numbers of the second kind: S(4,2)=7, S(5,3)=25.
    assert sum(1 for _ in _partitions(4, 2)) == 7
    assert sum(1 for _ in _partitions(5, 3)) == 25


@pytest.mark.parametrize("n,m,seed", [(5, 2, 0), (6, 3, 1), (7, 2, 2),
                                      (8, 3, 3), (8, 2, 4), (6, 2, 5)])
def test_micro_scale_global_optimality(n, m, seed):
    points = np.random.default_rng(seed).standard_normal((n, 3))
    result = kmeans(points, m, seed=seed)
    assert result.sse == pytest.approx(brute_force_sse(points, m), rel=1e-10)
    assert result.sse == pytest.approx(result_sse(points, result), rel=1e-12)


def test_lloyd_monotonic_sse():
    rng = np.random.default_rng(9)
    for seed in range(10):
        points = rng.standard_normal((60, 8))
        result = kmeans(points, 5, seed=seed)
        hist = result.sse_history
        assert all(hist[i] >= hist[i + 1] - 1e-9 for i in range(len(hist) - 1))


def test_deterministic_under_fixed_seed():
    points = np.random.default_rng(10).standard_normal((80, 6))
    a = kmeans(points, 7, seed=42)
    b = kmeans(points, 7, seed=42)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    assert a.sse == b.sse


def test_no_empty_clusters():
    rng = np.random.default_rng(11)
    for seed in range(8):
        points = rng.standard_normal((40, 4))
        result = kmeans(points, 6, seed=seed)
        assert set(np.unique(result.labels)) == set(range(6))


def test_duplicate_points_still_fill_all_clusters():
    points = np.tile(np.array([[1.0, 1.0], [5.0, 5.0]]), (10, 1))
    result = kmeans(points, 2, seed=0)
    assert set(np.unique(result.labels)) == {0, 1}


def test_m_equals_n_gives_zero_sse():
    points = np.random.default_rng(12).standard_normal((6, 3))
    result = kmeans(points, 6, seed=0)
    assert result.sse == pytest.approx(0.0, abs=1e-18)


def test_cluster_count_errors():
    points = np.zeros((3, 2)) + np.arange(3)[:, None]
    with pytest.raises(TooManyClusters):
        kmeans(points, 4)
    with pytest.raises(TooManyClusters):
        kmeans(points, 0)


def test_vg_scale_clustering_under_one_second():
    import time

    rng = np.random.default_rng(13)
    data = rng.standard_normal((150, 512))
    data /= np.linalg.norm(data, axis=1, keepdims=True)
    t0 = time.perf_counter()
    result = kmeans(data, 30, seed=0)
    assert time.perf_counter() - t0 < 1.0
    assert set(np.unique(result.labels)) == set(range(30))


class TestSuperEntityMap:
    def test_round_trip(self, tmp_path, small_smap):
        path = tmp_path / "smap.json"
        small_smap.save(path)
        back = SuperEntityMap.load(path)
        assert back.super_names == small_smap.super_names
        assert back.assignment == small_smap.assignment

    def test_members_and_super_of(self, small_smap):
        assert small_smap.members(0) == ["cat", "dog"]
        assert small_smap.super_of("bus") == "vehicle"

    def test_rejects_duplicate_names(self):
        with pytest.raises(NameCountMismatch):
            SuperEntityMap(("a", "a"), {"x": 0, "y": 1})

    def test_rejects_empty_super(self):
        with pytest.raises(MalformedHeader):
            SuperEntityMap(("a", "b"), {"x": 0, "y": 0})

    def test_rejects_out_of_range(self):
        with pytest.raises(MalformedHeader):
            SuperEntityMap(("a",), {"x": 3})


def entity_matrix(n=20, dim=8, seed=14):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, dim))
    return EmbeddingMatrix.create([f"e{i:02d}" for i in range(n)], data)


def test_build_super_map_covers_vocabulary():
    emb = entity_matrix()
    names = [f"s{i}" for i in range(4)]
    smap = build_super_map(emb, 4, names, seed=0)
    assert sorted(smap.assignment) == sorted(emb.labels)
    assert smap.super_names == tuple(names)
    assert {smap.assignment[e] for e in emb.labels} == set(range(4))


def test_build_super_map_name_count_mismatch():
    with pytest.raises(NameCountMismatch):
        build_super_map(entity_matrix(), 4, ["only", "three", "names"])


def test_apportion_sums_and_bounds():
    sizes = [10, 3, 1, 6]
    counts = _apportion(sizes, 7)
    assert sum(counts) == 7
    assert all(1 <= c <= s for c, s in zip(counts, sizes))


def test_pre_partition_respected():
    emb = entity_matrix()
    groups = PrePartition.from_groups(
        [[f"e{i:02d}" for i in range(10)], [f"e{i:02d}" for i in range(10, 20)]]
    )
    smap = build_super_map(emb, 4, [f"s{i}" for i in range(4)],
                           pre_partition=groups, seed=0)
    # No cluster may mix entities from different pre-partition groups.
    cluster_groups = {}
    for e, c in smap.assignment.items():
        g = 0 if int(e[1:]) < 10 else 1
        cluster_groups.setdefault(c, set()).add(g)
    assert all(len(gs) == 1 for gs in cluster_groups.values())


def test_pre_partition_rejects_overlap():
    with pytest.raises(MalformedHeader):
        PrePartition.from_groups([["a", "b"], ["b", "c"]])
