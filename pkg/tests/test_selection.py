import math
import statistics

import numpy as np
import pytest

from coreselect import (
    ConfigurationError,
    EpochTrace,
    ScoreTable,
    ValidationError,
    avg_mi,
    cluster_centers,
    core_set_size,
    forgetting_counts,
    load_trace,
    save_trace,
    select,
    select_forgetting,
    select_full,
    select_jscds,
    select_kcenter_greedy,
    select_moderate,
    select_random,
)
from coreselect.selection import (
    _take_closest,
    make_training_selector,
    normalize_method,
)

from conftest import make_dataset, random_dataset, random_distribution

FRACTION_GRID = (0.1, 0.3, 0.5, 0.7, 1.0)


# --- independent pure-python oracles ---

def round_half_oracle(x):
    return int(math.floor(x + 0.5))


def k_oracle(fraction, n):
    return max(1, round_half_oracle(fraction * n))


def softmax_oracle(row):
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = math.fsum(e)
    p = [max(v / s, 1e-12) for v in e]
    s2 = math.fsum(p)
    return [max(v / s2, 1e-12) for v in p]


def jsd_oracle(p, q):
    total = 0.0
    for pi, qi in zip(p, q):
        g = 0.5 * (pi + qi)
        total += 0.5 * (pi * math.log(pi / g) + qi * math.log(qi / g))
    return total


def quotas_oracle(counts, fraction, k):
    shares = [fraction * c for c in counts]
    base = [min(int(math.floor(s)), c) for s, c in zip(shares, counts)]
    deficit = k - sum(base)
    order = sorted(range(len(counts)),
                   key=lambda j: (-(shares[j] - math.floor(shares[j])), j))
    while deficit > 0:
        for j in order:
            if deficit == 0:
                break
            if base[j] < counts[j]:
                base[j] += 1
                deficit -= 1
    return base


def jscds_oracle(dataset, embeddings, fraction):
    n = len(dataset)
    probs = [softmax_oracle(list(embeddings[i])) for i in range(n)]
    centers = []
    for j in range(dataset.num_classes):
        member_rows = [probs[i] for i in range(n) if dataset.labels[i] == j]
        centers.append([math.fsum(col) / len(member_rows) for col in zip(*member_rows)])
    scores = [jsd_oracle(probs[i], centers[dataset.labels[i]]) for i in range(n)]
    avg = math.fsum(scores) / n
    k = k_oracle(fraction, n)
    order = sorted(range(n), key=lambda i: (abs(scores[i] - avg), dataset.ids[i]))
    return sorted(int(dataset.ids[i]) for i in order[:k])


def moderate_oracle(dataset, embeddings, fraction):
    n = len(dataset)
    k = k_oracle(fraction, n)
    counts = [int((dataset.labels == j).sum()) for j in range(dataset.num_classes)]
    quotas = quotas_oracle(counts, fraction, k)
    chosen = []
    for j in range(dataset.num_classes):
        rows = [i for i in range(n) if dataset.labels[i] == j]
        d = embeddings.shape[1]
        centroid = [math.fsum(embeddings[i][w] for i in rows) / len(rows) for w in range(d)]
        dist = {
            i: math.sqrt(math.fsum((embeddings[i][w] - centroid[w]) ** 2 for w in range(d)))
            for i in rows
        }
        # class median = lower middle order statistic (a real sample's distance)
        median = sorted(dist.values())[(len(rows) - 1) // 2]
        best = sorted(rows, key=lambda i: (abs(dist[i] - median), dataset.ids[i]))
        chosen.extend(int(dataset.ids[i]) for i in best[: quotas[j]])
    return sorted(chosen)


def forgetting_oracle(flags_rows):
    counts = []
    for flags in flags_rows:
        events = sum(
            1 for a, b in zip(flags[:-1], flags[1:]) if a == 1 and b == 0
        )
        counts.append(float(len(flags)) if 1 not in flags else float(events))
    return counts


class TestCoreSetSize:
    @pytest.mark.parametrize(
        "fraction,n,expected",
        [(0.1, 5, 1), (0.3, 5, 2), (0.5, 3, 2), (0.1, 4, 1), (1.0, 7, 7), (0.5, 10, 5)],
    )
    def test_budget(self, fraction, n, expected):
        assert core_set_size(fraction, n) == expected

    def test_rejects_bad_fraction(self):
        with pytest.raises(ValidationError):
            core_set_size(0.0, 10)
        with pytest.raises(ValidationError):
            core_set_size(1.5, 10)


class TestClusterCenters:
    def test_single_sample_classes(self, rng):
        probs = np.stack([random_distribution(rng, 4) for _ in range(3)])
        centers = cluster_centers(probs, np.array([0, 1, 2]))
        assert np.allclose(centers.centers, probs)
        assert list(centers.counts) == [1, 1, 1]

    def test_two_sample_mean(self):
        probs = np.array([[0.2, 0.8], [0.4, 0.6]])
        centers = cluster_centers(probs, np.array([0, 0]), num_classes=1)
        assert centers.centers[0] == pytest.approx([0.3, 0.7], abs=1e-15)

    def test_centers_sum_to_one_vs_independent_accumulation(self, rng):
        probs = np.stack([random_distribution(rng, 6) for _ in range(60)])
        labels = rng.integers(0, 3, size=60)
        labels[:3] = [0, 1, 2]
        centers = cluster_centers(probs, labels, num_classes=3)
        for j in range(3):
            assert abs(centers.centers[j].sum() - 1.0) <= 1e-9
            # independent accumulation order: per-column fsum in reverse row order
            rows = [i for i in reversed(range(60)) if labels[i] == j]
            expected = [
                math.fsum(probs[i][w] for i in rows) / len(rows) for w in range(6)
            ]
            assert centers.centers[j] == pytest.approx(expected, abs=1e-12)

    def test_empty_class_names_class(self):
        probs = np.array([[0.5, 0.5]])
        with pytest.raises(ConfigurationError, match="class 1"):
            cluster_centers(probs, np.array([0]), num_classes=2)


class TestAvgMi:
    def test_simple_mean(self):
        table = ScoreTable(ids=np.arange(3), values=np.array([0.1, 0.2, 0.3]),
                           method="x", higher_is="y")
        assert avg_mi(table) == pytest.approx(0.2, abs=1e-15)

    def test_constant_scores(self):
        table = ScoreTable(ids=np.arange(5), values=np.full(5, 0.42),
                           method="x", higher_is="y")
        assert avg_mi(table) == pytest.approx(0.42, abs=1e-15)

    def test_matches_fsum_oracle(self, rng):
        values = rng.random(100)
        table = ScoreTable(ids=np.arange(100), values=values, method="x", higher_is="y")
        assert avg_mi(table) == pytest.approx(math.fsum(values) / 100, abs=1e-12)

    def test_empty_rejected(self):
        table = ScoreTable(ids=np.array([], dtype=np.int64), values=np.array([]),
                           method="x", higher_is="y")
        with pytest.raises(ValidationError):
            avg_mi(table)


class TestJscds:
    def test_full_fraction_keeps_everything(self, rng):
        ds = random_dataset(rng, 20, 4, 3)
        result = select_jscds(ds, ds.features, 1.0)
        assert np.array_equal(result.indices, ds.ids)

    def test_band_rule_on_known_scores(self):
        # scores {0.0, 0.1, 0.2, 0.9}: avg 0.3, band of two keeps 0.2 then 0.1
        ids = np.arange(4)
        deviations = np.abs(np.array([0.0, 0.1, 0.2, 0.9]) - 0.3)
        assert sorted(_take_closest(ids, deviations, 2)) == [1, 2]

    def test_identical_samples_resolve_ties_to_smallest_ids(self):
        ds = make_dataset(np.ones((6, 3)), [0, 1, 0, 1, 0, 1])
        result = select_jscds(ds, ds.features, 0.5)
        assert list(result.indices) == [0, 1, 2]

    def test_matches_brute_force(self, rng):
        for _ in range(25):
            n = int(rng.integers(4, 51))
            J = int(rng.integers(2, 5))
            ds = random_dataset(rng, n, int(rng.integers(2, 6)), J)
            fraction = float(rng.choice(FRACTION_GRID))
            result = select_jscds(ds, ds.features, fraction)
            assert list(result.indices) == jscds_oracle(ds, ds.features, fraction)

    def test_permutation_equivariance(self, rng):
        n = 30
        ds = random_dataset(rng, n, 4, 3)
        result = select_jscds(ds, ds.features, 0.5)
        # give sample (old id i) the new id new_ids[i]; rows sorted by new id
        new_ids = rng.permutation(n)
        order = np.argsort(new_ids)
        permuted = make_dataset(
            ds.features[order], ds.labels[order], ds.num_classes, ids=new_ids[order]
        )
        permuted_result = select_jscds(permuted, permuted.features, 0.5)
        expected = np.sort(new_ids[result.indices])
        assert np.array_equal(permuted_result.indices, expected)

    def test_logit_shift_invariance(self, rng):
        ds = random_dataset(rng, 25, 5, 2)
        shifted = ds.features + rng.standard_normal((25, 1)) * 10
        base = select_jscds(ds, ds.features, 0.3)
        other = select_jscds(ds, shifted, 0.3)
        assert np.array_equal(base.indices, other.indices)
        assert base.scores.values == pytest.approx(other.scores.values, abs=1e-9)

    def test_rank_window_keeps_middle_ranks(self, rng):
        ds = random_dataset(rng, 20, 4, 2)
        result = select_jscds(ds, ds.features, 0.5, mode="rank_window")
        scores = result.scores
        order = np.lexsort((scores.ids, -scores.values))
        expected = sorted(int(scores.ids[i]) for i in order[5:15])
        assert list(result.indices) == expected

    def test_stratified_quotas(self, rng):
        ds = random_dataset(rng, 40, 3, 3)
        result = select_jscds(ds, ds.features, 0.5, stratified=True)
        assert len(result) == core_set_size(0.5, 40)
        counts = [int((ds.labels == j).sum()) for j in range(3)]
        quotas = quotas_oracle(counts, 0.5, core_set_size(0.5, 40))
        kept = ds.subset(result.indices)
        assert list(kept.class_counts()) == quotas

    def test_unknown_mode_rejected(self, rng):
        ds = random_dataset(rng, 10, 3, 2)
        with pytest.raises(ValidationError, match="mode"):
            select_jscds(ds, ds.features, 0.5, mode="nope")

    def test_misaligned_embeddings_rejected(self, rng):
        ds = random_dataset(rng, 10, 3, 2)
        with pytest.raises(Exception):
            select_jscds(ds, ds.features[:5], 0.5)


class TestRandom:
    def test_full_fraction(self, rng):
        ds = random_dataset(rng, 15, 2, 2)
        assert np.array_equal(select_random(ds, 1.0, seed=3).indices, ds.ids)

    def test_same_seed_identical(self, rng):
        ds = random_dataset(rng, 50, 2, 2)
        a = select_random(ds, 0.4, seed=11)
        b = select_random(ds, 0.4, seed=11)
        assert np.array_equal(a.indices, b.indices)

    def test_different_seeds_differ(self, rng):
        ds = random_dataset(rng, 1000, 2, 2)
        a = select_random(ds, 0.5, seed=1)
        b = select_random(ds, 0.5, seed=2)
        assert not np.array_equal(a.indices, b.indices)


class TestModerate:
    def test_equidistant_class_tie_breaks_to_smallest_id(self):
        # three samples at the same distance from their centroid
        angle = 2 * np.pi / 3
        pts = np.stack([[np.cos(a), np.sin(a)] for a in (0, angle, 2 * angle)])
        ds = make_dataset(pts, [0, 0, 0], num_classes=2, ids=[0, 1, 2])
        # second class far away so class 0 keeps its own quota
        ds = make_dataset(
            np.vstack([pts, [[50.0, 50.0], [51.0, 50.0], [50.0, 51.0]]]),
            [0, 0, 0, 1, 1, 1],
        )
        result = select_moderate(ds, ds.features, 1.0 / 3.0)
        kept0 = [i for i in result.indices if i <= 2]
        assert kept0 == [0]

    def test_one_dimensional_band(self):
        # class 0 at positions 0,1,2,3,10: centroid 3.2, distances
        # (3.2, 2.2, 1.2, 0.2, 6.8), median distance 2.2; the three closest
        # to the median are ids 1 (exactly at it), then 0 and 2 (tied at 1.0,
        # both taken). A mirrored second class keeps the quota at 3 per class.
        positions = [0.0, 1.0, 2.0, 3.0, 10.0]
        features = np.array([[p] for p in positions] + [[p + 100.0] for p in positions])
        ds = make_dataset(features, [0] * 5 + [1] * 5)
        result = select_moderate(ds, ds.features, 0.6)
        assert list(result.indices) == moderate_oracle(ds, ds.features, 0.6)
        assert [i for i in result.indices if i < 5] == [0, 1, 2]

    def test_full_fraction(self, rng):
        ds = random_dataset(rng, 12, 3, 2)
        assert np.array_equal(select_moderate(ds, ds.features, 1.0).indices, ds.ids)

    def test_matches_brute_force(self, rng):
        for _ in range(25):
            n = int(rng.integers(4, 51))
            J = int(rng.integers(2, 5))
            ds = random_dataset(rng, n, int(rng.integers(1, 6)), J)
            fraction = float(rng.choice(FRACTION_GRID))
            result = select_moderate(ds, ds.features, fraction)
            assert list(result.indices) == moderate_oracle(ds, ds.features, fraction)


class TestKCenterGreedy:
    def test_line_example(self):
        # brute force over all 2-subsets containing the start id 0:
        # {0,2} has min pairwise distance 10 > {0,1}'s 1
        ds = make_dataset(np.array([[0.0], [1.0], [10.0]]), [0, 0, 1], num_classes=2)
        result = select_kcenter_greedy(ds, ds.features, 2.0 / 3.0)
        assert list(result.indices) == [0, 2]

    def test_full_fraction(self, rng):
        ds = random_dataset(rng, 9, 2, 2)
        assert np.array_equal(select_kcenter_greedy(ds, ds.features, 1.0).indices, ds.ids)

    def test_duplicate_points_tie_break(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [5.0, 0.0]])
        ds = make_dataset(pts, [0, 0, 0, 1])
        result = select_kcenter_greedy(ds, ds.features, 0.75)
        # start 0, then the far point, then the smallest-id duplicate
        assert list(result.indices) == [0, 1, 3]

    def test_stepwise_max_min_optimality(self, rng):
        from coreselect import _kernels

        for _ in range(10):
            n = int(rng.integers(10, 201))
            points = np.ascontiguousarray(rng.standard_normal((n, 3)))
            k = max(2, int(0.2 * n))
            order = _kernels.kcenter_greedy(points, k, 0)
            chosen = [int(order[0])]
            for step in range(1, k):
                best = None
                best_dist = -1.0
                for candidate in range(n):
                    if candidate in chosen:
                        continue
                    dist = min(
                        math.dist(points[candidate], points[s]) for s in chosen
                    )
                    if dist > best_dist:
                        best, best_dist = candidate, dist
                assert int(order[step]) == best
                chosen.append(best)


class TestForgetting:
    def test_transition_counting(self):
        trace = EpochTrace(
            ids=np.arange(3),
            correctness=np.array([
                [1, 0, 1, 0],  # two forgetting events
                [1, 1, 1, 1],  # zero
                [0, 0, 0, 0],  # never learned -> sentinel above any count
            ], dtype=np.uint8),
        )
        table = forgetting_counts(trace)
        assert list(table.values[:2]) == [2.0, 0.0]
        assert table.values[2] == 4.0  # num_epochs, > max possible 3
        assert table.values == pytest.approx(
            forgetting_oracle([[1, 0, 1, 0], [1, 1, 1, 1], [0, 0, 0, 0]]), abs=0
        )

    def test_selection_keeps_most_forgotten(self):
        ds = make_dataset(np.zeros((4, 2)), [0, 1, 0, 1])
        trace = EpochTrace(
            ids=np.arange(4),
            correctness=np.array(
                [[1, 1, 1], [1, 0, 1], [0, 0, 0], [1, 0, 0]], dtype=np.uint8
            ),
        )
        # counts: 0, 1, 3 (never learned), 1 -> keep ids 2 and 1 (tie to smaller id)
        result = select_forgetting(ds, trace, 0.5)
        assert list(result.indices) == [1, 2]

    def test_requires_two_epochs(self):
        ds = make_dataset(np.zeros((2, 2)), [0, 1])
        trace = EpochTrace(ids=np.arange(2), correctness=np.array([[1], [0]], dtype=np.uint8))
        with pytest.raises(ValidationError, match="2 epochs"):
            select_forgetting(ds, trace, 0.5)

    def test_trace_must_cover_dataset(self):
        ds = make_dataset(np.zeros((3, 2)), [0, 1, 0])
        trace = EpochTrace(ids=np.array([0, 1]),
                           correctness=np.array([[1, 1], [0, 1]], dtype=np.uint8))
        with pytest.raises(ValidationError, match="cover"):
            select_forgetting(ds, trace, 0.5)

    def test_matches_oracle_on_random_traces(self, rng):
        for _ in range(20):
            n, epochs = int(rng.integers(2, 40)), int(rng.integers(2, 12))
            flags = rng.integers(0, 2, size=(n, epochs)).astype(np.uint8)
            trace = EpochTrace(ids=np.arange(n), correctness=flags)
            table = forgetting_counts(trace)
            assert list(table.values) == forgetting_oracle([list(r) for r in flags])


class TestTraceIO:
    def test_round_trip(self, tmp_path):
        trace = EpochTrace(ids=np.array([0, 2, 5]),
                           correctness=np.array([[1, 0], [0, 1], [1, 1]], dtype=np.uint8))
        path = tmp_path / "trace.csv"
        save_trace(trace, path)
        loaded = load_trace(path)
        assert np.array_equal(loaded.ids, trace.ids)
        assert np.array_equal(loaded.correctness, trace.correctness)

    def test_bad_flag_rejected(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("id,e0,e1\n0,1,2\n")
        with pytest.raises(Exception, match="trace.csv:2"):
            load_trace(path)


class TestDispatchAndContracts:
    def test_normalize_method(self):
        assert normalize_method("KCenter") == "kcenter_greedy"
        assert normalize_method("jscds") == "jscds"
        with pytest.raises(ValidationError):
            normalize_method("mystery")

    def test_forgetting_requires_trace(self, rng):
        ds = random_dataset(rng, 10, 2, 2)
        with pytest.raises(ConfigurationError):
            select("forgetting", ds, 0.5)

    def test_cardinality_and_determinism_grid(self, rng):
        ds = random_dataset(rng, 37, 4, 3)
        trace = EpochTrace(
            ids=ds.ids,
            correctness=rng.integers(0, 2, size=(37, 5)).astype(np.uint8),
        )
        for method in ("full", "random", "jscds", "moderate", "kcenter_greedy", "forgetting"):
            for fraction in FRACTION_GRID:
                a = select(method, ds, fraction, seed=5, trace=trace)
                b = select(method, ds, fraction, seed=5, trace=trace)
                expected = 37 if method == "full" else core_set_size(fraction, 37)
                assert len(a) == expected, (method, fraction)
                assert np.array_equal(a.indices, b.indices)
                assert np.unique(a.indices).size == len(a)
                assert np.all(np.isin(a.indices, ds.ids))

    def test_select_full_ignores_fraction(self, rng):
        ds = random_dataset(rng, 10, 2, 2)
        assert np.array_equal(select_full(ds, 0.3).indices, ds.ids)

    def test_training_selector_forgetting_cold_start(self, rng):
        ds = random_dataset(rng, 10, 2, 2)
        run = make_training_selector("forgetting", 0.5, seed=0)
        result = run(ds, ds.features, None)
        assert list(result.indices) == list(ds.ids[:5])

    def test_training_selector_event_seed(self, rng):
        ds = random_dataset(rng, 40, 2, 2)
        run = make_training_selector("random", 0.5, seed=0)
        a = run(ds, None, None, seed=100)
        b = run(ds, None, None, seed=101)
        assert not np.array_equal(a.indices, b.indices)
        assert a.seed == 100
