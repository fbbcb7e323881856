from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phefl.data import generate_synthetic
from phefl.exceptions import ConfigurationError
from phefl.model import Dataset
from phefl.partition import (
    PartitionPlan,
    assign_device_labels,
    build_balanced_test,
    build_edge_test_sets,
    build_imbalanced_test,
    label_matrix,
    partition_train,
    split_ptd_etd,
)

# distinct labels per edge, predominant share
LABEL_LAYOUT = {"D1": (1, 1.0), "D2": (5, 0.2), "D3": (8, 0.3), "D4": (10, 0.1)}


def pool(per_label, num_classes=10, seed=0):
    return generate_synthetic(num_classes, per_label, 4, 3.0, seed)


class TestAssignLabels:
    def test_d3_edge1(self):
        labels = assign_device_labels("D3")
        assert sorted(labels[0]) == [0, 0, 0, 1, 2, 3, 4, 5, 6, 7]

    def test_d1_edge4(self):
        assert list(assign_device_labels("D1")[3]) == [3] * 10

    def test_d4_every_edge(self):
        for row in assign_device_labels("D4"):
            assert sorted(row) == list(range(10))

    def test_d2_pairs(self):
        for e, row in enumerate(assign_device_labels("D2")):
            assert Counter(row) == {(e + j) % 10: 2 for j in range(5)}

    @pytest.mark.parametrize("scenario", sorted(LABEL_LAYOUT))
    def test_label_layout(self, scenario):
        distinct, share = LABEL_LAYOUT[scenario]
        for e, row in enumerate(assign_device_labels(scenario)):
            counts = Counter(row)
            assert len(counts) == distinct
            assert max(counts.values()) / len(row) == share
            assert counts.most_common(1)[0][1] == counts[e % 10]

    @pytest.mark.parametrize("scenario,dpe", [("D2", 7), ("D3", 5), ("D4", 5)])
    def test_divisibility(self, scenario, dpe):
        with pytest.raises(ConfigurationError):
            assign_device_labels(scenario, 10, dpe, 10)

    def test_five_devices_d2(self):
        for e, row in enumerate(assign_device_labels("D2", 10, 5, 10)):
            assert sorted(row) == sorted((e + j) % 10 for j in range(5))

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            assign_device_labels("D5")


class TestPartitionTrain:
    def test_d4_consumption(self):
        plan = PartitionPlan.build("D4", samples_per_device=50)
        train, _ = pool((500, 1))
        shards = partition_train(train, plan, 0)
        used = Counter()
        for edge in shards:
            for shard in edge:
                assert len(shard) == 50
                assert len(set(shard.y.tolist())) == 1
                used.update(shard.y.tolist())
        assert all(used[c] == 500 for c in range(10))

    @pytest.mark.parametrize("scenario", sorted(LABEL_LAYOUT))
    def test_disjoint(self, scenario):
        plan = PartitionPlan.build(scenario, samples_per_device=5)
        train, _ = pool((100, 1))
        ids = [i for edge in partition_train(train, plan, 1) for shard in edge for i in shard.ids.tolist()]
        assert len(ids) == len(set(ids)) == 500

    def test_d3_edge_share(self):
        plan = PartitionPlan.build("D3", samples_per_device=6)
        train, _ = pool((60, 1))
        for e, edge in enumerate(partition_train(train, plan, 2)):
            merged = Dataset.concat(edge)
            assert merged.label_counts(10)[e] / len(merged) == 0.3

    def test_device_labels_respected(self):
        plan = PartitionPlan.build("D2", samples_per_device=3)
        train, _ = pool((30, 1))
        shards = partition_train(train, plan, 0)
        for e in range(10):
            for c in range(10):
                assert set(shards[e][c].y.tolist()) == {plan.device_labels[e, c]}

    def test_deterministic(self):
        plan = PartitionPlan.build("D3", samples_per_device=4)
        train, _ = pool((50, 1))
        a = partition_train(train, plan, 7)
        b = partition_train(train, plan, 7)
        assert all(np.array_equal(x.ids, y.ids) for ea, eb in zip(a, b) for x, y in zip(ea, eb))

    def test_shortfall(self):
        plan = PartitionPlan.build("D1", samples_per_device=50)
        train, _ = pool((499, 1))
        with pytest.raises(ConfigurationError, match="label 0 short by 1"):
            partition_train(train, plan, 0)


class TestImbalancedTest:
    def test_d3_edge2_row(self):
        plan = PartitionPlan.build("D3")
        _, test = pool((1, 100))
        ttd = build_imbalanced_test(test, plan)[1]
        counts = ttd.label_counts(10)
        pct = 100 * counts / counts.sum()
        assert list(pct) == [0, 30, 10, 10, 10, 10, 10, 10, 10, 0]

    def test_d1_single_label(self):
        plan = PartitionPlan.build("D1")
        _, test = pool((1, 20))
        for e, ttd in enumerate(build_imbalanced_test(test, plan)):
            assert set(ttd.y.tolist()) == {e}

    def test_d4_identical_composition(self):
        plan = PartitionPlan.build("D4")
        _, test = pool((1, 20))
        ttds = build_imbalanced_test(test, plan)
        assert all(np.array_equal(t.label_counts(10), ttds[0].label_counts(10)) for t in ttds)

    @pytest.mark.parametrize("scenario", sorted(LABEL_LAYOUT))
    def test_mirrors_training_histogram(self, scenario):
        plan = PartitionPlan.build(scenario, samples_per_device=2)
        train, test = pool((20, 30))
        shards = partition_train(train, plan, 0)
        ttds = build_imbalanced_test(test, plan)
        sizes = {len(t) for t in ttds}
        assert len(sizes) == 1
        for edge, ttd in zip(shards, ttds):
            tr = Dataset.concat(edge).label_counts(10)
            te = ttd.label_counts(10)
            # equal proportions <=> cross products agree
            assert np.array_equal(tr * te.sum(), te * tr.sum())
            assert len(set(ttd.ids.tolist())) == len(ttd)

    def test_pool_too_small(self):
        plan = PartitionPlan.build("D1")
        _, test = pool((1, 5))
        with pytest.raises(ConfigurationError):
            build_imbalanced_test(test, plan)

    def test_unequal_pool(self):
        plan = PartitionPlan.build("D4")
        test = Dataset(np.zeros((11, 1)), list(range(10)) + [0])
        with pytest.raises(ConfigurationError, match="equal"):
            build_imbalanced_test(test, plan)


class TestBalancedTest:
    def test_d3_size_800(self):
        _, test = pool((1, 100))
        assert [len(t) for t in build_balanced_test(test, PartitionPlan.build("D3"))] == [800] * 10

    def test_d1_size_100(self):
        _, test = pool((1, 100))
        assert [len(t) for t in build_balanced_test(test, PartitionPlan.build("D1"))] == [100] * 10

    def test_d3_edge3_labels(self):
        _, test = pool((1, 10))
        ttd = build_balanced_test(test, PartitionPlan.build("D3"))[2]
        assert set(ttd.y.tolist()) == set(range(2, 10))

    def test_d2_equals_imbalanced(self):
        _, test = pool((1, 10))
        plan = PartitionPlan.build("D2")
        for a, b in zip(build_balanced_test(test, plan), build_imbalanced_test(test, plan)):
            assert np.array_equal(a.ids, b.ids)


class TestSplit:
    @pytest.fixture
    def d3_ttd(self):
        _, test = pool((1, 100))
        return build_balanced_test(test, PartitionPlan.build("D3"))[0]

    def test_sizes(self, d3_ttd):
        ptd, etd = split_ptd_etd(d3_ttd, 0.15, 0)
        assert (len(ptd), len(etd)) == (120, 680)

    def test_stratified(self, d3_ttd):
        ptd, _ = split_ptd_etd(d3_ttd, 0.15, 0)
        for c, n in enumerate(d3_ttd.label_counts(10)):
            assert abs(ptd.label_counts(10)[c] - 0.15 * n) <= 1

    def test_deterministic(self, d3_ttd):
        a, _ = split_ptd_etd(d3_ttd, 0.15, 3)
        b, _ = split_ptd_etd(d3_ttd, 0.15, 3)
        c, _ = split_ptd_etd(d3_ttd, 0.15, 4)
        assert np.array_equal(a.ids, b.ids)
        assert not np.array_equal(a.ids, c.ids)

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            split_ptd_etd(Dataset(np.zeros((0, 2)), []), 0.15, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 5), min_size=1, max_size=120), st.floats(0.05, 0.95), st.integers(0, 1000))
    def test_partition_properties(self, labels, fraction, seed):
        ttd = Dataset(np.zeros((len(labels), 1)), labels)
        ptd, etd = split_ptd_etd(ttd, fraction, seed)
        ids_p, ids_e = set(ptd.ids.tolist()), set(etd.ids.tolist())
        assert not ids_p & ids_e
        assert ids_p | ids_e == set(range(len(labels)))
        assert len(ptd) == int(np.floor(fraction * len(labels) + 0.5))
        for c, n in enumerate(ttd.label_counts(6)):
            k = ptd.label_counts(6)[c]
            assert abs(k - fraction * n) <= 1
            if n * fraction >= 1:
                assert k >= 1


def test_edge_test_sets_bundle():
    _, test = pool((1, 40))
    plan = PartitionPlan.build("D3")
    sets = build_edge_test_sets(test, plan, "imbalanced", 0.15, 0)
    assert sets.mode == "imbalanced"
    for ttd, ptd, etd in zip(sets.ttd, sets.ptd, sets.etd):
        assert sorted(ptd.ids.tolist() + etd.ids.tolist()) == sorted(ttd.ids.tolist())
        # labels in ttd match the edge's training labels
    assert [set(t.y.tolist()) for t in sets.ttd] == [set(r.tolist()) for r in plan.device_labels]
    with pytest.raises(ConfigurationError):
        build_edge_test_sets(test, plan, "sideways")


def test_label_matrix():
    d = Dataset(np.zeros((3, 1)), [0, 2, 2])
    assert label_matrix([d, d], 3).tolist() == [[1, 0, 2], [1, 0, 2]]
