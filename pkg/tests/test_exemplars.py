import numpy as np
import pytest

from conftest import make_record
from openpan.discovery import (
    EngineConfig,
    ExemplarStore,
    KMeansResult,
    cluster_reports,
    mine_exemplars,
    refresh_features,
    select_unknown_clusters,
)
from openpan.discovery.exemplars import CLUSTER, MINED, Exemplar
from openpan.errors import DimensionMismatchError, ProviderError

D = 8


def at_distance(d, axis=0, side=1):
    """Unit vector at cosine distance `d` from the basis vector `axis`."""
    v = np.zeros(D)
    v[axis] = 1.0 - d
    v[side] = np.sqrt(1.0 - (1.0 - d) ** 2)
    return v


def _store_with(features, cfg=None):
    store = ExemplarStore(cfg)
    for f in features:
        r = make_record(feature=f)
        store.new_class([Exemplar(r, np.asarray(f, dtype=np.float64))])
    return store


def _single_cluster(dists, objectness=0.95):
    features = np.stack([at_distance(d, side=1 + i) for i, d in enumerate(dists)])
    records = [
        make_record(box=(0, 64 * i, 48, 48), objectness=objectness, feature=f)
        for i, f in enumerate(features)
    ]
    result = KMeansResult(
        assignments=np.zeros(len(dists), dtype=np.int64), centroids=np.eye(D)[:1]
    )
    return records, features, result


class TestExemplarStore:
    def test_ids_increase(self):
        store = _store_with([np.eye(D)[0], np.eye(D)[1]])
        assert sorted(store.classes) == [1, 2]
        assert store.n_exemplars == 2
        assert store.dim == D

    def test_thresholds_are_monotone(self):
        cfg = EngineConfig()
        store = _store_with([np.eye(D)[i] for i in range(5)], cfg)
        store.advance(cfg)
        assert store.found_class_count == 5
        assert store.current_objectness_threshold == pytest.approx(0.945)
        assert store.current_mining_distance == pytest.approx(0.0175)

        store.advance(EngineConfig(objectness_slope=0.0, mining_slope=0.0))
        assert store.current_objectness_threshold == pytest.approx(0.945)
        assert store.current_mining_distance == pytest.approx(0.0175)

    def test_matrix_groups_by_class(self):
        store = _store_with([np.eye(D)[0], np.eye(D)[1]])
        store.add(1, [Exemplar(make_record(), np.eye(D)[2])])
        E, ids, offsets = store.matrix()
        assert E.shape == (3, D)
        assert ids.tolist() == [1, 2]
        assert offsets.tolist() == [0, 2]

    def test_pseudo_labels(self):
        store = _store_with([np.eye(D)[0]])
        (label,) = store.pseudo_labels()
        assert label.class_id == 1
        assert label.source == CLUSTER


class TestSelectClusters:
    def test_membership_radius(self):
        records, features, result = _single_cluster([0.05, 0.10, 0.30])
        reports = cluster_reports(records, features, result)
        store = ExemplarStore()
        created = select_unknown_clusters(reports, store, EngineConfig(), records, features)

        assert created == [1]
        assert len(store.classes[1]) == 2
        assert reports[0].avg_cos_similarity == pytest.approx(1 - 0.15)

    def test_low_objectness_rejected(self):
        records, features, result = _single_cluster([0.01, 0.02], objectness=0.85)
        reports = cluster_reports(records, features, result)
        store = ExemplarStore()
        assert select_unknown_clusters(reports, store, EngineConfig(), records, features) == []
        assert len(store) == 0

    @staticmethod
    def _singletons(n):
        features, assignments, records = [], [], []
        for j in range(n):
            f = at_distance(0.001 * (j + 1), axis=j % D, side=(j + 1) % D)
            features.append(f)
            assignments.append(j)
            records.append(make_record(box=(0, 64 * j, 48, 48), objectness=0.95, feature=f))
        features = np.stack(features)
        result = KMeansResult(np.array(assignments), features.copy())
        return records, features, cluster_reports(records, features, result)

    def test_only_top_fraction_considered(self):
        ## Ten singleton clusters, only one of which makes the top tenth.
        records, features, reports = self._singletons(10)
        cfg = EngineConfig(k_clusters=10, top_cluster_fraction=0.1)
        created = select_unknown_clusters(reports, ExemplarStore(), cfg, records, features)
        assert len(created) == 1

    @pytest.mark.parametrize("k_clusters, expected", [(20, 2), (30, 3), (200, 10)])
    def test_top_count_follows_requested_k(self, k_clusters, expected):
        ## k-means returned only ten clusters out of the requested k.
        records, features, reports = self._singletons(10)
        cfg = EngineConfig(k_clusters=k_clusters, top_cluster_fraction=0.1)
        created = select_unknown_clusters(reports, ExemplarStore(), cfg, records, features)
        assert len(created) == expected

    def test_threshold_read_before_advancing(self):
        cfg = EngineConfig(objectness_slope=0.05, top_cluster_fraction=1.0)
        features, assignments, records = [], [], []
        for j in range(3):
            f = np.eye(D)[j]
            features.append(f)
            assignments.append(j)
            records.append(make_record(box=(0, 64 * j, 48, 48), objectness=0.91, feature=f))
        result = KMeansResult(np.array(assignments), np.stack(features))
        reports = cluster_reports(records, np.stack(features), result)

        store = ExemplarStore(cfg)
        created = select_unknown_clusters(reports, store, cfg, records, np.stack(features))
        assert len(created) == 3
        assert store.current_objectness_threshold == pytest.approx(0.99)


class TestMining:
    def test_within_radius(self):
        store = _store_with([np.eye(D)[0]])
        near = make_record(feature=at_distance(0.02))
        far = make_record(box=(64, 0, 48, 48), feature=at_distance(0.03))
        accepted = mine_exemplars([near, far], store, step=3)

        assert [(r.key, c) for r, c, _ in accepted] == [(near.key, 1)]
        assert accepted[0][2] == pytest.approx(0.02)
        assert store.classes[1][-1].source == MINED
        assert store.classes[1][-1].step == 3

    def test_unnormalized_features(self):
        store = _store_with([np.eye(D)[0]])
        accepted = mine_exemplars([make_record(feature=5.0 * at_distance(0.01))], store)
        assert len(accepted) == 1
        np.testing.assert_allclose(np.linalg.norm(store.classes[1][-1].feature), 1.0)

    def test_tie_goes_to_lowest_id(self):
        store = _store_with([np.eye(D)[0], np.eye(D)[0]])
        ((_, class_id, _),) = mine_exemplars([make_record(feature=np.eye(D)[0])], store)
        assert class_id == 1

    def test_nearest_class_wins(self):
        store = _store_with([np.eye(D)[0], at_distance(0.02)])
        ((_, class_id, _),) = mine_exemplars([make_record(feature=at_distance(0.015))], store)
        assert class_id == 2

    def test_compares_against_entry_state(self):
        store = _store_with([np.eye(D)[0]])
        first = make_record(feature=at_distance(0.02))
        ## Close to `first` but too far from the stored exemplar.
        second = make_record(box=(64, 0, 48, 48), feature=at_distance(0.035))
        accepted = mine_exemplars([first, second], store)
        assert len(accepted) == 1

    def test_empty_store(self):
        assert mine_exemplars([make_record(feature=np.eye(D)[0])], ExemplarStore()) == []

    def test_dimension_mismatch(self):
        store = _store_with([np.eye(D)[0]])
        with pytest.raises(DimensionMismatchError):
            mine_exemplars([make_record(feature=np.ones(D + 1))], store)


class TestRefresh:
    def _store(self):
        store = ExemplarStore()
        store.new_class(
            [Exemplar(make_record(feature=at_distance(0.1)), np.eye(D)[0])]
        )
        return store

    def test_identity_provider(self):
        store = refresh_features(self._store(), lambda r: r.feature)
        np.testing.assert_allclose(store.classes[1][0].feature, at_distance(0.1))

    def test_scaled_provider(self):
        store = refresh_features(self._store(), lambda r: 7.0 * r.feature)
        np.testing.assert_allclose(store.classes[1][0].feature, at_distance(0.1))

    def test_matrix_is_rebuilt(self):
        store = self._store()
        before, _, _ = store.matrix()
        refresh_features(store, lambda r: r.feature)
        after, _, _ = store.matrix()
        assert not np.allclose(before, after)

    @pytest.mark.parametrize(
        "provider",
        [
            lambda r: 1 / 0,
            lambda r: np.ones(D + 1),
            lambda r: np.zeros(D),
            lambda r: np.full(D, np.nan),
        ],
    )
    def test_bad_provider(self, provider):
        with pytest.raises(ProviderError):
            refresh_features(self._store(), provider)

    def test_failure_leaves_store_untouched(self):
        store = ExemplarStore()
        for image_id in range(2):
            r = make_record(image_id=image_id, feature=np.eye(D)[image_id])
            store.new_class([Exemplar(r, np.eye(D)[image_id])])
        before, _, _ = store.matrix()
        before = before.copy()

        def provider(r):
            if r.image_id == 1:
                raise OSError("feature file went away")
            return np.eye(D)[2]

        with pytest.raises(ProviderError, match="class 2"):
            refresh_features(store, provider)

        np.testing.assert_array_equal(store.classes[1][0].feature, np.eye(D)[0])
        np.testing.assert_array_equal(store.classes[2][0].feature, np.eye(D)[1])
        after, _, _ = store.matrix()
        np.testing.assert_array_equal(after, before)
