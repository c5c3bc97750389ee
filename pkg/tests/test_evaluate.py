import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwave.errors import ConfigError
from fwave.evaluate import (
    ClassifierMetrics,
    FeatureTable,
    auroc_rank,
    evaluate_model,
    predict_proba,
    rank_methods,
    stratified_split,
    train_rf,
)


def _table(daf_af, daf_nonaf, method="vote"):
    t = FeatureTable.empty()
    for i, d in enumerate(daf_af):
        t.append(f"af{i:03d}", method, d, "AF")
    for i, d in enumerate(daf_nonaf):
        t.append(f"ns{i:03d}", method, d, "non-AF")
    return t


class TestStratifiedSplit:
    def test_balanced_80_20(self):
        rng = np.random.default_rng(0)
        t = _table(rng.uniform(5, 8, 100), rng.uniform(9, 11, 100))
        out = stratified_split(t, rng_seed=1)
        counts = {}
        for wid, _, _, lab, spl in out.rows():
            counts[(lab, spl)] = counts.get((lab, spl), 0) + 1
        assert counts[("AF", "train")] == 80
        assert counts[("non-AF", "train")] == 80
        assert counts[("AF", "test")] == 20
        assert counts[("non-AF", "test")] == 20

    def test_downsamples_majority(self):
        rng = np.random.default_rng(0)
        t = _table(rng.uniform(5, 8, 100), rng.uniform(9, 11, 60))
        out = stratified_split(t, rng_seed=1)
        counts = {}
        for _, _, _, lab, spl in out.rows():
            counts[(lab, spl)] = counts.get((lab, spl), 0) + 1
        assert counts[("AF", "train")] == 48
        assert counts[("non-AF", "train")] == 48
        assert counts[("AF", "test")] == 52
        assert counts[("non-AF", "test")] == 12

    def test_all_methods_share_window_split(self):
        rng = np.random.default_rng(0)
        t = FeatureTable.empty()
        for i in range(20):
            lab = "AF" if i < 10 else "non-AF"
            for m in ("TS_B", "TS_CE"):
                t.append(f"w{i:03d}", m, rng.uniform(4, 12), lab)
        out = stratified_split(t, rng_seed=2)
        per_window = {}
        for wid, _, _, _, spl in out.rows():
            per_window.setdefault(wid, set()).add(spl)
        assert all(len(s) == 1 for s in per_window.values())

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        t = _table(rng.uniform(5, 8, 30), rng.uniform(9, 11, 30))
        a = stratified_split(t, rng_seed=9)
        b = stratified_split(t, rng_seed=9)
        assert a.split == b.split

    def test_small_class_rejected(self):
        t = _table([6.0] * 4, [10.0] * 20)
        with pytest.raises(ConfigError, match="4"):
            stratified_split(t)

    def test_conflicting_labels_rejected(self):
        t = FeatureTable(["w0", "w0"], ["TS_B", "TS_CE"], [6.0, 6.0],
                         ["AF", "non-AF"])
        with pytest.raises(ConfigError, match="conflicting"):
            stratified_split(t)


class TestRandomForest:
    def test_separable_classes_perfect_auroc(self):
        rng = np.random.default_rng(1)
        t = _table(rng.uniform(5.5, 7.5, 50), rng.uniform(9, 11, 50))
        t = stratified_split(t, rng_seed=0)
        model = train_rf(t, "vote", rng_seed=0)
        m = evaluate_model(model, t)
        assert m.auroc == pytest.approx(1.0)
        assert m.f1 == pytest.approx(1.0)

    def test_permuted_labels_auroc_near_half(self):
        rng = np.random.default_rng(2)
        aurocs = []
        for seed in range(20):
            daf = rng.uniform(4, 12, 60)
            labs = np.array(["AF"] * 30 + ["non-AF"] * 30)
            rng.shuffle(labs)
            t = FeatureTable.empty()
            for i, (d, lab) in enumerate(zip(daf, labs)):
                t.append(f"w{i:03d}", "vote", d, lab)
            t = stratified_split(t, rng_seed=seed)
            model = train_rf(t, "vote", rng_seed=seed)
            aurocs.append(evaluate_model(model, t).auroc)
        assert abs(np.mean(aurocs) - 0.5) < 0.1

    def test_degenerate_feature_predicts_prior(self):
        t = _table([6.0] * 20, [6.0] * 20)
        t = stratified_split(t, rng_seed=0)
        model = train_rf(t, "vote", rng_seed=0)
        assert model.degenerate
        m = evaluate_model(model, t)
        assert m.auroc == pytest.approx(0.5)

    def test_bit_exact_reproducibility(self):
        rng = np.random.default_rng(3)
        t = _table(rng.uniform(5, 9, 40), rng.uniform(7, 11, 40))
        t = stratified_split(t, rng_seed=5)
        x_test, _, _ = t.select(method="vote", split="test")
        p1 = predict_proba(train_rf(t, "vote", rng_seed=5), x_test)
        p2 = predict_proba(train_rf(t, "vote", rng_seed=5), x_test)
        assert np.array_equal(p1, p2)

    def test_missing_method_rejected(self):
        t = _table([6.0] * 10, [10.0] * 10)
        t = stratified_split(t, rng_seed=0)
        with pytest.raises(ConfigError, match="TS_PCA"):
            train_rf(t, "TS_PCA")


class TestAuroc:
    def test_separated_scores(self):
        assert auroc_rank([0.9, 0.8, 0.7, 0.1], [1, 1, 0, 0]) == pytest.approx(1.0)

    def test_one_swap_gives_075(self):
        assert auroc_rank([0.9, 0.8, 0.85, 0.1], [1, 1, 0, 0]) == pytest.approx(0.75)

    def test_ties_half_credit(self):
        assert auroc_rank([0.5, 0.5], [1, 0]) == pytest.approx(0.5)

    def test_brute_force_equivalence_small(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = rng.integers(4, 50)
            scores = rng.choice(np.linspace(0, 1, 7), size=n)
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            brute = np.mean([
                1.0 if p > q else (0.5 if p == q else 0.0)
                for p in pos for q in neg
            ])
            assert auroc_rank(scores, labels) == pytest.approx(brute, abs=1e-12)

    @given(
        # coarse score grid so the transform cannot merge near-equal floats
        st.lists(st.sampled_from([i / 20 for i in range(21)]), min_size=4, max_size=30),
        st.data(),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone_transform_invariance(self, scores, data):
        labels = data.draw(
            st.lists(st.integers(min_value=0, max_value=1),
                     min_size=len(scores), max_size=len(scores))
        )
        scores = np.array(scores)
        labels = np.array(labels)
        a = auroc_rank(scores, labels)
        b = auroc_rank(np.exp(3.0 * scores), labels)
        assert a == pytest.approx(b, abs=1e-12)


class TestEvaluateModel:
    def test_hand_computed_f1(self):
        # 8 test rows; a stump that calls daf <= 8 AF
        t = FeatureTable.empty()
        train = [(6.0, "AF"), (6.5, "AF"), (7.0, "AF"), (7.5, "AF"), (6.2, "AF"),
                 (9.0, "non-AF"), (9.5, "non-AF"), (10.0, "non-AF"),
                 (10.5, "non-AF"), (9.2, "non-AF")]
        for i, (d, lab) in enumerate(train):
            t.append(f"tr{i}", "vote", d, lab, "train")
        # test: 3 AF of which one lands on the wrong side, 5 non-AF all right
        test = [(6.1, "AF"), (6.9, "AF"), (9.8, "AF"),
                (9.1, "non-AF"), (9.9, "non-AF"), (10.2, "non-AF"),
                (10.8, "non-AF"), (9.4, "non-AF")]
        for i, (d, lab) in enumerate(test):
            t.append(f"te{i}", "vote", d, lab, "test")
        model = train_rf(t, "vote", rng_seed=0)
        m = evaluate_model(model, t)
        # tp=2 fn=1 fp=0 -> sens=2/3, ppv=1, f1=0.8
        assert m.sensitivity == pytest.approx(2 / 3)
        assert m.ppv == pytest.approx(1.0)
        assert m.f1 == pytest.approx(0.8)
        assert m.n_train == 10 and m.n_test == 8

    def test_no_test_rows_rejected(self):
        t = _table([6.0] * 10, [10.0] * 10)
        for i in range(len(t)):
            t.split[i] = "train"
        model = train_rf(t, "vote", rng_seed=0)
        with pytest.raises(ConfigError, match="test"):
            evaluate_model(model, t)


def _metrics(f1, auroc):
    return ClassifierMetrics(f1=f1, auroc=auroc, sensitivity=0, ppv=0)


class TestRankMethods:
    def test_f1_then_name_tiebreak(self):
        metrics = {
            "TS_B": _metrics(0.62, 0.59),
            "TS_CE": _metrics(0.61, 0.59),
            "TS_SU": _metrics(0.61, 0.59),
            "TS_PCA": _metrics(0.56, 0.53),
        }
        assert rank_methods(metrics) == ["TS_B", "TS_CE", "TS_SU", "TS_PCA"]

    def test_auroc_primary(self):
        metrics = {
            "TS_B": _metrics(0.99, 0.70),
            "TS_CE": _metrics(0.10, 0.80),
        }
        assert rank_methods(metrics) == ["TS_CE", "TS_B"]

    def test_all_equal_lexicographic(self):
        metrics = {m: _metrics(0.5, 0.5) for m in ("TS_SU", "TS_B", "TS_PCA", "TS_CE")}
        assert rank_methods(metrics) == ["TS_B", "TS_CE", "TS_PCA", "TS_SU"]

    def test_needs_two(self):
        with pytest.raises(ConfigError):
            rank_methods({"TS_B": _metrics(0.5, 0.5)})


class TestFeatureTableCsv:
    def test_roundtrip(self, tmp_path):
        t = _table([6.0, 6.5], [10.0, 9.1])
        t.split = ["train", "test", "train", "test"]
        p = tmp_path / "f.csv"
        t.to_csv(p)
        back = FeatureTable.from_csv(p)
        assert back.window_ids == t.window_ids
        assert back.labels == t.labels
        assert back.split == t.split
        np.testing.assert_allclose(back.daf_hz, t.daf_hz, atol=1e-6)

    def test_header_format(self, tmp_path):
        t = _table([6.0], [10.0])
        p = tmp_path / "f.csv"
        t.to_csv(p)
        assert p.read_text().splitlines()[0] == "window_id,method,daf_hz,label,split"

    def test_mismatched_columns_rejected(self):
        with pytest.raises(ValueError):
            FeatureTable(["a"], [], [6.0], ["AF"])
