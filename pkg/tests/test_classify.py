import random

import numpy as np
import pytest

from conftest import make_model

from cuelex.classify import (
    Annotation,
    ClassifierSpec,
    LabeledExample,
    agreement,
    agreement_from_counts,
    build_dataset,
    featurize,
    kfold,
    landis_koch_band,
    load_annotations,
    make_classifier,
    metrics,
    parse_classifier_spec,
    sample_unrelated,
    train_eval,
)
from cuelex.embeddings import EmbeddingModel
from cuelex.errors import CuelexError, InputError
from cuelex.expansion import parse_seed_lexicon


def annotations_from_counts(pp, pn, np_, nn):
    out = []
    i = 0
    for count, j1, j2 in ((pp, "pos", "pos"), (pn, "pos", "neg"), (np_, "neg", "pos"), (nn, "neg", "neg")):
        for _ in range(count):
            out.append(Annotation(f"w{i}", j1, j2))
            i += 1
    return out


# --- agreement ---------------------------------------------------------------


def test_agreement_published_counts():
    report = agreement_from_counts(151, 49, 63, 130)
    assert report.total == 393
    assert report.percent_agreement == pytest.approx(281 / 393, abs=1e-12)
    assert report.percent_agreement == pytest.approx(0.715, abs=5e-4)
    assert report.kappa == pytest.approx(0.4291, abs=5e-4)
    assert report.band == "moderate"


def test_agreement_from_annotations_matches_counts():
    annos = annotations_from_counts(151, 49, 63, 130)
    random.Random(0).shuffle(annos)
    report = agreement(annos)
    assert (report.n_pp, report.n_pn, report.n_np, report.n_nn) == (151, 49, 63, 130)
    assert report.kappa == pytest.approx(0.4291, abs=5e-4)


def test_agreement_perfect():
    report = agreement_from_counts(50, 0, 0, 50)
    assert report.percent_agreement == 1.0
    assert report.kappa == pytest.approx(1.0)


def test_agreement_independence():
    report = agreement_from_counts(25, 25, 25, 25)
    assert report.percent_agreement == 0.5
    assert report.kappa == pytest.approx(0.0, abs=1e-12)


def test_agreement_degenerate_marginals():
    with pytest.raises(CuelexError, match="kappa undefined"):
        agreement_from_counts(10, 0, 0, 0)


def test_agreement_minimum_size():
    with pytest.raises(InputError):
        agreement_from_counts(1, 0, 0, 0)


def test_kappa_recomputation_invariant():
    rng = random.Random(7)
    for _ in range(25):
        counts = [rng.randint(1, 50) for _ in range(4)]
        report = agreement_from_counts(*counts)
        total = sum(counts)
        p_o = (counts[0] + counts[3]) / total
        p1 = (counts[0] + counts[1]) / total
        p2 = (counts[0] + counts[2]) / total
        p_e = p1 * p2 + (1 - p1) * (1 - p2)
        assert report.kappa == pytest.approx((p_o - p_e) / (1 - p_e), abs=1e-12)


def test_kappa_judge_swap_symmetry():
    a = agreement_from_counts(40, 9, 17, 30)
    b = agreement_from_counts(40, 17, 9, 30)
    assert a.kappa == pytest.approx(b.kappa, abs=1e-12)
    assert a.percent_agreement == pytest.approx(b.percent_agreement, abs=1e-12)


def test_landis_koch_cut_points():
    assert landis_koch_band(-0.2) == "poor"
    assert landis_koch_band(0.0) == "poor"
    assert landis_koch_band(0.15) == "slight"
    assert landis_koch_band(0.35) == "fair"
    assert landis_koch_band(0.41) == "moderate"
    assert landis_koch_band(0.60) == "moderate"
    assert landis_koch_band(0.75) == "substantial"
    assert landis_koch_band(0.95) == "almost perfect"


def test_load_annotations(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("word,judge1,judge2\nalpha,pos,neg\nbeta,neg,neg\n")
    annos = load_annotations(path)
    assert annos == [Annotation("alpha", "pos", "neg"), Annotation("beta", "neg", "neg")]


def test_load_annotations_errors(tmp_path):
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("term,j1,j2\nx,pos,pos\n")
    with pytest.raises(InputError, match="header"):
        load_annotations(bad_header)
    bad_value = tmp_path / "v.csv"
    bad_value.write_text("word,judge1,judge2\nx,yes,pos\n")
    with pytest.raises(InputError, match="pos"):
        load_annotations(bad_value)
    dupe = tmp_path / "d.csv"
    dupe.write_text("word,judge1,judge2\nx,pos,pos\nX,neg,neg\n")
    with pytest.raises(InputError, match="duplicate"):
        load_annotations(dupe)


# --- sampling unrelated -------------------------------------------------------


def test_sample_unrelated_recheck_oracle(tmp_path):
    model = make_model(tmp_path, seed=13, n=300, dim=12)
    lex = parse_seed_lexicon([model.vocab[0].lower(), model.vocab[1].lower()])
    got = sample_unrelated(model, lex, n=20, max_sim=0.5, rng_seed=4)
    assert len(got) == len(set(got)) == 20
    for token in got:  # exhaustive recheck against every seed form
        for entry in lex.entries:
            for form in entry.model_forms:
                assert model.cosine(token, form) < 0.5
        assert token.lower() not in lex.folded_words()


def test_sample_unrelated_zero():
    model = EmbeddingModel("m", ["a", "b"], np.eye(2, dtype=np.float32))
    lex = parse_seed_lexicon(["a"])
    assert sample_unrelated(model, lex, n=0) == []


def test_sample_unrelated_deterministic(tmp_path):
    model = make_model(tmp_path, seed=19, n=200, dim=10)
    lex = parse_seed_lexicon([model.vocab[5].lower()])
    a = sample_unrelated(model, lex, n=15, max_sim=0.6, rng_seed=9)
    b = sample_unrelated(model, lex, n=15, max_sim=0.6, rng_seed=9)
    assert a == b


def test_sample_unrelated_respects_exclude(tmp_path):
    model = make_model(tmp_path, seed=23, n=100, dim=8)
    lex = parse_seed_lexicon([model.vocab[0].lower()])
    full = sample_unrelated(model, lex, n=10, max_sim=0.9, rng_seed=1)
    redone = sample_unrelated(model, lex, n=10, max_sim=0.9, rng_seed=1, exclude=full[:3])
    assert not set(w.lower() for w in redone) & set(w.lower() for w in full[:3])


def test_sample_unrelated_exhaustion_error():
    vecs = np.array([[1, 0], [0.99, 0.01], [0.98, 0.02]], dtype=np.float32)
    model = EmbeddingModel("m", ["seedtok", "n1", "n2"], vecs)
    lex = parse_seed_lexicon(["seedtok"])
    with pytest.raises(CuelexError, match="qualify"):
        sample_unrelated(model, lex, n=2, max_sim=0.2)


# --- featurize / dataset -------------------------------------------------------


def two_toy_models():
    m1 = EmbeddingModel(
        "m1", ["word", "only1", "shared"], np.array([[1, 2], [3, 4], [5, 6]], dtype=np.float32)
    )
    m2 = EmbeddingModel(
        "m2", ["word", "only2", "shared"], np.array([[7, 8], [9, 10], [11, 12]], dtype=np.float32)
    )
    return m1, m2


def test_featurize_concatenates_exactly():
    m1, m2 = two_toy_models()
    vec, flags = featurize("word", [m1, m2])
    assert vec.tolist() == [1, 2, 7, 8]
    assert flags == (False, False)
    # slicing the concatenation recovers each stored vector bit-exactly
    assert vec[:2].tobytes() == m1.vector("word").tobytes()
    assert vec[2:].tobytes() == m2.vector("word").tobytes()


def test_featurize_zero_fills_oov_segment():
    m1, m2 = two_toy_models()
    vec, flags = featurize("only1", [m1, m2])
    assert vec.tolist() == [3, 4, 0, 0]
    assert flags == (False, True)


def test_featurize_all_oov_errors():
    m1, m2 = two_toy_models()
    with pytest.raises(InputError, match="every model"):
        featurize("nowhere", [m1, m2])


def test_build_dataset_paper_shape(tmp_path):
    m1 = make_model(tmp_path, seed=31, n=500, dim=4, name="m1")
    m2 = make_model(tmp_path, seed=37, n=500, dim=3, name="m2")
    seen = set()
    vocab = []  # one token per lowercase key so the list-disjointness check holds
    for t in m1.vocab:
        if t.lower() not in seen:
            seen.add(t.lower())
            vocab.append(t)
    accepted = vocab[:151]
    rejected = vocab[151:281]
    unrelated = vocab[281:381]
    build = build_dataset(accepted, rejected, unrelated, [m1, m2])
    n_pos = sum(ex.label for ex in build.examples)
    assert n_pos == 151
    assert len(build.examples) - n_pos == 230
    for ex in build.examples:
        assert len(ex.features) == 4 + 3  # sum of model dims
    assert len({ex.word for ex in build.examples}) == len(build.examples)


def test_build_dataset_overlap_rejected():
    m1, m2 = two_toy_models()
    with pytest.raises(InputError, match="overlapping"):
        build_dataset(["word"], ["word"], [], [m1, m2])


def test_build_dataset_degenerate():
    m1, m2 = two_toy_models()
    with pytest.raises(InputError, match="degenerate"):
        build_dataset(["word"], [], [], [m1, m2])


def test_build_dataset_reports_oov():
    m1, m2 = two_toy_models()
    build = build_dataset(["word", "ghost"], ["shared"], [], [m1, m2])
    assert build.excluded == ["ghost"]
    assert {ex.word for ex in build.examples} == {"word", "shared"}


def test_build_dataset_shuffle_deterministic():
    m1, m2 = two_toy_models()
    b1 = build_dataset(["word", "only1"], ["shared", "only2"], [], [m1, m2])
    b2 = build_dataset(["word", "only1"], ["shared", "only2"], [], [m1, m2])
    assert [ex.word for ex in b1.examples] == [ex.word for ex in b2.examples]


def test_build_dataset_include_seeds():
    m1, m2 = two_toy_models()
    build = build_dataset(["word"], ["only2"], [], [m1, m2], seeds=["shared"], include_seeds=True)
    labels = {ex.word: ex.label for ex in build.examples}
    assert labels["shared"] == 1


# --- kfold ---------------------------------------------------------------------


def dataset_of(n_pos, n_neg, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_pos):
        out.append(LabeledExample(f"p{i}", rng.normal(size=dim).astype(np.float32), 1, (False,)))
    for i in range(n_neg):
        out.append(LabeledExample(f"n{i}", rng.normal(size=dim).astype(np.float32), 0, (False,)))
    random.Random(99).shuffle(out)
    return out


def test_kfold_singletons():
    ds = dataset_of(5, 5)
    folds = kfold(ds, k=10, rng_seed=0)
    assert sorted(np.bincount(folds).tolist()) == [1] * 10


def test_kfold_paper_shaped_sizes():
    ds = dataset_of(151, 230)
    folds = kfold(ds, k=10, rng_seed=1)
    sizes = np.bincount(folds, minlength=10)
    assert set(sizes.tolist()) <= {38, 39}
    assert sizes.sum() == 381


def test_kfold_partition_contract():
    ds = dataset_of(23, 17)
    folds = kfold(ds, k=7, rng_seed=5)
    assert len(folds) == 40
    assert set(folds.tolist()) == set(range(7))


def test_kfold_stratified():
    ds = dataset_of(60, 40)
    folds = kfold(ds, k=10, rng_seed=3)
    global_frac = 0.6
    for f in range(10):
        members = [ds[i] for i in range(len(ds)) if folds[i] == f]
        frac = sum(ex.label for ex in members) / len(members)
        assert abs(frac - global_frac) <= 1.0 / len(members) + 1e-12


def test_kfold_deterministic():
    ds = dataset_of(30, 30)
    assert kfold(ds, k=5, rng_seed=8).tolist() == kfold(ds, k=5, rng_seed=8).tolist()


def test_kfold_errors():
    ds = dataset_of(3, 3)
    with pytest.raises(InputError):
        kfold(ds, k=7)
    with pytest.raises(InputError):
        kfold(ds, k=1)


# --- classifiers -----------------------------------------------------------------


def separable_dataset(n=200, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n // 2):
        out.append(
            LabeledExample(
                f"p{i}", (rng.normal(0, 0.3, 2) + [2.0, 2.0]).astype(np.float32), 1, (False,)
            )
        )
        out.append(
            LabeledExample(
                f"n{i}", (rng.normal(0, 0.3, 2) + [-2.0, -2.0]).astype(np.float32), 0, (False,)
            )
        )
    random.Random(5).shuffle(out)
    return out


def test_knn_k1_memorizes_training_data():
    ds = dataset_of(20, 20, dim=5, seed=4)
    X = np.vstack([ex.features for ex in ds]).astype(np.float64)
    y = np.array([ex.label for ex in ds])
    clf = make_classifier(ClassifierSpec("knn", (("k", 1),)))
    clf.fit(X, y)
    assert (clf.predict(X) == y).all()


def test_logistic_sgd_separable_holdout():
    ds = separable_dataset()
    folds = kfold(ds, k=5, rng_seed=2)
    report = train_eval(ds, ClassifierSpec("logistic_sgd"), folds, rng_seed=2)
    assert report.accuracy >= 0.95


def test_mlp_separable_holdout():
    ds = separable_dataset(seed=6)
    folds = kfold(ds, k=5, rng_seed=3)
    report = train_eval(ds, ClassifierSpec("mlp"), folds, rng_seed=3)
    assert report.accuracy >= 0.9


def test_gaussian_nb_separable():
    ds = separable_dataset(seed=8)
    folds = kfold(ds, k=5, rng_seed=4)
    report = train_eval(ds, ClassifierSpec("gaussian_nb"), folds, rng_seed=4)
    assert report.accuracy >= 0.95


def test_gaussian_nb_single_class_warns():
    X = np.array([[0.0, 1.0], [0.2, 0.8]])
    y = np.array([1, 1])
    clf = make_classifier(ClassifierSpec("gaussian_nb"))
    with pytest.warns(UserWarning, match="single class"):
        clf.fit(X, y)
    assert clf.predict(np.array([[5.0, 5.0]])).tolist() == [1]


def test_sgd_deterministic_given_seed():
    ds = separable_dataset(seed=11)
    X = np.vstack([ex.features for ex in ds]).astype(np.float64)
    y = np.array([ex.label for ex in ds])
    preds = []
    for _ in range(2):
        clf = make_classifier(ClassifierSpec("logistic_sgd"), rng_seed=21)
        clf.fit(X, y)
        preds.append(clf.predict(X))
    assert (preds[0] == preds[1]).all()
    mlps = []
    for _ in range(2):
        clf = make_classifier(ClassifierSpec("mlp"), rng_seed=22)
        clf.fit(X, y)
        mlps.append(clf.predict(X))
    assert (mlps[0] == mlps[1]).all()


def test_deterministic_classifiers_invariant_to_training_order():
    ds = dataset_of(25, 25, dim=4, seed=14)
    X = np.vstack([ex.features for ex in ds]).astype(np.float64)
    y = np.array([ex.label for ex in ds])
    perm = np.random.default_rng(1).permutation(len(ds))
    probe = np.random.default_rng(2).normal(size=(10, 4))
    for kind in ("knn", "gaussian_nb"):
        a = make_classifier(ClassifierSpec(kind)).fit(X, y).predict(probe)
        b = make_classifier(ClassifierSpec(kind)).fit(X[perm], y[perm]).predict(probe)
        assert (a == b).all()


def test_metrics_hand_case():
    m = metrics(tp=8, fp=2, fn=1, tn=9)
    assert m.accuracy == pytest.approx(0.85, abs=1e-12)
    assert m.precision == pytest.approx(0.8, abs=1e-12)
    assert m.recall == pytest.approx(0.8889, abs=1e-4)
    assert m.f1 == pytest.approx(0.8421, abs=1e-4)
    assert m.flags == ()


def test_metrics_perfect_and_degenerate():
    m = metrics(tp=10, fp=0, fn=0, tn=10)
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)
    z = metrics(tp=0, fp=3, fn=0, tn=7)
    assert z.precision == 0.0 and z.f1 == 0.0
    assert "recall" in z.flags and "f1" in z.flags
    with pytest.raises(InputError):
        metrics(0, 0, 0, 0)


def test_train_eval_confusion_sums_to_dataset_size():
    ds = dataset_of(30, 25, dim=4, seed=17)
    folds = kfold(ds, k=5, rng_seed=6)
    report = train_eval(ds, ClassifierSpec("knn", (("k", 3),)), folds, rng_seed=6)
    assert report.tp + report.fp + report.fn + report.tn == len(ds)
    assert 0.0 <= report.accuracy <= 1.0
    assert len(report.fold_digest) == 12


def test_train_eval_fold_mismatch():
    ds = dataset_of(5, 5)
    with pytest.raises(InputError, match="fold"):
        train_eval(ds, ClassifierSpec("knn"), np.zeros(3, dtype=int))


def test_parse_classifier_spec():
    spec = parse_classifier_spec("knn:k=5")
    assert spec.kind == "knn" and spec.get("k", None) == 5
    assert spec.name == "knn(k=5)"
    assert parse_classifier_spec("mlp").kind == "mlp"
    with pytest.raises(InputError):
        parse_classifier_spec("knn:k")
    with pytest.raises(InputError):
        make_classifier(ClassifierSpec("boost"))
