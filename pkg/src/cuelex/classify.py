"""Two-judge agreement statistics and cross-validated cue-word classifiers.

Datasets carry concatenated embedding vectors as features.  All classifiers
are trained from scratch here; every source of randomness flows from an
explicit seed, so a (dataset, spec, folds, seed) tuple fully determines the
evaluation report.
"""

from __future__ import annotations

import csv
import hashlib
import random
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingModel
from .errors import CuelexError, InputError
from .expansion import SeedLexicon

VARIANCE_FLOOR = 1e-9
DATASET_SHUFFLE_SEED = 13  # fixed pre-fold shuffle, part of the dataset contract


@dataclass(frozen=True)
class Annotation:
    word: str
    judge1: str  # pos | neg
    judge2: str


def load_annotations(path: str | Path) -> list[Annotation]:
    """Annotations CSV with header word,judge1,judge2 and pos/neg values."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"annotations file not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"empty annotations file: {path}") from None
        if [h.strip() for h in header] != ["word", "judge1", "judge2"]:
            raise InputError(f'{path}: expected header "word,judge1,judge2"')
        out = []
        seen = set()
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields")
            word, j1, j2 = (c.strip() for c in row)
            if j1 not in ("pos", "neg") or j2 not in ("pos", "neg"):
                raise InputError(f'{path}:{lineno}: judge values must be "pos" or "neg"')
            if word.lower() in seen:
                raise InputError(f"{path}:{lineno}: duplicate word {word!r}")
            seen.add(word.lower())
            out.append(Annotation(word, j1, j2))
    return out


@dataclass(frozen=True)
class AgreementReport:
    n_pp: int
    n_pn: int
    n_np: int
    n_nn: int
    percent_agreement: float
    kappa: float
    band: str

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pn + self.n_np + self.n_nn


def landis_koch_band(kappa: float) -> str:
    if kappa <= 0.0:
        return "poor"
    if kappa <= 0.2:
        return "slight"
    if kappa <= 0.4:
        return "fair"
    if kappa <= 0.6:
        return "moderate"
    if kappa <= 0.8:
        return "substantial"
    return "almost perfect"


def agreement_from_counts(n_pp: int, n_pn: int, n_np: int, n_nn: int) -> AgreementReport:
    """Percent agreement and Cohen's kappa from the 2x2 judgment counts."""
    total = n_pp + n_pn + n_np + n_nn
    if total < 2:
        raise InputError("agreement needs at least 2 annotations")
    p_o = (n_pp + n_nn) / total
    j1_pos = (n_pp + n_pn) / total
    j2_pos = (n_pp + n_np) / total
    p_e = j1_pos * j2_pos + (1 - j1_pos) * (1 - j2_pos)
    if p_e == 1.0:
        raise CuelexError("kappa undefined: degenerate marginals (p_e = 1)")
    kappa = (p_o - p_e) / (1 - p_e)
    return AgreementReport(n_pp, n_pn, n_np, n_nn, p_o, kappa, landis_koch_band(kappa))


def agreement(annotations) -> AgreementReport:
    counts = {"pp": 0, "pn": 0, "np": 0, "nn": 0}
    for a in annotations:
        key = ("p" if a.judge1 == "pos" else "n") + ("p" if a.judge2 == "pos" else "n")
        counts[key] += 1
    return agreement_from_counts(counts["pp"], counts["pn"], counts["np"], counts["nn"])


def sample_unrelated(
    model: EmbeddingModel,
    lexicon: SeedLexicon,
    n: int = 100,
    max_sim: float = 0.2,
    rng_seed: int = 0,
    exclude=(),
) -> list[str]:
    """Draw n vocabulary tokens far from every seed (max cosine < max_sim).

    The vocabulary is scanned in a seeded shuffle order; candidate-set words
    and lexicon words are skipped.  Raises when the full scan cannot supply n
    qualifying tokens.
    """
    if n < 0:
        raise InputError("n must be non-negative")
    if n == 0:
        return []
    units = model.units
    seed_units = []
    for entry in lexicon.entries:
        for form in entry.model_forms:
            form = form.replace(" ", "_")
            try:
                idx = model.lookup(form)
            except InputError:
                continue
            if model.usable(model.vocab[idx]):
                seed_units.append(units[idx])
    if not seed_units:
        raise InputError(f"no seed form is present in model {model.name!r}")
    seed_matrix = np.vstack(seed_units)

    blocked = {w.lower() for w in exclude} | lexicon.folded_words()
    indices = list(range(len(model)))
    random.Random(rng_seed).shuffle(indices)

    out = []
    chunk = 2048
    for start in range(0, len(indices), chunk):
        block = indices[start : start + chunk]
        sims = seed_matrix @ units[block].T
        max_sims = sims.max(axis=0)
        for pos, idx in enumerate(block):
            token = model.vocab[idx]
            if not model.usable(token) or token.lower() in blocked:
                continue
            if max_sims[pos] < max_sim:
                out.append(token)
                if len(out) == n:
                    return out
    raise CuelexError(
        f"only {len(out)} of {n} requested unrelated tokens qualify in model {model.name!r}"
    )


@dataclass
class LabeledExample:
    word: str
    features: np.ndarray  # float32, fixed length per run
    label: int  # 1 = valid cue word, 0 = not
    oov_flags: tuple[bool, ...]  # per model, True when the segment is zero-filled


def featurize(word: str, models, policy: str = "concat"):
    """Concatenate the word's stored vectors across models, zero-filling OOV segments."""
    if policy != "concat":
        raise InputError(f"unknown featurize policy {policy!r}")
    segments = []
    flags = []
    hit = False
    for model in models:
        try:
            vec = model.vector(word)
            segments.append(vec)
            flags.append(False)
            hit = True
        except InputError:
            segments.append(np.zeros(model.dim, dtype=np.float32))
            flags.append(True)
    if not hit:
        raise InputError(f"word {word!r} is out of vocabulary in every model")
    return np.concatenate(segments), tuple(flags)


@dataclass
class DatasetBuild:
    examples: list[LabeledExample]
    excluded: list[str]  # words OOV in every model


def build_dataset(
    accepted,
    rejected,
    unrelated,
    models,
    seeds=(),
    include_seeds: bool = False,
    shuffle_seed: int = DATASET_SHUFFLE_SEED,
) -> DatasetBuild:
    """Labeled examples: positives = accepted (plus seeds when flagged),
    negatives = rejected + unrelated.

    Input lists must be disjoint.  Words missing from every model are excluded
    and reported.  The result is shuffled with a fixed seed before folding.
    """
    seed_words = list(seeds) if include_seeds else []
    groups = {
        "accepted": [w.lower() for w in accepted],
        "rejected": [w.lower() for w in rejected],
        "unrelated": [w.lower() for w in unrelated],
        "seeds": [w.lower() for w in seed_words],
    }
    names = list(groups)
    for i, g1 in enumerate(names):
        for g2 in names[i + 1 :]:
            overlap = set(groups[g1]) & set(groups[g2])
            if overlap:
                raise InputError(
                    f"overlapping lists {g1}/{g2}: {sorted(overlap)[:5]}"
                )

    labeled = [(w, 1) for w in list(accepted) + seed_words] + [
        (w, 0) for w in list(rejected) + list(unrelated)
    ]
    n_pos = sum(1 for _, y in labeled if y == 1)
    n_neg = len(labeled) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("degenerate dataset: needs both positive and negative examples")

    examples = []
    excluded = []
    for word, label in labeled:
        try:
            feats, flags = featurize(word, models)
        except InputError:
            excluded.append(word)
            continue
        examples.append(LabeledExample(word, feats, label, flags))
    if not examples:
        raise InputError("degenerate dataset: every word is out of vocabulary")
    random.Random(shuffle_seed).shuffle(examples)
    return DatasetBuild(examples, excluded)


def kfold(dataset, k: int = 10, rng_seed: int = 0) -> np.ndarray:
    """Stratified fold assignment: folds[i] is the test fold of example i.

    Fold sizes differ by at most one and per-label counts are spread evenly;
    assignment is deterministic given the seed.
    """
    n = len(dataset)
    if k < 2:
        raise InputError("k must be at least 2")
    if k > n:
        raise InputError(f"k={k} exceeds dataset size {n}")
    rng = random.Random(rng_seed)
    folds = np.full(n, -1, dtype=np.int64)
    fill = [0] * k
    labels = sorted({ex.label for ex in dataset})
    for label in labels:
        idx = [i for i, ex in enumerate(dataset) if ex.label == label]
        rng.shuffle(idx)
        base, extra = divmod(len(idx), k)
        # folds with the least examples so far absorb this label's remainder
        order = sorted(range(k), key=lambda f: (fill[f], f))
        counts = [base] * k
        for f in order[:extra]:
            counts[f] += 1
        pos = 0
        for f in range(k):
            for i in idx[pos : pos + counts[f]]:
                folds[i] = f
            fill[f] += counts[f]
            pos += counts[f]
    return folds


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str  # knn | gaussian_nb | logistic_sgd | mlp
    params: tuple = ()

    @property
    def name(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.kind}({inner})"

    def get(self, key, default):
        for k, v in self.params:
            if k == key:
                return v
        return default


def parse_classifier_spec(text: str) -> ClassifierSpec:
    """Parse "knn:k=3" style spec strings."""
    text = text.strip()
    if ":" in text:
        kind, rest = text.split(":", 1)
        params = []
        for part in rest.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise InputError(f"bad classifier parameter {part!r}")
            key, val = part.split("=", 1)
            try:
                parsed = float(val) if "." in val or "e" in val.lower() else int(val)
            except ValueError:
                raise InputError(f"bad classifier parameter value {val!r}") from None
            params.append((key.strip(), parsed))
        return ClassifierSpec(kind.strip(), tuple(params))
    return ClassifierSpec(text)


class KnnClassifier:
    """k-nearest neighbors under cosine distance; vote ties go to the nearest."""

    def __init__(self, k: int = 3):
        if k < 1:
            raise InputError("knn needs k >= 1")
        self.k = k

    def fit(self, X: np.ndarray, y: np.ndarray):
        self._units = _unit_rows(X)
        self._y = y.copy()
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        units = _unit_rows(X)
        sims = units @ self._units.T
        k = min(self.k, sims.shape[1])
        out = np.empty(len(X), dtype=np.int64)
        for i in range(len(X)):
            dist = 1.0 - sims[i]
            order = np.lexsort((np.arange(len(dist)), dist))[:k]
            votes = np.bincount(self._y[order], minlength=2)
            if votes[0] == votes[1]:
                out[i] = self._y[order[0]]
            else:
                out[i] = int(np.argmax(votes))
        return out


class GaussianNbClassifier:
    """Per-feature normal likelihoods with a variance floor."""

    def fit(self, X: np.ndarray, y: np.ndarray):
        self._classes = np.unique(y)
        if len(self._classes) < 2:
            warnings.warn("gaussian fit saw a single class; variance-floor fallback")
        self._priors = {}
        self._means = {}
        self._vars = {}
        for c in self._classes:
            Xc = X[y == c]
            self._priors[c] = len(Xc) / len(X)
            self._means[c] = Xc.mean(axis=0)
            var = Xc.var(axis=0)
            self._vars[c] = np.maximum(var, VARIANCE_FLOOR)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        scores = np.full((len(X), 2), -np.inf)
        for c in self._classes:
            mean, var = self._means[c], self._vars[c]
            ll = -0.5 * (np.log(2.0 * np.pi * var) + (X - mean) ** 2 / var).sum(axis=1)
            scores[:, int(c)] = ll + np.log(self._priors[c])
        return np.argmax(scores, axis=1)


class LogisticSgdClassifier:
    """Logistic regression trained with seeded minibatch SGD."""

    def __init__(self, lr: float = 0.0005, epochs: int = 500, batch: int = 100, rng_seed: int = 0):
        self.lr = lr
        self.epochs = epochs
        self.batch = batch
        self.rng_seed = rng_seed

    def fit(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        rng = random.Random(self.rng_seed)
        n, d = X.shape
        self._w = np.zeros(d)
        self._b = 0.0
        idx = list(range(n))
        for _ in range(self.epochs):
            rng.shuffle(idx)
            for start in range(0, n, self.batch):
                sel = idx[start : start + self.batch]
                Xb, yb = X[sel], y[sel]
                err = _sigmoid(Xb @ self._w + self._b) - yb
                self._w -= self.lr * (Xb.T @ err) / len(sel)
                self._b -= self.lr * err.mean()
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        z = np.asarray(X, dtype=np.float64) @ self._w + self._b
        return (z >= 0.0).astype(np.int64)


class MlpClassifier:
    """One hidden tanh layer (width 6 by default) trained with seeded minibatch SGD."""

    def __init__(
        self,
        hidden_width: int = 6,
        lr: float = 0.0005,
        epochs: int = 500,
        batch: int = 100,
        rng_seed: int = 0,
    ):
        self.hidden_width = hidden_width
        self.lr = lr
        self.epochs = epochs
        self.batch = batch
        self.rng_seed = rng_seed

    def fit(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        n, d = X.shape
        h = self.hidden_width
        nprng = np.random.default_rng(self.rng_seed)
        self._W1 = nprng.normal(0.0, 1.0 / np.sqrt(d), size=(d, h))
        self._b1 = np.zeros(h)
        self._w2 = nprng.normal(0.0, 1.0 / np.sqrt(h), size=h)
        self._b2 = 0.0
        rng = random.Random(self.rng_seed)
        idx = list(range(n))
        for _ in range(self.epochs):
            rng.shuffle(idx)
            for start in range(0, n, self.batch):
                sel = idx[start : start + self.batch]
                Xb, yb = X[sel], y[sel]
                hidden = np.tanh(Xb @ self._W1 + self._b1)
                err = _sigmoid(hidden @ self._w2 + self._b2) - yb
                grad_w2 = hidden.T @ err / len(sel)
                grad_b2 = err.mean()
                back = np.outer(err, self._w2) * (1.0 - hidden**2)
                grad_W1 = Xb.T @ back / len(sel)
                grad_b1 = back.mean(axis=0)
                self._w2 -= self.lr * grad_w2
                self._b2 -= self.lr * grad_b2
                self._W1 -= self.lr * grad_W1
                self._b1 -= self.lr * grad_b1
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        hidden = np.tanh(np.asarray(X, dtype=np.float64) @ self._W1 + self._b1)
        z = hidden @ self._w2 + self._b2
        return (z >= 0.0).astype(np.int64)


def make_classifier(spec: ClassifierSpec, rng_seed: int = 0):
    if spec.kind == "knn":
        return KnnClassifier(k=int(spec.get("k", 3)))
    if spec.kind == "gaussian_nb":
        return GaussianNbClassifier()
    if spec.kind == "logistic_sgd":
        return LogisticSgdClassifier(
            lr=float(spec.get("lr", 0.0005)),
            epochs=int(spec.get("epochs", 500)),
            batch=int(spec.get("batch", 100)),
            rng_seed=rng_seed,
        )
    if spec.kind == "mlp":
        return MlpClassifier(
            hidden_width=int(spec.get("hidden_width", 6)),
            lr=float(spec.get("lr", 0.0005)),
            epochs=int(spec.get("epochs", 500)),
            batch=int(spec.get("batch", 100)),
            rng_seed=rng_seed,
        )
    raise InputError(f"unknown classifier kind {spec.kind!r}")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()  # names of zero-denominator metrics forced to 0


def metrics(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    """Standard confusion-matrix metrics; zero denominators yield 0 with a flag."""
    total = tp + fp + fn + tn
    if total == 0:
        raise InputError("empty confusion matrix")
    flags = []
    accuracy = (tp + tn) / total
    if tp + fp == 0:
        precision = 0.0
        flags.append("precision")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("recall")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
        flags.append("f1")
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return Metrics(accuracy, precision, recall, f1, tuple(flags))


@dataclass(frozen=True)
class EvalReport:
    classifier: str
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...]
    fold_digest: str


def fold_digest(folds: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(folds, dtype=np.int64).tobytes()).hexdigest()[:12]


def train_eval(dataset, spec: ClassifierSpec, folds: np.ndarray, rng_seed: int = 0) -> EvalReport:
    """Cross-validate one classifier spec, pooling a single confusion matrix."""
    folds = np.asarray(folds)
    if len(folds) != len(dataset):
        raise InputError("fold assignment length does not match dataset")
    X = np.vstack([ex.features for ex in dataset]).astype(np.float64)
    y = np.array([ex.label for ex in dataset], dtype=np.int64)
    tp = fp = fn = tn = 0
    for f in sorted(set(folds.tolist())):
        test = folds == f
        train = ~test
        if train.sum() == 0:
            raise InputError("a fold leaves no training data")
        clf = make_classifier(spec, rng_seed=rng_seed)
        clf.fit(X[train], y[train])
        pred = clf.predict(X[test])
        truth = y[test]
        tp += int(((pred == 1) & (truth == 1)).sum())
        fp += int(((pred == 1) & (truth == 0)).sum())
        fn += int(((pred == 0) & (truth == 1)).sum())
        tn += int(((pred == 0) & (truth == 0)).sum())
    m = metrics(tp, fp, fn, tn)
    return EvalReport(
        spec.name, tp, fp, fn, tn, m.accuracy, m.precision, m.recall, m.f1, m.flags,
        fold_digest(folds),
    )


def _unit_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt((X * X).sum(axis=1))
    units = np.zeros_like(X)
    np.divide(X, norms[:, None], out=units, where=norms[:, None] > 0)
    return units


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
