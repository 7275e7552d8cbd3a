"""Frame-level linear probe and the per-fold dev-selected evaluation protocol."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from .rng import stream


@dataclass(frozen=True)
class ProbeModel:
    """Multinomial logistic regression: logits = features @ weight + bias."""

    weight: np.ndarray
    bias: np.ndarray
    objective: float = float("nan")

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValueError("weight must be k x C and bias length C")
        if self.weight.shape[1] < 2:
            raise ValueError("a probe needs at least 2 classes")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise FloatingPointError("probe parameters are not finite")

    @property
    def n_features(self):
        return self.weight.shape[0]

    @property
    def n_classes(self):
        return self.weight.shape[1]

    def logits(self, features):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ValueError(f"feature width {np.shape(features)[-1]} does not match probe input {self.n_features}")
        return features @ self.weight + self.bias

    def predict(self, features):
        # argmax returns the first maximum, so ties go to the lowest class index
        return np.argmax(self.logits(features), axis=1)


def _nll(logits, onehot):
    return -(onehot * log_softmax(logits, axis=1)).sum() / logits.shape[0]


def _standardizer(X, rel_floor=1e-10):
    """Column means, scales and the mask of columns with non-negligible variance."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    keep = scale > rel_floor * max(scale.max(initial=0.0), 0.0)
    return mean, scale, keep


def train_probe(features, labels, l2=1e-3, epochs=500, seed=0, n_classes=None, tol=1e-13):
    """Fit a multinomial logistic probe by full-batch accelerated gradient descent.

    Columns are standardized internally and ``l2`` penalizes the weights of
    the standardized columns; the scaling is folded back into the returned
    weights. Constant columns get zero weight. The step is the fixed
    ``1 / L`` with ``L = lambda_max(Z^T Z / n) / 2 + l2``, a bound on the
    curvature of the objective. A momentum step that would increase the
    objective is replaced by a plain gradient step and momentum restarts,
    so accepted iterates decrease monotonically. ``seed`` only sets the
    initial weights.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0] if X.ndim else 0} feature rows for {y.shape[0]} labels")
    if np.unique(y).size < 2:
        raise ValueError("probe training needs at least two classes in the labels")
    if y.min() < 0:
        raise ValueError("labels must be nonnegative class indices")
    C = int(n_classes or y.max() + 1)
    if y.max() >= C:
        raise ValueError(f"label {y.max()} outside {C} classes")
    if l2 < 0:
        raise ValueError("l2 must be nonnegative")

    mean, scale, keep = _standardizer(X)
    Z = np.hstack([(X[:, keep] - mean[keep]) / scale[keep], np.ones((X.shape[0], 1))])
    n = Z.shape[0]
    onehot = np.zeros((n, C))
    onehot[np.arange(n), y] = 1.0
    reg = np.ones((Z.shape[1], 1))
    reg[-1] = 0.0  # bias is not penalized

    def objective(Wb, logits):
        return _nll(logits, onehot) + 0.5 * l2 * np.sum(reg * Wb * Wb)

    def gradient(Wb, logits):
        return Z.T @ (softmax(logits, axis=1) - onehot) / n + l2 * reg * Wb

    # softmax cross-entropy has logit curvature at most 1/2
    step = 1.0 / (0.5 * np.linalg.eigvalsh(Z.T @ Z / n)[-1] + l2)
    Wb = 0.01 * stream(seed, "probe/init").standard_normal((Z.shape[1], C))
    lg = Z @ Wb
    f = objective(Wb, lg)
    prev, lg_prev, t = Wb, lg, 1.0
    for _ in range(epochs):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        look = Wb + mom * (Wb - prev)
        lg_look = lg + mom * (lg - lg_prev)
        cand = look - step * gradient(look, lg_look)
        lg_cand = Z @ cand
        f_cand = objective(cand, lg_cand)
        if f_cand > f:
            t_next = 1.0
            cand = Wb - step * gradient(Wb, lg)
            lg_cand = Z @ cand
            f_cand = objective(cand, lg_cand)
            if f_cand > f:
                break  # roundoff floor: even the plain step no longer decreases f
        done = f - f_cand <= tol * max(1.0, abs(f))
        prev, lg_prev, Wb, lg, t, f = Wb, lg, cand, lg_cand, t_next, f_cand
        if done:
            break
    W = np.zeros((X.shape[1], C))
    W[keep] = Wb[:-1] / scale[keep, None]
    b = Wb[-1] - mean @ W
    return ProbeModel(W, b, float(f))


def frame_error_rate(model, features, labels):
    labels = np.asarray(labels)
    pred = model.predict(features)
    if pred.shape != labels.shape:
        raise ValueError(f"{pred.shape[0]} predictions for {labels.shape[0]} labels")
    if labels.size == 0:
        raise ValueError("no frames to score")
    return float(np.mean(pred != labels))


@dataclass(frozen=True)
class ProbeConfig:
    l2_grid: tuple = (1e-3, 1e-2, 1e-1)
    epochs: int = 500
    seed: int = 0

    def to_dict(self):
        return {"l2_grid": list(self.l2_grid), "epochs": self.epochs, "seed": self.seed}


@dataclass(frozen=True)
class FoldResult:
    fold: int
    dev_err: float
    test_err: float
    l2: float


@dataclass
class EvalReport:
    method: str
    W: int
    folds: list
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in self.folds:
            if not (0.0 <= f.dev_err <= 1.0 and 0.0 <= f.test_err <= 1.0):
                raise ValueError("error rates must lie in [0, 1]")

    @property
    def average_test(self):
        return float(np.mean([f.test_err for f in self.folds]))

    @property
    def average_dev(self):
        return float(np.mean([f.dev_err for f in self.folds]))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "W", "fold", "dev_err", "test_err"])
        for f in self.folds:
            w.writerow([self.method, self.W, f.fold, repr(f.dev_err), repr(f.test_err)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty report")
        folds = [FoldResult(int(r["fold"]), float(r["dev_err"]), float(r["test_err"]), float("nan")) for r in rows]
        return cls(rows[0]["method"], int(rows[0]["W"]), folds)

    def to_markdown(self):
        lines = [
            f"### {self.method} (W={self.W})",
            "",
            "| fold | l2 | dev err | test err |",
            "|---:|---:|---:|---:|",
        ]
        for f in self.folds:
            lines.append(f"| {f.fold} | {f.l2:g} | {f.dev_err:.4f} | {f.test_err:.4f} |")
        lines.append(f"| mean | | {self.average_dev:.4f} | {self.average_test:.4f} |")
        return "\n".join(lines) + "\n"


def _rows(speakers, chosen):
    return np.isin(speakers, list(chosen))


def run_protocol(features, labels, speakers, fold_plan, config=ProbeConfig(), method="", W=1, n_classes=None):
    """Per fold: fit on train speakers for each l2, select by dev error, score test.

    ``features``, ``labels`` and ``speakers`` are aligned per frame. Test
    labels are only read for the dev-selected probe of each fold.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    speakers = np.asarray(speakers)
    if not features.shape[0] == labels.shape[0] == speakers.shape[0]:
        raise ValueError("features, labels and speakers must have one entry per frame")
    C = int(n_classes or labels.max() + 1)
    results = []
    for i, fold in enumerate(fold_plan):
        tr, dv, te = (_rows(speakers, fold[k]) for k in ("train", "dev", "test"))
        if not (tr.any() and dv.any() and te.any()):
            raise ValueError(f"fold {i} has an empty train, dev or test set")
        seed = int(stream(config.seed, f"probe/fold{i}").integers(2**31))
        best = None
        for l2 in config.l2_grid:
            model = train_probe(features[tr], labels[tr], l2, config.epochs, seed, C)
            dev = frame_error_rate(model, features[dv], labels[dv])
            if best is None or dev < best[0]:
                best = (dev, l2, model)
        dev, l2, model = best
        results.append(FoldResult(i, dev, frame_error_rate(model, features[te], labels[te]), l2))
    return EvalReport(method, W, results, {"probe": config.to_dict()})
