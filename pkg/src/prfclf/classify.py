"""Per-topic pseudo-labelled training sets and linear LR / SVM classifiers.

Both models solve an L2-regularized problem with an unpenalized intercept,

    LR:   1/2 ||w||^2 + c * sum_i log(1 + exp(-y_i (w.x_i + b)))
    SVM:  1/2 ||w||^2 + c * sum_i max(0, 1 - y_i (w.x_i + b))

on L2-normalized tf-idf rows. A topic's training set has a few hundred rows
at most but a vocabulary that can run into the tens of thousands, so both
solvers work in the row space of the data matrix: LR runs Newton's method on
the coordinates of w in an orthonormal basis of that space, and the SVM runs
SMO on the dual, whose size is the number of rows.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


LR = "lr"
SVM = "svm"
ENSEMBLE = "ensemble"
KINDS = (LR, SVM, ENSEMBLE)

GTOL = 1e-6
FTOL = 1e-10
MAX_ITER = 1000
SMO_EPS = 1e-10
_TAU = 1e-12


class TrainingError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PseudoLabelConfig:
    r: int = 10
    n: int = 100

    def __post_init__(self):
        if self.r < 1 or self.n < 1:
            raise TrainingError(f"r and n must be >= 1, got r={self.r} n={self.n}")


@dataclass(frozen=True)
class TrainingSet:
    """Labelled rows; ``labels`` are +1 / -1 and align with ``vectors``."""

    docids: tuple
    vectors: tuple
    labels: tuple

    @property
    def rows(self):
        return list(zip(self.vectors, self.labels))

    @property
    def vocabulary(self):
        terms = set()
        for v in self.vectors:
            terms.update(v.weights)
        return sorted(terms)

    def __len__(self):
        return len(self.labels)

    def matrix(self):
        """Dense ``(X, y, vocabulary)`` over the union of row terms."""
        vocab = self.vocabulary
        col = {t: j for j, t in enumerate(vocab)}
        X = np.zeros((len(self.vectors), len(vocab)))
        for i, v in enumerate(self.vectors):
            for t, w in v.weights.items():
                X[i, col[t]] = w
        return X, np.asarray(self.labels, dtype=float), vocab


@dataclass(frozen=True)
class LinearModel:
    kind: str
    weights: dict = field(default_factory=dict)
    bias: float = 0.0
    c: float = 1.0

    def decision(self, vec):
        return vec.dot(self.weights) + self.bias

    def dump(self, qid):
        """One-line text form: ``qid kind bias nnz term:weight ...``."""
        parts = [qid, self.kind, repr(self.bias), str(len(self.weights))]
        parts += [f"{t}:{w!r}" for t, w in sorted(self.weights.items())]
        return " ".join(parts)

    @classmethod
    def parse(cls, line):
        fields = line.split()
        qid, kind, bias, nnz = fields[0], fields[1], float(fields[2]), int(fields[3])
        weights = {}
        for item in fields[4:]:
            t, w = item.rsplit(":", 1)
            weights[t] = float(w)
        if len(weights) != nnz:
            raise TrainingError(f"model dump for {qid}: expected {nnz} weights")
        return qid, cls(kind, weights, bias)


def select_pseudo_labels(base, cfg):
    """First ``r`` docids as positives, last ``min(n, len - r)`` as negatives."""
    docids = [h.docid for h in base.hits]
    if len(docids) <= cfg.r:
        raise TrainingError(
            f"topic {base.qid}: {len(docids)} hits leaves no room for negatives with r={cfg.r}"
        )
    n_neg = min(cfg.n, len(docids) - cfg.r)
    return docids[: cfg.r], docids[len(docids) - n_neg:]


def build_training_set(index, positives, negatives):
    overlap = set(positives) & set(negatives)
    if overlap:
        raise TrainingError(f"docids labelled both ways: {sorted(overlap)[:5]}")
    docids = tuple(positives) + tuple(negatives)
    vectors = tuple(index.doc_vector(d) for d in docids)
    labels = (1,) * len(positives) + (-1,) * len(negatives)
    return TrainingSet(docids, vectors, labels)


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logreg_objective(w, b, X, y, c):
    """Value and gradient ``(f, grad_w, grad_b)`` of the LR objective."""
    margins = y * (X @ w + b)
    value = 0.5 * w @ w + c * _log1pexp(-margins).sum()
    coef = -c * y * _sigmoid(-margins)
    return value, w + X.T @ coef, coef.sum()


def svm_objective(w, b, X, y, c):
    """Value and a subgradient ``(f, grad_w, grad_b)`` of the hinge objective."""
    margins = y * (X @ w + b)
    value = 0.5 * w @ w + c * np.maximum(0.0, 1.0 - margins).sum()
    coef = -c * y * (margins < 1.0)
    return value, w + X.T @ coef, coef.sum()


def _check_labels(ts):
    labels = set(ts.labels)
    if labels != {1, -1}:
        raise TrainingError(f"training set needs both labels, got {sorted(labels)}")


def _kernel_basis(K):
    """Coordinates ``Z`` with ``Z Z^T = K`` and the map ``P`` from ``Z`` weights to row weights.

    For ``K = X X^T``, a weight vector ``u`` on ``Z`` corresponds to
    ``w = X^T P u`` with ``||w|| = ||u||``.
    """
    m = K.shape[0]
    lam, U = np.linalg.eigh(K)
    top = lam[-1] if m else 0.0
    keep = lam > max(top, 0.0) * m * 1e-13
    if not keep.any():
        return np.zeros((m, 0)), np.zeros((m, 0))
    root = np.sqrt(lam[keep])
    return U[:, keep] * root, U[:, keep] / root


def _fit_logreg(K, y, c, gtol=GTOL, ftol=FTOL, max_iter=MAX_ITER):
    """Damped Newton on the LR objective. Returns ``(beta, b)`` with ``w = X^T beta``."""
    Z, P = _kernel_basis(K)
    m, k = Z.shape
    A = np.hstack([Z, np.ones((m, 1))])
    reg = np.ones(k + 1)
    reg[k] = 0.0

    def f(theta):
        margins = y * (A @ theta)
        val = 0.5 * theta[:k] @ theta[:k] + c * _log1pexp(-margins).sum()
        p = _sigmoid(-margins)
        grad = reg * theta - c * A.T @ (y * p)
        return val, grad, p

    theta = np.zeros(k + 1)
    val, grad, p = f(theta)
    for _ in range(max_iter):
        if np.abs(grad).max() <= gtol:
            break
        d = p * (1.0 - p)
        H = np.diag(reg) + c * (A.T * d) @ A
        step = np.linalg.solve(H, -grad)
        slope = grad @ step
        t = 1.0
        while True:
            cand = theta + t * step
            new_val, new_grad, new_p = f(cand)
            if new_val <= val + 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        done = abs(val - new_val) <= ftol * max(abs(val), 1.0)
        theta, val, grad, p = cand, new_val, new_grad, new_p
        if done:
            break
    else:
        warnings.warn(f"logistic regression hit {max_iter} iterations", ConvergenceWarning)
    return P @ theta[:k], theta[k]


def _to_model(kind, w, b, vocab, c):
    weights = {t: float(v) for t, v in zip(vocab, w) if v != 0.0}
    return LinearModel(kind, weights, float(b) + 0.0, c)


def train_logreg(ts, c=1.0):
    """Fit L2-regularized logistic regression."""
    _check_labels(ts)
    X, y, vocab = ts.matrix()
    beta, b = _fit_logreg(X @ X.T, y, c)
    return _to_model(LR, X.T @ beta, b, vocab, c)


def _smo(K, y, c, eps=SMO_EPS, max_iter=None):
    """Solve the SVM dual with second-order working-set selection.

    Returns ``(alpha, bias)`` where the bias comes from the KKT conditions.
    """
    m = len(y)
    if max_iter is None:
        max_iter = max(MAX_ITER, 1000 * m)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(m)
    G = -np.ones(m)
    pos = y > 0
    for _ in range(max_iter):
        upper = alpha >= c
        lower = alpha <= 0
        # I_up: y=+1 below c, or y=-1 above 0
        up = np.where(pos, ~upper, ~lower)
        low = np.where(pos, ~lower, ~upper)
        score_up = np.where(up, -y * G, -np.inf)
        i = int(np.argmax(score_up))
        gmax = score_up[i]
        score_low = np.where(low, y * G, -np.inf)
        gmax2 = score_low.max()
        if gmax + gmax2 < eps:
            break
        grad_diff = gmax + y * G
        quad = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        quad = np.where(quad > 0, quad, _TAU)
        cand = low & (grad_diff > 0)
        if not cand.any():
            break
        obj = np.where(cand, -(grad_diff * grad_diff) / quad, np.inf)
        j = int(np.argmin(obj))

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            qc = QD[i] + QD[j] + 2.0 * Q[i, j]
            qc = qc if qc > 0 else _TAU
            delta = (-G[i] - G[j]) / qc
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > c:
                    ni, nj = c, c - diff
            elif nj > c:
                nj, ni = c, c + diff
        else:
            qc = QD[i] + QD[j] - 2.0 * Q[i, j]
            qc = qc if qc > 0 else _TAU
            delta = (G[i] - G[j]) / qc
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > c:
                if ni > c:
                    ni, nj = c, total - c
            elif nj < 0:
                nj, ni = 0.0, total
            if total > c:
                if nj > c:
                    nj, ni = c, total - c
            elif ni < 0:
                ni, nj = 0.0, total
        G += Q[i] * (ni - ai) + Q[j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    else:
        warnings.warn(f"SMO hit {max_iter} iterations", ConvergenceWarning)

    free = (alpha > 0) & (alpha < c)
    yG = y * G
    if free.any():
        rho = yG[free].mean()
    else:
        at_c, at_0 = alpha >= c, alpha <= 0
        ub = np.where((~pos & at_c) | (pos & at_0), yG, np.inf).min()
        lb = np.where((pos & at_c) | (~pos & at_0), yG, -np.inf).max()
        rho = 0.5 * (ub + lb)
    return alpha, -rho


def _best_intercept(s, y, start):
    """Bias minimizing the hinge sum for fixed decision values ``s``.

    The hinge sum is convex and piecewise linear in the bias with kinks at
    ``y_i - s_i``; ``start`` is clipped into the set of minimizers.
    """
    kinks = np.unique(y - s)
    vals = np.array([np.maximum(0.0, 1.0 - y * (s + b)).sum() for b in kinks])
    best = vals.min()
    tol = 1e-12 * max(1.0, best)
    ok = kinks[vals <= best + tol]
    return float(min(max(start, ok.min()), ok.max()))


def _fit_svm(K, y, c, eps=SMO_EPS):
    """Hinge-loss SVM via its dual. Returns ``(beta, b)`` with ``w = X^T beta``."""
    alpha, b = _smo(K, y, c, eps)
    beta = alpha * y
    return beta, _best_intercept(K @ beta, y, b)


def train_svm(ts, c=1.0):
    """Fit a linear soft-margin SVM (hinge loss)."""
    _check_labels(ts)
    X, y, vocab = ts.matrix()
    beta, b = _fit_svm(X @ X.T, y, c)
    return _to_model(SVM, X.T @ beta, b, vocab, c)


def train(ts, kind, c=1.0):
    if kind == LR:
        return train_logreg(ts, c)
    if kind == SVM:
        return train_svm(ts, c)
    raise TrainingError(f"unknown classifier kind: {kind!r}")


def score_documents(model, docs):
    """LR: sigmoid of the decision value. SVM: the raw decision value."""
    out = []
    for vec in docs:
        z = model.decision(vec)
        if model.kind == LR:
            # numerically stable logistic
            if z >= 0:
                out.append(1.0 / (1.0 + math.exp(-z)))
            else:
                e = math.exp(z)
                out.append(e / (1.0 + e))
        else:
            out.append(z)
    return out


def minmax_normalize(scores):
    """Rescale to [0, 1]; a constant list maps to all 0.5."""
    scores = list(scores)
    if not scores:
        raise ValueError("cannot normalize an empty score list")
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [0.5] * len(scores)
    span = hi - lo
    return [(s - lo) / span for s in scores]


def ensemble_scores(lr_scores, svm_scores):
    """Average of the per-topic min-max normalized LR and SVM scores."""
    if len(lr_scores) != len(svm_scores):
        raise ValueError(f"length mismatch: {len(lr_scores)} vs {len(svm_scores)}")
    a = minmax_normalize(lr_scores)
    b = minmax_normalize(svm_scores)
    return [(x + y) / 2.0 for x, y in zip(a, b)]


def _sigmoid_list(z):
    return [float(v) for v in _sigmoid(np.asarray(z))]


def classifier_scores(index, base, cfg, kind, c=1.0):
    """Train on pseudo-labels from ``base`` and score every document in it.

    Same result as building a :class:`TrainingSet`, training and calling
    :func:`score_documents`, but computed on sparse matrices over the whole
    base run so that every ``(r, n)`` setting reuses one matrix.
    """
    pos, neg = select_pseudo_labels(base, cfg)
    docids = [h.docid for h in base.hits]
    M = index.doc_matrix(docids)
    rows = list(range(len(pos))) + list(range(len(docids) - len(neg), len(docids)))
    X = M[rows]
    y = np.array([1.0] * len(pos) + [-1.0] * len(neg))
    K = (X @ X.T).toarray()

    def decision(fit):
        beta, b = fit(K, y, c)
        return M @ (X.T @ beta) + b

    if kind == LR:
        scores = _sigmoid_list(decision(_fit_logreg))
    elif kind == SVM:
        scores = [float(v) for v in decision(_fit_svm)]
    elif kind == ENSEMBLE:
        scores = ensemble_scores(_sigmoid_list(decision(_fit_logreg)),
                                 [float(v) for v in decision(_fit_svm)])
    else:
        raise TrainingError(f"unknown classifier kind: {kind!r}")
    return dict(zip(docids, scores))
