"""Distributionally robust logistic regression benchmark.

    min_x max_{y in simplex}  sum_i y_i f_i(x) - r(y)

with f_i(x) = phi(l(x; s_i, z_i)), phi(t) = 2 log(1 + t/2),
l(x; s, z) = log(1 + exp(-z x's)) and r(y) = reg * sum_i (y_i - 1/n)^2.
Component i is n y_i f_i(x) - r(y), so the uniform average over i is the
objective above.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import InternalError, InvalidArgument, ParseError
from .problems import SIMPLEX, MinimaxProblem

# name -> (samples, features); minority:majority is 1:4 for all three.
DATASET_TARGETS = {
    "mushrooms": (200, 112),
    "w8a": (100, 300),
    "a9a": (150, 123),
}
DEFAULT_RATIO = 4


@dataclass
class SparseDataset:
    rows: List[Tuple[int, Dict[int, float]]] = field(default_factory=list)
    num_features: int = 0

    def __len__(self):
        return len(self.rows)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows], dtype=int)

    def dense(self) -> Tuple[np.ndarray, np.ndarray]:
        """Feature matrix (n, num_features) and label vector."""
        S = np.zeros((len(self.rows), self.num_features))
        for i, (_, feats) in enumerate(self.rows):
            for j, val in feats.items():
                S[i, j - 1] = val
        return S, self.labels.astype(float)


def _parse_label(tok, lineno):
    try:
        value = float(tok)
    except ValueError:
        raise ParseError(f"bad label {tok!r}", lineno) from None
    if value == 1.0:
        return 1
    if value in (-1.0, 0.0):
        return -1
    raise ParseError(f"label must be +1, -1, 1 or 0, got {tok!r}", lineno)


def parse_libsvm(stream, num_features: Optional[int] = None) -> SparseDataset:
    """Parse LIBSVM text ("label idx:val ..." with 1-based increasing idx)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = []
    max_idx = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        label = _parse_label(toks[0], lineno)
        feats = {}
        prev = 0
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise ParseError(f"malformed feature {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature indices are 1-based, got {idx}", lineno)
            if idx <= prev:
                raise ParseError("feature indices must be strictly increasing", lineno)
            prev = idx
            feats[idx] = val
        max_idx = max(max_idx, prev)
        rows.append((label, feats))
    if num_features is None:
        num_features = max_idx
    elif num_features < max_idx:
        raise ParseError(f"feature index {max_idx} exceeds num_features={num_features}")
    return SparseDataset(rows, num_features)


def load_libsvm(path, num_features: Optional[int] = None) -> SparseDataset:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, num_features)


def format_libsvm(ds: SparseDataset) -> str:
    lines = []
    for label, feats in ds.rows:
        parts = ["+1" if label > 0 else "-1"]
        parts += [f"{j}:{feats[j]!r}" for j in sorted(feats)]
        lines.append(" ".join(parts))
    return "".join(line + "\n" for line in lines)


def subsample_unbalanced(ds: SparseDataset, minority_count: int, ratio: int,
                         rng: np.random.Generator, minority_label: int = 1) -> SparseDataset:
    """Pick ``minority_count`` minority rows and ``ratio`` times as many majority rows."""
    if minority_count < 1 or ratio < 1:
        raise InvalidArgument("minority_count and ratio must be >= 1")
    labels = ds.labels
    minority = np.flatnonzero(labels == minority_label)
    majority = np.flatnonzero(labels != minority_label)
    need = minority_count * ratio
    if len(minority) < minority_count or len(majority) < need:
        raise InvalidArgument(
            f"need {minority_count} minority and {need} majority rows, "
            f"have {len(minority)} and {len(majority)}")
    chosen = np.concatenate([rng.choice(minority, minority_count, replace=False),
                             rng.choice(majority, need, replace=False)])
    rng.shuffle(chosen)
    return SparseDataset([ds.rows[i] for i in chosen], ds.num_features)


def synthetic_dataset(n_rows: int, num_features: int, rng: np.random.Generator,
                      active: int = 22, flip: float = 0.1, pos_fraction: float = 0.5) -> SparseDataset:
    """Binary-feature data in the style of mushrooms: ``active`` ones per row.

    Labels come from a planted linear classifier with a bias chosen to hit
    ``pos_fraction`` positives, then flipped with probability ``flip``.
    """
    active = min(active, num_features)
    w = rng.standard_normal(num_features)
    idx = np.array([np.sort(rng.choice(num_features, active, replace=False)) for _ in range(n_rows)])
    scores = w[idx].sum(axis=1)
    labels = np.where(scores > np.quantile(scores, 1 - pos_fraction), 1, -1)
    labels = np.where(rng.random(n_rows) < flip, -labels, labels)
    rows = [(int(labels[i]), {int(j) + 1: 1.0 for j in idx[i]}) for i in range(n_rows)]
    return SparseDataset(rows, num_features)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {y : sum y = 1, y >= 0} by sorting."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _loss_parts(S, z, x):
    margin = z * (S @ x)
    l = np.logaddexp(0.0, -margin)
    f = 2.0 * np.log1p(0.5 * l)
    # d f / d x = phi'(l) * l'(margin) * z s, with l'(m) = -sigmoid(-m)
    dl = -np.exp(-np.logaddexp(0.0, margin))
    scale = dl / (1.0 + 0.5 * l) * z
    return f, scale


class DroInstance(MinimaxProblem):
    """The DRO objective as a finite-sum minimax problem over (x, y)."""

    def __init__(self, dataset: SparseDataset, reg_weight: float = 10.0, *,
                 lipschitz_l: Optional[float] = None, variance_sigma: Optional[float] = None):
        if len(dataset) < 1:
            raise InvalidArgument("dataset is empty")
        self.dataset = dataset
        self.S, self.z = dataset.dense()
        self.reg = float(reg_weight)
        n, d = self.S.shape
        self.phi_eval_cost = n
        mu = 2.0 * self.reg
        if lipschitz_l is None:
            s_max = float(np.max(np.linalg.norm(self.S, axis=1))) if d else 0.0
            # y-block curvature, x-y coupling n||grad f_i|| and x-block n y_i ||hess f_i|| on the simplex
            lipschitz_l = mu + n * s_max + 0.75 * n * s_max**2
        super().__init__(d, n, n=n, lipschitz_l=max(lipschitz_l, mu),
                         strong_concavity_mu=mu, variance_sigma=0.0,
                         y_constraint=SIMPLEX, true_grad=self._grad, y_lipschitz=mu)
        if variance_sigma is None:
            variance_sigma = self._variance_at(np.zeros(d), self.default_y0())
        self.variance_sigma = float(variance_sigma)

    def losses(self, x) -> np.ndarray:
        """f_i(x) for every sample."""
        return _loss_parts(self.S, self.z, np.asarray(x, dtype=float))[0]

    def r(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(self.reg * np.sum((y - 1.0 / self.n) ** 2))

    def objective(self, x, y) -> float:
        return float(np.asarray(y) @ self.losses(x) - self.r(y))

    def evaluate(self, X, Y, samples):
        X = np.asarray(X, dtype=float).reshape(-1, self.d1)
        Y = np.asarray(Y, dtype=float).reshape(-1, self.d2)
        idx = np.asarray(samples, dtype=int)
        margin = self.z[idx] * np.einsum("ij,ij->i", X, self.S[idx])
        f = 2.0 * np.log1p(0.5 * np.logaddexp(0.0, -margin))
        reg = self.reg * np.sum((Y - 1.0 / self.n) ** 2, axis=1)
        return self.n * Y[np.arange(len(idx)), idx] * f - reg

    def _grad(self, x, y):
        f, scale = _loss_parts(self.S, self.z, np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        return self.S.T @ (y * scale), f - 2.0 * self.reg * (y - 1.0 / self.n)

    def component_grad(self, x, y, i):
        i = int(np.atleast_1d(i)[0])
        f, scale = _loss_parts(self.S[i:i + 1], self.z[i:i + 1], np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        gy = -2.0 * self.reg * (y - 1.0 / self.n)
        gy[i] += self.n * f[0]
        return self.n * y[i] * scale[0] * self.S[i], gy

    def _variance_at(self, x, y):
        gx, gy = self._grad(x, y)
        total = 0.0
        for i in range(self.n):
            cx, cy = self.component_grad(x, y, i)
            total += np.sum((cx - gx) ** 2) + np.sum((cy - gy) ** 2)
        return float(np.sqrt(total / self.n))

    def phi_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        y_star, phi = solve_inner_max(self, x)
        _, scale = _loss_parts(self.S, self.z, x)
        return phi, self.S.T @ (y_star * scale)


def dro_component(inst: DroInstance, x, y, i: int) -> float:
    """n * y_i * f_i(x) - r(y)."""
    if not 0 <= i < inst.n:
        raise InvalidArgument(f"sample index {i} outside [0, {inst.n})")
    return float(inst.evaluate(np.asarray(x, dtype=float)[None, :],
                               np.asarray(y, dtype=float)[None, :], [i])[0])


def _kkt_y(f, lam, reg, n):
    return np.maximum(0.0, 1.0 / n + (f - lam) / (2.0 * reg))


def solve_inner_max_values(f, reg: float) -> Tuple[np.ndarray, float]:
    """Maximize sum y_i f_i - reg sum (y_i - 1/n)^2 over the simplex.

    Stationarity gives y_i = max(0, 1/n + (f_i - lam)/(2 reg)); the
    multiplier is bracketed, bisected, then recomputed in closed form on
    the identified support.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    # at lo every weight is >= 2/n, at hi every weight is 0
    lo, hi = float(f.min()) - 2.0 * reg / n, float(f.max()) + 2.0 * reg / n
    if not (_kkt_y(f, lo, reg, n).sum() >= 1.0 >= _kkt_y(f, hi, reg, n).sum()):
        raise InternalError("multiplier bracket does not contain the root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _kkt_y(f, mid, reg, n).sum() > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    lam = 0.5 * (lo + hi)
    support = (1.0 / n + (f - lam) / (2.0 * reg)) > 0
    k = support.sum()
    lam = 2.0 * reg * (np.sum(1.0 / n + f[support] / (2.0 * reg)) - 1.0) / k
    y = _kkt_y(f, lam, reg, n)
    y /= y.sum()
    return y, float(y @ f - reg * np.sum((y - 1.0 / n) ** 2))


def solve_inner_max(inst: DroInstance, x) -> Tuple[np.ndarray, float]:
    """Exact maximizer y*(x) over the simplex and Phi(x)."""
    return solve_inner_max_values(inst.losses(x), inst.reg)


def kkt_residual(f, y, reg) -> float:
    """Max violation of the simplex KKT conditions at ``y``."""
    f = np.asarray(f, dtype=float)
    n = f.size
    g = f - 2.0 * reg * (y - 1.0 / n)
    support = y > 0
    lam = g[support].mean()
    stationarity = np.abs(g[support] - lam).max()
    dual = max(0.0, float((g[~support] - lam).max())) if (~support).any() else 0.0
    return float(max(stationarity, dual, abs(y.sum() - 1.0), max(0.0, -y.min())))
