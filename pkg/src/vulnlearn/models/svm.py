"""Hinge-loss support vector machines.

The linear kernel is trained by projected sub-gradient descent on the primal
(Pegasos with iterate averaging). The RBF kernel uses dual coordinate descent
on the exact kernel matrix, or random Fourier features plus the linear solver
when the training set is large. The bias is folded into the weights through
a constant feature (kernel + 1 in the dual).
"""
from __future__ import annotations

import enum
import math

import numpy as np

from .base import ModelKind, Standardizer, TrainedModel, check_training_data, class_weights


class Kernel(str, enum.Enum):
    LINEAR = "linear"
    RBF = "rbf"


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _pegasos(Z, s, C, epochs, rng, weights):
    """Averaged Pegasos on rows ``Z`` (bias column already appended), labels ``s`` in {-1, 1}."""
    n, d = Z.shape
    lam = 1.0 / (C * n)
    w = np.zeros(d)
    avg = np.zeros(d)
    n_avg = 0
    t = 0
    radius = 1.0 / math.sqrt(lam)
    for epoch in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = s[i] * (Z[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * weights[i] * s[i]) * Z[i]
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
            if epoch >= epochs // 2:
                avg += w
                n_avg += 1
    return avg / max(1, n_avg)


def _dual_cd(K, s, C, epochs, rng, weights, tol=1e-3):
    """Dual coordinate descent for the bias-free hinge SVM with kernel ``K``."""
    n = K.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)                          # f = K @ (alpha * s)
    upper = C * weights
    diag = np.diag(K).copy()
    for _ in range(epochs):
        max_pg = 0.0
        for i in rng.permutation(n):
            g = s[i] * f[i] - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(g, 0.0)
            elif a == upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg == 0.0:
                continue
            max_pg = max(max_pg, abs(pg))
            new = min(max(a - g / diag[i], 0.0), upper[i])
            if new != a:
                f += (new - a) * s[i] * K[:, i]
                alpha[i] = new
        if max_pg < tol:
            break
    return alpha


class SVMModel(TrainedModel):
    kind = ModelKind.SVM
    threshold = 0.0

    def __init__(self, scaler, solver, arrays, gamma, feature_dim, train_config):
        super().__init__(feature_dim, train_config)
        self.scaler = scaler
        self.solver = solver       # "linear", "dual" or "rff"
        self.arrays = arrays
        self.gamma = gamma

    def scores(self, X) -> np.ndarray:
        """Signed margins."""
        Z = self.scaler(self._check_input(X))
        a = self.arrays
        if self.solver == "linear":
            return Z @ a["w"][:-1] + a["w"][-1]
        if self.solver == "rff":
            phi = math.sqrt(2.0 / a["omega"].shape[1]) * np.cos(Z @ a["omega"] + a["phase"])
            return phi @ a["w"][:-1] + a["w"][-1]
        if a["support"].shape[0] == 0:
            return np.zeros(Z.shape[0])
        return (rbf_kernel(Z, a["support"], self.gamma) + 1.0) @ a["coef"]

    def _arrays(self):
        out = {"mean": self.scaler.mean, "scale": self.scaler.scale,
               "gamma": np.array(self.gamma), "solver": np.array(self.solver)}
        out.update({f"p_{k}": v for k, v in self.arrays.items()})
        return out

    @classmethod
    def _from_arrays(cls, arrays, meta):
        params = {k[2:]: v for k, v in arrays.items() if k.startswith("p_")}
        return cls(Standardizer(arrays["mean"], arrays["scale"]), str(arrays["solver"]),
                   params, float(arrays["gamma"]), meta["feature_dim"], meta["train_config"])


def train_svm(X, y, kernel: Kernel | str = Kernel.LINEAR, C: float = 1.0,
              gamma: float | None = None, epochs: int = 50, seed: int = 0,
              max_exact: int = 2000, n_components: int = 500,
              balanced: bool = False) -> SVMModel:
    """Fit a hinge-loss SVM on standardized features.

    ``gamma`` defaults to ``1 / (d * var)`` of the standardized training data.
    RBF problems with more than ``max_exact`` rows switch to ``n_components``
    random Fourier features.
    """
    X, y = check_training_data(X, y)
    kernel = Kernel(kernel)
    if C <= 0:
        raise ValueError("C must be positive")
    rng = np.random.default_rng(seed)
    scaler = Standardizer.fit(X)
    Z = scaler(X)
    s = 2.0 * y - 1.0
    weights = class_weights(y, balanced)
    n, d = Z.shape
    if gamma is None:
        var = Z.var()
        gamma = 1.0 / (d * var) if var > 0 else 1.0
    config = {"kernel": kernel.value, "C": C, "gamma": gamma, "epochs": epochs, "seed": seed,
              "max_exact": max_exact, "n_components": n_components, "balanced": balanced}
    ones = np.ones((n, 1))
    if kernel is Kernel.LINEAR:
        w = _pegasos(np.hstack([Z, ones]), s, C, epochs, rng, weights)
        return SVMModel(scaler, "linear", {"w": w}, gamma, d, config)
    if n > max_exact:
        omega = rng.normal(0.0, math.sqrt(2.0 * gamma), size=(d, n_components))
        phase = rng.uniform(0.0, 2.0 * math.pi, size=n_components)
        phi = math.sqrt(2.0 / n_components) * np.cos(Z @ omega + phase)
        w = _pegasos(np.hstack([phi, ones]), s, C, epochs, rng, weights)
        return SVMModel(scaler, "rff", {"w": w, "omega": omega, "phase": phase}, gamma, d, config)
    K = rbf_kernel(Z, Z, gamma) + 1.0
    alpha = _dual_cd(K, s, C, epochs, rng, weights)
    keep = alpha > 0
    return SVMModel(scaler, "dual", {"support": Z[keep], "coef": alpha[keep] * s[keep]},
                    gamma, d, config)
