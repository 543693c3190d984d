"""A small 1-D residual convolutional network in numpy.

Each feature vector is treated as a one-channel sequence. The network is a
1x3 stem convolution, a stack of residual blocks and a dense sigmoid head
over the flattened channel-by-position map (pooling would discard which
feature index carried the signal). A block computes::

    x_next = h(x) + conv_b(relu(conv_a(relu(x))))

where ``h`` is the identity, or a 1x1 convolution when the block changes the
channel count. Gradients are derived by hand and trained with Adam on the
binary cross-entropy.
"""
from __future__ import annotations

import numpy as np

from .base import ModelKind, Standardizer, TrainedModel, check_training_data, class_weights


def conv1d(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    """Same-padded 1-D convolution. ``x`` is (B, Cin, L), ``W`` is (Cout, Cin, K)."""
    B, cin, L = x.shape
    cout, _, k = W.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, k - 1 - pad))) if k > 1 else x
    cols = np.stack([xp[:, :, j:j + L] for j in range(k)], axis=2).reshape(B, cin * k, L)
    out = np.matmul(W.reshape(cout, cin * k), cols) + b[None, :, None]
    return out, cols


def conv1d_backward(dout: np.ndarray, cols: np.ndarray, W: np.ndarray):
    B, cout, L = dout.shape
    _, cin, k = W.shape
    pad = k // 2
    Wm = W.reshape(cout, cin * k)
    dW = np.tensordot(dout, cols, axes=([0, 2], [0, 2])).reshape(W.shape)
    db = dout.sum(axis=(0, 2))
    dcols = np.matmul(Wm.T, dout).reshape(B, cin, k, L)
    dxp = np.zeros((B, cin, L + k - 1))
    for j in range(k):
        dxp[:, :, j:j + L] += dcols[:, :, j, :]
    return dxp[:, :, pad:pad + L], dW, db


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class ResNet1D:
    """Parameters and forward/backward passes; ``params`` is a flat dict of arrays."""

    def __init__(self, params: dict[str, np.ndarray], n_blocks: int):
        self.params = params
        self.n_blocks = n_blocks

    @classmethod
    def init(cls, channels: list[int], seq_len: int, rng: np.random.Generator,
             kernel: int = 3) -> "ResNet1D":
        """``channels[0]`` is the stem width, ``channels[l]`` the output width of block ``l``."""
        def he(cout, cin, k):
            return rng.normal(0.0, np.sqrt(2.0 / (cin * k)), size=(cout, cin, k))

        p = {"stem_W": he(channels[0], 1, kernel), "stem_b": np.zeros(channels[0])}
        for l in range(1, len(channels)):
            cin, cout = channels[l - 1], channels[l]
            p[f"b{l}_W1"], p[f"b{l}_b1"] = he(cout, cin, kernel), np.zeros(cout)
            # damped second convolution keeps deep stacks near the identity at init
            p[f"b{l}_W2"], p[f"b{l}_b2"] = 0.1 * he(cout, cout, kernel), np.zeros(cout)
            if cin != cout:
                p[f"b{l}_Ws"], p[f"b{l}_bs"] = he(cout, cin, 1), np.zeros(cout)
        p["head_w"] = rng.normal(0.0, np.sqrt(1.0 / (channels[-1] * seq_len)),
                                 size=(channels[-1], seq_len))
        p["head_b"] = np.zeros(1)
        return cls(p, len(channels) - 1)

    def forward(self, x: np.ndarray, keep: bool = False):
        """Logits for ``x`` of shape (B, L); with ``keep`` also the backward cache."""
        p = self.params
        cache = {}
        h, cache["stem"] = conv1d(x[:, None, :], p["stem_W"], p["stem_b"])
        for l in range(1, self.n_blocks + 1):
            a1 = np.maximum(h, 0.0)
            c1, cols1 = conv1d(a1, p[f"b{l}_W1"], p[f"b{l}_b1"])
            a2 = np.maximum(c1, 0.0)
            c2, cols2 = conv1d(a2, p[f"b{l}_W2"], p[f"b{l}_b2"])
            if f"b{l}_Ws" in p:
                sc, cols_s = conv1d(h, p[f"b{l}_Ws"], p[f"b{l}_bs"])
            else:
                sc, cols_s = h, None
            cache[l] = (h, c1, cols1, cols2, cols_s)
            h = sc + c2
        r = np.maximum(h, 0.0)
        logits = np.tensordot(r, p["head_w"], axes=([1, 2], [0, 1])) + p["head_b"][0]
        if keep:
            cache["top"] = (h, r)
            return logits, cache
        return logits

    def backward(self, dlogits: np.ndarray, cache) -> dict[str, np.ndarray]:
        p = self.params
        grads = {}
        h, r = cache["top"]
        grads["head_w"] = np.tensordot(dlogits, r, axes=(0, 0))
        grads["head_b"] = np.array([dlogits.sum()])
        dh = dlogits[:, None, None] * p["head_w"][None] * (h > 0)
        for l in range(self.n_blocks, 0, -1):
            h_in, c1, cols1, cols2, cols_s = cache[l]
            da2, grads[f"b{l}_W2"], grads[f"b{l}_b2"] = conv1d_backward(dh, cols2, p[f"b{l}_W2"])
            dc1 = da2 * (c1 > 0)
            da1, grads[f"b{l}_W1"], grads[f"b{l}_b1"] = conv1d_backward(dc1, cols1, p[f"b{l}_W1"])
            dh_in = da1 * (h_in > 0)
            if cols_s is not None:
                dsc, grads[f"b{l}_Ws"], grads[f"b{l}_bs"] = conv1d_backward(dh, cols_s, p[f"b{l}_Ws"])
                dh_in = dh_in + dsc
            else:
                dh_in = dh_in + dh
            dh = dh_in
        _, grads["stem_W"], grads["stem_b"] = conv1d_backward(dh, cache["stem"], p["stem_W"])
        return grads

    def loss_and_grads(self, x, y, weights=None):
        """Mean (optionally weighted) binary cross-entropy and its parameter gradients."""
        logits, cache = self.forward(x, keep=True)
        w = np.ones_like(logits) if weights is None else weights
        loss = float(np.sum(w * (np.logaddexp(0.0, logits) - y * logits)) / x.shape[0])
        dlogits = w * (_sigmoid(logits) - y) / x.shape[0]
        return loss, self.backward(dlogits, cache)


class ResNetModel(TrainedModel):
    kind = ModelKind.RESNET
    threshold = 0.5

    def __init__(self, net: ResNet1D, scaler: Standardizer, seq_len: int, feature_dim, train_config,
                 loss_history=()):
        super().__init__(feature_dim, train_config)
        self.net = net
        self.scaler = scaler
        self.seq_len = seq_len
        self.loss_history = list(loss_history)

    def _prepare(self, X) -> np.ndarray:
        return _pad(self.scaler(self._check_input(X)), self.seq_len)

    def scores(self, X) -> np.ndarray:
        """Predicted probability of the vulnerable class."""
        Z = self._prepare(X)
        if Z.shape[0] == 0:
            return np.zeros(0)
        return _sigmoid(self.net.forward(Z))

    def _arrays(self):
        out = {f"param_{k}": v for k, v in self.net.params.items()}
        out.update(mean=self.scaler.mean, scale=self.scaler.scale,
                   seq_len=np.array(self.seq_len), n_blocks=np.array(self.net.n_blocks),
                   loss_history=np.array(self.loss_history))
        return out

    @classmethod
    def _from_arrays(cls, arrays, meta):
        params = {k[6:]: v for k, v in arrays.items() if k.startswith("param_")}
        net = ResNet1D(params, int(arrays["n_blocks"]))
        return cls(net, Standardizer(arrays["mean"], arrays["scale"]), int(arrays["seq_len"]),
                   meta["feature_dim"], meta["train_config"], arrays["loss_history"].tolist())


def _pad(Z: np.ndarray, length: int) -> np.ndarray:
    if Z.shape[1] >= length:
        return Z
    return np.pad(Z, ((0, 0), (0, length - Z.shape[1])))


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def train_resnet(X, y, blocks: int = 3, channels: int | list[int] = 8, epochs: int = 30,
                 learning_rate: float = 3e-3, batch_size: int = 32, seed: int = 0,
                 balanced: bool = False) -> ResNetModel:
    """Fit the residual network with mini-batch Adam.

    ``channels`` is either one width shared by the stem and every block, or a
    list of ``blocks + 1`` widths (stem first); blocks that change width get a
    1x1 convolution shortcut. Inputs shorter than 3 are zero-padded.
    """
    X, y = check_training_data(X, y)
    if isinstance(channels, int):
        widths = [channels] * (blocks + 1)
    else:
        widths = list(channels)
        if len(widths) != blocks + 1:
            raise ValueError("channels list must have blocks + 1 entries")
    rng = np.random.default_rng(seed)
    scaler = Standardizer.fit(X)
    seq_len = max(3, X.shape[1])
    Z = _pad(scaler(X), seq_len)
    yf = y.astype(np.float64)
    weights = class_weights(y, balanced)
    net = ResNet1D.init(widths, seq_len, rng)
    opt = _Adam(net.params, learning_rate)
    history = []
    n = Z.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = net.loss_and_grads(Z[idx], yf[idx], weights[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch}; lower learning_rate "
                    f"(currently {learning_rate}) or check the input features")
            total += loss * idx.size
            opt.step(net.params, grads)
        history.append(total / n)
    config = {"blocks": blocks, "channels": widths, "epochs": epochs,
              "learning_rate": learning_rate, "batch_size": batch_size, "seed": seed,
              "balanced": balanced}
    return ResNetModel(net, scaler, seq_len, X.shape[1], config, history)
