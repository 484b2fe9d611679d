"""LSTM / BiLSTM window regressors trained with BPTT and Adam.

Each direction holds stacked gate parameters in the order ``i, f, o, g``:
``W`` (4H x 1), ``U`` (4H x H) and ``b`` (4H). The forward direction reads a
window left to right, the backward direction right to left, and the affine
head sees the concatenation of both directions' final hidden states.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

FORMAT_NAME = "windcast-recurrent"
FORMAT_VERSION = 1
GATE_ORDER = "i,f,o,g"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class WindowDataset:
    inputs: np.ndarray  # (count, window)
    targets: np.ndarray  # (count,)
    window: int
    horizon: int

    def __len__(self) -> int:
        return len(self.targets)


def window_supervise(series, window: int, horizon: int) -> WindowDataset:
    """``inputs[i] = series[i:i+W]``, ``targets[i] = series[i+W-1+h]``."""
    x = np.asarray(series, dtype=float)
    if window < 1 or horizon < 1:
        raise ValueError("window and horizon must be positive")
    count = len(x) - window - horizon + 1
    if count < 1:
        raise ValueError(f"series of length {len(x)} is too short for W={window}, h={horizon}")
    inputs = sliding_window_view(x, window)[:count].copy()
    targets = x[window - 1 + horizon :].copy()
    return WindowDataset(inputs, targets, window, horizon)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 512
    learning_rate: float = 1e-4
    dropout: float = 0.0
    hidden_units: int = 64
    loss: str = "mae"
    seed: int = 0
    bidirectional: bool = True

    def __post_init__(self) -> None:
        if self.loss not in ("mae", "mse"):
            raise ValueError(f"loss must be 'mae' or 'mse', got {self.loss!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.hidden_units < 1:
            raise ValueError("epochs, batch_size and hidden_units must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass
class RecurrentModel:
    params: dict[str, np.ndarray]
    hidden_units: int
    bidirectional: bool
    config: TrainConfig = field(default_factory=TrainConfig)

    @property
    def directions(self) -> tuple[str, ...]:
        return ("fwd", "bwd") if self.bidirectional else ("fwd",)

    def copy(self) -> "RecurrentModel":
        return RecurrentModel({k: v.copy() for k, v in self.params.items()}, self.hidden_units, self.bidirectional, self.config)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "gate_order": GATE_ORDER,
            "hidden_units": self.hidden_units,
            "bidirectional": self.bidirectional,
            "config": asdict(self.config),
            "params": {
                k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(self.params.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RecurrentModel":
        if d.get("format") != FORMAT_NAME or d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model document {d.get('format')!r} v{d.get('version')}")
        params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["params"].items()}
        return cls(params, int(d["hidden_units"]), bool(d["bidirectional"]), TrainConfig(**d["config"]))

    @classmethod
    def from_json(cls, text: str) -> "RecurrentModel":
        return cls.from_dict(json.loads(text))


def init_model(hidden_units: int, bidirectional: bool, rng: np.random.Generator, config: TrainConfig | None = None) -> RecurrentModel:
    """Every parameter uniform in ±1/sqrt(hidden_units)."""
    H = hidden_units
    bound = 1.0 / math.sqrt(H)
    params: dict[str, np.ndarray] = {}
    dirs = ("fwd", "bwd") if bidirectional else ("fwd",)
    for d in dirs:
        params[f"{d}.W"] = rng.uniform(-bound, bound, (4 * H, 1))
        params[f"{d}.U"] = rng.uniform(-bound, bound, (4 * H, H))
        params[f"{d}.b"] = rng.uniform(-bound, bound, 4 * H)
    params["head.w"] = rng.uniform(-bound, bound, len(dirs) * H)
    params["head.b"] = rng.uniform(-bound, bound, ())
    cfg = config or TrainConfig(hidden_units=H, bidirectional=bidirectional)
    return RecurrentModel(params, H, bidirectional, cfg)


def zero_model(hidden_units: int, bidirectional: bool, head_bias: float = 0.0) -> RecurrentModel:
    m = init_model(hidden_units, bidirectional, np.random.default_rng(0))
    for v in m.params.values():
        v[...] = 0.0
    m.params["head.b"][...] = head_bias
    return m


def _stacked(params: dict, dirs: tuple[str, ...], part: str) -> np.ndarray:
    return np.stack([params[f"{d}.{part}"] for d in dirs])


def _run(params: dict, dirs: tuple[str, ...], X: np.ndarray, keep: bool):
    """Run every direction in lockstep as one stacked batch.

    Returns the final hidden states, shape (D, B, H), and the BPTT cache.
    The i, f, o gates use sigmoid(z) = (1 + tanh(z / 2)) / 2, so their
    pre-activations are halved up front and one tanh covers all four gates.
    """
    B, T = X.shape
    H = params["fwd.U"].shape[1]
    scale = np.r_[np.full(3 * H, 0.5), np.ones(H)]
    W = _stacked(params, dirs, "W")[:, :, 0] * scale  # (D, 4H)
    UT = _stacked(params, dirs, "U").transpose(0, 2, 1) * scale  # (D, H, 4H)
    b = _stacked(params, dirs, "b") * scale
    # each direction's inputs in its own reading order, (D, B, T)
    seq = np.stack([X if d == "fwd" else X[:, ::-1] for d in dirs])
    xw = seq.transpose(2, 0, 1)[..., None] * W[:, None, :] + b[:, None, :]  # (T, D, B, 4H)
    h = np.zeros((len(dirs), B, H))
    c = np.zeros_like(h)
    cache = []
    for t in range(T):
        a = np.matmul(h, UT)
        a += xw[t]
        np.tanh(a, out=a)
        ifo = a[..., : 3 * H]
        ifo *= 0.5
        ifo += 0.5
        i, f, o, g = a[..., :H], a[..., H : 2 * H], a[..., 2 * H : 3 * H], a[..., 3 * H :]
        c_new = f * c
        c_new += i * g
        tc = np.tanh(c_new)
        if keep:
            cache.append((seq[:, :, t], h, c, i, f, o, g, tc))
        h, c = o * tc, c_new
    return h, cache


def _backprop(params: dict, dirs: tuple[str, ...], cache: list, dh: np.ndarray, grads: dict) -> None:
    U = _stacked(params, dirs, "U")  # (D, 4H, H)
    H = U.shape[2]
    dW = np.zeros((len(dirs), 4 * H))
    dU = np.zeros_like(U)
    db = np.zeros_like(dW)
    dc = np.zeros_like(dh)
    dz = np.empty(dh.shape[:2] + (4 * H,))
    for xt, h_prev, c_prev, i, f, o, g, tc in reversed(cache):
        dct = dc + dh * o * (1.0 - tc * tc)
        dz[..., :H] = dct * g * i * (1.0 - i)
        dz[..., H : 2 * H] = dct * c_prev * f * (1.0 - f)
        dz[..., 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
        dz[..., 3 * H :] = dct * i * (1.0 - g * g)
        dW += np.matmul(xt[:, None, :], dz)[:, 0]
        dU += np.matmul(dz.transpose(0, 2, 1), h_prev)
        db += dz.sum(axis=1)
        dh = np.matmul(dz, U)
        dc = dct * f
    for k, d in enumerate(dirs):
        grads[f"{d}.W"] = dW[k][:, None]
        grads[f"{d}.U"] = dU[k]
        grads[f"{d}.b"] = db[k]


def features(model: RecurrentModel, X: np.ndarray) -> np.ndarray:
    """Pre-head feature vectors (final hidden state of each direction)."""
    X = _as_windows(X)
    h, _ = _run(model.params, model.directions, X, keep=False)
    return np.concatenate(list(h), axis=1)


def _as_windows(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("windows must be a 2-D array (count, width)")
    return X


def forward(model: RecurrentModel, window) -> float:
    w = np.asarray(window, dtype=float)
    if w.ndim != 1:
        raise ValueError("forward takes a single 1-D window")
    return float(predict(model, w[None, :])[0])


def predict(model: RecurrentModel, windows, width: int | None = None, chunk: int = 256) -> np.ndarray:
    """Batched forward pass; no state is carried between windows.

    Windows are processed ``chunk`` rows at a time, which keeps the working
    set in cache and is markedly faster than one large batch.
    """
    X = np.asarray(windows, dtype=float)
    if X.size == 0:
        return np.zeros(0)
    X = _as_windows(X)
    if width is not None and X.shape[1] != width:
        raise ValueError(f"window width {X.shape[1]} does not match model width {width}")
    w, b = model.params["head.w"], model.params["head.b"]
    out = np.empty(len(X))
    for lo in range(0, len(X), chunk):
        out[lo : lo + chunk] = features(model, X[lo : lo + chunk]) @ w + b
    return out


def _loss(pred: np.ndarray, y: np.ndarray, kind: str) -> tuple[float, np.ndarray]:
    r = pred - y
    n = len(y)
    if kind == "mae":
        return float(np.mean(np.abs(r))), np.sign(r) / n
    return float(np.mean(r * r)), 2.0 * r / n


def loss_and_gradients(
    model: RecurrentModel,
    X,
    y,
    loss: str = "mae",
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss and its gradient for every parameter (BPTT over all steps).

    The MAE subgradient at a zero residual is taken as 0. ``dropout_mask``,
    if given, multiplies the pre-head features (already scaled by 1/keep).
    """
    X = _as_windows(X)
    y = np.asarray(y, dtype=float).ravel()
    if len(X) == 0 or len(X) != len(y):
        raise ValueError("loss needs a nonempty batch with one target per window")
    p = model.params
    dirs = model.directions
    h, cache = _run(p, dirs, X, keep=True)
    feat = np.concatenate(list(h), axis=1)
    if dropout_mask is not None:
        feat = feat * dropout_mask
    pred = feat @ p["head.w"] + p["head.b"]
    value, dpred = _loss(pred, y, loss)
    if not math.isfinite(value):
        raise TrainingDiverged(f"non-finite loss {value}")
    grads = {"head.w": feat.T @ dpred, "head.b": np.asarray(dpred.sum())}
    dfeat = np.outer(dpred, p["head.w"])
    if dropout_mask is not None:
        dfeat = dfeat * dropout_mask
    H = model.hidden_units
    dh = np.ascontiguousarray(dfeat.reshape(len(X), len(dirs), H).transpose(1, 0, 2))
    _backprop(p, dirs, cache, dh, grads)
    return value, grads


def dataset_loss(model: RecurrentModel, dataset: WindowDataset, loss: str = "mae") -> float:
    pred = predict(model, dataset.inputs)
    return _loss(pred, dataset.targets, loss)[0]


def gradient_check(model: RecurrentModel, X, y, loss: str = "mae", eps: float = 1e-5) -> dict[str, float]:
    """Largest relative deviation per parameter between BPTT and central differences.

    The relative error of one component is ``|a - n| / max(|a|, |n|)``; pairs
    where both are below 1e-9 count as agreeing (both are numerically zero).
    """
    _, grads = loss_and_gradients(model, X, y, loss)
    worst: dict[str, float] = {}
    for name, value in model.params.items():
        flat = value.reshape(-1)
        analytic = np.asarray(grads[name]).reshape(-1)
        err = 0.0
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = loss_and_gradients(model, X, y, loss)[0]
            flat[k] = orig - eps
            down = loss_and_gradients(model, X, y, loss)[0]
            flat[k] = orig
            numeric = (up - down) / (2 * eps)
            scale = max(abs(numeric), abs(analytic[k]))
            if scale > 1e-9:
                err = max(err, abs(numeric - analytic[k]) / scale)
        worst[name] = err
    return worst


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float) -> None:
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1**self.t
        c2 = 1.0 - ADAM_BETA2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * g
            self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + ADAM_EPS)


def train(dataset: WindowDataset, config: TrainConfig, model: RecurrentModel | None = None) -> tuple[RecurrentModel, list[float]]:
    """Mini-batch Adam on the window dataset.

    Initialisation, per-epoch shuffling and dropout masks all draw from one
    generator seeded by ``config.seed``, so a run is a pure function of
    ``(dataset, config)``. The returned history holds the full-dataset loss
    (dropout off) after each epoch.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = init_model(config.hidden_units, config.bidirectional, rng, config)
    else:
        model = replace(model.copy(), config=config)
    opt = _Adam(model.params, config.learning_rate)
    n = len(dataset)
    keep = 1.0 - config.dropout
    feat_dim = len(model.params["head.w"])
    history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            sel = order[lo : lo + config.batch_size]
            mask = None
            if config.dropout > 0:
                mask = (rng.random((len(sel), feat_dim)) < keep) / keep
            try:
                _, grads = loss_and_gradients(model, dataset.inputs[sel], dataset.targets[sel], config.loss, mask)
            except TrainingDiverged as exc:
                raise TrainingDiverged(f"epoch {epoch + 1}, batch starting {lo}: {exc}") from None
            opt.step(model.params, grads)
        value = dataset_loss(model, dataset, config.loss)
        if not math.isfinite(value):
            raise TrainingDiverged(f"non-finite training loss after epoch {epoch + 1}")
        history.append(value)
    return model, history
