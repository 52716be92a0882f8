"""Dense feedforward networks with full-batch Adam and L-BFGS trainers.

The loss is the sum over samples of the squared 2-norm between network
output and target, computed in normalized space; inputs and outputs are
z-scored with training-set statistics. Training is deterministic given the
seed: full batch, fixed-order reductions, no stochastic elements.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptModelFileError,
    DivergedLossError,
    LengthMismatchError,
)

ACTIVATIONS = ("tanh", "relu")
ITER_CAP = 50_000


@dataclass
class NormStats:
    """Per-feature means and standard deviations for inputs and outputs."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray


@dataclass
class MlpModel:
    """Layer sizes, parameters, activation choice, and normalization statistics.

    Weights are stored (n_in, n_out); biases (n_out,). ``variant`` records the
    input-format tag the model was trained for.
    """

    layer_sizes: tuple
    weights: list
    biases: list
    activation: str = "tanh"
    norm: NormStats | None = None
    variant: str = ""

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[k], self.layer_sizes[k + 1])
            if w.shape != want or b.shape != (want[1],):
                raise ValueError(f"layer {k} parameter shapes inconsistent with sizes")

    @property
    def d_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def d_out(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=tuple(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            norm=self.norm,
            variant=self.variant,
        )


@dataclass
class TrainConfig:
    adam_iters: int = 5000
    lbfgs_iters: int = 2000
    adam_lr: float = 1e-3
    seed: int = 0
    lbfgs_memory: int = 10
    tolerance: float = 1e-10  # gradient-norm stopping threshold
    dtype: type = np.float64  # training arithmetic precision

    def __post_init__(self):
        if not (0 < self.adam_iters <= ITER_CAP and 0 < self.lbfgs_iters <= ITER_CAP):
            raise ValueError(f"iteration counts must lie in (0, {ITER_CAP}]")
        if self.adam_lr <= 0.0:
            raise ValueError("adam_lr must be positive")


@dataclass
class TrainResult:
    model: MlpModel
    trace: np.ndarray
    line_search_failed: bool = False
    stop_reason: str = ""


def identity_norm(d_in: int, d_out: int) -> NormStats:
    return NormStats(
        x_mean=np.zeros(d_in), x_std=np.ones(d_in),
        y_mean=np.zeros(d_out), y_std=np.ones(d_out),
    )


def fit_norm_stats(X, Y) -> NormStats:
    """Training-set means and stds; near-constant features get std clamped to 1."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)

    def stats(A):
        mean = A.mean(axis=0)
        std = A.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return mean, std

    xm, xs = stats(X)
    ym, ys = stats(Y)
    return NormStats(x_mean=xm, x_std=xs, y_mean=ym, y_std=ys)


def init_model(
    layer_sizes, activation: str = "tanh", seed: int = 0,
    norm: NormStats | None = None, variant: str = "",
) -> MlpModel:
    """Seeded Glorot-uniform initialization; biases start at zero."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    if norm is None:
        norm = identity_norm(sizes[0], sizes[-1])
    return MlpModel(sizes, weights, biases, activation, norm, variant)


def _as_xy(data):
    if isinstance(data, tuple):
        X, Y = data
    else:
        X, Y = data.inputs, data.targets
    return np.asarray(X, dtype=float), np.asarray(Y, dtype=float)


def _activate(Z, kind):
    return np.tanh(Z) if kind == "tanh" else np.maximum(Z, 0.0)


def forward(m: MlpModel, x) -> np.ndarray:
    """Normalize, run the affine/activation chain, denormalize."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != m.d_in:
        raise LengthMismatchError(f"input width {X.shape[1]} != model d_in {m.d_in}")
    A = (X - m.norm.x_mean) / m.norm.x_std
    for W, b in zip(m.weights[:-1], m.biases[:-1]):
        A = _activate(A @ W + b, m.activation)
    Yn = A @ m.weights[-1] + m.biases[-1]
    Y = Yn * m.norm.y_std + m.norm.y_mean
    return Y[0] if single else Y


class _Net:
    """Flat-parameter view of an MLP for the optimizers."""

    def __init__(self, model: MlpModel, dtype=np.float64):
        self.sizes = model.layer_sizes
        self.activation = model.activation
        self.dtype = dtype
        self.shapes = []
        self.offsets = [0]
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            for shape in ((n_in, n_out), (n_out,)):
                self.shapes.append(shape)
                self.offsets.append(self.offsets[-1] + int(np.prod(shape)))
        self.n_params = self.offsets[-1]

    def pack(self, model: MlpModel) -> np.ndarray:
        theta = np.empty(self.n_params, dtype=self.dtype)
        k = 0
        for w, b in zip(model.weights, model.biases):
            for arr in (w, b):
                n = arr.size
                theta[self.offsets[k] : self.offsets[k] + n] = arr.ravel()
                k += 1
        return theta

    def views(self, theta):
        out = []
        for k, shape in enumerate(self.shapes):
            out.append(theta[self.offsets[k] : self.offsets[k + 1]].reshape(shape))
        return out

    def unpack_into(self, theta, model: MlpModel) -> MlpModel:
        parts = self.views(theta)
        model.weights = [parts[2 * i].astype(np.float64).copy()
                         for i in range(len(self.sizes) - 1)]
        model.biases = [parts[2 * i + 1].astype(np.float64).copy()
                        for i in range(len(self.sizes) - 1)]
        return model

    def loss_only(self, theta, Xn, Yn) -> float:
        parts = self.views(theta)
        A = Xn
        for i in range(len(self.sizes) - 2):
            A = _activate(A @ parts[2 * i] + parts[2 * i + 1], self.activation)
        out = A @ parts[-2] + parts[-1]
        diff = out - Yn
        return float(np.dot(diff.ravel(), diff.ravel()))

    def loss_grad(self, theta, Xn, Yn):
        parts = self.views(theta)
        n_layers = len(self.sizes) - 1
        acts = [Xn]
        A = Xn
        for i in range(n_layers - 1):
            A = _activate(A @ parts[2 * i] + parts[2 * i + 1], self.activation)
            acts.append(A)
        out = acts[-1] @ parts[-2] + parts[-1]
        diff = out - Yn
        f = float(np.dot(diff.ravel(), diff.ravel()))

        g = np.empty_like(theta)
        gparts = self.views(g)
        delta = 2.0 * diff
        for i in range(n_layers - 1, -1, -1):
            gparts[2 * i][:] = acts[i].T @ delta
            gparts[2 * i + 1][:] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ parts[2 * i].T
                if self.activation == "tanh":
                    delta *= 1.0 - acts[i] * acts[i]
                else:
                    delta *= acts[i] > 0.0
        return f, g

    def normalized_data(self, model: MlpModel, X, Y):
        Xn = ((X - model.norm.x_mean) / model.norm.x_std).astype(self.dtype)
        Yn = ((Y - model.norm.y_mean) / model.norm.y_std).astype(self.dtype)
        return Xn, Yn


def loss(m: MlpModel, data) -> float:
    """Sum of squared normalized-output errors over the batch."""
    X, Y = _as_xy(data)
    net = _Net(m)
    Xn, Yn = net.normalized_data(m, X, Y)
    return net.loss_only(net.pack(m), Xn, Yn)


def grad(m: MlpModel, data):
    """Exact loss gradient as (weight_grads, bias_grads) lists."""
    X, Y = _as_xy(data)
    net = _Net(m)
    Xn, Yn = net.normalized_data(m, X, Y)
    _, g = net.loss_grad(net.pack(m), Xn, Yn)
    parts = net.views(g)
    n_layers = len(m.layer_sizes) - 1
    return (
        [parts[2 * i].copy() for i in range(n_layers)],
        [parts[2 * i + 1].copy() for i in range(n_layers)],
    )


def train_adam(m: MlpModel, data, cfg: TrainConfig) -> TrainResult:
    """Full-batch Adam (beta1=0.9, beta2=0.999, eps=1e-8) with stepwise lr halving."""
    X, Y = _as_xy(data)
    net = _Net(m, dtype=cfg.dtype)
    Xn, Yn = net.normalized_data(m, X, Y)
    theta = net.pack(m)
    b1, b2, eps = 0.9, 0.999, 1e-8
    mom = np.zeros_like(theta)
    vel = np.zeros_like(theta)
    trace = np.empty(cfg.adam_iters + 1)
    for t in range(1, cfg.adam_iters + 1):
        f, g = net.loss_grad(theta, Xn, Yn)
        if not np.isfinite(f):
            raise DivergedLossError(f"loss became non-finite at Adam iteration {t}")
        trace[t - 1] = f
        lr = cfg.adam_lr * 0.5 ** ((t - 1) // 10_000)
        mom = b1 * mom + (1.0 - b1) * g
        vel = b2 * vel + (1.0 - b2) * g * g
        mhat = mom / (1.0 - b1**t)
        vhat = vel / (1.0 - b2**t)
        theta = theta - lr * mhat / (np.sqrt(vhat) + eps)
    trace[-1] = net.loss_only(theta, Xn, Yn)
    if not np.isfinite(trace[-1]):
        raise DivergedLossError("loss became non-finite at the final Adam iterate")
    out = m.copy()
    net.unpack_into(theta, out)
    return TrainResult(model=out, trace=trace, stop_reason="max_iter")


def train_lbfgs(m: MlpModel, data, cfg: TrainConfig) -> TrainResult:
    """Limited-memory BFGS with a strong-Wolfe line search (c1=1e-4, c2=0.9).

    Stops at the iteration cap, at gradient norm < cfg.tolerance, or on line
    search failure (returns the best iterate, flagged).
    """
    X, Y = _as_xy(data)
    net = _Net(m, dtype=cfg.dtype)
    Xn, Yn = net.normalized_data(m, X, Y)
    theta = net.pack(m)

    f, g = net.loss_grad(theta, Xn, Yn)
    trace = [f]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    failed = False
    stop = "max_iter"

    if float(np.linalg.norm(g)) < cfg.tolerance:
        out = m.copy()
        net.unpack_into(theta, out)
        return TrainResult(out, np.asarray(trace), stop_reason="gradient")

    for _ in range(cfg.lbfgs_iters):
        d = _two_loop_direction(g, s_hist, y_hist, rho_hist)
        dphi0 = float(np.dot(g, d))
        if dphi0 >= 0.0:  # not a descent direction; restart from steepest descent
            s_hist.clear(); y_hist.clear(); rho_hist.clear()
            d = -g
            dphi0 = float(np.dot(g, d))
        step = _wolfe_search(net, Xn, Yn, theta, d, f, dphi0)
        if step is None:
            failed = True
            stop = "line_search"
            break
        alpha, f_new, g_new = step
        s = alpha * d
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > cfg.lbfgs_memory:
                s_hist.pop(0); y_hist.pop(0); rho_hist.pop(0)
        theta = theta + s
        f, g = f_new, g_new
        if not np.isfinite(f):
            raise DivergedLossError("loss became non-finite during L-BFGS")
        trace.append(f)
        if float(np.linalg.norm(g)) < cfg.tolerance:
            stop = "gradient"
            break

    out = m.copy()
    net.unpack_into(theta, out)
    return TrainResult(out, np.asarray(trace), line_search_failed=failed, stop_reason=stop)


def _two_loop_direction(g, s_hist, y_hist, rho_hist):
    q = -g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if s_hist:
        gamma = np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1])
        q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


_C1, _C2 = 1e-4, 0.9


def _wolfe_search(net, Xn, Yn, theta, d, f0, dphi0, max_iter=25):
    """Strong-Wolfe line search; returns (alpha, f, g) or None on failure."""

    def phi(a):
        f, g = net.loss_grad(theta + a * d, Xn, Yn)
        return f, g, float(np.dot(g, d))

    a_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    a = 1.0
    for it in range(1, max_iter + 1):
        f_a, g_a, dphi_a = phi(a)
        if not np.isfinite(f_a):
            a = 0.5 * (a_prev + a)
            continue
        if f_a > f0 + _C1 * a * dphi0 or (it > 1 and f_a >= f_prev):
            return _zoom(phi, a_prev, f_prev, dphi_prev, a, f_a, dphi_a, f0, dphi0)
        if abs(dphi_a) <= -_C2 * dphi0:
            return a, f_a, g_a
        if dphi_a >= 0.0:
            return _zoom(phi, a, f_a, dphi_a, a_prev, f_prev, dphi_prev, f0, dphi0)
        a_prev, f_prev, dphi_prev = a, f_a, dphi_a
        a = min(2.0 * a, 1e10)
    return None


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da) and (b, fb, db); NaN if ill-posed."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return np.nan
    d2 = np.sign(b - a) * np.sqrt(disc)
    x = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    return x


def _zoom(phi, lo, f_lo, d_lo, hi, f_hi, d_hi, f0, dphi0, max_iter=30):
    g_lo = None
    for _ in range(max_iter):
        if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
            break
        a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
        span = abs(hi - lo)
        if not np.isfinite(a) or a <= min(lo, hi) + 0.05 * span or a >= max(lo, hi) - 0.05 * span:
            a = 0.5 * (lo + hi)
        f_a, g_a, dphi_a = phi(a)
        if f_a > f0 + _C1 * a * dphi0 or f_a >= f_lo:
            hi, f_hi, d_hi = a, f_a, dphi_a
        else:
            if abs(dphi_a) <= -_C2 * dphi0:
                return a, f_a, g_a
            if dphi_a * (hi - lo) >= 0.0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo, g_lo = a, f_a, dphi_a, g_a
    if g_lo is not None and f_lo < f0:  # fall back to the best point found
        return lo, f_lo, g_lo
    return None


_MODEL_MAGIC = b"NNLC"
_ACT_TAGS = {"tanh": 0, "relu": 1}
_ACT_NAMES = {v: k for k, v in _ACT_TAGS.items()}


def save_model(path, m: MlpModel) -> None:
    """Binary little-endian model file: magic, version, header, f64 payload."""
    variant = m.variant.encode()
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<II", 1, _ACT_TAGS[m.activation]))
        fh.write(struct.pack("<I", len(m.layer_sizes)))
        fh.write(struct.pack(f"<{len(m.layer_sizes)}I", *m.layer_sizes))
        fh.write(struct.pack("<I", len(variant)))
        fh.write(variant)
        for arr in (m.norm.x_mean, m.norm.x_std, m.norm.y_mean, m.norm.y_std):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for w, b in zip(m.weights, m.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        if blob[:4] != _MODEL_MAGIC:
            raise CorruptModelFileError(f"{path}: bad magic")
        version, act_tag = struct.unpack_from("<II", blob, 4)
        if version != 1:
            raise CorruptModelFileError(f"{path}: unsupported version {version}")
        if act_tag not in _ACT_NAMES:
            raise CorruptModelFileError(f"{path}: unknown activation tag {act_tag}")
        (n_sizes,) = struct.unpack_from("<I", blob, 12)
        sizes = struct.unpack_from(f"<{n_sizes}I", blob, 16)
        off = 16 + 4 * n_sizes
        (vlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        variant = blob[off : off + vlen].decode()
        off += vlen

        def take(n):
            nonlocal off
            out = np.frombuffer(blob, dtype="<f8", count=n, offset=off).astype(float)
            off += 8 * n
            return out

        d_in, d_out = sizes[0], sizes[-1]
        norm = NormStats(take(d_in), take(d_in), take(d_out), take(d_out))
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(take(n_in * n_out).reshape(n_in, n_out))
            biases.append(take(n_out))
        if off != len(blob):
            raise CorruptModelFileError(f"{path}: trailing bytes in model file")
    except (struct.error, ValueError) as err:
        raise CorruptModelFileError(f"{path}: truncated or malformed ({err})") from err
    return MlpModel(tuple(sizes), weights, biases, _ACT_NAMES[act_tag], norm, variant)
