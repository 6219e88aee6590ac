"""Dense networks on numpy: forward, exact reverse-mode gradients, Adam.

Small enough to audit, deterministic given a seed, and serializable to a
text format that round-trips bit-exactly. Supports batched inputs (rows)
everywhere because explanation sampling queries policies tens of
thousands of states at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "identity", "squash")


@dataclass
class Layer:
    w: np.ndarray           # (out, in)
    b: np.ndarray           # (out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


class DenseNet:
    """Fully connected network. `squash` maps onto (0, squash_bound)."""

    def __init__(self, layers: list[Layer], squash_bound: float = 1.0):
        for a, b in zip(layers[:-1], layers[1:]):
            if a.w.shape[0] != b.w.shape[1]:
                raise ValueError("layer dimensions do not chain")
        self.layers = layers
        self.squash_bound = float(squash_bound)

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    @classmethod
    def create(cls, in_dim: int, hidden: list[int], out_dim: int,
               hidden_activation: str, out_activation: str,
               rng: np.random.Generator,
               squash_bound: float = 1.0) -> "DenseNet":
        """He init for relu layers, Xavier for identity/squash ones."""
        dims = [in_dim] + list(hidden) + [out_dim]
        acts = [hidden_activation] * len(hidden) + [out_activation]
        layers = []
        for d_in, d_out, act in zip(dims[:-1], dims[1:], acts):
            if act == "relu":
                std = np.sqrt(2.0 / d_in)
            else:
                std = np.sqrt(2.0 / (d_in + d_out))
            layers.append(Layer(w=rng.standard_normal((d_out, d_in)) * std,
                                b=np.zeros(d_out), activation=act))
        return cls(layers, squash_bound=squash_bound)

    def _activate(self, z: np.ndarray, act: str) -> np.ndarray:
        if act == "relu":
            return np.maximum(z, 0.0)
        if act == "squash":
            # overflow-safe logistic on both tails
            out = np.empty_like(z)
            pos = z >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
            ez = np.exp(z[~pos])
            out[~pos] = ez / (1.0 + ez)
            return self.squash_bound * out
        return z

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on a vector (in_dim,) or a batch (rows, in_dim)."""
        y, _ = self.forward_full(x)
        return y

    def forward_full(self, x: np.ndarray):
        """Forward pass keeping per-layer values for the backward pass."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.in_dim:
            raise ValueError(f"input width {h.shape[1]} != {self.in_dim}")
        cache = [h]
        for layer in self.layers:
            h = self._activate(h @ layer.w.T + layer.b, layer.activation)
            cache.append(h)
        return (h[0] if single else h), cache

    def backward(self, cache, upstream: np.ndarray):
        """Exact gradients of sum(upstream * output) w.r.t. params and input.

        Returns ([(dW, db) per layer], dx) with shapes mirroring the
        parameters and the (batched) input.
        """
        g = np.asarray(upstream, dtype=float)
        single = g.ndim == 1
        if single:
            g = g[None, :]
        grads = [None] * len(self.layers)
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            out = cache[idx + 1]
            if layer.activation == "relu":
                g = g * (out > 0.0)
            elif layer.activation == "squash":
                g = g * out * (self.squash_bound - out) / self.squash_bound
            grads[idx] = (g.T @ cache[idx], g.sum(axis=0))
            g = g @ layer.w
        return grads, (g[0] if single else g)

    # -- parameter plumbing ---------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.w, layer.b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.w.copy(), l.b.copy(), l.activation)
                         for l in self.layers], self.squash_bound)

    def blend_from(self, other: "DenseNet", rho: float) -> None:
        """Soft update: params <- rho * other + (1 - rho) * params."""
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine *= (1.0 - rho)
            mine += rho * theirs


def flat_grads(grads) -> list[np.ndarray]:
    out = []
    for dw, db in grads:
        out += [dw, db]
    return out


@dataclass
class AdamState:
    """Bias-corrected Adam over an arbitrary list of parameter arrays."""
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list[np.ndarray],
              grads: list[np.ndarray]) -> None:
    """One in-place Adam update (gradient-descent direction)."""
    state.step_count += 1
    t = state.step_count
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def fit_regression(net: DenseNet, inputs: np.ndarray, targets: np.ndarray,
                   epochs: int, lr: float, rng: np.random.Generator,
                   batch_size: int = 64,
                   val_fraction: float = 0.1) -> list[float]:
    """Mini-batch MSE training; returns the held-out MSE per epoch."""
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    order = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction))) if n > 1 else 0
    val_idx, train_idx = order[:n_val], order[n_val:]
    if train_idx.size == 0:
        train_idx = order
    x_tr, y_tr = inputs[train_idx], targets[train_idx]
    x_val, y_val = inputs[val_idx], targets[val_idx]

    opt = AdamState.for_params(net.parameters(), lr)
    trace = []
    for _ in range(epochs):
        perm = rng.permutation(x_tr.shape[0])
        for start in range(0, x_tr.shape[0], batch_size):
            sel = perm[start:start + batch_size]
            pred, cache = net.forward_full(x_tr[sel])
            err = pred - y_tr[sel]
            upstream = 2.0 * err / err.size
            grads, _ = net.backward(cache, upstream)
            adam_step(opt, net.parameters(), flat_grads(grads))
        if x_val.shape[0]:
            val_err = net.forward(x_val) - y_val
            trace.append(float(np.mean(np.square(val_err))))
        else:
            tr_err = net.forward(x_tr) - y_tr
            trace.append(float(np.mean(np.square(tr_err))))
    return trace


# -- serialization -------------------------------------------------------------

_MAGIC = "radarrm-densenet 1"


def save_net(net: DenseNet, path: str | Path) -> None:
    """Write a text form whose floats round-trip bit-exactly."""
    lines = [_MAGIC, f"squash_bound {net.squash_bound!r}",
             f"layers {len(net.layers)}"]
    for layer in net.layers:
        d_out, d_in = layer.w.shape
        lines.append(f"layer {d_in} {d_out} {layer.activation}")
        lines.append("w " + " ".join(repr(float(v))
                                     for v in layer.w.ravel()))
        lines.append("b " + " ".join(repr(float(v)) for v in layer.b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_net(path: str | Path) -> DenseNet:
    text = Path(path).read_text().splitlines()
    try:
        if text[0] != _MAGIC:
            raise ValueError(f"not a {_MAGIC} file")
        bound = float(text[1].split()[1])
        n_layers = int(text[2].split()[1])
        layers = []
        pos = 3
        for _ in range(n_layers):
            _, d_in, d_out, act = text[pos].split()
            d_in, d_out = int(d_in), int(d_out)
            w_vals = text[pos + 1].split()[1:]
            b_vals = text[pos + 2].split()[1:]
            if len(w_vals) != d_in * d_out or len(b_vals) != d_out:
                raise ValueError("parameter count does not match declared dims")
            layers.append(Layer(
                w=np.array([float(v) for v in w_vals]).reshape(d_out, d_in),
                b=np.array([float(v) for v in b_vals]),
                activation=act))
            pos += 3
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed network file {path}: {exc}") from exc
    return DenseNet(layers, squash_bound=bound)
