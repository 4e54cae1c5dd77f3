"""Progressive dense tanh network with frozen lateral connections.

One column per time task. A column is four 64-wide tanh layers plus a
linear head; from the second column on, hidden depths 2..4 also receive
bias-free lateral maps from the previous columns' activations at the
depth below. Only the newest column trains; everything earlier is frozen.

Gradients (both with respect to parameters and with respect to the
inputs x, t) come from the reverse-mode tape in `autodiff`; the
derivative-carrying forward pass propagates (value, d/dx, d/dt) triples
through the layers so that losses built on input derivatives remain
exactly differentiable in the parameters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import NumericalError, UsageError

N_INPUT = 2  # (x, t)
DEFAULT_HIDDEN = (64, 64, 64, 64)

IDENTITY = "identity"
TANH_PLUS_ONE = "tanh_plus_one"


@dataclass(frozen=True)
class OutputTransform:
    kind: str = IDENTITY
    indices: tuple = ()

    def __post_init__(self):
        if self.kind not in (IDENTITY, TANH_PLUS_ONE):
            raise UsageError(f"unknown output transform {self.kind!r}")


@dataclass
class DenseLayer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray | None  # laterals carry no bias
    frozen: bool = False


@dataclass
class Column:
    hidden: list  # [DenseLayer] * depth
    laterals: list  # per depth: {src_column_index: DenseLayer}; depth 0 empty
    head: DenseLayer


@dataclass
class ProgressiveNetwork:
    columns: list = field(default_factory=list)
    task_boundaries: np.ndarray = None
    seed: int = 7
    n_out: int = 1
    hidden_sizes: tuple = DEFAULT_HIDDEN
    transform: OutputTransform = OutputTransform()

    @property
    def n_tasks(self) -> int:
        return len(self.task_boundaries) - 1


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _fresh_column(seed, col_idx, hidden_sizes, n_out, n_prev):
    rng = np.random.default_rng([seed, col_idx])
    hidden, laterals = [], []
    fan_in = N_INPUT
    for depth, width in enumerate(hidden_sizes):
        hidden.append(DenseLayer(_glorot(rng, fan_in, width), np.zeros(width)))
        lat = {}
        if depth >= 1:
            for j in range(n_prev):
                lat[j] = DenseLayer(np.zeros((hidden_sizes[depth - 1], width)), None)
        laterals.append(lat)
        fan_in = width
    head_in = hidden_sizes[-1] if hidden_sizes else N_INPUT
    head = DenseLayer(_glorot(rng, head_in, n_out), np.zeros(n_out))
    return Column(hidden, laterals, head)


def init_network(
    n_out,
    task_boundaries,
    seed,
    hidden_sizes=DEFAULT_HIDDEN,
    transform=OutputTransform(),
) -> ProgressiveNetwork:
    """One trainable column with Glorot-uniform weights and zero biases."""
    if n_out < 1:
        raise UsageError("n_out must be at least 1")
    bounds = np.asarray(task_boundaries, dtype=float)
    if bounds.ndim != 1 or bounds.size < 2 or np.any(np.diff(bounds) <= 0.0):
        raise UsageError("task boundaries must be strictly increasing")
    net = ProgressiveNetwork(
        columns=[_fresh_column(seed, 0, tuple(hidden_sizes), n_out, 0)],
        task_boundaries=bounds,
        seed=int(seed),
        n_out=int(n_out),
        hidden_sizes=tuple(hidden_sizes),
        transform=transform,
    )
    return net


def freeze_column(col: Column) -> None:
    for layer in col.hidden:
        layer.frozen = True
    for lat in col.laterals:
        for layer in lat.values():
            layer.frozen = True
    col.head.frozen = True


def add_column(net: ProgressiveNetwork) -> None:
    """Freeze everything and append a fresh column with zero laterals."""
    if len(net.columns) >= net.n_tasks:
        raise UsageError(f"cannot exceed {net.n_tasks} columns")
    for col in net.columns:
        freeze_column(col)
    net.columns.append(
        _fresh_column(net.seed, len(net.columns), net.hidden_sizes, net.n_out, len(net.columns))
    )


def column_for_time(net: ProgressiveNetwork, t) -> np.ndarray:
    """Task index (1-based) owning each time; intervals are right-closed."""
    t = np.asarray(t, dtype=float)
    k = np.searchsorted(net.task_boundaries, t, side="left")
    return np.clip(k, 1, len(net.columns))


# -- parameter vector helpers ------------------------------------------------

def _param_layers(col: Column):
    """Trainable layers of a column in a fixed, documented order."""
    out = []
    for depth, layer in enumerate(col.hidden):
        out.append(layer)
        for j in sorted(col.laterals[depth]):
            out.append(col.laterals[depth][j])
    out.append(col.head)
    return out


def trainable_count(col: Column) -> int:
    n = 0
    for layer in _param_layers(col):
        n += layer.W.size + (layer.b.size if layer.b is not None else 0)
    return n


def get_trainable(col: Column) -> np.ndarray:
    parts = []
    for layer in _param_layers(col):
        parts.append(layer.W.ravel())
        if layer.b is not None:
            parts.append(layer.b.ravel())
    return np.concatenate(parts)


def set_trainable(col: Column, vec: np.ndarray) -> None:
    pos = 0
    for layer in _param_layers(col):
        n = layer.W.size
        layer.W[...] = vec[pos : pos + n].reshape(layer.W.shape)
        pos += n
        if layer.b is not None:
            n = layer.b.size
            layer.b[...] = vec[pos : pos + n]
            pos += n
    if pos != vec.size:
        raise UsageError("parameter vector length mismatch")


def params_digest(net: ProgressiveNetwork, upto: int | None = None) -> bytes:
    """Hash of the raw parameter bytes of columns [0, upto)."""
    import hashlib

    h = hashlib.sha256()
    cols = net.columns if upto is None else net.columns[:upto]
    for col in cols:
        for layer in _param_layers(col):
            h.update(layer.W.tobytes())
            if layer.b is not None:
                h.update(layer.b.tobytes())
    return h.digest()


# -- plain (untaped) forward passes ------------------------------------------

def _hidden_states_np(net, X, k):
    """Activations h_i^{(j)} for columns 1..k at rows of X, plain numpy."""
    per_col = []
    for ci in range(k):
        col = net.columns[ci]
        h = X
        states = []
        for depth, layer in enumerate(col.hidden):
            z = h @ layer.W + layer.b
            for j in sorted(col.laterals[depth]):
                z = z + per_col[j][depth - 1] @ col.laterals[depth][j].W
            h = np.tanh(z)
            states.append(h)
        per_col.append(states)
    return per_col


def _apply_transform_np(net, raw):
    if net.transform.kind == IDENTITY or not net.transform.indices:
        return raw
    out = raw.copy()
    idx = list(net.transform.indices)
    out[:, idx] = np.tanh(raw[:, idx]) + 1.0
    return out


def forward(net: ProgressiveNetwork, x, t, k: int) -> np.ndarray:
    """Prediction of column k at (x, t); scalars in, (n_out,) out."""
    if not 1 <= k <= len(net.columns):
        raise UsageError(f"column index {k} out of range")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    X = np.stack([xs, ts], axis=-1)
    states = _hidden_states_np(net, X, k)
    col = net.columns[k - 1]
    h = states[k - 1][-1] if net.hidden_sizes else X
    raw = h @ col.head.W + col.head.b
    out = _apply_transform_np(net, raw)
    return out[0] if scalar else out


def forward_batch(net, xs, ts, k) -> np.ndarray:
    xs = np.asarray(xs, dtype=float).ravel()
    ts = np.asarray(ts, dtype=float).ravel()
    X = np.stack([xs, ts], axis=-1)
    states = _hidden_states_np(net, X, k)
    col = net.columns[k - 1]
    h = states[k - 1][-1] if net.hidden_sizes else X
    return _apply_transform_np(net, h @ col.head.W + col.head.b)


def frozen_states(net, X, k):
    """Hidden activations of the frozen columns 1..k-1 at rows of X."""
    return _hidden_states_np(net, X, k - 1)


def forward_from_frozen(net, k, X, states) -> np.ndarray:
    """Column-k prediction reusing precomputed frozen activations."""
    col = net.columns[k - 1]
    h = X
    for depth, layer in enumerate(col.hidden):
        z = h @ layer.W + layer.b
        for j in sorted(col.laterals[depth]):
            z = z + states[j][depth - 1] @ col.laterals[depth][j].W
        h = np.tanh(z)
    return _apply_transform_np(net, h @ col.head.W + col.head.b)


def predict(net: ProgressiveNetwork, xs, ts) -> np.ndarray:
    """Prediction with the column owning each time value."""
    xs = np.asarray(xs, dtype=float).ravel()
    ts = np.asarray(ts, dtype=float).ravel()
    ks = column_for_time(net, ts)
    out = np.empty((xs.size, net.n_out))
    for k in np.unique(ks):
        m = ks == k
        out[m] = forward_batch(net, xs[m], ts[m], int(k))
    return out


def _aug_hidden_states_np(net, X, k):
    """(h, dh/dx, dh/dt) per column and depth, plain numpy."""
    per_col = []
    n = X.shape[0]
    for ci in range(k):
        col = net.columns[ci]
        h = X
        hx = np.tile(np.array([1.0, 0.0]), (n, 1))
        ht = np.tile(np.array([0.0, 1.0]), (n, 1))
        states = []
        for depth, layer in enumerate(col.hidden):
            z = h @ layer.W + layer.b
            zx = hx @ layer.W
            zt = ht @ layer.W
            for j in sorted(col.laterals[depth]):
                U = col.laterals[depth][j].W
                hj, hjx, hjt = per_col[j][depth - 1]
                z = z + hj @ U
                zx = zx + hjx @ U
                zt = zt + hjt @ U
            h = np.tanh(z)
            d = 1.0 - h * h
            hx, ht = d * zx, d * zt
            states.append((h, hx, ht))
        per_col.append(states)
    return per_col


def input_grads(net: ProgressiveNetwork, k: int, x, t):
    """Exact (du/dx, du/dt) per output component at (x, t)."""
    if not 1 <= k <= len(net.columns):
        raise UsageError(f"column index {k} out of range")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    X = np.stack([xs, ts], axis=-1)
    states = _aug_hidden_states_np(net, X, k)
    col = net.columns[k - 1]
    if net.hidden_sizes:
        h, hx, ht = states[k - 1][-1]
    else:
        h = X
        hx = np.tile(np.array([1.0, 0.0]), (X.shape[0], 1))
        ht = np.tile(np.array([0.0, 1.0]), (X.shape[0], 1))
    raw = h @ col.head.W + col.head.b
    ux = hx @ col.head.W
    ut = ht @ col.head.W
    if net.transform.kind == TANH_PLUS_ONE and net.transform.indices:
        idx = list(net.transform.indices)
        d = 1.0 - np.tanh(raw[:, idx]) ** 2
        ux[:, idx] *= d
        ut[:, idx] *= d
    if not np.all(np.isfinite(ux)) or not np.all(np.isfinite(ut)):
        raise NumericalError("non-finite input gradient")
    if np.ndim(x) == 0:
        return ux[0], ut[0]
    return ux, ut


# -- taped evaluation ---------------------------------------------------------

class TapedNetEval:
    """Taped forward passes of the trainable column k.

    Frozen columns enter as constants, so the backward pass emits
    gradients for column k's parameters only. `grad_vector` returns them
    flattened in the same order as `get_trainable`.
    """

    def __init__(self, net: ProgressiveNetwork, k: int):
        if not 1 <= k <= len(net.columns):
            raise UsageError(f"column index {k} out of range")
        self.net = net
        self.k = k
        self.col = net.columns[k - 1]
        self._vars = {}
        for layer in _param_layers(self.col):
            wv = ad.leaf(layer.W)
            bv = ad.leaf(layer.b) if layer.b is not None else None
            self._vars[id(layer)] = (wv, bv)

    def _wb(self, layer):
        return self._vars[id(layer)]

    def eval(self, X, frozen_states=None) -> ad.Var:
        """Taped prediction at rows of X (n, 2) -> Var (n, n_out)."""
        net, col = self.net, self.col
        if frozen_states is None:
            frozen_states = _hidden_states_np(net, X, self.k - 1)
        h = ad.const(X)
        for depth, layer in enumerate(col.hidden):
            wv, bv = self._wb(layer)
            z = ad.matmul(h, wv) + bv
            for j in sorted(col.laterals[depth]):
                uv, _ = self._wb(col.laterals[depth][j])
                z = z + ad.matmul(ad.const(frozen_states[j][depth - 1]), uv)
            h = ad.tanh(z)
        wv, bv = self._wb(col.head)
        raw = ad.matmul(h, wv) + bv
        return self._transform(raw)

    def eval_with_input_grads(self, X, frozen_aug=None):
        """Taped (u, du/dx, du/dt) at rows of X; all three are Vars."""
        net, col = self.net, self.col
        if frozen_aug is None:
            frozen_aug = _aug_hidden_states_np(net, X, self.k - 1)
        n = X.shape[0]
        h = ad.const(X)
        hx = ad.const(np.tile(np.array([1.0, 0.0]), (n, 1)))
        ht = ad.const(np.tile(np.array([0.0, 1.0]), (n, 1)))
        for depth, layer in enumerate(col.hidden):
            wv, bv = self._wb(layer)
            z = ad.matmul(h, wv) + bv
            zx = ad.matmul(hx, wv)
            zt = ad.matmul(ht, wv)
            for j in sorted(col.laterals[depth]):
                uv, _ = self._wb(col.laterals[depth][j])
                hj, hjx, hjt = frozen_aug[j][depth - 1]
                z = z + ad.matmul(ad.const(hj), uv)
                zx = zx + ad.matmul(ad.const(hjx), uv)
                zt = zt + ad.matmul(ad.const(hjt), uv)
            h = ad.tanh(z)
            d = 1.0 - h * h
            hx = d * zx
            ht = d * zt
        wv, bv = self._wb(col.head)
        raw = ad.matmul(h, wv) + bv
        ux = ad.matmul(hx, wv)
        ut = ad.matmul(ht, wv)
        if net.transform.kind == TANH_PLUS_ONE and net.transform.indices:
            cols_u, cols_x, cols_t = [], [], []
            for c in range(net.n_out):
                uc, xc, tc = raw[:, c : c + 1], ux[:, c : c + 1], ut[:, c : c + 1]
                if c in net.transform.indices:
                    th = ad.tanh(uc)
                    d = 1.0 - th * th
                    uc = th + 1.0
                    xc = d * xc
                    tc = d * tc
                cols_u.append(uc)
                cols_x.append(xc)
                cols_t.append(tc)
            return (
                ad.concat(cols_u, axis=1),
                ad.concat(cols_x, axis=1),
                ad.concat(cols_t, axis=1),
            )
        return raw, ux, ut

    def _transform(self, raw: ad.Var) -> ad.Var:
        net = self.net
        if net.transform.kind == IDENTITY or not net.transform.indices:
            return raw
        cols = []
        for c in range(net.n_out):
            piece = raw[:, c : c + 1]
            if c in net.transform.indices:
                piece = ad.tanh(piece) + 1.0
            cols.append(piece)
        return ad.concat(cols, axis=1)

    def grad_vector(self) -> np.ndarray:
        parts = []
        for layer in _param_layers(self.col):
            wv, bv = self._wb(layer)
            g = wv.grad if wv.grad is not None else np.zeros_like(layer.W)
            parts.append(g.ravel())
            if bv is not None:
                g = bv.grad if bv.grad is not None else np.zeros_like(layer.b)
                parts.append(g.ravel())
        return np.concatenate(parts)

    def zero_grads(self):
        for wv, bv in self._vars.values():
            wv.grad = None
            if bv is not None:
                bv.grad = None


def backward_params(net, k, batch_xt, upstream) -> np.ndarray:
    """Gradient of sum(outputs * upstream) over column k's parameters.

    `batch_xt` is (n, 2) rows of (x, t); `upstream` is (n, n_out).
    Frozen columns contribute no slots to the result.
    """
    X = np.asarray(batch_xt, dtype=float)
    up = np.asarray(upstream, dtype=float)
    if X.size == 0:
        raise UsageError("empty batch")
    bad = ~np.all(np.isfinite(up), axis=-1)
    if np.any(bad):
        raise NumericalError(f"non-finite upstream gradient at batch index {int(np.argmax(bad))}")
    ev = TapedNetEval(net, k)
    out = ev.eval(X)
    loss = ad.vsum(out * ad.const(up))
    ad.backward(loss)
    g = ev.grad_vector()
    if not np.all(np.isfinite(g)):
        bad_rows = ~np.all(np.isfinite(out.v), axis=-1)
        idx = int(np.argmax(bad_rows)) if np.any(bad_rows) else -1
        raise NumericalError(f"non-finite parameter gradient (batch index {idx})")
    return g


# -- checkpoints ---------------------------------------------------------------

def _layer_to_json(layer: DenseLayer):
    return {
        "shape": list(layer.W.shape),
        "w": layer.W.ravel().tolist(),
        "b": None if layer.b is None else layer.b.tolist(),
        "frozen": bool(layer.frozen),
    }


def _layer_from_json(d) -> DenseLayer:
    W = np.asarray(d["w"], dtype=float).reshape(d["shape"])
    b = None if d["b"] is None else np.asarray(d["b"], dtype=float)
    return DenseLayer(W, b, bool(d["frozen"]))


def save_network(net: ProgressiveNetwork, path, meta=None) -> None:
    doc = {
        "format": "progdg-checkpoint-1",
        "seed": net.seed,
        "task_boundaries": net.task_boundaries.tolist(),
        "n_out": net.n_out,
        "hidden_sizes": list(net.hidden_sizes),
        "transform": {"kind": net.transform.kind, "indices": list(net.transform.indices)},
        "columns": [
            {
                "hidden": [_layer_to_json(l) for l in col.hidden],
                "laterals": [
                    [[depth, j, _layer_to_json(col.laterals[depth][j])] for j in sorted(col.laterals[depth])]
                    for depth in range(len(col.hidden))
                ],
                "head": _layer_to_json(col.head),
            }
            for col in net.columns
        ],
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_network(path):
    """Returns (network, meta); forward outputs reproduce bitwise."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "progdg-checkpoint-1":
        raise UsageError(f"not a progdg checkpoint: {path}")
    net = ProgressiveNetwork(
        columns=[],
        task_boundaries=np.asarray(doc["task_boundaries"], dtype=float),
        seed=int(doc["seed"]),
        n_out=int(doc["n_out"]),
        hidden_sizes=tuple(doc["hidden_sizes"]),
        transform=OutputTransform(doc["transform"]["kind"], tuple(doc["transform"]["indices"])),
    )
    for cdoc in doc["columns"]:
        hidden = [_layer_from_json(l) for l in cdoc["hidden"]]
        laterals = [dict() for _ in hidden]
        for entries in cdoc["laterals"]:
            for depth, j, ldoc in entries:
                laterals[depth][j] = _layer_from_json(ldoc)
        net.columns.append(Column(hidden, laterals, _layer_from_json(cdoc["head"])))
    return net, doc.get("meta", {})
