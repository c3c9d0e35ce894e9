"""CNN execution: float reference backend and LUT-backed integer backend.

The integer backend computes every dot product's unsigned sum of products
through the MUL4 function table (vectorized table gathers, or per-MAC cluster
microprograms with engine="cluster"); zero-point corrections, bias addition,
and softmax run host-side. Integer results are exact, so both engines and any
direct integer oracle agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import Cluster, mac8
from .lut_core import OpTag, build_function_table
from .nets import NetworkSpec
from .perf import PASS_FACTOR, intra_transfer_events, weight_transfer_events
from .quantizer import QuantParams, calibrate, quantize
from .system import EnergyLedger, SystemConfig
from .weights import WeightSet


# ---------------------------------------------------------------------------
# float reference backend


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """(C,H,W) -> (patches, C*kh*kw) with columns ordered (c, ki, kj)."""
    c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    cols = np.empty((c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = x[:, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols.reshape(c * kh * kw, oh * ow).T, oh, ow


def _pool2d(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    out = np.full((c, oh, ow), -np.inf, dtype=np.float64)
    for i in range(k):
        for j in range(k):
            out = np.maximum(out, x[:, i : i + stride * oh : stride, j : j + stride * ow : stride])
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def _conv_w(ws: WeightSet, name: str):
    try:
        w = ws[f"{name}.w"].data
        b = ws[f"{name}.b"].data
    except KeyError:
        raise KeyError(f"missing weights for layer {name!r}") from None
    return np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)


def infer_float(net: NetworkSpec, ws: WeightSet, x: np.ndarray, captures: dict | None = None) -> np.ndarray:
    """Forward pass in real arithmetic; returns the class probability vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != net.input_shape:
        raise ValueError(f"input shape {x.shape} != network input {net.input_shape}")
    saved = {}
    for layer in net.layers:
        if layer.kind in ("conv2d", "depthwise_conv2d"):
            w, b = _conv_w(ws, layer.name)
            kh, kw = layer.kernel
            if captures is not None:
                captures.setdefault("layer_inputs", {})[layer.name] = x.copy()
            if layer.kind == "conv2d":
                cols, oh, ow = _im2col(x, kh, kw, layer.stride, layer.padding)
                out = cols @ w.reshape(layer.out_channels, -1).T + b
                x = out.T.reshape(layer.out_channels, oh, ow)
            else:
                chans = []
                for c in range(x.shape[0]):
                    cols, oh, ow = _im2col(x[c : c + 1], kh, kw, layer.stride, layer.padding)
                    chans.append((cols @ w[c].reshape(-1) + b[c]).reshape(oh, ow))
                x = np.stack(chans)
        elif layer.kind == "dense":
            w, b = _conv_w(ws, layer.name)
            if captures is not None:
                captures.setdefault("layer_inputs", {})[layer.name] = x.copy()
            x = x @ w + b
        elif layer.kind == "maxpool2d":
            x = _pool2d(x, layer.kernel[0], layer.stride, layer.padding)
        elif layer.kind == "relu":
            x = np.maximum(x, 0.0)
        elif layer.kind == "flatten":
            x = x.reshape(-1)
        elif layer.kind == "residual_add":
            res = saved[layer.residual_from]
            if layer.proj:
                w, b = _conv_w(ws, f"{layer.name}.proj")
                cols, oh, ow = _im2col(res, 1, 1, layer.stride, 0)
                res = (cols @ w.reshape(layer.out_channels, -1).T + b).T.reshape(
                    layer.out_channels, oh, ow
                )
            x = x + res
        elif layer.kind == "softmax":
            if captures is not None:
                captures["logits"] = x.copy()
            x = softmax(x)
        saved[layer.name] = x
    return x


# ---------------------------------------------------------------------------
# LUT-backed integer backend


class _LutMultiplier:
    """Byte multiplier realized from the MUL4 function table contents."""

    def __init__(self):
        t = np.frombuffer(build_function_table(OpTag.MUL4).assembled_bytes(), dtype=np.uint8)
        t = t.astype(np.uint32).reshape(16, 16)  # t[a, b] = a*b per the table
        hi = np.arange(256, dtype=np.uint32) >> 4
        lo = np.arange(256, dtype=np.uint32) & 15
        self.mul8_table = (
            (t[hi[:, None], hi[None, :]] << 8)
            + ((t[hi[:, None], lo[None, :]] + t[lo[:, None], hi[None, :]]) << 4)
            + t[lo[:, None], lo[None, :]]
        ).astype(np.int64)

    def products(self, a: np.ndarray, b: np.ndarray, bits: int) -> np.ndarray:
        """Elementwise a*b (broadcast) via table gathers; int64 output."""
        if bits <= 8:
            return self.mul8_table[a, b]
        ah, al = a >> 8, a & 0xFF
        bh, bl = b >> 8, b & 0xFF
        m = self.mul8_table
        return (m[ah, bh] << 16) + ((m[ah, bl] + m[al, bh]) << 8) + m[al, bl]


_MULTIPLIER = None


def _multiplier() -> _LutMultiplier:
    global _MULTIPLIER
    if _MULTIPLIER is None:
        _MULTIPLIER = _LutMultiplier()
    return _MULTIPLIER


def _raw_dot_vector(qa: np.ndarray, qw: np.ndarray, bits: int) -> np.ndarray:
    """Unsigned sum of products sum_k qa[p,k]*qw[k,o] through the LUT tables."""
    mul = _multiplier()
    out = np.zeros((qa.shape[0], qw.shape[1]), dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, qa.shape[1] * qw.shape[1]))
    for start in range(0, qa.shape[0], chunk):
        block = qa[start : start + chunk]
        prods = mul.products(block[:, :, None], qw[None, :, :], bits)
        out[start : start + chunk] = prods.sum(axis=1)
    return out


# 16-bit operands run as four byte-level passes on the cluster; the shifted
# recombination happens host-side.
_PASSES_16 = ((8, 0xFF, 8, 0xFF, 16), (0, 0xFF, 8, 0xFF, 8), (8, 0xFF, 0, 0xFF, 8), (0, 0xFF, 0, 0xFF, 0))


def _raw_dot_cluster(qa: np.ndarray, qw: np.ndarray, bits: int, cluster: Cluster) -> np.ndarray:
    """Same sum, but every product executes the 8-step MAC microprogram."""
    out = np.zeros((qa.shape[0], qw.shape[1]), dtype=np.int64)
    for p in range(qa.shape[0]):
        for o in range(qw.shape[1]):
            if bits <= 8:
                cluster.accumulator = 0
                for k in range(qa.shape[1]):
                    mac8(cluster, int(qa[p, k]), int(qw[k, o]))
                out[p, o] = cluster.accumulator
            else:
                total = 0
                for sa, ma, sb, mb, shift in _PASSES_16:
                    cluster.accumulator = 0
                    for k in range(qa.shape[1]):
                        mac8(cluster, (int(qa[p, k]) >> sa) & ma, (int(qw[k, o]) >> sb) & mb)
                    total += cluster.accumulator << shift
                out[p, o] = total
    return out


@dataclass
class QuantizedLayer:
    name: str
    qweight: np.ndarray  # (K, O) unsigned codes
    wparams: QuantParams
    bias: np.ndarray
    act_params: QuantParams  # input activation quantization at this layer


@dataclass
class QuantizedModel:
    net: NetworkSpec
    bits: int
    layers: dict[str, QuantizedLayer] = field(default_factory=dict)


def _weight_matrix(layer, ws: WeightSet):
    w, b = _conv_w(ws, layer.name)
    if layer.kind == "conv2d":
        return w.reshape(layer.out_channels, -1).T, b
    if layer.kind == "dense":
        return w, b
    if layer.kind == "depthwise_conv2d":
        return w.reshape(w.shape[0], -1).T, b  # (kh*kw, C) column per channel
    raise ValueError(layer.kind)


def prepare_quantized(
    net: NetworkSpec, ws: WeightSet, cal_inputs, bits: int
) -> QuantizedModel:
    """Quantize weights (symmetric) and calibrate activations (asymmetric)."""
    if bits not in (4, 8, 16):
        raise ValueError("precision must be 4, 8, or 16 bits")
    collected: dict[str, list] = {}
    for x in cal_inputs:
        captures: dict = {}
        infer_float(net, ws, x, captures=captures)
        for name, arr in captures["layer_inputs"].items():
            collected.setdefault(name, []).append(arr.ravel())
    qm = QuantizedModel(net=net, bits=bits)
    for layer in net.layers:
        if layer.kind not in ("conv2d", "depthwise_conv2d", "dense"):
            continue
        wmat, b = _weight_matrix(layer, ws)
        wp = calibrate(wmat, bits, symmetric=True)
        act = calibrate(np.concatenate(collected[layer.name]), bits, symmetric=False)
        qm.layers[layer.name] = QuantizedLayer(
            name=layer.name,
            qweight=quantize(wmat, wp),
            wparams=wp,
            bias=b,
            act_params=act,
        )
    return qm


def infer_lut(
    qm: QuantizedModel,
    x: np.ndarray,
    cfg: SystemConfig | None = None,
    engine: str = "vector",
    captures: dict | None = None,
):
    """Quantized forward pass on the LUT backend.

    Returns (probabilities, ledger). Integer accumulators per MAC layer land in
    captures["acc"] when a captures dict is supplied; the final dense layer's
    accumulator row is the pre-softmax integer output.
    """
    cfg = cfg or SystemConfig(precision_bits=qm.bits if qm.bits in (4, 8, 16) else 8)
    net = qm.net
    ledger = EnergyLedger()
    cluster = Cluster() if engine == "cluster" else None
    if engine not in ("vector", "cluster"):
        raise ValueError(f"unknown engine {engine!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != net.input_shape:
        raise ValueError(f"input shape {x.shape} != network input {net.input_shape}")
    saved = {}

    def raw_dot(qa, qw):
        if engine == "cluster":
            return _raw_dot_cluster(qa, qw, qm.bits, cluster)
        return _raw_dot_vector(qa, qw, qm.bits)

    def mac_layer(qlayer, cols):
        """Zero-point expansion: LUT computes unsigned sum(qa*qw), host corrects."""
        qa = quantize(cols, qlayer.act_params)
        qw = qlayer.qweight
        za, zw = qlayer.act_params.zero_point, qlayer.wparams.zero_point
        k = qa.shape[1]
        raw = raw_dot(qa, qw)
        acc = (
            raw
            - za * qw.sum(axis=0, dtype=np.int64)[None, :]
            - zw * qa.sum(axis=1, dtype=np.int64)[:, None]
            + k * za * zw
        )
        if captures is not None:
            captures.setdefault("acc", {})[qlayer.name] = acc
        macs = qa.shape[0] * k * qw.shape[1]
        ledger.account_macs(cfg, macs * PASS_FACTOR[qm.bits])
        for _ in range(weight_transfer_events(macs * PASS_FACTOR[qm.bits], cfg)):
            ledger.account_transfer("inter", 1)
        scale = qlayer.act_params.scale * qlayer.wparams.scale
        return scale * acc + qlayer.bias

    for layer in net.layers:
        if layer.kind == "conv2d":
            ql = qm.layers[layer.name]
            cols, oh, ow = _im2col(x, *layer.kernel, layer.stride, layer.padding)
            x = mac_layer(ql, cols).T.reshape(layer.out_channels, oh, ow)
        elif layer.kind == "depthwise_conv2d":
            ql = qm.layers[layer.name]
            chans = []
            for c in range(x.shape[0]):
                cols, oh, ow = _im2col(x[c : c + 1], *layer.kernel, layer.stride, layer.padding)
                qa = quantize(cols, ql.act_params)
                qw = ql.qweight[:, c : c + 1]
                za, zw = ql.act_params.zero_point, ql.wparams.zero_point
                raw = raw_dot(qa, qw)
                acc = (
                    raw
                    - za * qw.sum(axis=0, dtype=np.int64)[None, :]
                    - zw * qa.sum(axis=1, dtype=np.int64)[:, None]
                    + qa.shape[1] * za * zw
                )
                if captures is not None:
                    captures.setdefault("acc", {})[f"{ql.name}[{c}]"] = acc
                macs = qa.shape[0] * qa.shape[1]
                ledger.account_macs(cfg, macs * PASS_FACTOR[qm.bits])
                scale = ql.act_params.scale * ql.wparams.scale
                chans.append((scale * acc[:, 0] + ql.bias[c]).reshape(oh, ow))
            x = np.stack(chans)
        elif layer.kind == "dense":
            ql = qm.layers[layer.name]
            x = mac_layer(ql, x[None, :])[0]
        elif layer.kind == "maxpool2d":
            x = _pool2d(x, layer.kernel[0], layer.stride, layer.padding)
            for _ in range(intra_transfer_events(layer)):
                ledger.account_transfer("intra")
        elif layer.kind == "relu":
            x = np.maximum(x, 0.0)
            for _ in range(intra_transfer_events(layer)):
                ledger.account_transfer("intra")
        elif layer.kind == "flatten":
            x = x.reshape(-1)
        elif layer.kind == "residual_add":
            res = saved[layer.residual_from]
            if layer.proj:
                raise NotImplementedError("projected shortcuts are perf-model only")
            x = x + res
            for _ in range(intra_transfer_events(layer)):
                ledger.account_transfer("intra")
        elif layer.kind == "softmax":
            if captures is not None:
                captures["logits"] = x.copy()
            x = softmax(x)
        saved[layer.name] = x
    return x, ledger


# ---------------------------------------------------------------------------
# desk-scale training (closed-form last-layer fit) and metrics


def init_random_weights(net: NetworkSpec, seed: int) -> WeightSet:
    """He-scaled random conv/dense weights, zero biases."""
    rng = np.random.default_rng(seed)
    ws = WeightSet()
    for layer in net.layers:
        if layer.kind == "conv2d":
            kh, kw = layer.kernel
            fan_in = layer.in_channels * kh * kw
            w = rng.normal(0, np.sqrt(2 / fan_in), (layer.out_channels, layer.in_channels, kh, kw))
            ws.add(f"{layer.name}.w", w.astype(np.float32))
            ws.add(f"{layer.name}.b", np.zeros(layer.out_channels, dtype=np.float32))
        elif layer.kind == "depthwise_conv2d":
            kh, kw = layer.kernel
            w = rng.normal(0, np.sqrt(2 / (kh * kw)), (layer.in_channels, 1, kh, kw))
            ws.add(f"{layer.name}.w", w.astype(np.float32))
            ws.add(f"{layer.name}.b", np.zeros(layer.in_channels, dtype=np.float32))
        elif layer.kind == "dense":
            w = rng.normal(0, np.sqrt(2 / layer.in_features), (layer.in_features, layer.out_features))
            ws.add(f"{layer.name}.w", w.astype(np.float32))
            ws.add(f"{layer.name}.b", np.zeros(layer.out_features, dtype=np.float32))
    return ws


def fit_last_layer(net: NetworkSpec, ws: WeightSet, inputs, labels, ridge: float = 1.0) -> WeightSet:
    """Single-pass ridge fit of the final dense layer on frozen upstream features.

    Features are standardized for the solve; the affine correction is folded
    back into the dense weights and bias, so inference stays a plain layer.
    """
    dense = [l for l in net.layers if l.kind == "dense"][-1]
    feats = []
    for x in inputs:
        captures: dict = {}
        infer_float(net, ws, x, captures=captures)
        feats.append(captures["layer_inputs"][dense.name])
    X = np.stack(feats)
    y = np.asarray(labels, dtype=int)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    # Floor near-dead feature scales so the folded weights stay in a range
    # that survives low-bit symmetric weight quantization.
    sd = np.maximum(sd, np.median(sd) + 1e-12)
    Xs = (X - mu) / sd
    Y = -np.ones((len(y), dense.out_features))
    Y[np.arange(len(y)), y] = 1.0
    gram = Xs.T @ Xs + ridge * len(y) * np.eye(Xs.shape[1])
    W = np.linalg.solve(gram, Xs.T @ Y)
    ws.add(f"{dense.name}.w", (W / sd[:, None]).astype(np.float32))
    ws.add(f"{dense.name}.b", (-(mu / sd) @ W).astype(np.float32))
    return ws


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    probability_gap: float  # mean P(true) - P(predicted); 0 when always correct
    tp: int
    fp: int
    tn: int
    fn: int


# Published reference row for the full-corpus classifier, rendered alongside
# desk-scale results (accuracy / f1 / recall).
REFERENCE_METRICS = (0.987, 0.987, 0.982)


def metrics_from_predictions(y_true, probs) -> MetricsReport:
    """Two-class metrics with malware (class 1) as the positive class."""
    y_true = np.asarray(y_true, dtype=int)
    probs = np.asarray(probs, dtype=np.float64)
    if len(y_true) == 0:
        raise ValueError("cannot evaluate an empty corpus")
    y_pred = probs.argmax(axis=1)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    n = len(y_true)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    gap = float(np.mean(probs[np.arange(n), y_true] - probs[np.arange(n), y_pred]))
    return MetricsReport(
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        probability_gap=gap,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def evaluate(
    net: NetworkSpec,
    ws: WeightSet,
    inputs,
    labels,
    bits: int | None = None,
    cfg: SystemConfig | None = None,
    cal_count: int = 32,
) -> MetricsReport:
    """Corpus evaluation in the float backend or the LUT backend at a precision."""
    if bits is None:
        probs = np.stack([infer_float(net, ws, x) for x in inputs])
    else:
        qm = prepare_quantized(net, ws, inputs[:cal_count], bits)
        probs = np.stack([infer_lut(qm, x, cfg)[0] for x in inputs])
    return metrics_from_predictions(labels, probs)
