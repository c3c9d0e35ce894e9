"""Independent oracles and generators shared across the test suite.

Everything here recomputes expected values from first principles (plain
arithmetic, numpy sliding windows, scalar loops) without touching the code
paths under test.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lutpim.nets import LayerSpec, NetworkSpec, build_network
from lutpim.quantizer import quantize

# Scalar definitions of every LUT operation, written independently of the
# implementation's table builder.
SCALAR_OPS = {
    "MUL4": lambda a, b: (a * b) & 0xFF,
    "ADD4": lambda a, b: (a + b) & 0xFF,
    "ADD4C": lambda a, b: (a + b + 1) & 0xFF,
    "MAX4": lambda a, b: a if a > b else b,
    "CMP4": lambda a, b: int(a > b),
    "PASS": lambda a, b: a,
}


def bilinear_point(pixels: np.ndarray, y: float, x: float) -> float:
    """Scalar bilinear sample with corner-aligned coordinates."""
    h, w = pixels.shape
    y0, x0 = int(np.floor(y)), int(np.floor(x))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    fy, fx = y - y0, x - x0
    return (
        pixels[y0, x0] * (1 - fy) * (1 - fx)
        + pixels[y0, x1] * (1 - fy) * fx
        + pixels[y1, x0] * fy * (1 - fx)
        + pixels[y1, x1] * fy * fx
    )


def naive_conv2d(x, w, b, stride, pad):
    """Direct-summation float convolution; x (C,H,W), w (O,C,kh,kw)."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    out_c, in_c, kh, kw = w.shape
    oh = (x.shape[1] - kh) // stride + 1
    ow = (x.shape[2] - kw) // stride + 1
    out = np.zeros((out_c, oh, ow))
    for o in range(out_c):
        for i in range(oh):
            for j in range(ow):
                acc = 0.0
                for c in range(in_c):
                    for di in range(kh):
                        for dj in range(kw):
                            acc += x[c, i * stride + di, j * stride + dj] * w[o, c, di, dj]
                out[o, i, j] = acc + b[o]
    return out


def _patches(x, kh, kw, stride, pad):
    """(C,H,W) -> (P, C*kh*kw) via sliding windows, ordered (c, ki, kj)."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    c, oh, ow = win.shape[:3]
    return win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw), oh, ow


def oracle_quantized_forward(qm, x):
    """Direct integer-arithmetic replay of the quantized pipeline.

    Signed accumulators come straight from sum((qa - Za) * (qw - Zw)) in int64;
    no LUT machinery involved. Returns (probabilities, {layer: acc array}).
    """
    net = qm.net
    x = np.asarray(x, dtype=np.float64)
    accs = {}
    saved = {}
    for layer in net.layers:
        if layer.kind in ("conv2d", "dense", "depthwise_conv2d"):
            ql = qm.layers[layer.name]
            za, zw = ql.act_params.zero_point, ql.wparams.zero_point
            scale = ql.act_params.scale * ql.wparams.scale
            if layer.kind == "dense":
                qa = quantize(x[None, :], ql.act_params)
                acc = (qa - za) @ (ql.qweight - zw)
                accs[layer.name] = acc
                x = (scale * acc + ql.bias)[0]
            elif layer.kind == "conv2d":
                cols, oh, ow = _patches(x, *layer.kernel, layer.stride, layer.padding)
                qa = quantize(cols, ql.act_params)
                acc = (qa - za) @ (ql.qweight - zw)
                accs[layer.name] = acc
                x = (scale * acc + ql.bias).T.reshape(layer.out_channels, oh, ow)
            else:
                chans = []
                for c in range(x.shape[0]):
                    cols, oh, ow = _patches(x[c : c + 1], *layer.kernel, layer.stride, layer.padding)
                    qa = quantize(cols, ql.act_params)
                    acc = (qa - za) @ (ql.qweight[:, c : c + 1] - zw)
                    accs[f"{layer.name}[{c}]"] = acc
                    chans.append((scale * acc[:, 0] + ql.bias[c]).reshape(oh, ow))
                x = np.stack(chans)
        elif layer.kind == "maxpool2d":
            k, s, p = layer.kernel[0], layer.stride, layer.padding
            if p:
                x = np.pad(x, ((0, 0), (p, p), (p, p)), constant_values=-np.inf)
            win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
            x = win.max(axis=(3, 4))
        elif layer.kind == "relu":
            x = np.maximum(x, 0.0)
        elif layer.kind == "flatten":
            x = x.reshape(-1)
        elif layer.kind == "residual_add":
            x = x + saved[layer.residual_from]
        elif layer.kind == "softmax":
            e = np.exp(x - x.max())
            x = e / e.sum()
        saved[layer.name] = x
    return x, accs


def random_small_network(rng: np.random.Generator) -> NetworkSpec:
    """Tiny conv net with randomized shapes for backend-equivalence sweeps."""
    side = int(rng.integers(8, 13))
    c1 = int(rng.integers(2, 5))
    k = 3
    pad = int(rng.integers(0, 2))
    layers = [
        LayerSpec(name="conv1", kind="conv2d", kernel=(k, k), padding=pad, out_channels=c1),
        LayerSpec(name="relu1", kind="relu"),
    ]
    if rng.random() < 0.5:
        layers.append(LayerSpec(name="pool1", kind="maxpool2d", kernel=(2, 2), stride=2))
    if rng.random() < 0.5:
        layers += [
            LayerSpec(name="conv2", kind="conv2d", kernel=(k, k), out_channels=int(rng.integers(2, 5))),
            LayerSpec(name="relu2", kind="relu"),
        ]
    layers += [
        LayerSpec(name="flatten", kind="flatten"),
        LayerSpec(name="dense", kind="dense", out_features=3),
        LayerSpec(name="softmax", kind="softmax"),
    ]
    return build_network(f"rand_{rng.integers(1 << 30)}", (1, side, side), layers)


def random_inputs(net: NetworkSpec, rng: np.random.Generator, n: int):
    return [rng.random(net.input_shape) for _ in range(n)]
