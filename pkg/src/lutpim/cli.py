"""Command-line surface: convert, corpus, fit, quantize, simulate, bench, report.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import binviz, engine, nets, perf
from .quantizer import QuantParams
from .system import SystemConfig
from .weights import WeightFormatError, WeightSet, load_weights, save_weights

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class DataError(Exception):
    """User-supplied file or value is unreadable or inconsistent."""


def _parse_args(argv):
    ap = argparse.ArgumentParser(prog="lutpim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="binary file -> grayscale PGM")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resize", type=int, default=0, help="resize to N x N (0 = no resize)")

    p = sub.add_parser("corpus", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--benign", type=int, default=100)
    p.add_argument("--malware", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", help="fit the detector's dense layer on a corpus")
    p.add_argument("--corpus", required=True, help="corpus manifest CSV")
    p.add_argument("--network", default="tinymalnet")
    p.add_argument("--out", required=True, help="weight container path")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("quantize", help="quantize a float weight container")
    p.add_argument("--weights", required=True)
    p.add_argument("--network", default="tinymalnet")
    p.add_argument("--corpus", required=True, help="manifest used for activation calibration")
    p.add_argument("--precision", type=int, choices=(4, 8, 16), default=8)
    p.add_argument("--cal-count", type=int, default=32)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="run one input through the simulator")
    p.add_argument("--network", default="tinymalnet")
    p.add_argument("--weights", help="required in functional mode")
    p.add_argument("--input", help="binary or .pgm input (functional mode)")
    p.add_argument("--mode", choices=("functional", "perf"), default="functional")
    p.add_argument("--precision", type=int, choices=(4, 8, 16), default=8)
    p.add_argument("--clusters", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="perf-model sweep -> CSV")
    p.add_argument("--networks", default=",".join(sorted(set(nets.ZOO) - {"tinymalnet"})))
    p.add_argument("--precisions", default="4,8,16")
    p.add_argument("--clusters", type=int, default=256)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="render a comparison table from a bench CSV")
    p.add_argument("--input", required=True)

    for p in ap._subparsers._group_actions[0].choices.values():
        p.add_argument("--config", help="key=value file; entries override flags")

    return ap.parse_args(argv)


def _apply_config(args):
    if not getattr(args, "config", None):
        return args
    try:
        text = Path(args.config).read_text()
    except OSError as e:
        raise DataError(f"cannot read config: {e}") from e
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not hasattr(args, key):
            raise DataError(f"config key {key!r} is not a flag of {args.command}")
        current = getattr(args, key)
        if isinstance(current, int) and not isinstance(current, bool):
            value = int(value)
        setattr(args, key, value.strip() if isinstance(value, str) else value)
    return args


def _load_manifest(path):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise DataError(f"cannot read manifest: {e}") from e
    if not lines or lines[0] != "path,label,family,length,seed":
        raise DataError("manifest header mismatch")
    base = Path(path).parent
    samples = []
    for line in lines[1:]:
        p, label, family, _, _ = line.split(",")
        payload = (base / p).read_bytes() if not Path(p).is_absolute() else Path(p).read_bytes()
        samples.append(binviz.CorpusSample(payload=payload, label=label, family=family))
    return samples


def _inputs_labels(samples):
    X = [binviz.sample_to_input(s.payload) for s in samples]
    y = [int(s.label == "malware") for s in samples]
    return X, y


def _get_network(name):
    try:
        return nets.get_network(name)
    except KeyError as e:
        raise DataError(str(e.args[0])) from None


def cmd_convert(args) -> int:
    try:
        payload = Path(args.input).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read input: {e}") from e
    if not payload:
        raise DataError("input file is empty")
    img = binviz.bytes_to_image(payload)
    if args.resize:
        img = binviz.resize_to(img, args.resize)
    binviz.write_pgm(img, args.out)
    return 0


def cmd_corpus(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = binviz.generate_corpus(args.benign, args.malware, args.seed)
    paths = []
    for i, s in enumerate(samples):
        name = f"sample_{i:05d}.bin"
        (out / name).write_bytes(s.payload)
        paths.append(name)
    binviz.write_manifest(samples, paths, args.seed, out / "manifest.csv")
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def cmd_fit(args) -> int:
    net = _get_network(args.network)
    samples = _load_manifest(args.corpus)
    if not samples:
        raise DataError("corpus is empty")
    X, y = _inputs_labels(samples)
    ws = engine.init_random_weights(net, seed=args.seed)
    ws = engine.fit_last_layer(net, ws, X, y)
    save_weights(ws, args.out)
    m = engine.evaluate(net, ws, X, y)
    print(f"fit {args.network} on {len(y)} samples; train accuracy {m.accuracy:.3f}")
    return 0


def cmd_quantize(args) -> int:
    net = _get_network(args.network)
    try:
        ws = load_weights(args.weights)
    except (OSError, WeightFormatError) as e:
        raise DataError(str(e)) from e
    samples = _load_manifest(args.corpus)[: args.cal_count]
    X, _ = _inputs_labels(samples)
    qm = engine.prepare_quantized(net, ws, X, args.precision)
    out = WeightSet()
    for name, entry in ws.entries.items():
        out.add(name, entry.data, entry.params)
    for lname, ql in qm.layers.items():
        out.add(f"{lname}.qw", ql.qweight, ql.wparams)
        out.add(
            f"act/{lname}",
            np.zeros(0, dtype=np.int64),
            ql.act_params,
        )
    save_weights(out, args.out)
    print(f"quantized {len(qm.layers)} layers at {args.precision}-bit -> {args.out}")
    return 0


def _rebuild_qmodel(net, ws, bits):
    qm = engine.QuantizedModel(net=net, bits=bits)
    for layer in net.layers:
        if layer.kind not in ("conv2d", "depthwise_conv2d", "dense"):
            continue
        qw_name, act_name = f"{layer.name}.qw", f"act/{layer.name}"
        if qw_name not in ws or act_name not in ws:
            return None
        qw = ws[qw_name]
        if qw.params.bits != bits:
            raise DataError(
                f"weight container is {qw.params.bits}-bit; rerun quantize or pass --precision {qw.params.bits}"
            )
        qm.layers[layer.name] = engine.QuantizedLayer(
            name=layer.name,
            qweight=qw.data,
            wparams=qw.params,
            bias=np.asarray(ws[f"{layer.name}.b"].data, dtype=np.float64),
            act_params=ws[act_name].params,
        )
    return qm


def cmd_simulate(args) -> int:
    net = _get_network(args.network)
    cfg = SystemConfig(cluster_count=args.clusters, precision_bits=args.precision)
    if args.mode == "perf":
        report = perf.estimate(net, cfg, args.precision)
        print(perf.report_csv([report]), end="")
        for note in report.notes:
            print(f"note: {note}")
        return 0
    if not args.weights or not args.input:
        raise DataError("functional mode requires --weights and --input")
    try:
        ws = load_weights(args.weights)
    except (OSError, WeightFormatError) as e:
        raise DataError(str(e)) from e
    in_path = Path(args.input)
    try:
        if in_path.suffix == ".pgm":
            img = binviz.read_pgm(in_path)
            if (img.height, img.width) != net.input_shape[1:]:
                img = binviz.resize_to(img, net.input_shape[1])
            x = (img.pixels.astype(np.float64) / 255.0)[None, :, :]
        else:
            x = binviz.sample_to_input(in_path.read_bytes(), net.input_shape[1])
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read input: {e}") from e
    qm = _rebuild_qmodel(net, ws, args.precision)
    if qm is None:
        probs = engine.infer_float(net, ws, x)
        print(f"backend: float  class: {'malware' if probs.argmax() else 'benign'}")
        print("probabilities:", " ".join(f"{p:.6f}" for p in probs))
        return 0
    probs, ledger = engine.infer_lut(qm, x, cfg)
    s = ledger.summary()
    print(f"backend: lut-{args.precision}bit  class: {'malware' if probs.argmax() else 'benign'}")
    print("probabilities:", " ".join(f"{p:.6f}" for p in probs))
    print(f"mac_count: {ledger.mac_count}")
    print(f"latency_ns: {s['total_ns']!r}")
    print(f"energy_pj: {s['total_pj']!r}")
    return 0


def cmd_bench(args) -> int:
    names = [n for n in args.networks.split(",") if n]
    precisions = [int(p) for p in args.precisions.split(",") if p]
    unknown = [n for n in names if n not in nets.ZOO]
    if unknown:
        raise DataError(
            f"unknown networks: {', '.join(unknown)}; valid names: {', '.join(sorted(nets.ZOO))}"
        )
    cfg = SystemConfig(cluster_count=args.clusters)
    reports = [
        perf.estimate(nets.get_network(name), cfg, bits)
        for name in names
        for bits in precisions
    ]
    Path(args.out).write_text(perf.report_csv(reports))
    print(f"wrote {len(reports)} rows to {args.out}")
    return 0


def cmd_report(args) -> int:
    try:
        text = Path(args.input).read_text()
    except OSError as e:
        raise DataError(f"cannot read CSV: {e}") from e
    lines = text.strip().splitlines()
    if not lines or lines[0] != perf.CSV_HEADER:
        raise DataError("not a bench CSV (header mismatch)")
    width = max((len(l.split(",")[0]) for l in lines[1:]), default=8) + 2
    print(f"{'network':<{width}}{'bits':>5}{'fps':>16}{'frames/J':>16}")
    for line in lines[1:]:
        f = line.split(",")
        print(f"{f[0]:<{width}}{f[1]:>5}{float(f[5]):>16.4f}{float(f[7]):>16.4f}")
    for note in perf.PAPER_BASELINE_ANNOTATIONS:
        print(f"ref: {note}")
    return 0


COMMANDS = {
    "convert": cmd_convert,
    "corpus": cmd_corpus,
    "fit": cmd_fit,
    "quantize": cmd_quantize,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(args)
        return COMMANDS[args.command](args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
