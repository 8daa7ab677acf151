"""``sfrlab`` command line.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import imageio
from .arch import PRESET_IDS, TensorShape, build_preset, dump_graph, graph_to_dict, load_graph, lower_with_map
from .cost import graph_cost, rf_trace
from .errors import SfrlabError
from .executor import forward
from .kernels import argmax_channels
from .metrics import confusion_counts, iou
from .reference import TABLES, compute_reports, verify_against_reference
from .weights import init_weights, load_weights, save_weights, write_tensors

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3
THREADS_ENV = "SFRLAB_THREADS"


class UsageError(Exception):
    """Bad flag value detected after parsing."""


def _shape_arg(text: str) -> TensorShape:
    try:
        return TensorShape.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_arch(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", help="preset id (see `sfrlab presets`)")
    g.add_argument("--arch", type=Path, help="architecture JSON file")


def _graph(args):
    return load_graph(args.arch) if args.arch else build_preset(args.preset)


def _threads() -> int:
    n = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return n
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return min(n, cap)


def _table(rows, headers) -> str:
    cells = [headers] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for j, r in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if j and c[:1].isdigit() else c.ljust(w)
                               for c, w in zip(r, widths)).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_presets(args) -> int:
    if args.json:
        print(json.dumps(list(PRESET_IDS)))
    else:
        print("\n".join(PRESET_IDS))
    return EXIT_OK


def cmd_analyze(args) -> int:
    report = graph_cost(_graph(args), args.input)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
        return EXIT_OK
    d = report.to_dict()
    rows = [(l["id"], l["op"], "x".join(map(str, l["out_shape"])), f"{l['flops']:,}", f"{l['params']:,}")
            for l in d["layers"]]
    print(f"{d['preset']} @ {report.input_shape}")
    print(_table(rows, ["layer", "op", "out", "flops", "params"]))
    print()
    print(f"total flops           {d['total_flops']:,}")
    print(f"total params          {d['total_params']:,}")
    print(f"receptive field       {d['receptive_field']}")
    print(f"feature stride        {d['feature_stride']}")
    print(f"activation peak bytes {d['activation_peak_bytes']:,}")
    return EXIT_OK


def cmd_rf(args) -> int:
    trace = rf_trace(_graph(args))
    if args.json:
        print(json.dumps([{**t, "feature_stride": str(t["feature_stride"])} for t in trace], indent=2))
        return EXIT_OK
    print(_table([(t["id"], t["op"], t["feature_stride"], t["rf"]) for t in trace],
                 ["layer", "op", "feature_stride", "rf"]))
    print(f"\nreceptive field {trace[-1]['rf']} at {trace[-1]['id']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    table = TABLES[args.table]
    diff = verify_against_reference(compute_reports(table), table)
    if args.json:
        print(json.dumps(diff.to_dict(), indent=2))
    else:
        rows = []
        for r in diff.rows:
            derived = f"{r.expected:,}" if r.expected is not None else ""
            rows.append((r.name, r.metric, f"{r.computed:,}", r.printed, derived, f"{r.rel:+.2%}", r.status))
        print(_table(rows, ["row", "metric", "computed", "printed", "derived", "rel", "status"]))
        notes = [(r.name, r.note) for r in diff.rows if r.status != "pass" and r.note]
        for name, note in dict.fromkeys(notes):
            print(f"  note [{name}]: {note}")
        c = diff.counts()
        print(f"\n{table.table_id}: {c['pass']} pass, {c['flagged']} flagged, {c['fail']} fail")
    return EXIT_OK if diff.ok else EXIT_VERIFY


def cmd_lower(args) -> int:
    lowered, _ = lower_with_map(_graph(args))
    if args.out:
        dump_graph(lowered, args.out)
    else:
        print(json.dumps(graph_to_dict(lowered), indent=2))
    return EXIT_OK


def cmd_init_weights(args) -> int:
    lowered, _ = lower_with_map(_graph(args))
    store = init_weights(lowered, args.seed)
    save_weights(store, args.out)
    print(f"wrote {store.param_count():,} parameters to {args.out}")
    return EXIT_OK


def cmd_infer(args) -> int:
    threads = _threads()
    lowered, exits = lower_with_map(_graph(args))
    rgb = imageio.read_rgb(args.image)
    h, w = rgb.shape[:2]
    if h % 8 or w % 8:
        raise ValueError(
            f"image is {h}x{w}; height and width must be divisible by 8 "
            "(three stride-2 stages). Pad or crop the image first."
        )
    weights = load_weights(args.weights, lowered)
    taps = [exits.get(t, t) for t in args.tap]
    out, trace, tapped = forward(lowered, weights, imageio.to_network_input(rgb), taps, threads=threads)
    mask = argmax_channels(out)
    imageio.write_mask(mask, args.out)
    print(f"wrote {w}x{h} mask to {args.out} (output checksum {trace.records[-1].checksum})")
    if tapped:
        tap_path = Path(args.out).with_suffix(".taps.sfrw")
        write_tensors({f"{name}.output": arr for name, arr in tapped.items()}, tap_path)
        print(f"wrote {len(tapped)} tapped tensors to {tap_path}")
    return EXIT_OK


def cmd_iou(args) -> int:
    pred, gt = imageio.read_mask(args.pred), imageio.read_mask(args.gt)
    if pred.shape != gt.shape:
        raise ValueError(f"mask sizes differ: pred {pred.shape[1]}x{pred.shape[0]}, "
                         f"gt {gt.shape[1]}x{gt.shape[0]}")
    c = confusion_counts(pred, gt)
    score = iou(c)
    if args.json:
        print(json.dumps({"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn, "iou": round(score, 4)}))
    else:
        print(f"tp={c.tp} fp={c.fp} fn={c.fn} tn={c.tn}")
        print(f"IoU {score:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfrlab", description="ESFNet cost model and reference executor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("presets", help="list preset ids")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("analyze", help="FLOPs, params, receptive field and peak memory")
    _add_arch(p)
    p.add_argument("--input", type=_shape_arg, help="input size HxWxC (default: the graph's own)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--json", action="store_true", help="emit the JSON cost report")
    mode.add_argument("--table", action="store_true", help="aligned text table (default)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("rf", help="per-layer receptive-field trace to the encoder end")
    _add_arch(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_rf)

    p = sub.add_parser("verify", help="diff computed costs against a published table")
    p.add_argument("--table", required=True, choices=sorted(TABLES))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("lower", help="write the primitive-layer JSON")
    _add_arch(p)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("init-weights", help="write seeded weights in SFRW format")
    _add_arch(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("infer", help="segment an 8-bit RGB image")
    _add_arch(p)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="mask path (.png or .pgm)")
    p.add_argument("--tap", nargs="+", action="extend", default=[], metavar="NODE",
                   help="also dump these nodes' outputs to <out>.taps.sfrw")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("iou", help="score a predicted mask against ground truth")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_iou)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sfrlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SfrlabError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"sfrlab: {msg}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
