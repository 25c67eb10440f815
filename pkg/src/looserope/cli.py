"""Command-line interface.

Exit status: 0 success, 1 validation error, 2 I/O (or oracle transport)
error, 3 steering finished without a success verdict. Errors go to stderr
as ``ERROR:<code>:<message>``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .attention import (
    AttentionConfig,
    AttentionInputs,
    baseline_attention,
    inward_outward_ratio,
    modulated_attention,
    modulated_attention_naive,
)
from .config import PipelineConfig, parse_override
from .errors import IoError, LooseRopeError, OracleTransportError, ValidationError
from .formats import read_map, read_mask, read_tnsr, to_gray8, write_pfm, write_pgm, write_tnsr
from .modulation import schedule_params
from .numerics import row_entropy
from .pipeline import load_feature_stack, render_attention_map, run_pipeline, steer_pipeline, write_outputs
from .rope import PositionGrid
from .saliency import (
    RegionMasks,
    SaliencyMap,
    aggregate_saliency,
    finalize_saliency,
    quantize_saliency,
    rescale_saliency,
    synth_features,
)
from .steering import oracle_from_spec

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_UNRESOLVED = 0, 1, 2, 3


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    overrides = dict(parse_override(s) for s in args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return cfg.with_overrides(overrides) if overrides else cfg


def _write_map(path, values):
    if str(path).lower().endswith(".pgm"):
        write_pgm(path, to_gray8(values))
    elif str(path).lower().endswith(".pfm"):
        write_pfm(path, values)
    else:
        write_tnsr(path, values)


def cmd_saliency_synth(args) -> int:
    stack = synth_features(args.pattern, args.seed, args.height, args.width,
                           args.channels, args.layers)
    write_tnsr(args.out, np.stack(stack.layers))
    return EXIT_OK


def cmd_saliency_compute(args) -> int:
    cfg = load_config(args)
    crop = read_mask(args.crop_mask)
    holes = read_mask(args.hole_mask) if args.hole_mask else None
    masks = RegionMasks(crop, holes)
    h, w = masks.shape
    raw = aggregate_saliency(load_feature_stack(args.features), h, w)
    s = finalize_saliency(raw, masks, cfg.blur_size, cfg.blur_sigma)
    if cfg.quant_levels:
        s = quantize_saliency(s, cfg.quant_levels)
    if args.scale is not None:
        s = rescale_saliency(s, args.scale)
    _write_map(args.out, s.values)
    return EXIT_OK


def _attention_inputs(args, cfg: PipelineConfig) -> AttentionInputs:
    crop = read_mask(args.crop_mask)
    h, w = crop.shape
    saliency = SaliencyMap(read_map(args.saliency), cfg.quant_levels) if args.saliency else None
    return AttentionInputs(
        read_tnsr(args.q_out), read_tnsr(args.k_out), read_tnsr(args.v_out),
        read_tnsr(args.k_in), read_tnsr(args.v_in),
        PositionGrid(h, w), PositionGrid(h, w, cfg.block_offset), crop, saliency,
        theta_base=cfg.theta_base)


def cmd_attend(args) -> int:
    cfg = load_config(args)
    inputs = _attention_inputs(args, cfg)
    r_curve, k_curve, active = schedule_params(cfg.schedule(), args.timestep)
    config = AttentionConfig(r_curve, k_curve, True)
    mode = args.mode
    if mode == "auto":
        mode = "modulated" if active else "baseline"
    if mode == "baseline":
        out = baseline_attention(inputs)
    elif mode == "naive":
        out = modulated_attention_naive(inputs, config)
    else:
        out = modulated_attention(inputs, config)
    write_tnsr(args.out, out.context)
    if args.weights_out:
        write_tnsr(args.weights_out, out.weights)
    print(json.dumps({"mode": mode, "k_in_rotations": out.k_in_rotations}))
    return EXIT_OK


def _print_digests(digests):
    for name, digest in sorted(digests.items()):
        print(f"{digest}  {name}")


def cmd_run(args) -> int:
    cfg = load_config(args)
    out_dir = args.out or cfg.output_dir
    result = run_pipeline(cfg)
    if out_dir:
        _print_digests(write_outputs(result, out_dir))
    else:
        for rec in result.diagnostics:
            print(json.dumps(rec, sort_keys=True))
    return EXIT_OK


def cmd_steer(args) -> int:
    cfg = load_config(args)
    out_dir = Path(args.out or cfg.output_dir or ".")
    oracle = oracle_from_spec(args.oracle)
    outcome = steer_pipeline(cfg, oracle, snapshot_dir=out_dir / "snapshots")
    outcome.trace.write_jsonl(out_dir / "trace.jsonl")
    _print_digests(write_outputs(outcome.result, out_dir))
    for a in outcome.trace.attempts:
        print(f"attempt {a.attempt}: lambda={a.lam} verdict={a.verdict}")
    if not outcome.resolved:
        print("steering unresolved after max_tries attempts", file=sys.stderr)
        return EXIT_UNRESOLVED
    return EXIT_OK


def _input_block(weights, n_keys):
    """Rows over K_in; joint [K_out ; K_in] rows are cut and renormalized."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[-1] == 2 * n_keys:
        w = w[..., n_keys:]
        w = w / w.sum(axis=-1, keepdims=True)
    return w


def cmd_diagnose_ratio(args) -> int:
    mask = read_mask(args.mask).ravel()
    w = _input_block(read_tnsr(args.weights), mask.size)
    subset = None
    if args.queries == "crop":
        if w.shape[-2] != mask.size:
            raise ValidationError("--queries crop needs one weight row per grid token")
        subset = mask
    print(repr(inward_outward_ratio(w, mask, subset)))
    return EXIT_OK


def cmd_diagnose_entropy(args) -> int:
    w = np.asarray(read_tnsr(args.weights), dtype=np.float64)
    ent = row_entropy(w.reshape(-1, w.shape[-1]))
    if args.per_row:
        for v in ent:
            print(repr(float(v)))
    else:
        print(repr(float(ent.mean())))
    return EXIT_OK


def cmd_render(args) -> int:
    render_attention_map(read_tnsr(args.weights), args.query, args.height, args.width, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field (value parsed as JSON when possible)")

    p = argparse.ArgumentParser(prog="looserope", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sal = sub.add_parser("saliency", help="build saliency maps").add_subparsers(dest="action", required=True)
    s = sal.add_parser("synth", help="write a synthetic feature stack")
    s.add_argument("--pattern", choices=["blobs", "checker", "ramp"], default="blobs")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--height", type=int, default=8)
    s.add_argument("--width", type=int, default=8)
    s.add_argument("--channels", type=int, default=3)
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_saliency_synth)

    s = sal.add_parser("compute", parents=[common], help="features + masks -> saliency map")
    s.add_argument("--features", nargs="+", required=True, help="TNSR layers (C,H,W) or stacks (L,C,H,W)")
    s.add_argument("--crop-mask", required=True)
    s.add_argument("--hole-mask")
    s.add_argument("--scale", type=float, help="apply clip(scale * S, 0, 1)")
    s.add_argument("--out", required=True, help=".pfm, .pgm or .tnsr")
    s.set_defaults(func=cmd_saliency_compute)

    s = sub.add_parser("attend", parents=[common], help="one attention call on stored tensors")
    for name in ("q-out", "k-out", "v-out", "k-in", "v-in"):
        s.add_argument(f"--{name}", required=True)
    s.add_argument("--crop-mask", required=True)
    s.add_argument("--saliency")
    s.add_argument("--timestep", type=int, default=0)
    s.add_argument("--mode", choices=["auto", "baseline", "modulated", "naive"], default="auto")
    s.add_argument("--out", required=True)
    s.add_argument("--weights-out")
    s.set_defaults(func=cmd_attend)

    for name, func, hlp in (("run", cmd_run, "full toy pipeline"),
                            ("steer", cmd_steer, "pipeline under the steering loop")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="output directory")
        if name == "steer":
            s.add_argument("--oracle", default="command",
                           help="script:v1,v2,... | threshold[:lo,hi] | command[:cmd]")
        s.set_defaults(func=func)

    diag = sub.add_parser("diagnose", help="attention diagnostics").add_subparsers(dest="action", required=True)
    s = diag.add_parser("ratio", help="inward-outward attention ratio")
    s.add_argument("--weights", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--queries", choices=["crop", "all"], default="all")
    s.set_defaults(func=cmd_diagnose_ratio)
    s = diag.add_parser("entropy", help="row entropy of attention weights")
    s.add_argument("--weights", required=True)
    s.add_argument("--per-row", action="store_true")
    s.set_defaults(func=cmd_diagnose_entropy)

    s = sub.add_parser("render", help="render one query's attention map as PGM")
    s.add_argument("--weights", required=True)
    s.add_argument("--query", type=int, required=True)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except (IoError, OracleTransportError) as e:
        print(f"ERROR:{e.code}:{e}", file=sys.stderr)
        return EXIT_IO
    except LooseRopeError as e:
        print(f"ERROR:{e.code}:{e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"ERROR:IoError:{e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
