"""Command-line surface.

Commands:
  compose   warp and blend a scene JSON into a composite PNG
  warp      apply a warp parameter file to one PNG
  filter    run the guided filter on a guide/input PNG pair
  demo      seeded recovery and sweep procedures with JSON reports

Exit codes: 0 success, 2 invalid input, 3 I/O failure. Commands never
mutate their input files.
"""

from __future__ import annotations

import argparse
import json
import sys

from .guidedfilter import FilterConfig, guided_filter
from .imagecore import decode_image, encode_image, mask_to_image
from .recovery import (
    filter_sweep,
    generate_scene,
    hierarchy_gradcheck,
    recover_hierarchy,
    recover_warp,
)
from .scene import compose_scene, load_scene_file
from .warp import warp_from_dict, warp_image

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3

_DEFAULT_SWEEP_EPS = "1e-7,1e-4,1e-2,1"


def _read_png(path: str):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path!r}: {exc}") from exc
    return decode_image(data)


def _write_png(path: str, img) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(encode_image(img))
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc}") from exc


def _write_report(doc: dict, path) -> None:
    text = json.dumps(doc, indent=2)
    if path is None:
        print(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc}") from exc


def _cmd_compose(args) -> int:
    spec = load_scene_file(args.scene)
    composite = compose_scene(spec)
    _write_png(args.output, composite.image)
    if args.emit_mask:
        _write_png(args.emit_mask, mask_to_image(composite.combined_mask))
    if args.filter:
        appearance = _read_png(args.filter)
        cfg = FilterConfig(radius=args.radius, eps=args.eps)
        filtered = guided_filter(composite.image, appearance, cfg)
        _write_png(args.filter_output or args.output, filtered)
    return EXIT_OK


def _cmd_warp(args) -> int:
    img = _read_png(args.input)
    try:
        with open(args.params, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {args.params!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"malformed warp JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    params = warp_from_dict(doc)
    _write_png(args.output, warp_image(img, params, args.out_size))
    return EXIT_OK


def _cmd_filter(args) -> int:
    guide = _read_png(args.guide)
    inp = _read_png(args.input)
    cfg = FilterConfig(radius=args.radius, eps=args.eps)
    _write_png(args.output, guided_filter(guide, inp, cfg))
    return EXIT_OK


def _cmd_demo(args) -> int:
    if args.procedure == "hierarchy":
        scene = generate_scene(args.seed, args.m, args.size)
        report = recover_hierarchy(scene, steps=args.steps, lr=args.lr)
        doc = report.to_json_dict()
        doc["gt_order_index"] = scene.gt_order_index
        doc["recovered"] = report.recovered_order_index == scene.gt_order_index
        print(
            f"hierarchy recovery: gt order {scene.gt_order_index}, "
            f"recovered {report.recovered_order_index}"
        )
    elif args.procedure == "warp-recovery":
        scene = generate_scene(args.seed, args.m, args.size)
        report = recover_warp(scene, steps=args.steps, lr=args.lr)
        doc = report.to_json_dict()
        print(f"warp recovery: max translation error {report.warp_error:.5f}")
    elif args.procedure == "gradcheck":
        scene = generate_scene(args.seed, args.m, args.size)
        doc = hierarchy_gradcheck(scene)
        print(f"gradcheck: max relative discrepancy {doc['max_rel_diff']:.3g}")
    else:  # filter-sweep
        eps_values = [float(tok) for tok in args.eps.split(",") if tok]
        if not eps_values:
            raise ValueError("--eps must list at least one value")
        rows = filter_sweep(
            eps_values, seed=args.seed, size=args.size, radius=args.radius
        )
        doc = {"radius": args.radius, "sweep": rows}
        for row in rows:
            print(f"eps {row['eps']:.1e}: output variance {row['variance']:.6f}")
    _write_report(doc, args.report)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layercomp",
        description="Multi-object image compositing with occlusion-order "
        "hierarchy blending.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    compose = sub.add_parser("compose", help="compose a scene JSON into a PNG")
    compose.add_argument("--scene", required=True, help="scene JSON document")
    compose.add_argument("--output", required=True, help="composite PNG path")
    compose.add_argument(
        "--emit-mask", metavar="PATH", help="also write the combined mask PNG"
    )
    compose.add_argument(
        "--filter",
        metavar="APPEARANCE_PNG",
        help="guided-filter this appearance image using the composite as guide",
    )
    compose.add_argument(
        "--filter-output",
        metavar="PATH",
        help="destination for the filtered image (defaults to --output)",
    )
    compose.add_argument("--radius", type=int, default=16)
    compose.add_argument("--eps", type=float, default=1e-7)
    compose.set_defaults(run=_cmd_compose)

    warp = sub.add_parser("warp", help="apply a warp to one PNG")
    warp.add_argument("--input", required=True)
    warp.add_argument("--params", required=True, help="warp parameter JSON file")
    warp.add_argument("--output", required=True)
    warp.add_argument(
        "--out-size", type=int, default=None, help="square output size in pixels"
    )
    warp.set_defaults(run=_cmd_warp)

    filt = sub.add_parser("filter", help="guided-filter an input PNG")
    filt.add_argument("--guide", required=True)
    filt.add_argument("--input", required=True)
    filt.add_argument("--output", required=True)
    filt.add_argument("--radius", type=int, default=16)
    filt.add_argument("--eps", type=float, default=1e-7)
    filt.set_defaults(run=_cmd_filter)

    demo = sub.add_parser("demo", help="seeded recovery and sweep procedures")
    demo.add_argument(
        "procedure",
        choices=["hierarchy", "warp-recovery", "gradcheck", "filter-sweep"],
    )
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--m", type=int, default=3, help="foreground count")
    demo.add_argument("--size", type=int, default=64, help="scene size in pixels")
    demo.add_argument("--steps", type=int, default=500)
    demo.add_argument("--lr", type=float, default=0.5)
    demo.add_argument("--radius", type=int, default=16)
    demo.add_argument(
        "--eps", default=_DEFAULT_SWEEP_EPS, help="comma-separated eps values"
    )
    demo.add_argument("--report", help="write the JSON report here")
    demo.set_defaults(run=_cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    try:
        return args.run(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
