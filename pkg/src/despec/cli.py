"""Command line interface.

Subcommands: remove (separate an image), synth (render a test scene),
eval (score results against ground truth), bench (timing runs).
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from . import __version__, imgio, metrics, pipeline, synth
from .errors import DespecError

EXIT_CODES_HELP = """\
exit codes:
  0  success
  1  unexpected internal error
  2  usage error (bad arguments or unusable input data)
  3  file I/O error (unsupported format, corrupt header, truncated data)
  4  scene or configuration error
  5  processing error (too few usable pixels, degenerate colors, ...)
  6  evaluation input mismatch
"""


def _add_pipeline_flags(sp: argparse.ArgumentParser) -> None:
    grp = sp.add_argument_group("pipeline options")
    grp.add_argument("--config", metavar="FILE",
                     help="key=value config file; explicit flags override it")
    grp.add_argument("--illum", metavar="SPEC",
                     help="illumination: 'white', 'r,g,b', or 'divide:r,g,b'")
    grp.add_argument("--initial-k", type=int, metavar="K",
                     help="starting cluster count (default 1)")
    grp.add_argument("--tau-dev", type=float, metavar="T",
                     help="per-pixel unit-circle deviation threshold (default 0.1)")
    grp.add_argument("--tau-frac", type=float, metavar="F",
                     help="failing fraction that splits a cluster (default 0.1)")
    grp.add_argument("--min-cluster-size", metavar="N",
                     help="size floor for clusters, or 'auto'")
    grp.add_argument("--seed", type=int, metavar="S",
                     help="clustering seed (default 0)")
    grp.add_argument("--max-iterations", type=int, metavar="N",
                     help="adaptive iteration cap (default 10)")
    grp.add_argument("--bin-width", type=float, metavar="W",
                     help="coefficient histogram bin width (default 0.005)")
    grp.add_argument("--peak-floor", type=int, metavar="N",
                     help="absolute histogram peak floor (default 5)")
    grp.add_argument("--fast", action="store_true", default=None,
                     help="estimate clusters/models on a downsampled copy")
    grp.add_argument("--target-edge", type=int, metavar="PX",
                     help="long-edge target for --fast (default 200)")
    grp.add_argument("--threads", type=int, metavar="N",
                     help="worker cap; 0 = all cores (default; DESPEC_THREADS honored)")


def _config_from_args(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig()
    if args.config:
        cfg = pipeline.load_config(args.config, cfg)
    overrides = {}
    if args.illum is not None:
        overrides["illum"] = args.illum
    if args.initial_k is not None:
        overrides["initial_k"] = str(args.initial_k)
    if args.tau_dev is not None:
        overrides["tau_dev"] = repr(args.tau_dev)
    if args.tau_frac is not None:
        overrides["tau_frac"] = repr(args.tau_frac)
    if args.min_cluster_size is not None:
        overrides["min_cluster_size"] = args.min_cluster_size
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.max_iterations is not None:
        overrides["max_iterations"] = str(args.max_iterations)
    if args.bin_width is not None:
        overrides["bin_width"] = repr(args.bin_width)
    if args.peak_floor is not None:
        overrides["peak_floor"] = str(args.peak_floor)
    if args.fast is not None:
        overrides["fast"] = "on"
    if args.target_edge is not None:
        overrides["target_edge"] = str(args.target_edge)
    if args.threads is not None:
        overrides["threads"] = str(args.threads)
    return pipeline.config_from_values(overrides, cfg)


def cmd_remove(args) -> int:
    img = imgio.load(args.input)
    if args.gamma_decode:
        img = np.power(img, 2.2)  # lossy convenience path for gamma-encoded input
    cfg = _config_from_args(args)
    result, diag = pipeline.run(img, cfg)
    clipped = imgio.save(result.diffuse, args.diffuse)
    clipped += imgio.save(result.specular, args.specular)
    if args.labels:
        imgio.save_labels(diag.labels, args.labels)
    for line in diag.to_lines():
        print(line)
    if clipped:
        print(f"clipped_samples = {clipped}", file=sys.stderr)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write("\n".join(diag.to_lines()) + "\n")
    return 0


def cmd_synth(args) -> int:
    if args.scene.endswith(".txt") or "/" in args.scene:
        params = synth.load_scene(args.scene)
    else:
        params = synth.builtin_params(args.scene)
    if args.width:
        params.width = args.width
    if args.height:
        params.height = args.height
    gt = synth.render(synth.build_scene(params))
    noisy = synth.add_noise(gt, args.sigma, seed=args.seed)

    out = args.output
    import os
    os.makedirs(out, exist_ok=True)
    fmt = args.format
    ext = "pfm" if fmt == "pfm" else "ppm"
    imgio.save(noisy, os.path.join(out, f"input.{ext}"), fmt)
    imgio.save(gt.diffuse, os.path.join(out, f"diffuse.{ext}"), fmt)
    imgio.save(gt.specular, os.path.join(out, f"specular.{ext}"), fmt)
    imgio.save_labels(gt.labels, os.path.join(out, "labels.ppm"))
    synth.save_scene(params, os.path.join(out, "scene.txt"))
    print(f"wrote scene {params.name} ({params.width}x{params.height}, "
          f"sigma={args.sigma:g}) to {out}")
    return 0


def cmd_eval(args) -> int:
    report = metrics.EvalReport()
    if args.diffuse and args.truth_diffuse:
        report.psnr_diffuse = metrics.psnr(imgio.load(args.diffuse),
                                           imgio.load(args.truth_diffuse))
    if args.specular and args.truth_specular:
        report.psnr_specular = metrics.psnr(imgio.load(args.specular),
                                            imgio.load(args.truth_specular))
    if args.labels and args.truth_labels:
        report.cluster_accuracy = metrics.cluster_accuracy(
            imgio.load_labels(args.labels), imgio.load_labels(args.truth_labels)
        )
    lines = report.to_lines()
    if not lines:
        print("nothing to evaluate; pass result/truth pairs", file=sys.stderr)
        return 2
    for line in lines:
        print(line)
    if args.record:
        metrics.write_report(report, args.record)
    return 0


def cmd_bench(args) -> int:
    if args.scene:
        gt = synth.render(synth.builtin_scene(args.scene, args.width, args.height))
        img = synth.add_noise(gt, args.sigma, seed=args.seed or 0)
    else:
        img = imgio.load(args.input)
    cfg = _config_from_args(args)
    times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        pipeline.run(img, cfg)
        times.append(time.perf_counter() - t0)
    print(f"runs = {len(times)}")
    print(f"median_seconds = {statistics.median(times):.6f}")
    print(f"min_seconds = {min(times):.6f}")
    print(f"max_seconds = {max(times):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="despec",
        description="Separate specular highlights from a single linear-light image.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("remove", help="split an image into diffuse + specular")
    sp.add_argument("input", help="input image (PPM P6 or PFM)")
    sp.add_argument("-d", "--diffuse", required=True, help="output diffuse image")
    sp.add_argument("-s", "--specular", required=True, help="output specular image")
    sp.add_argument("-l", "--labels", help="output cluster label map (8-bit PPM)")
    sp.add_argument("--report", metavar="FILE", help="write diagnostics key=value file")
    sp.add_argument("--gamma-decode", action="store_true",
                    help="apply a 2.2 power before processing (lossy; for "
                         "gamma-encoded inputs)")
    _add_pipeline_flags(sp)
    sp.set_defaults(func=cmd_remove)

    sp = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    sp.add_argument("scene", help=f"builtin name ({', '.join(synth.BUILTIN_SCENES)}) "
                                  "or a scene description file")
    sp.add_argument("-o", "--output", required=True, help="output directory")
    sp.add_argument("--width", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--sigma", type=float, default=0.0,
                    help="Gaussian noise level in 8-bit counts (default 0)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("pfm", "ppm16", "ppm8"), default="pfm")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("eval", help="score results against ground truth")
    sp.add_argument("--diffuse", help="recovered diffuse image")
    sp.add_argument("--truth-diffuse", help="ground-truth diffuse image")
    sp.add_argument("--specular", help="recovered specular image")
    sp.add_argument("--truth-specular", help="ground-truth specular image")
    sp.add_argument("--labels", help="predicted label map")
    sp.add_argument("--truth-labels", help="ground-truth label map")
    sp.add_argument("--record", metavar="FILE", help="also write a key=value record")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="repeat timing runs, report the median")
    sp.add_argument("input", nargs="?", help="input image; or use --scene")
    sp.add_argument("--scene", help="builtin scene to render and time")
    sp.add_argument("--width", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--repeats", type=int, default=5)
    _add_pipeline_flags(sp)
    sp.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and not args.input and not args.scene:
        parser.error("bench needs an input image or --scene")
    try:
        return args.func(args)
    except DespecError as exc:
        print(f"despec: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"despec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
