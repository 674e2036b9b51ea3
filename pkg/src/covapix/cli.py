"""covapix command line: segment, extract, fuse, render, stats.

Exit codes: 0 success, 1 runtime failure (bad file contents, missing region,
I/O trouble), 2 usage error (unknown flag, missing or inconsistent options).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import covapixel, fusion, imaging, segmentation
from .errors import CovapixError, MissingRegion


def _parse_tile(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}")
    try:
        tile = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    return tile


def _parse_ids(text: str) -> list[int]:
    try:
        ids = [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ids, got {text!r}") from None
    if len(ids) < 2:
        raise argparse.ArgumentTypeError("need at least two ids to fuse")
    if len(set(ids)) != len(ids):
        raise argparse.ArgumentTypeError("duplicate ids in fuse list")
    return ids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covapix",
        description="Summarize images as covapixels: segment, extract, fuse, render, stats.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_seg = sub.add_parser("segment", help="segment a PPM image into regions",
                           allow_abbrev=False)
    p_seg.add_argument("--input", required=True, help="input PPM (P6) image")
    p_seg.add_argument("--method", required=True, choices=("slic", "grid"))
    p_seg.add_argument("--k", type=int, help="target region count (slic)")
    p_seg.add_argument("--tile", type=_parse_tile, help="tile size WIDTHxHEIGHT (grid)")
    p_seg.add_argument("--compactness", type=float, default=10.0,
                       help="slic spatial weight (default 10)")
    p_seg.add_argument("--iters", type=int, default=10,
                       help="slic assignment/update rounds (default 10)")
    p_seg.add_argument("--labels-out", required=True, help="output label map file")

    p_ext = sub.add_parser("extract", help="extract covapixels from a segmented image",
                           allow_abbrev=False)
    p_ext.add_argument("--input", required=True, help="input PPM (P6) image")
    p_ext.add_argument("--labels", required=True, help="label map file")
    p_ext.add_argument("--features", default="xy_lab", choices=("xy", "xy_rgb", "xy_lab"),
                       help="feature layout (default xy_lab)")
    p_ext.add_argument("--eps", type=float, default=1e-8,
                       help="diagonal regularization added at extraction (default 1e-8)")
    p_ext.add_argument("--out", required=True, help="output covapix file")

    p_fuse = sub.add_parser("fuse", help="fuse covapixels inside a covapix file",
                            allow_abbrev=False)
    p_fuse.add_argument("--ids", required=True, type=_parse_ids,
                        help="comma-separated covapixel ids to fold together")
    p_fuse.add_argument("--op", default="ci", choices=("kf", "ci", "cu", "ca"),
                        help="fusion operator (default ci)")
    p_fuse.add_argument("--objective", default="logdet", choices=("logdet", "trace"),
                        help="size objective for ci and cu (default logdet)")
    p_fuse.add_argument("--in", dest="infile", required=True, help="input covapix file")
    p_fuse.add_argument("--out", required=True, help="output covapix file")

    p_ren = sub.add_parser("render", help="render covapixels back into a PPM image",
                           allow_abbrev=False)
    p_ren.add_argument("--in", dest="infile", required=True, help="input covapix file")
    p_ren.add_argument("--mode", required=True, choices=("flat", "ellipse", "boundary"))
    p_ren.add_argument("--labels", help="label map file (flat and boundary modes)")
    p_ren.add_argument("--nsigma", type=float, default=2.0,
                       help="ellipse radius in standard deviations (default 2)")
    p_ren.add_argument("--out", required=True, help="output PPM image")

    p_st = sub.add_parser("stats", help="print a reconstruction quality report line",
                          allow_abbrev=False)
    p_st.add_argument("--original", required=True, help="original PPM image")
    p_st.add_argument("--recon", required=True, help="reconstructed PPM image")
    p_st.add_argument("--labels", required=True, help="label map file")
    p_st.add_argument("--figure", help="also save a matplotlib report figure here")

    return parser


def _read_image(path: str) -> imaging.ImageBuffer:
    return imaging.read_ppm(Path(path).read_bytes())


def _read_labels(path: str) -> segmentation.LabelMap:
    return segmentation.label_map_from_bytes(Path(path).read_bytes())


def _read_covapix(path: str) -> covapixel.CovapixelSet:
    return covapixel.covapix_loads(Path(path).read_text(encoding="utf-8"))


def _cmd_segment(args) -> int:
    image = _read_image(args.input)
    if args.method == "grid":
        if args.tile is None:
            raise _Usage("--method grid requires --tile")
        labels = segmentation.grid_segment(image.width, image.height, *args.tile)
    else:
        if args.k is None:
            raise _Usage("--method slic requires --k")
        params = segmentation.SlicParams(args.k, args.compactness, args.iters)
        labels = segmentation.slic_segment(imaging.rgb_to_lab(image), params)
    Path(args.labels_out).write_bytes(segmentation.label_map_to_bytes(labels))
    print(f"region_count {labels.region_count}")
    return 0


def _cmd_extract(args) -> int:
    image = _read_image(args.input)
    labels = _read_labels(args.labels)
    fs = covapixel.FeatureSpace(args.features)
    if fs.color_space == "lab":
        image = imaging.rgb_to_lab(image)
    covas = covapixel.extract_covapixels(image, labels, fs, args.eps)
    doc = covapixel.CovapixelSet(fs, args.eps, labels.width, labels.height, tuple(covas))
    Path(args.out).write_text(covapixel.covapix_dumps(doc), encoding="utf-8")
    print(f"covapixels {len(covas)}")
    return 0


def _cmd_fuse(args) -> int:
    doc = _read_covapix(args.infile)
    by_id = doc.by_id()
    missing = [i for i in args.ids if i not in by_id]
    if missing:
        raise MissingRegion(f"ids not in document: {', '.join(map(str, missing))}")
    picked = [by_id[i] for i in args.ids]
    result = fusion.fuse_reduce([c.est for c in picked], args.op, args.objective)
    fused = covapixel.Covapixel(min(args.ids), sum(c.n for c in picked),
                                result.estimate, doc.feature_space)
    kept = [c for c in doc.covapixels if c.id not in set(args.ids)]
    out = covapixel.CovapixelSet(doc.feature_space, doc.eps, doc.width, doc.height,
                                 tuple(sorted(kept + [fused], key=lambda c: c.id)))
    Path(args.out).write_text(covapixel.covapix_dumps(out), encoding="utf-8")
    print(f"aux {result.aux}")
    return 0


def _cmd_render(args) -> int:
    doc = _read_covapix(args.infile)
    covas = list(doc.covapixels)
    labels = _read_labels(args.labels) if args.labels is not None else None
    if args.mode == "flat":
        if labels is None:
            raise _Usage("--mode flat requires --labels")
        image = imaging.render_flat(labels, covas)
    elif args.mode == "boundary":
        if labels is None:
            raise _Usage("--mode boundary requires --labels")
        image = imaging.overlay_boundaries(imaging.render_flat(labels, covas), labels)
    else:
        background = "flat" if labels is not None else "black"
        image = imaging.render_ellipses(covas, doc.width, doc.height,
                                        nsigma=args.nsigma, background=background,
                                        labels=labels)
    Path(args.out).write_bytes(imaging.write_ppm(image))
    return 0


def _cmd_stats(args) -> int:
    original = _read_image(args.original)
    recon = _read_image(args.recon)
    labels = _read_labels(args.labels)
    report = imaging.quality_stats(original, recon, labels)
    print(report.as_line())
    if args.figure is not None:
        from .report import save_quality_figure

        save_quality_figure(args.figure, original, recon, labels, report)
    return 0


class _Usage(Exception):
    """Flag combination error detected after argparse."""


_COMMANDS = {
    "segment": _cmd_segment,
    "extract": _cmd_extract,
    "fuse": _cmd_fuse,
    "render": _cmd_render,
    "stats": _cmd_stats,
}


def run(argv: list[str] | None = None) -> int:
    """Entry point returning the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _Usage as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CovapixError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
