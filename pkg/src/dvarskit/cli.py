"""Command-line interface.

Exit status: 0 success, 1 error, 2 success with at least one flagged frame.
Reports go to ``--output`` (stdout for ``-``); messages go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .errors import DvarsError, InvalidInputError
from .pipeline import compute_report
from .qc import DEFAULT_POLICY, FlagPolicy
from .report import write_report
from .selftest import run_selftest
from .simulate import parse_spec, simulate_ar1_volume
from .volume import DEFAULT_MASK_STRATEGY, parse_mask_strategy
from .volume_io import load_mask, load_volume, save_nifti

log = logging.getLogger("dvarskit")

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2
VARIANT_NAMES = {"raw": "raw", "star": "star", "starstar": "star_star"}


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {text!r}")
    return text == "on"


def _variants(text: str) -> tuple[str, ...]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in VARIANT_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"variants must be from raw,star,starstar; got {text!r}")
    return tuple(VARIANT_NAMES[n] for n in dict.fromkeys(names))


def _wrap(parse):
    def inner(text):
        try:
            return parse(text)
        except InvalidInputError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    inner.__name__ = parse.__name__
    return inner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dvarskit", description="Standardized DVARS quality control.")
    parser.add_argument("--version", action="version", version=f"dvarskit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", help="compute DVARS variants and flags for a 4D volume")
    c.add_argument("--input", required=True, metavar="PATH", help="NIfTI-1 (.nii/.nii.gz) or TSV/CSV matrix")
    mg = c.add_mutually_exclusive_group()
    mg.add_argument("--mask", metavar="PATH", help="3D NIfTI-1 mask (value > 0 = included)")
    mg.add_argument("--mask-strategy", type=_wrap(parse_mask_strategy), default=DEFAULT_MASK_STRATEGY,
                    metavar="{all,nonzero-mean,mean-frac=F,nonconstant}",
                    help=f"derive the mask from the data (default {DEFAULT_MASK_STRATEGY})")
    c.add_argument("--robust-sigma", type=_on_off, default=True, metavar="{on,off}",
                   help="sigma as IQR/1.349 instead of the sample SD (default on)")
    c.add_argument("--detrend", type=_on_off, default=False, metavar="{on,off}",
                   help="remove a linear trend before estimating sigma and rho (default off)")
    c.add_argument("--variants", type=_variants, default=("raw", "star", "star_star"),
                   help="comma-separated subset of raw,star,starstar (default all)")
    c.add_argument("--flag", type=_wrap(FlagPolicy.parse), default=DEFAULT_POLICY,
                   metavar="{abs=T,zrobust=Z,none}", help=f"outlier policy on DVARS* (default {DEFAULT_POLICY})")
    c.add_argument("--output", default="-", metavar="PATH", help="report path, '-' for stdout (default)")
    c.add_argument("--format", choices=("tsv", "json"), default="tsv")

    s = sub.add_parser("simulate", help="write a synthetic AR(1) volume as NIfTI-1")
    s.add_argument("--spec", required=True, metavar="PATH", help="key = value simulation config")
    s.add_argument("--seed", type=int, help="override the seed in the spec")
    s.add_argument("--output", required=True, metavar="PATH", help="output .nii or .nii.gz")

    t = sub.add_parser("selftest", help="run the built-in calibration checks")
    t.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def run_compute(args) -> int:
    vol = load_volume(args.input)
    mask = load_mask(args.mask, vol.dims) if args.mask else None
    log.info("loaded %s: %d voxels x %d frames", args.input, vol.n_voxels, vol.n_frames)
    report = compute_report(
        vol,
        mask=mask,
        mask_strategy=args.mask_strategy,
        robust_sigma=args.robust_sigma,
        detrend=args.detrend,
        variants=args.variants,
        policy=args.flag,
        input_path=str(args.input),
    )
    if args.mask:
        report.meta["mask"] = f"file:{args.mask}"
    write_report(report, args.output, args.format)
    if report.n_flagged:
        log.info("%d frame(s) flagged", report.n_flagged)
        return EXIT_FLAGGED
    return EXIT_OK


def _write_params(path: Path, truth) -> None:
    lines = ["voxel\tsigma\trho\tdiff_var"]
    for i, s, r, d in zip(truth.voxels, truth.sigma, truth.rho, truth.diff_var):
        lines.append(f"{i}\t{s!r}\t{r!r}\t{d!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_simulate(args) -> int:
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"{args.spec}: cannot read spec ({exc.strerror})") from None
    spec = parse_spec(text)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
        spec.validate()
    vol, truth = simulate_ar1_volume(spec)
    out = Path(args.output)
    save_nifti(vol, out)
    name = out.name[: -len(".nii.gz")] if out.name.endswith(".nii.gz") else out.stem
    _write_params(out.with_name(name + "_params.tsv"), truth)
    log.info("wrote %s (%d voxels x %d frames)", out, vol.n_voxels, vol.n_frames)
    return EXIT_OK


def run_selftest_cmd(args) -> int:
    start = time.perf_counter()
    ok = run_selftest(sys.stdout, inject_fault=args.inject_fault)
    print(f"selftest finished in {time.perf_counter() - start:.1f} s", file=sys.stderr)
    return EXIT_OK if ok else EXIT_ERROR


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="dvarskit: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {"compute": run_compute, "simulate": run_simulate, "selftest": run_selftest_cmd}
    try:
        return handlers[args.command](args)
    except DvarsError as exc:
        print(f"dvarskit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"dvarskit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
