"""Command line entry point ``mcflab``.

Exit codes: 0 all checks pass, 1 a check failed (or verification found a
defect), 2 usage or configuration error, 3 IO error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError
from .harness import SWEEP_KINDS, run_file, sweep
from .manifest import RunManifest, verify

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _report(man: RunManifest, out) -> int:
    for c in man.checks:
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"{mark}  {c['name']}: {c['measured']!r} {c['comparator']} {c['threshold']!r}", file=out)
    print(f"{'PASS' if man.passed else 'FAIL'}  {man.run_dir} ({len(man.checks)} checks)", file=out)
    return EXIT_PASS if man.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcflab", description="Reproducible mean curvature flow experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("config", type=Path)
    r.add_argument("-o", "--output-dir", type=Path, help="override experiment.output_dir")
    r.add_argument("--no-plots", action="store_true", help="skip SVG figures")
    v = sub.add_parser("verify", help="re-hash a run directory and recompute its verdicts")
    v.add_argument("run_dir", type=Path)
    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--kind", choices=SWEEP_KINDS, default="sharpness")
    s.add_argument("--n", type=_int_list, default=[3, 4, 5])
    s.add_argument("--c", type=_int_list, default=[-1, 0, 1])
    s.add_argument("--alpha-offsets", type=_int_list, help="sharpness only: alpha = n + offset")
    s.add_argument("-o", "--output-dir", type=Path, default=Path("runs/sweep"))
    s.add_argument("--no-plots", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out, err = sys.stdout, sys.stderr
    try:
        if args.command == "run":
            if not args.config.is_file():
                print(f"error: no such config file: {args.config}", file=err)
                return EXIT_IO
            man = run_file(args.config, args.output_dir, plots=False if args.no_plots else None)
            return _report(man, out)
        if args.command == "verify":
            try:
                res = verify(args.run_dir)
            except (ValueError, TypeError, KeyError) as exc:
                print(f"error: unreadable manifest in {args.run_dir}: {exc}", file=err)
                return EXIT_IO
            for p in res.problems:
                print(f"DEFECT  {p}", file=out)
            for name in res.failed_checks:
                print(f"FAIL  {name}", file=out)
            status = "PASS" if res.passed else "FAIL"
            print(f"{status}  {args.run_dir} ({res.checked_files} files, {res.checked_checks} checks)", file=out)
            return EXIT_PASS if res.passed else EXIT_FAIL
        extra = {}
        if args.alpha_offsets is not None:
            if args.kind != "sharpness":
                print("error: --alpha-offsets only applies to --kind sharpness", file=err)
                return EXIT_USAGE
            extra["alpha_offsets"] = ",".join(map(str, args.alpha_offsets))
        mans = sweep(args.kind, args.n, args.c, args.output_dir, plots=not args.no_plots, extra=extra)
        return max(_report(m, out) for m in mans)
    except ConfigError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
