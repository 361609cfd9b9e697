"""Run experiments into self-describing directories and verify them later.

A run directory holds the CSVs of one experiment, ``checks.csv``, optional
SVG figures and ``manifest.json`` (config echo, version, timestamps,
verdicts and a SHA-256 inventory of every CSV).  One run owns its
directory; separate runs may execute concurrently.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError
from .experiments import RUNNERS, Outputs
from .manifest import CHECKS_NAME, RunManifest, sha256_file, verify, write_checks

__all__ = ["run", "run_file", "sweep", "sweep_configs", "thread_limit", "verify"]


def thread_limit() -> int:
    """Worker cap from ``MCFLAB_THREADS`` (default: CPU count)."""
    raw = os.environ.get("MCFLAB_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError([f"MCFLAB_THREADS: expected a positive integer, got {raw!r}"]) from None
    if v < 1:
        raise ConfigError([f"MCFLAB_THREADS: expected a positive integer, got {raw!r}"])
    return v


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(config: ExperimentConfig, output_dir=None, workers: int | None = None) -> RunManifest:
    """Execute one experiment and write its run directory.

    Raises :class:`ConfigError` before any computation for invalid input
    and ``OSError`` when the directory cannot be written.
    """
    workers = thread_limit() if workers is None else workers
    run_dir = Path(config.output_dir if output_dir is None else output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    for stale in (run_dir / CHECKS_NAME, run_dir / "manifest.json"):
        stale.unlink(missing_ok=True)
    started = _now()
    out = Outputs(run_dir, config.plots)
    checks = RUNNERS[config.kind](config, out, workers)
    write_checks(run_dir, checks)
    files = {name: sha256_file(run_dir / name) for name in sorted(out.csv + [CHECKS_NAME])}
    man = RunManifest(config=config.to_dict(), version=__version__, started=started, finished=_now(),
                      checks=[c.to_dict() for c in checks], files=files, plots=sorted(out.plots),
                      run_dir=str(run_dir))
    man.write(run_dir)
    return man


def run_file(path, output_dir=None, plots: bool | None = None, workers: int | None = None) -> RunManifest:
    cfg = load_config(path)
    if plots is not None:
        cfg = replace(cfg, plots=plots)
    return run(cfg, output_dir, workers)


def _sweep_text(kind: str, n: int | None, c: int | None, ns, cs, extra: dict) -> str:
    lines = ["[experiment]", f"kind = {kind}", "[parameters]"]
    if kind == "sharpness":
        lines += [f"n = {','.join(map(str, ns))}", f"c = {','.join(map(str, cs))}"]
    else:
        lines.append(f"n = {n}")
        lines.append(f"c = {c}")
        if c == 1:
            lines.append("H0 = 3")
        elif c == -1:
            lines.append(f"H0 = {2 * n}")
    lines += [f"{k} = {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


SWEEP_KINDS = ("sharpness", "exact", "moser", "rescale")


def sweep_configs(kind: str, ns, cs, output_dir, plots: bool = True, extra: dict | None = None):
    """Configs of a sweep: one sharpness matrix, or one run per ``(n, c)`` for the exact-flow kinds.

    Space-form runs use ``H0 = 3`` for ``c = 1`` and ``H0 = 2n`` for ``c = -1``.
    """
    if kind not in SWEEP_KINDS:
        raise ConfigError([f"sweep: kind must be one of {', '.join(SWEEP_KINDS)} (got {kind!r})"])
    extra = extra or {}
    output_dir = Path(output_dir)
    if kind == "sharpness":
        cfg = parse_config(_sweep_text(kind, None, None, ns, cs, extra), source="sweep")
        return [replace(cfg, output_dir=output_dir, plots=plots)]
    out, problems = [], []
    for n in ns:
        for c in cs:
            try:
                cfg = parse_config(_sweep_text(kind, n, c, ns, cs, extra), source=f"sweep n={n} c={c}")
            except ConfigError as exc:
                problems.extend(exc.problems)
                continue
            out.append(replace(cfg, output_dir=output_dir / f"n{n}_c{c:+d}", plots=plots))
    if problems:
        raise ConfigError(problems)
    return out


def sweep(kind: str, ns, cs, output_dir, plots: bool = True, extra: dict | None = None,
          workers: int | None = None) -> list[RunManifest]:
    """Run a sweep; independent runs share the worker budget."""
    workers = thread_limit() if workers is None else workers
    cfgs = sweep_configs(kind, ns, cs, output_dir, plots, extra)
    if len(cfgs) == 1:
        return [run(cfgs[0], workers=workers)]
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(cfgs)))) as pool:
        return list(pool.map(lambda cfg: run(cfg, workers=1), cfgs))
