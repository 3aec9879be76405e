"""Command-line entry point: ``hhtshm <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 missing or tampered
artifact, 10-15 failure inside the simulate, decompose, hht, modal,
detect or identify stage.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from hhtshm import pipeline as pl

log = logging.getLogger("hhtshm")


def _limit_threads(n: int) -> None:
    # BLAS pools are sized at import, so this only helps spawned workers
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="INI configuration file")
    src.add_argument("--preset", choices=sorted(pl.PRESETS), help="built-in configuration")
    common.add_argument("--seed", type=int, help="override the master seed in [run]")
    common.add_argument("--out-dir", type=Path, default=Path("out"), help="artifact directory (default: out)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for the EEMD ensemble")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hhtshm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "simulate the shear frame under the configured excitation",
        "decompose": "EEMD of every story acceleration",
        "hht": "instantaneous amplitude/frequency and histograms per IMF",
        "modal": "first-mode frequency interval and mode shape",
        "detect": "train emulators and locate damage onset",
        "identify": "story stiffness from the modal estimate",
        "pipeline": "run every stage and write report.txt",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    pc = sub.add_parser("print-config", help="print a preset as INI")
    pc.add_argument("preset", choices=sorted(pl.PRESETS))
    return p


def _load(args) -> pl.PipelineConfig:
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise pl.ConfigError(f"cannot read {args.config}: {exc}") from None
    else:
        text = pl.preset_text(args.preset or "calibrated")
    return pl.load_config(text, args.seed)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "print-config":
        sys.stdout.write(pl.preset_text(args.preset))
        return pl.EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return pl.EXIT_CONFIG
    _limit_threads(args.threads)
    try:
        cfg = _load(args)
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return pl.EXIT_CONFIG
    out: Path = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    try:
        if cmd == "pipeline":
            report = pl.run_pipeline(cfg, out, n_jobs=args.threads)
            sys.stdout.write(report.to_text())
        else:
            runners = {
                "simulate": lambda: pl.stage_simulate(cfg, out),
                "decompose": lambda: pl.stage_decompose(cfg, out, args.threads),
                "hht": lambda: pl.stage_hht(cfg, out),
                "modal": lambda: pl.stage_modal(cfg, out),
                "detect": lambda: pl.stage_detect(cfg, out),
                "identify": lambda: pl.stage_identify(cfg, out),
            }
            result = pl.run_stage(cmd, runners[cmd])
            _summarize(cmd, result)
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return pl.EXIT_CONFIG
    except pl.ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return pl.EXIT_ARTIFACT
    except pl.StageError as exc:
        print(f"{exc.stage} failed: {exc.cause}", file=sys.stderr)
        return pl.EXIT_STAGE[exc.stage]
    return pl.EXIT_OK


def _summarize(cmd: str, result) -> None:
    if cmd == "modal":
        sys.stdout.write(pl.modal_text(result))
    elif hasattr(result, "to_text"):
        sys.stdout.write(result.to_text())
    elif isinstance(result, dict) and result:
        for k, v in result.items():
            print(f"{k} = {v}")


if __name__ == "__main__":
    sys.exit(main())
