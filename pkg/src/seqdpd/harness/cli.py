"""
Command line entry point.

    seqdpd sweep-swing  [CONFIG] [-o DIR]
    seqdpd sweep-osnr   [CONFIG] [-o DIR]
    seqdpd sw-converge  [CONFIG] [-o DIR] [--iterations K]
    seqdpd penalty      [CONFIG] [-o DIR]
    seqdpd train        [CONFIG] [-o DIR]
    seqdpd gen-const    NAME -o FILE

Exit status: 0 on success, 2 for configuration errors, 3 for runtime errors.
``SEQDPD_WORKERS`` sets the number of worker processes (default 1).
"""
import argparse
import logging
import os
import sys
from pathlib import Path

import tomlkit

from ..constellation import BUILTIN_FORMATS, builtin_constellation, save_constellation
from ..errors import ConfigError, SeqDpdError
from ..metrics import FEC_NGMI_LIMIT
from .config import config_from_dict, dump_config
from .outputs import emit_convergence, emit_outputs, emit_penalty, write_atomic
from .sweeps import Experiment, run_osnr_sweep, run_penalty, run_sw_convergence, run_swing_sweep, train_predistorter

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("seqdpd")


def _read_config(path, output_dir=None, default_sweep=None):
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from exc
        try:
            data = tomlkit.parse(text).unwrap()
        except Exception as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    if default_sweep is not None:
        sweep = data.setdefault("sweep", {})
        if isinstance(sweep, dict):
            sweep.setdefault("variable", default_sweep)
    if output_dir is not None:
        data["output_dir"] = str(output_dir)
    return config_from_dict(data)


def _writable_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    if not os.access(out, os.W_OK | os.X_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def cmd_sweep(args, variable):
    cfg = _read_config(args.config, args.output_dir, default_sweep=variable)
    if variable == "swing" and cfg.sweep.variable != "swing":
        raise ConfigError("sweep.variable", "sweep-swing needs 'swing'")
    if variable == "osnr" and cfg.sweep.variable not in ("osnr", "snr"):
        raise ConfigError("sweep.variable", "sweep-osnr needs 'osnr' or 'snr'")
    out = _writable_dir(cfg.output_dir)
    result = run_swing_sweep(cfg) if variable == "swing" else run_osnr_sweep(cfg)
    for path in emit_outputs(result, out):
        log.info("wrote %s", path)
    crossings = result.fec_crossing()
    for pd, value in crossings.items():
        reached = "not reached" if value is None else f"reached at {result.variable}={value:g}"
        print(f"{pd:>8s}: NGMI {FEC_NGMI_LIMIT} {reached}")
    return EXIT_OK


def cmd_converge(args):
    cfg = _read_config(args.config, args.output_dir)
    out = _writable_dir(cfg.output_dir)
    result = run_sw_convergence(cfg, args.iterations)
    emit_convergence(result, cfg, out)
    for row in result.rows:
        print(f"iter {row.iteration:3d}  residual/peak {row.residual_rel_peak:.3e}  NGMI {row.report.ngmi:.4f}")
    return EXIT_OK


def cmd_penalty(args):
    cfg = _read_config(args.config, args.output_dir)
    out = _writable_dir(cfg.output_dir)
    curves, original, distorted = run_penalty(cfg)
    emit_penalty(curves, original, distorted, cfg, out)
    print(f"max NGMI gap {curves.max_gap:.4f} at SNR {curves.snr_db[curves.gap.argmax()]:g} dB")
    return EXIT_OK


def cmd_train(args):
    cfg = _read_config(args.config, args.output_dir)
    out = _writable_dir(cfg.output_dir)
    exp = Experiment.build(cfg)
    chain = exp.chain(cfg.transmitter.swing)
    for variant in cfg.predistortion.variants:
        pd = train_predistorter(exp, variant, chain)
        if variant == "linear":
            continue
        path = out / ("sw.bin" if variant == "sw" else f"{variant}.lut")
        pd.lut.save(path)
        print(f"{variant}: {sum(pd.lut.storage())} entries -> {path}")
    write_atomic(out / "config.echo", dump_config(cfg))
    return EXIT_OK


def cmd_gen_const(args):
    c = builtin_constellation(args.name)
    save_constellation(c, args.output)
    print(f"{c.name}: {c.size} points -> {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqdpd", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", nargs="?", help="TOML experiment file (defaults used when omitted)")
        p.add_argument("-o", "--output-dir", help="overrides output_dir from the config")
        return p

    with_config("sweep-swing", "NGMI versus DAC swing").set_defaults(func=lambda a: cmd_sweep(a, "swing"))
    with_config("sweep-osnr", "NGMI versus OSNR at fixed swing").set_defaults(func=lambda a: cmd_sweep(a, "osnr"))
    p = with_config("sw-converge", "sequence-wise training convergence")
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(func=cmd_converge)
    with_config("penalty", "designed vs distorted constellation NGMI").set_defaults(func=cmd_penalty)
    with_config("train", "train predistorters and write their tables").set_defaults(func=cmd_train)
    p = sub.add_parser("gen-const", help="write a builtin constellation file")
    p.add_argument("name", choices=BUILTIN_FORMATS)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_const)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SeqDpdError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
