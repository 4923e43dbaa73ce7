"""
Result files. CSV is the contract; figures are best-effort.

``sweep.csv`` columns::

    sweep_var,sweep_value,predistorter,ngmi,gmi,snr_db,sigma2,clip_count,seed,wall_ms

Floats are written with ``repr`` so reruns are byte-identical. ``wall_ms``
is left empty unless ``output.record_wall_time`` is set, because timings
would break that guarantee.
"""
import logging
import os
import tempfile
from pathlib import Path

from ..metrics import format_value
from . import plotting
from .config import dump_config

log = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "sweep_var", "sweep_value", "predistorter", "ngmi", "gmi",
    "snr_db", "sigma2", "clip_count", "seed", "wall_ms",
)
CONVERGENCE_COLUMNS = ("iteration", "residual_rms", "residual_rel_peak", "ngmi", "gmi", "snr_db", "seed")
PENALTY_COLUMNS = ("snr_db", "ngmi_original", "ngmi_distorted", "gap", "seed")
FEC_COLUMNS = ("predistorter", "fec_crossing")


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def sweep_rows(result):
    record = result.config.output.record_wall_time
    for r in result.rows:
        rep = r.report
        yield (
            r.sweep_var, float(r.sweep_value), r.predistorter, rep.ngmi, rep.gmi,
            rep.snr_db, rep.sigma2, r.clip_count, rep.seed,
            round(r.wall_ms, 3) if record and r.wall_ms is not None else None,
        )


def _prepare(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _try_plot(fn, *args) -> None:
    try:
        fn(*args)
    except Exception as exc:  # figures never fail a run
        log.warning("plot %s failed: %s", args[-1], exc)


def emit_outputs(result, out_dir) -> list[Path]:
    """Write ``sweep.csv``, ``fec.csv``, ``config.echo`` and one figure per metric."""
    out = _prepare(out_dir)
    cfg = result.config
    write_atomic(out / "sweep.csv", csv_text(SWEEP_COLUMNS, sweep_rows(result)))
    crossings = result.fec_crossing()
    write_atomic(out / "fec.csv", csv_text(FEC_COLUMNS, [(pd, v) for pd, v in crossings.items()]))
    write_atomic(out / "config.echo", dump_config(cfg))
    written = [out / "sweep.csv", out / "fec.csv", out / "config.echo"]
    if cfg.output.plots:
        for metric in ("ngmi", "gmi", "snr_db"):
            path = out / f"{metric}_vs_{result.variable}.{cfg.output.plot_format}"
            _try_plot(plotting.plot_sweep, result, metric, path)
            if path.exists():
                written.append(path)
    return written


def emit_convergence(result, cfg, out_dir) -> list[Path]:
    out = _prepare(out_dir)
    rows = [
        (r.iteration, r.residual_rms, r.residual_rel_peak, r.report.ngmi, r.report.gmi, r.report.snr_db,
         r.report.seed)
        for r in result.rows
    ]
    write_atomic(out / "convergence.csv", csv_text(CONVERGENCE_COLUMNS, rows))
    write_atomic(out / "config.echo", dump_config(cfg))
    written = [out / "convergence.csv", out / "config.echo"]
    if cfg.output.plots:
        path = out / f"convergence.{cfg.output.plot_format}"
        _try_plot(plotting.plot_convergence, result, path)
        if path.exists():
            written.append(path)
    return written


def emit_penalty(curves, original, distorted_points, cfg, out_dir) -> list[Path]:
    out = _prepare(out_dir)
    rows = [
        (float(s), float(o), float(d), float(o - d), curves.seed)
        for s, o, d in zip(curves.snr_db, curves.ngmi_original, curves.ngmi_distorted)
    ]
    write_atomic(out / "penalty.csv", csv_text(PENALTY_COLUMNS, rows))
    write_atomic(out / "config.echo", dump_config(cfg))
    written = [out / "penalty.csv", out / "config.echo"]
    if cfg.output.plots:
        fmt = cfg.output.plot_format
        for fn, args, name in (
            (plotting.plot_penalty, (curves,), f"penalty.{fmt}"),
            (plotting.plot_constellations, (original, distorted_points), f"constellation.{fmt}"),
        ):
            _try_plot(fn, *args, out / name)
            if (out / name).exists():
                written.append(out / name)
    return written
