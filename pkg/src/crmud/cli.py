"""Sweep runner: Monte Carlo capacities and closed-form bounds versus N, written as CSV.

Usage::

    crmud-sweep --n-list 1:100 --trials 100000 --out sweep.csv
    crmud-sweep --config run.cfg --pd 0.9 --plot-out series.csv

A config file holds ``key = value`` lines using the flag names without the
leading dashes (``pd``, ``mu-min``, ``n-list``, ...).  Flags override the file.

Exit codes: 0 success, 2 usage error, 3 invalid parameters, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .closedform import asymptotic_k_lower, asymptotic_k_upper, lower_bound_capacity, upper_bound_capacity
from .model import InvalidParameters, SystemParams, db_to_linear
from .montecarlo import OccupancyMode, run_trials
from .sched import Scheduler

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 2, 3, 4

COLUMNS = [
    "N",
    "mc_exact_mean",
    "mc_exact_se",
    "mc_lower_mean",
    "mc_lower_se",
    "mc_upper_mean",
    "mc_upper_se",
    "cf_lower",
    "cf_upper",
    "kl_log2lnN",
    "ku_log2lnN",
    "mu_hat",
    "mu_hat_se",
    "busy_fraction",
]

# curve family name -> scheduling rule that realises it
FAMILIES = {"exact": Scheduler.MAX_SNR, "lower": Scheduler.TWO_STAGE, "upper": Scheduler.GENIE}

DEFAULTS = {
    "pd": "0.8",
    "pf": "0.3",
    "lambda": "0.5",
    "mu-min": "0.95",
    "pp-db": "10",
    "psmax-db": None,  # follows pp-db
    "rate": "0.5",
    "n-list": "1:100",
    "trials": "100000",
    "seed": "20240601",
    "schedulers": "exact,lower,upper",
    "occupancy": "analytic",
    "out": "sweep.csv",
    "plot-out": None,
    "workers": "1",
}


class UsageError(ValueError):
    pass


class MalformedCSV(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams
    pp_db: float
    psmax_db: float
    n_list: list
    trials: int
    seed: int
    schedulers: tuple
    occupancy: OccupancyMode
    output_path: Path
    plot_path: Path | None = None
    workers: int = 1
    sources: dict = field(default_factory=dict, compare=False)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crmud-sweep", description="Secondary-network capacity versus number of users.")
    p.add_argument("--pd", help="detection probability p_d")
    p.add_argument("--pf", help="false-alarm probability p_f")
    p.add_argument("--lambda", dest="lambda_", help="primary arrival rate [packets/slot]")
    p.add_argument("--mu-min", help="minimum primary departure rate")
    p.add_argument("--pp-db", help="primary transmit power [dB]")
    p.add_argument("--psmax-db", help="secondary power limit [dB] (default: same as --pp-db)")
    p.add_argument("--rate", help="primary required rate R [bits/s/Hz]")
    p.add_argument("--n-list", help='user counts, e.g. "1:100" or "10,20,50"')
    p.add_argument("--trials", help="slots per N")
    p.add_argument("--seed", help="master seed (64-bit)")
    p.add_argument("--schedulers", help="subset of exact,lower,upper")
    p.add_argument("--occupancy", help="analytic or queue")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--plot-out", help="also write long-format plot series here")
    p.add_argument("--workers", help="worker processes (results do not depend on this)")
    return p


def parse_n_list(text: str) -> list:
    """Parse ``"1:100"``, ``"10,20,50"``, ``"1:9,10:100:10"`` into an ascending list."""
    out = []
    try:
        for item in text.split(","):
            item = item.strip()
            if ":" in item:
                parts = [int(x) for x in item.split(":")]
                if len(parts) not in (2, 3):
                    raise ValueError(item)
                step = parts[2] if len(parts) == 3 else 1
                if step < 1:
                    raise ValueError(item)
                out.extend(range(parts[0], parts[1] + 1, step))
            else:
                out.append(int(item))
    except ValueError:
        raise UsageError(f"n-list: cannot parse {text!r}") from None
    if not out:
        raise UsageError("n-list: empty")
    if any(n < 1 for n in out) or any(b <= a for a, b in zip(out, out[1:])):
        raise UsageError(f"n-list: values must be positive and strictly ascending, got {text!r}")
    return out


def read_config_file(path: str | Path) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in DEFAULTS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _number(key, text, kind=float):
    try:
        return kind(text)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: expected a number, got {text!r}") from None


def parse_config(args: list | None = None) -> ExperimentConfig:
    """Resolve flags, config file and defaults into an ``ExperimentConfig``.

    Raises ``UsageError`` for malformed input and ``InvalidParameters`` when
    the system constants fall outside the analysed regime.
    """
    ns = _build_parser().parse_args(args)
    flags = {k.replace("_", "-").rstrip("-"): v for k, v in vars(ns).items() if k != "config"}
    values = dict(DEFAULTS)
    sources = dict.fromkeys(DEFAULTS, "default")
    if ns.config:
        for k, v in read_config_file(ns.config).items():
            values[k], sources[k] = v, "file"
    for k, v in flags.items():
        if v is not None:
            values[k], sources[k] = v, "flag"

    pp_db = _number("pp-db", values["pp-db"])
    psmax_db = pp_db if values["psmax-db"] is None else _number("psmax-db", values["psmax-db"])
    trials = _number("trials", values["trials"], int)
    if trials < 1:
        raise UsageError(f"trials: must be >= 1, got {trials}")
    seed = _number("seed", values["seed"], int)
    if not 0 <= seed < 2**64:
        raise UsageError(f"seed: must be a 64-bit unsigned integer, got {seed}")
    workers = _number("workers", values["workers"], int)
    if workers < 1:
        raise UsageError(f"workers: must be >= 1, got {workers}")
    families = tuple(s.strip() for s in values["schedulers"].split(",") if s.strip())
    bad = [s for s in families if s not in FAMILIES]
    if bad or not families:
        raise UsageError(f"schedulers: unknown {bad or 'empty'}; choose from {','.join(FAMILIES)}")
    if values["occupancy"] not in ("analytic", "queue"):
        raise UsageError(f"occupancy: expected analytic or queue, got {values['occupancy']!r}")

    params = SystemParams(
        p_d=_number("pd", values["pd"]),
        p_f=_number("pf", values["pf"]),
        lam=_number("lambda", values["lambda"]),
        mu_min=_number("mu-min", values["mu-min"]),
        P_p=db_to_linear(pp_db),
        P_s_max=db_to_linear(psmax_db),
        R=_number("rate", values["rate"]),
    )
    return ExperimentConfig(
        params=params,
        pp_db=pp_db,
        psmax_db=psmax_db,
        n_list=parse_n_list(values["n-list"]),
        trials=trials,
        seed=seed,
        schedulers=tuple(f for f in FAMILIES if f in families),
        occupancy=OccupancyMode(values["occupancy"]),
        output_path=Path(values["out"]),
        plot_path=None if values["plot-out"] is None else Path(values["plot-out"]),
        workers=workers,
        sources=sources,
    )


def _fmt(x) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return f"{x:.10g}"


def _provenance(config: ExperimentConfig) -> list:
    p = config.params
    return [
        "crmud sweep: secondary capacity versus number of secondary transmitters",
        f"p_d={p.p_d!r} p_f={p.p_f!r} lambda={p.lam!r} mu_min={p.mu_min!r} R={p.R!r}",
        f"P_p={p.P_p!r} linear ({config.pp_db!r} dB) P_s_max={p.P_s_max!r} linear ({config.psmax_db!r} dB)",
        f"R_p={p.R_p!r} K={p.K!r}",
        f"trials={config.trials} seed={config.seed} occupancy={config.occupancy.kind} "
        f"schedulers={','.join(config.schedulers)}",
        f"n_list={','.join(map(str, config.n_list))}",
        "exact=max-SNR scheduling, lower=two-stage scheduling, upper=genie SNR; se = standard error",
        "empty cell = series not requested, or asymptotic formula not applicable at this N",
    ]


def sweep_rows(config: ExperimentConfig, workers: int | None = None) -> list:
    workers = config.workers if workers is None else workers
    p = config.params
    kl, ku = asymptotic_k_lower(p), asymptotic_k_upper(p)
    scheds = [FAMILIES[f] for f in config.schedulers]
    ref = scheds[0]  # max-SNR when requested: the physically realised system
    rows = []
    for n in config.n_list:
        pn = p.with_n(n)
        res = run_trials(pn, scheds, config.occupancy, config.trials, config.seed, workers)
        row = {"N": str(n)}
        for fam, sch in FAMILIES.items():
            est = res.capacity.get(sch)
            row[f"mc_{fam}_mean"] = _fmt(est.mean if est else None)
            row[f"mc_{fam}_se"] = _fmt(est.std_error if est else None)
        row["cf_lower"] = _fmt(lower_bound_capacity(p, n) if n >= 2 else None)
        row["cf_upper"] = _fmt(upper_bound_capacity(p, n) if n >= 2 else None)
        scale = math.log2(math.log(n)) if n >= 2 else None
        row["kl_log2lnN"] = _fmt(kl * scale if scale is not None else None)
        row["ku_log2lnN"] = _fmt(ku * scale if scale is not None else None)
        row["mu_hat"] = _fmt(res.departure[ref].mean)
        row["mu_hat_se"] = _fmt(res.departure[ref].std_error)
        row["busy_fraction"] = _fmt(res.busy_fraction[ref])
        rows.append(row)
        logger.info("N=%d done", n)
    return rows


def run_sweep(config: ExperimentConfig, workers: int | None = None) -> Path:
    """Run the sweep and write the CSV (provenance comments, then header and one row per N)."""
    rows = sweep_rows(config, workers)
    buf = io.StringIO()
    for line in _provenance(config):
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path = Path(config.output_path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


SERIES = [
    ("mc_exact", "mc_exact_mean", "mc_exact_se"),
    ("mc_lower", "mc_lower_mean", "mc_lower_se"),
    ("mc_upper", "mc_upper_mean", "mc_upper_se"),
    ("cf_lower", "cf_lower", None),
    ("cf_upper", "cf_upper", None),
    ("kl_log2lnN", "kl_log2lnN", None),
    ("ku_log2lnN", "ku_log2lnN", None),
    ("mu_hat", "mu_hat", "mu_hat_se"),
]


def read_sweep_csv(path: str | Path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(body)
    if reader.fieldnames != COLUMNS:
        raise MalformedCSV(f"{path}: unexpected header {reader.fieldnames}")
    rows = list(reader)
    for i, row in enumerate(rows, 1):
        if None in row or any(v is None for v in row.values()):
            raise MalformedCSV(f"{path}: row {i} has the wrong number of fields")
        for k, v in row.items():
            if v == "":
                continue
            try:
                x = float(v)
            except ValueError:
                raise MalformedCSV(f"{path}: row {i}, column {k}: {v!r} is not a number") from None
            if not math.isfinite(x):
                raise MalformedCSV(f"{path}: row {i}, column {k}: non-finite value")
    return rows


def emit_plot_data(csv_path: str | Path, out_path: str | Path) -> int:
    """Convert a sweep CSV into long format ``series_name,N,value,ci_half_width``.

    Empty cells produce no row.  The half width is the 95% normal interval
    for Monte Carlo series and empty for closed-form ones.  Returns the
    number of data rows written.
    """
    rows = read_sweep_csv(csv_path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series_name", "N", "value", "ci_half_width"])
    count = 0
    for name, col, se_col in SERIES:
        for row in rows:
            if row[col] == "":
                continue
            half = _fmt(1.959963984540054 * float(row[se_col])) if se_col and row[se_col] != "" else ""
            w.writerow([name, row["N"], row[col], half])
            count += 1
    Path(out_path).write_text(buf.getvalue(), encoding="utf-8")
    return count


def main(argv: list | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameters as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        path = run_sweep(config)
        if config.plot_path is not None:
            emit_plot_data(path, config.plot_path)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
