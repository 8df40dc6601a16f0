"""Command-line front end.

    esshift run --case III --seed 1 --out results/
    esshift run --config my_scenario.cfg --no-scheme
    esshift sweep --case VI --seeds 1..10 --out sweep/
    esshift plotdata --in results/ --figure throughput

``run`` executes one scenario and writes the four CSV tables; ``sweep``
repeats it over a seed range into per-seed subdirectories; ``plotdata``
turns exported tables into plot-ready TSV on stdout.
"""
from __future__ import annotations

import argparse
import csv
import statistics
import sys
from pathlib import Path

from .config import CASES, ConfigError, ScenarioConfig, load_case, parse_file
from .engine import US_PER_S
from .scenario import Simulation

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="esshift",
                                description="ESS load-handoff simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def add_scenario_args(sp):
        sel = sp.add_mutually_exclusive_group(required=True)
        sel.add_argument("--case", choices=CASES, help="built-in scenario")
        sel.add_argument("--config", metavar="PATH", help="scenario file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--horizon-s", type=int, dest="horizon_s",
                        help="override the run length in seconds")
        sp.add_argument("--no-scheme", action="store_true",
                        help="disable detection and every handoff action")
        sp.add_argument("--out", metavar="DIR", help="output directory")

    run = sub.add_parser("run", help="run one scenario and export CSV tables")
    add_scenario_args(run)

    sweep = sub.add_parser("sweep", help="run a scenario over a seed range")
    add_scenario_args(sweep)
    sweep.add_argument("--seeds", required=True, metavar="A..B",
                       help="inclusive seed range, e.g. 1..10")

    plot = sub.add_parser("plotdata", help="emit plot-ready TSV from a run")
    plot.add_argument("--in", dest="run_dir", default=".", metavar="DIR",
                      help="directory holding the exported CSV tables")
    plot.add_argument("--figure", required=True,
                      choices=("throughput", "delay"))
    return p


def _load_config(args) -> ScenarioConfig:
    conf = load_case(args.case) if args.case else parse_file(args.config)
    if args.seed is not None:
        conf.sim.seed = args.seed
    if args.horizon_s is not None:
        conf.sim.horizon_s = args.horizon_s
    if args.no_scheme:
        conf.scheme_enabled = False
    return conf


def _default_out(args) -> Path:
    if args.out:
        return Path(args.out)
    name = f"case-{args.case.lower()}" if args.case else Path(args.config).stem
    return Path(f"out-{name}")


def _run_one(conf: ScenarioConfig, out_dir: Path) -> dict:
    results = Simulation(conf).run()
    results.recorder.export_csv(out_dir)
    return results.summary()


def _print_summary(label: str, s: dict) -> None:
    first_drop = "none" if s["first_drop_s"] is None else f"t={s['first_drop_s']} s"
    trig = ("none" if s["first_trigger_us"] is None
            else f"{s['first_trigger_us'] / US_PER_S:.6f} s")
    hand = ", ".join(f"{k} {v}" for k, v in sorted(s["handoffs"].items())) or "none"
    print(f"{label}: seed {s['seed']}, scheme {'on' if s['scheme'] else 'off'}, "
          f"{s['horizon_s']} s horizon")
    print(f"  delivered {s['delivered_bits'] / 1e6:.2f} Mbit "
          f"(ESS {s['ess_bits'] / 1e6:.2f} Mbit); first drop {first_drop}; "
          f"first trigger {trig}")
    print(f"  handoffs: {hand}; move requests processed "
          f"{s['move_requests_processed']}/{s['move_requests_seen']}; "
          f"on overlay at end: {s['on_bs_at_end']}")


def _cmd_run(args) -> int:
    conf = _load_config(args)
    out_dir = _default_out(args)
    label = args.case or Path(args.config).stem
    summary = _run_one(conf, out_dir)
    _print_summary(label, summary)
    print(f"  tables in {out_dir}/")
    return EXIT_OK


def _parse_seed_range(text: str) -> range:
    try:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
    except ValueError:
        raise ConfigError(f"bad seed range {text!r}, expected A..B") from None
    if hi < lo:
        raise ConfigError(f"empty seed range {text!r}")
    return range(lo, hi + 1)


def _cmd_sweep(args) -> int:
    seeds = _parse_seed_range(args.seeds)
    base = _default_out(args)
    label = args.case or Path(args.config).stem
    for seed in seeds:
        conf = _load_config(args)
        conf.sim.seed = seed
        summary = _run_one(conf, base / f"seed-{seed}")
        _print_summary(f"{label} seed {seed}", summary)
    print(f"  tables under {base}/seed-*/")
    return EXIT_OK


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        raise ConfigError(f"missing table {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _cmd_plotdata(args) -> int:
    run_dir = Path(args.run_dir)
    out = sys.stdout
    if args.figure == "throughput":
        rows = _read_csv(run_dir / "throughput.csv")
        nodes: list[str] = []
        for r in rows:
            if r["node"] not in nodes:
                nodes.append(r["node"])
        by_sec: dict[int, dict[str, float]] = {}
        for r in rows:
            sec = int(r["t_sec"])
            by_sec.setdefault(sec, {})[r["node"]] = \
                int(r["bits_delivered"]) / 1e6
        out.write("t_sec\t" + "\t".join(f"{n}_mbps" for n in nodes) + "\n")
        for sec in sorted(by_sec):
            vals = by_sec[sec]
            out.write(str(sec) + "\t"
                      + "\t".join(f"{vals.get(n, 0.0):.6f}" for n in nodes)
                      + "\n")
    else:
        rows = _read_csv(run_dir / "delay.csv")
        by_sec: dict[int, list[int]] = {}
        for r in rows:
            by_sec.setdefault(int(r["recv_us"]) // US_PER_S, []).append(
                int(r["delay_us"]))
        out.write("t_sec\tmean_ms\tmedian_ms\tp95_ms\tpackets\n")
        for sec in sorted(by_sec):
            d = sorted(by_sec[sec])
            p95 = d[min(len(d) - 1, int(0.95 * len(d)))]
            out.write(f"{sec}\t{statistics.fmean(d) / 1000:.3f}"
                      f"\t{statistics.median(d) / 1000:.3f}"
                      f"\t{p95 / 1000:.3f}\t{len(d)}\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_plotdata(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # keep the exit-code contract
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
