"""Command-line entry point.

Commands: run, compare, sweep, validate, plot-data. Exit codes: 0 success,
1 validation-suite failure, 2 config/schema/usage error (message names the
field path), 3 collision (message names the step). Report paths write PNG
figures next to the CSV outputs unless --no-figures is given. The default
output directory comes from $PLATOONCTL_OUT, falling back to ./out.
"""

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import figures, harness, validate
from .config import load_config_file, serialize_config
from .errors import ConfigError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_COLLISION = 3

DEFAULT_CONFIG = Path(__file__).parent / "data" / "default_config.json"


def _default_out():
    return os.environ.get("PLATOONCTL_OUT", "out")


def _add_common(parser, seeds=False):
    parser.add_argument("--config", default=None, help="scenario config JSON (default: shipped config)")
    parser.add_argument("--out", default=None, help="output directory (default: $PLATOONCTL_OUT or ./out)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    if seeds:
        parser.add_argument("--seeds", default="", help="comma-separated master seeds")


def _load(args):
    path = args.config or DEFAULT_CONFIG
    if not Path(path).exists():
        raise ConfigError("", f"config file not found: {path}")
    return load_config_file(path)


def _say(args, message):
    if not args.quiet:
        print(message)


def _write_run(result, out_dir, name_prefix, render):
    out_dir.mkdir(parents=True, exist_ok=True)
    steps_path = out_dir / f"{name_prefix}steps.csv"
    metrics_path = out_dir / f"{name_prefix}metrics.json"
    harness.write_steps_csv(result.records, steps_path)
    harness.write_metrics_json(result, metrics_path)
    if render:
        figures.render_run_figures(harness.records_to_table(result.records), out_dir, prefix=name_prefix)
    return steps_path, metrics_path


def cmd_run(args):
    scenario, output = _load(args)
    out_dir = Path(args.out or _default_out())
    result = harness.run_scenario(scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    steps_path = out_dir / output["steps_csv"]
    harness.write_steps_csv(result.records, steps_path)
    harness.write_metrics_json(result, out_dir / output["metrics_json"])
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(serialize_config(scenario, output), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.no_figures:
        figures.render_run_figures(harness.records_to_table(result.records), out_dir)
    if result.collided:
        print(f"collision at step {result.collision_step}; partial records written to {steps_path}")
        return EXIT_COLLISION
    _say(args, f"run complete: {len(result.records)} steps, outputs in {out_dir}")
    _say(args, f"aggregate CAE_p={result.metrics.agg_cae_p:.1f} CAE_v={result.metrics.agg_cae_v:.1f}")
    return EXIT_OK


GAP_ROWS = [("cae_p", "CAE_p"), ("cae_v", "CAE_v"), ("mae_p", "MAE_p"), ("mae_v", "MAE_v")]


def _format_gap(gap):
    return "n/a" if gap is None else f"{gap:.1f}"


def write_gap_table(table, out_dir):
    variants = ["physics", "nn-only", "perl"]
    csv_path = out_dir / "gap_table.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("metric," + ",".join(variants) + "\n")
        for key, label in GAP_ROWS:
            fh.write(label + "," + ",".join(repr(table.values[key][v]) for v in variants) + "\n")
            fh.write(
                f"Gap{label},"
                + ",".join(
                    "" if table.gaps[key][v] is None else repr(table.gaps[key][v]) for v in variants
                )
                + "\n"
            )
    txt_path = out_dir / "gap_table.txt"
    with open(txt_path, "w", encoding="utf-8") as fh:
        header = f"{'Metric':<10}" + "".join(f"{v:>12}" for v in variants)
        fh.write(header + "\n")
        for key, label in GAP_ROWS:
            fh.write(f"{label:<10}" + "".join(f"{table.values[key][v]:>12.1f}" for v in variants) + "\n")
            fh.write(
                f"{'Gap' + label:<10}"
                + "".join(f"{_format_gap(table.gaps[key][v]):>12}" for v in variants)
                + "\n"
            )
    return csv_path, txt_path


def _compare_once(scenario, out_dir, render):
    results = harness.run_variants(scenario)
    tables = {}
    for variant, result in results.items():
        prefix = f"{variant.replace('-', '_')}_"
        _write_run(result, out_dir, prefix, render=False)
        tables[variant] = harness.records_to_table(result.records)
    gap = harness.compare_runs(results)
    write_gap_table(gap, out_dir)
    if render:
        figures.render_comparison_figure(tables, out_dir / "compare_velocity_error.png")
    return results, gap


def cmd_compare(args):
    scenario, _ = _load(args)
    out_dir = Path(args.out or _default_out())
    out_dir.mkdir(parents=True, exist_ok=True)
    results, gap = _compare_once(scenario, out_dir, render=not args.no_figures)
    collided = [v for v, r in results.items() if r.collided]
    if collided:
        steps = {v: results[v].collision_step for v in collided}
        print(f"collision in variant(s) {steps}; partial outputs in {out_dir}")
        return EXIT_COLLISION
    _say(args, f"comparison written to {out_dir}")
    for key, label in GAP_ROWS:
        row = ", ".join(f"{v}={gap.values[key][v]:.1f}" for v in ("physics", "nn-only", "perl"))
        _say(args, f"{label}: {row}")
    return EXIT_OK


def cmd_sweep(args):
    if not args.seeds.strip():
        print("sweep needs --seeds s1,s2,...", file=sys.stderr)
        return EXIT_CONFIG
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        print("--seeds must be a comma-separated integer list", file=sys.stderr)
        return EXIT_CONFIG
    if not seeds:
        print("sweep needs at least one seed", file=sys.stderr)
        return EXIT_CONFIG
    scenario, _ = _load(args)
    out_dir = Path(args.out or _default_out())
    out_dir.mkdir(parents=True, exist_ok=True)
    violations = []
    summary = {"seeds": seeds, "runs": {}, "ordering_violations": 0}
    exit_code = EXIT_OK
    for seed in seeds:
        seed_dir = out_dir / f"seed_{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        seeded = replace(scenario, master_seed=seed)
        results, gap = _compare_once(seeded, seed_dir, render=not args.no_figures)
        if any(r.collided for r in results.values()):
            exit_code = EXIT_COLLISION
        perl_best = all(
            gap.values[m]["perl"] < gap.values[m][base]
            for m in ("cae_p", "cae_v")
            for base in ("physics", "nn-only")
        )
        if not perl_best:
            violations.append(seed)
        summary["runs"][str(seed)] = {
            "perl_best": perl_best,
            "cae_p": gap.values["cae_p"],
            "cae_v": gap.values["cae_v"],
        }
        _say(args, f"seed {seed}: perl_best={perl_best}")
    summary["ordering_violations"] = len(violations)
    summary["violating_seeds"] = violations
    with open(out_dir / "sweep_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _say(args, f"sweep complete: {len(violations)} ordering violations across {len(seeds)} seeds")
    return exit_code


def cmd_validate(args):
    results = validate.run_all()
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    if failed:
        print(f"{len(failed)} properties failed: {', '.join(r.name for r in failed)}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_plot_data(args):
    run_dir = Path(args.run_dir)
    steps_path = run_dir / "steps.csv"
    if not steps_path.exists():
        candidates = sorted(run_dir.glob("*steps.csv")) if run_dir.exists() else []
        if not candidates:
            print(f"no steps CSV found in {run_dir}", file=sys.stderr)
            return EXIT_CONFIG
        steps_path = candidates[0]
    try:
        table = harness.read_steps_csv(steps_path)
    except Exception as exc:  # corrupt file is a usage error
        print(f"cannot read {steps_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out or _default_out())
    out_dir.mkdir(parents=True, exist_ok=True)
    long_path = out_dir / "plot_data.csv"
    with open(long_path, "w", encoding="utf-8") as fh:
        fh.write("series,k,value\n")
        for veh in sorted(set(int(v) for v in table["vehicle"])):
            mask = table["vehicle"] == veh
            ks = table["k"][mask]
            series = {
                f"v{veh}_v_err": table["v"][mask] - table["v_ref"][mask],
                f"v{veh}_p_err": table["p"][mask] - table["p_ref"][mask],
                f"v{veh}_v": table["v"][mask],
                f"v{veh}_v_ref": table["v_ref"][mask],
            }
            for name, values in series.items():
                for k, value in zip(ks, values):
                    fh.write(f"{name},{int(k)},{float(value)!r}\n")
    if not args.no_figures:
        figures.render_run_figures(table, out_dir)
    _say(args, f"plot data written to {long_path}")
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(prog="platoonctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run all variants on a shared seed")
    _add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="compare across several master seeds")
    _add_common(p_sweep, seeds=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the embedded oracle suite")
    p_val.add_argument("--quiet", action="store_true")
    p_val.set_defaults(func=cmd_validate)

    p_plot = sub.add_parser("plot-data", help="long-format plot export for a finished run")
    p_plot.add_argument("--run-dir", required=True, help="directory containing steps.csv")
    p_plot.add_argument("--out", default=None)
    p_plot.add_argument("--quiet", action="store_true")
    p_plot.add_argument("--no-figures", action="store_true")
    p_plot.set_defaults(func=cmd_plot_data)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
