"""Experiment runner: parse a JSON config, run seeded trials, emit tables.

Exit codes: 0 on success, 2 on unreadable or schema-invalid configuration,
3 when any trial aborted with RestartLimitExceeded or BudgetExhausted.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import importlib.resources
import json
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from .boost import PoolConfig, RestartLimitExceeded, RunConfig, RunResult, run
from .crowd import strategy_from_name
from .domain import DistributionSpec, PacParams
from .expert import BudgetExhausted
from .metrics import overheads, true_error, true_error_mc

__all__ = ["main", "run_experiment"]

CSV_COLUMNS = [
    "trial", "seed", "err_exact", "err_mc", "m_L", "m_C",
    "verified_labels", "verified_comparisons", "restarts",
    "lambda_L", "lambda_C", "phase_skipped", "wall_ms",
]

ENV_SEED = "CROWDPAC_SEED"


def _schema() -> dict:
    text = importlib.resources.files("crowdpac").joinpath("config_schema.json").read_text()
    return json.loads(text)


def load_config(path: str | Path, overrides: list[str] | None = None) -> dict:
    """Read, override, and schema-validate a config; raises on any problem."""
    with open(path) as f:
        config = json.load(f)
    for item in overrides or []:
        key, _, value = item.partition("=")
        if not _:
            raise ValueError(f"override {item!r} is not KEY=VALUE")
        _apply_override(config, key.split("."), value)
    jsonschema.validate(config, _schema())
    return config


def _apply_override(config: dict, dotted: list[str], value: str) -> None:
    node = config
    for part in dotted[:-1]:
        node = node.setdefault(part, {})
    try:
        node[dotted[-1]] = json.loads(value)
    except json.JSONDecodeError:
        node[dotted[-1]] = value


def _build_run_config(config: dict, seed: int) -> RunConfig:
    def pool_config(section: dict) -> PoolConfig:
        name = section.get("adversary")
        strategy = strategy_from_name(name, section.get("params")) if name else None
        return PoolConfig(size=section["size"], adversary=strategy)

    multipliers = config.get("multipliers", {})
    caps = config.get("budget_caps", {})
    dist = config["distribution"]
    return RunConfig(
        alpha0=config["alpha0"],
        beta0=config["beta0"],
        pac=PacParams(
            epsilon=config["epsilon"],
            delta=config["delta"],
            vc_dim=config.get("vc_dim", 1),
            big_k=config.get("big_k", 1.0),
        ),
        dist=DistributionSpec(
            family=dist["family"],
            params=tuple(dist["params"]),
            theta_star=dist["theta_star"],
            seed=seed,
        ),
        label_pool=pool_config(config["pools"]["label"]),
        comparison_pool=pool_config(config["pools"]["comparison"]),
        c2=multipliers.get("c2", 1.0),
        c_c=multipliers.get("cC", 1.0),
        c_w=multipliers.get("cW", 1.0),
        max_restarts=config.get("max_restarts"),
        label_cap=caps.get("labels"),
        comparison_cap=caps.get("comparisons"),
        seed=seed,
    )


def _run_trial(args: tuple[dict, int, int, bool]) -> dict:
    config, trial, seed, stable_output = args
    cfg = _build_run_config(config, seed)
    t0 = time.perf_counter()
    try:
        result: RunResult = run(cfg)
    except (RestartLimitExceeded, BudgetExhausted) as exc:
        return {"trial": trial, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    wall_ms = 0 if stable_output else int((time.perf_counter() - t0) * 1000)
    err_exact = true_error(result.hypothesis, cfg.dist)
    mc_rng = np.random.default_rng([seed, 1])
    err_mc = true_error_mc(result.hypothesis, cfg.dist, config.get("mc_samples", 100000), mc_rng)
    lam_l, lam_c = overheads(result.ledger, cfg.pac)
    return {
        "trial": trial,
        "seed": seed,
        "err_exact": err_exact,
        "err_mc": err_mc,
        "m_L": result.ledger.m_L,
        "m_C": result.ledger.m_C,
        "verified_labels": result.ledger.verified_labels,
        "verified_comparisons": result.ledger.verified_comparisons,
        "restarts": result.restart_count,
        "lambda_L": lam_l,
        "lambda_C": lam_c,
        "phase_skipped": int(result.phase_skipped),
        "wall_ms": wall_ms,
        "events_jsonl": result.ledger.to_jsonl(),
    }


def _aggregate(rows: list[dict], errors: list[dict], epsilon: float) -> dict:
    def stats(key: str) -> dict:
        values = [r[key] for r in rows]
        if not values:
            return {"min": None, "max": None, "mean": None}
        return {
            "min": min(values),
            "max": max(values),
            "mean": sum(values) / len(values),
        }

    summary = {
        "trials": len(rows) + len(errors),
        "completed": len(rows),
        "failed": len(errors),
        "failures": errors,
        "epsilon": epsilon,
        "frac_within_epsilon": (
            sum(1 for r in rows if r["err_exact"] <= epsilon) / len(rows) if rows else None
        ),
    }
    for key in ("err_exact", "err_mc", "m_L", "m_C", "verified_labels",
                "verified_comparisons", "restarts", "lambda_L", "lambda_C"):
        summary[key] = stats(key)
    return summary


def run_experiment(
    config_path: str | Path,
    overrides: list[str] | None = None,
    out_dir: str | Path = ".",
    trials: int | None = None,
    base_seed: int | None = None,
    jobs: int = 1,
    trace: bool = False,
    quiet: bool = False,
    stable_output: bool = False,
) -> int:
    """Run T seeded trials and write results.csv plus summary.json."""
    try:
        config = load_config(config_path, overrides)
    except (OSError, ValueError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    n_trials = trials if trials is not None else config.get("trials", 1)
    if base_seed is None:
        base_seed = config.get("base_seed")
    if base_seed is None:
        base_seed = int(os.environ.get(ENV_SEED, "0"))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(config, t, base_seed + t, stable_output) for t in range(n_trials)]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial, tasks))
    else:
        results = [_run_trial(task) for task in tasks]

    results.sort(key=lambda r: r["trial"])
    rows = [r for r in results if "error" not in r]
    errors = [r for r in results if "error" in r]

    with open(out / "results.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_format_cell(r[c]) for c in CSV_COLUMNS])

    summary = _aggregate(rows, errors, config["epsilon"])
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")

    if trace:
        with open(out / "events.jsonl", "w") as f:
            for r in rows:
                for line in r["events_jsonl"].splitlines():
                    event = json.loads(line)
                    event["trial"] = r["trial"]
                    f.write(json.dumps(event) + "\n")

    if not quiet:
        for r in rows:
            print(
                f"trial {r['trial']:3d} seed {r['seed']} "
                f"err={r['err_exact']:.5f} restarts={r['restarts']} "
                f"verified=({r['verified_labels']},{r['verified_comparisons']})"
            )
        for e in errors:
            print(f"trial {e['trial']:3d} seed {e['seed']} FAILED: {e['error']}")
        frac = summary["frac_within_epsilon"]
        print(
            f"{len(rows)}/{n_trials} trials completed; "
            f"within epsilon: {frac if frac is not None else 'n/a'}"
        )
    return 3 if errors else 0


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="crowdpac",
        description="Run semi-verified crowdsourced threshold-learning experiments.",
    )
    parser.add_argument("--config", required=True, help="path to JSON config")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY=VALUE", help="dotted-path config override (repeatable)",
    )
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None, help="base seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    parser.add_argument("--trace", action="store_true", help="write events.jsonl")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument(
        "--stable-output", action="store_true",
        help="write wall_ms as 0 so identical (config, seed) gives identical bytes",
    )
    args = parser.parse_args(argv)
    return run_experiment(
        args.config,
        overrides=args.overrides,
        out_dir=args.out,
        trials=args.trials,
        base_seed=args.seed,
        jobs=args.jobs,
        trace=args.trace,
        quiet=args.quiet,
        stable_output=args.stable_output,
    )


if __name__ == "__main__":
    sys.exit(main())
