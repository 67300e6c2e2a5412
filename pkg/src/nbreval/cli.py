"""Command-line pipeline: ingest/synth -> run -> eval -> analyze.

Stages talk only through files in the output directory, so an external
method can drop its own prediction file in before ``eval``.

Exit codes: 0 ok, 2 configuration error, 3 data/validation error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from nbreval._io import atomic_write_text, write_json
from nbreval.analysis import (
    component_plot_data,
    component_profile,
    compare_methods,
    contribution_decomposition,
    contribution_plot_data,
)
from nbreval.baselines import SMALL_GRID, make_recommender, params_dict, resolve_methods
from nbreval.dataset import TARGET_MODES, DatasetBundle, build_cohort, load_canonical, write_canonical
from nbreval.errors import ConfigError, DataError
from nbreval.ingest import SCHEMAS, SIZE_FILTER_MODES, ParseReport, PreprocessConfig, limit_days, parse_source, preprocess
from nbreval.metrics import MetricsReport, evaluate, to_csv
from nbreval.predictions import PredictionHeader, read_and_validate, read_header, write_predictions
from nbreval.synth import SynthConfig, generate

logger = logging.getLogger("nbreval")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_IO = 0, 2, 3, 4
DATA_ROOT_ENV = "NBREVAL_DATA_ROOT"

DEFAULTS = {
    "out": ".",
    "seed": 0,
    "workers": 1,
    "k": [10, 20],
    "target": "rolling",
    # ingest
    "name": None,
    "max_days": None,
    "min_baskets": 3,
    "max_baskets": 50,
    "coverage": 0.95,
    "size_filter": "basket-count",
    # synth
    "users": 500,
    "items": 1000,
    "baskets": [4, 20],
    "basket_size": [3, 10],
    "repeat_prob": 0.5,
    "popularity_exponent": 1.0,
    # run
    "method": "all-frequency",
    "grid": None,
}


def _k_list(text: str) -> list[int]:
    try:
        ks = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("K values must be >= 1")
    return ks


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: .)")
    common.add_argument("--seed", type=int, help="random seed (default: 0)")
    common.add_argument("--workers", type=int, help="per-user parallelism (default: 1)")
    common.add_argument("--k", type=_k_list, help="basket sizes, comma separated (default: 10,20)")
    common.add_argument("--config", help="JSON config file; command-line flags take precedence")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nbreval", description="Next-basket recommendation evaluation harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="raw transactions -> canonical dataset")
    p.add_argument("--schema", required=True, choices=SCHEMAS + ("synthetic",))
    p.add_argument("--in", dest="input", help="raw data file (directory for instacart)")
    p.add_argument("--name", help="dataset name (default: schema name)")
    p.add_argument("--max-days", type=int, help="keep only the first N days of the log")
    p.add_argument("--min-baskets", type=int)
    p.add_argument("--max-baskets", type=int)
    p.add_argument("--coverage", type=float, help="share of interactions the kept items must cover")
    p.add_argument("--size-filter", choices=SIZE_FILTER_MODES, help="read the [min, max] bounds as basket count or basket size")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic canonical dataset")
    p.add_argument("--name")
    p.add_argument("--users", type=int)
    p.add_argument("--items", type=int)
    p.add_argument("--baskets", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--basket-size", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--repeat-prob", type=float)
    p.add_argument("--popularity-exponent", type=float)

    p = sub.add_parser("run", parents=[common], help="fit baselines and write prediction files")
    p.add_argument("--data", required=True, help="canonical dataset directory")
    p.add_argument("--method", help="baseline name, all-frequency, all-neighbor or all")
    p.add_argument("--grid", choices=("small",), help="try the built-in grid and select by validation recall")
    p.add_argument("--target", choices=TARGET_MODES)

    p = sub.add_parser("eval", parents=[common], help="score prediction files")
    p.add_argument("--data", required=True)
    p.add_argument("--pred", required=True, nargs="+")
    p.add_argument("--target", choices=TARGET_MODES)

    p = sub.add_parser("analyze", parents=[common], help="component profiles, contributions, comparison tables")
    p.add_argument("--data", required=True)
    p.add_argument("--pred", required=True, nargs="+")
    p.add_argument("--report", nargs="*", default=[], help="report files from eval (recomputed when omitted)")
    p.add_argument("--target", choices=TARGET_MODES)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge flags > config file > defaults into one flat dict."""
    file_cfg: dict = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
    cfg = dict(DEFAULTS)
    cfg.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    explicit = []
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "verbose"):
            cfg[key] = value
            explicit.append(key)
    cfg["_explicit"] = explicit
    if isinstance(cfg["k"], int):
        cfg["k"] = [cfg["k"]]
    if not cfg["k"] or any(int(k) < 1 for k in cfg["k"]):
        raise ConfigError("K values must be >= 1")
    if int(cfg["workers"]) < 1:
        raise ConfigError("--workers must be >= 1")
    cfg["k"] = sorted({int(k) for k in cfg["k"]})
    return cfg


def _data_path(path: str) -> Path:
    root = os.environ.get(DATA_ROOT_ENV)
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _echo_config(cfg: dict, out: Path) -> None:
    write_json(out / f"config.{cfg['command']}.json", {k: v for k, v in cfg.items() if not k.startswith("_")})


# CLI/config key -> SynthConfig field
_SYNTH_KEYS = {
    "users": "n_users",
    "items": "n_items",
    "baskets": "baskets_per_user",
    "basket_size": "basket_size",
    "repeat_prob": "repeat_prob",
    "popularity_exponent": "popularity_exponent",
    "seed": "seed",
    "name": "name",
}


def _synth_config(cfg: dict) -> SynthConfig:
    """Flat keys, then a nested ``synth`` object from the config file, then explicit flags."""
    params = {field: cfg[key] for key, field in _SYNTH_KEYS.items() if cfg.get(key) is not None}
    nested = cfg.get("synth")
    if isinstance(nested, dict):
        params.update({k.replace("-", "_"): v for k, v in nested.items()})
    for key in cfg.get("_explicit", ()):
        if key in _SYNTH_KEYS:
            params[_SYNTH_KEYS[key]] = cfg[key]
    return SynthConfig.from_dict(params)


def _write_dataset(bundle: DatasetBundle, out: Path) -> None:
    write_canonical(bundle, out)
    stats = bundle.stats
    write_json(out / "stats.json", {"name": bundle.name, **stats.__dict__})
    print(stats.to_table(bundle.name))


def cmd_ingest(cfg: dict) -> int:
    out = Path(cfg["out"])
    if cfg["schema"] == "synthetic":
        bundle = generate(_synth_config(cfg), cfg["workers"])
    else:
        if not cfg.get("input"):
            raise ConfigError("ingest needs --in for schema " + cfg["schema"])
        pre = PreprocessConfig(
            min_baskets_per_user=cfg["min_baskets"],
            max_baskets_per_user=cfg["max_baskets"],
            interaction_coverage=cfg["coverage"],
            size_filter=cfg["size_filter"],
        )
        report = ParseReport()
        rows = parse_source(_data_path(cfg["input"]), cfg["schema"], report)
        if cfg.get("max_days"):
            if cfg["schema"] == "instacart":
                raise ConfigError("--max-days needs calendar days; instacart only has order numbers")
            rows = limit_days(rows, cfg["max_days"])
        bundle = preprocess(rows, pre, cfg.get("name") or cfg["schema"])
        logger.info("parsed %d rows, kept %d", report.rows, report.kept)
    _write_dataset(bundle, out)
    _echo_config(cfg, out)
    return EXIT_OK


def cmd_synth(cfg: dict) -> int:
    out = Path(cfg["out"])
    _write_dataset(generate(_synth_config(cfg), cfg["workers"]), out)
    _echo_config(cfg, out)
    return EXIT_OK


def _fit_predict(name, params, bundle, segment, cohort, k, workers):
    model = make_recommender(name, params)
    model.fit(bundle.fit_histories(segment), len(bundle.vocabulary))
    return model, model.predict_cohort(cohort, k, workers)


def cmd_run(cfg: dict) -> int:
    out = Path(cfg["out"])
    bundle = load_canonical(_data_path(cfg["data"]))
    cohort = build_cohort(bundle, "test", cfg["target"])
    k_max = max(cfg["k"])
    pred_dir = out / "predictions"
    for name in resolve_methods(cfg["method"]):
        params = cfg.get(name) if isinstance(cfg.get(name), dict) else None
        if cfg.get("grid") and name in SMALL_GRID:
            val_cohort = build_cohort(bundle, "val", cfg["target"])
            entries, best = [], None
            for idx, grid_params in enumerate(SMALL_GRID[name]):
                _, val_preds = _fit_predict(name, grid_params, bundle, "val", val_cohort, k_max, cfg["workers"])
                val_recall = evaluate(val_preds, val_cohort, [k_max])[k_max].recall
                model, preds = _fit_predict(name, grid_params, bundle, "test", cohort, k_max, cfg["workers"])
                fname = f"{name}.grid{idx}.jsonl"
                write_predictions(preds, PredictionHeader.for_bundle(name, bundle, k_max), pred_dir / fname)
                entries.append({"index": idx, "params": params_dict(model), "val_recall": val_recall, "file": fname})
                if best is None or val_recall > entries[best]["val_recall"]:
                    best = idx
            manifest = {"method": name, "k": k_max, "selection_metric": f"recall@{k_max} on validation", "best": best, "grid": entries}
            write_json(pred_dir / f"{name}.selection.json", manifest)
            params = SMALL_GRID[name][best]
            logger.info("%s: grid point %d selected (validation recall %.4f)", name, best, entries[best]["val_recall"])
        _, preds = _fit_predict(name, params, bundle, "test", cohort, k_max, cfg["workers"])
        path = write_predictions(preds, PredictionHeader.for_bundle(name, bundle, k_max), pred_dir / f"{name}.jsonl")
        print(f"{name}: {len(preds)} predictions -> {path}")
    _echo_config(cfg, out)
    return EXIT_OK


def _load_predictions(path, bundle, cohort, target_mode):
    header = read_header(path)
    preds = read_and_validate(path, bundle, cohort, allow_extra=target_mode != "rolling")
    return header, preds


def _compute_reports(cfg, bundle, cohort) -> dict[str, dict[int, MetricsReport]]:
    out = {}
    for path in cfg["pred"]:
        header, preds = _load_predictions(path, bundle, cohort, cfg["target"])
        ks = [k for k in cfg["k"] if k <= header.k]
        if len(ks) < len(cfg["k"]):
            logger.warning("%s: capacity %d, skipping larger K", path, header.k)
        if header.method in out:
            raise ConfigError(f"two prediction files claim method {header.method!r}")
        out[header.method] = evaluate(preds, cohort, ks, header.method, bundle.name, cfg["workers"])
    return out


def cmd_eval(cfg: dict) -> int:
    out = Path(cfg["out"])
    bundle = load_canonical(_data_path(cfg["data"]))
    cohort = build_cohort(bundle, "test", cfg["target"])
    for method, reports in _compute_reports(cfg, bundle, cohort).items():
        rows = [reports[k] for k in sorted(reports)]
        payload = {"method": method, "dataset": bundle.name, "target_mode": cfg["target"], "reports": [r.to_dict() for r in rows]}
        write_json(out / "reports" / f"{method}.json", payload)
        atomic_write_text(out / "reports" / f"{method}.csv", to_csv(rows))
        for r in rows:
            print(f"{method:<14} K={r.k:<3} recall={r.recall:.4f} ndcg={r.ndcg:.4f} phr={r.phr:.4f} repr={r.repr:.3f} explr={r.explr:.3f}")
    _echo_config(cfg, out)
    return EXIT_OK


def _read_report_file(path) -> list[MetricsReport]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [MetricsReport.from_dict(r) for r in data["reports"]]


def cmd_analyze(cfg: dict) -> int:
    out = Path(cfg["out"]) / "analysis"
    bundle = load_canonical(_data_path(cfg["data"]))
    cohort = build_cohort(bundle, "test", cfg["target"])
    if cfg.get("report"):
        reports = [r for path in cfg["report"] for r in _read_report_file(path)]
    else:
        reports = [r for per_k in _compute_reports(cfg, bundle, cohort).values() for r in per_k.values()]
    table = compare_methods(reports)
    if table.dataset != bundle.name:
        raise ConfigError(f"reports are for dataset {table.dataset!r}, not {bundle.name!r}")
    atomic_write_text(out / "comparison.csv", table.to_csv())
    atomic_write_text(out / "comparison.txt", table.to_text())
    print(table.to_text())

    predictions = {}
    for path in cfg["pred"]:
        header, preds = _load_predictions(path, bundle, cohort, cfg["target"])
        predictions[header.method] = (header.k, preds)
    components, contributions = [], []
    for k in cfg["k"]:
        profiles, breakdowns = [], []
        for method, (cap, preds) in predictions.items():
            if k > cap:
                continue
            profiles.append(component_profile(preds, cohort, k, method))
            breakdowns.append(contribution_decomposition(preds, cohort, k, method))
        if not profiles:
            continue
        components += [p.__dict__ for p in profiles]
        contributions += [b.__dict__ for b in breakdowns]
        write_json(out / f"plot_components_k{k}.json", component_plot_data(profiles))
        write_json(out / f"plot_contributions_k{k}.json", contribution_plot_data(breakdowns, profiles[0]))
    write_json(out / "components.json", components)
    write_json(out / "contributions.json", contributions)
    _echo_config(cfg, Path(cfg["out"]))
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "synth": cmd_synth, "run": cmd_run, "eval": cmd_eval, "analyze": cmd_analyze}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg["command"]](cfg)
    except ConfigError as exc:
        print(f"nbreval: configuration error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"nbreval: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"nbreval: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
