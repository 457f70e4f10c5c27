"""Command-line pipeline: simulate, classify, crossval, train, forecast, evaluate.

Every command reads one JSON run configuration (``--config``); values can be
overridden with ``--set section.key=value``. Relative paths in the config
are resolved against the config file's directory, except the output
directory which ``--out`` may replace. Exit status is 0 on success, 2 for
user or configuration errors and 1 for internal errors.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .data import align, load_mode_csv, load_panel_csv, to_utc, write_mode_csv, write_panel_csv
from .evaluation import cross_validate, error_distribution, improvement, rmse, site_average
from .evaluation.reports import (
    write_fig4,
    write_fig7,
    write_fig8,
    write_fig9,
    write_grouping_diagnostics,
    write_modestats,
    write_table1,
)
from .exceptions import CvarWindError
from .models import FittedModelSet, ModelSpec, fit, read_forecast_csv, rolling_forecast, write_forecast_csv
from .models.spec import Family
from .regimes import ModeClassifier, davies_bouldin, load_fields, mode_stats, write_fields
from .synth import SynthSpec, simulate

logger = logging.getLogger("cvarwind")


class UserError(Exception):
    """Configuration or input problem; maps to exit status 2."""


DEFAULT_CONFIG = {
    "seed": 0,
    "paths": {
        "panel": "panel.csv",
        "fields": "fields.json",
        "out": "out",
    },
    "classification": {
        "n_modes": 3,
        "k_range": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        "variance_threshold": 0.95,
        "n_rows": 3,
        "n_cols": 7,
        "n_epochs": 10,
        "sigma_end": 0.5,
        "learning_rate_start": 0.5,
        "learning_rate_end": 0.01,
        "kmeans_restarts": 10,
        "weight_by_hits": True,
    },
    "model": {
        "family": "auto",
        "p": "auto",
        "n_modes": "auto",
        "horizons": [1, 2, 3, 4, 5, 6],
        "hours": list(range(24)),
    },
    "crossval": {
        "folds": 10,
        "families": ["Persistence", "VAR", "VAR_Diurnal", "CVAR"],
        "p_values": [3],
        "n_modes": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    },
    "evaluation": {
        "train_end": "2005-12-31T23:00:00Z",
        "test_start": "2006-01-01T00:00:00Z",
        "test_end": None,
        "benchmarks": ["Persistence", "VAR", "VAR_Diurnal", "VAR_Diurnal_ModeDummies"],
        "bin_width": 0.25,
        "fig9_horizon": 1,
    },
    "clamp": True,
}


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path, overrides=(), out=None, seed=None) -> dict:
    path = Path(path)
    if not path.exists():
        raise UserError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UserError(f"{path}: invalid JSON ({exc})") from exc
    cfg = _merge(DEFAULT_CONFIG, user)
    for item in overrides:
        if "=" not in item:
            raise UserError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        node = cfg
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UserError(f"--set {key}: {part} is not a section")
        node[leaf] = _parse_value(value)
    if out is not None:
        cfg["paths"]["out"] = str(out)
    if seed is not None:
        cfg["seed"] = int(seed)
    base = path.parent
    resolved = {}
    for k, v in cfg["paths"].items():
        if v is None:
            continue
        p = Path(v)
        resolved[k] = str(p if p.is_absolute() or (k == "out" and out is not None) else base / p)
    cfg["paths"] = resolved
    ev = cfg["evaluation"]
    if to_utc(ev["train_end"]) >= to_utc(ev["test_start"]):
        raise UserError("evaluation.train_end must precede evaluation.test_start")
    return cfg


def _require(cfg, *keys) -> list:
    paths = []
    for k in keys:
        if k not in cfg["paths"]:
            raise UserError(f"config lacks paths.{k}")
        p = Path(cfg["paths"][k])
        if not p.exists():
            raise UserError(f"input file not found: {p}")
        paths.append(p)
    return paths


def _out_dir(cfg) -> Path:
    out = Path(cfg["paths"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, command: str, cfg: dict, inputs, artifacts, extra=None) -> Path:
    manifest = {
        "command": command,
        "config": cfg,
        "seeds": {"seed": cfg.get("seed")},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "artifacts": sorted(str(Path(a).name) for a in artifacts),
        "versions": {
            "cvarwind": __version__,
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    path = out / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _mode_path(out: Path, k: int) -> Path:
    return out / f"modes_k{k}.csv"


def _training_panel(cfg, panel):
    return panel.between(panel.start, cfg["evaluation"]["train_end"])


def _load_modes_for(out: Path, panel, counts) -> dict:
    modes = {}
    for k in counts:
        path = _mode_path(out, k)
        if not path.exists():
            raise UserError(f"mode file not found: {path} (run classify with k={k} in classification.k_range)")
        _, m = align(panel, load_mode_csv(path, n_modes=k))
        modes[k] = m
    return modes


def _resolve_model_spec(cfg, out: Path) -> ModelSpec:
    m = dict(cfg["model"])
    auto = [k for k in ("family", "p", "n_modes") if m.get(k) == "auto"]
    if auto:
        path = out / "crossval.json"
        if not path.exists():
            raise UserError(f"model.{auto[0]} is 'auto' but {path} does not exist; run crossval first")
        winner = json.loads(path.read_text())["winner"]
        for k in auto:
            m[k] = winner[k]
    family = Family(m["family"])
    n_modes = int(m["n_modes"]) if family.needs_modes else 1
    return ModelSpec(family, int(m["p"]), tuple(m["horizons"]), tuple(m["hours"]), n_modes)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.exists():
        raise UserError(f"synthetic spec not found: {spec_path}")
    try:
        spec = SynthSpec.load(spec_path)
    except (json.JSONDecodeError, TypeError) as exc:
        raise UserError(f"{spec_path}: invalid synthetic spec ({exc})") from exc
    if args.seed is not None:
        spec.seed = int(args.seed)
    out = Path(args.out or spec_path.parent)
    out.mkdir(parents=True, exist_ok=True)
    data = simulate(spec)
    write_panel_csv(data.panel, out / "panel.csv")
    write_mode_csv(data.modes, out / "modes_true.csv")
    written = write_fields(data.fields, out / "fields.json")
    spec.save(out / "synth_spec_full.json")
    artifacts = [out / "panel.csv", out / "modes_true.csv", out / "synth_spec_full.json", *written]
    cfg = {"seed": spec.seed, "spec": str(spec_path)}
    _write_manifest(out, "simulate", cfg, [spec_path], artifacts, {"offset": data.offset})
    logger.info("simulated %d steps, %d sites, %d regimes into %s", len(data.panel), spec.n_sites, spec.n_modes, out)
    return 0


def cmd_classify(cfg) -> int:
    (fields_path,) = _require(cfg, "fields")
    out = _out_dir(cfg)
    fields = load_fields(fields_path)
    c = cfg["classification"]
    # train the classifier on the training period only; label every timestamp
    n_train = int(np.searchsorted(fields.timestamps, pd.Timestamp(to_utc(cfg["evaluation"]["train_end"])), side="right"))
    if n_train < 2:
        raise UserError("fewer than two field timestamps fall in the training period")
    train_fields = fields.with_data(fields.data[:n_train]) if n_train < len(fields) else fields
    clf = ModeClassifier(
        n_modes=int(c["n_modes"]),
        n_modes_range=[int(k) for k in c["k_range"]],
        variance_threshold=float(c["variance_threshold"]),
        n_rows=int(c["n_rows"]),
        n_cols=int(c["n_cols"]),
        n_epochs=int(c["n_epochs"]),
        sigma_end=float(c["sigma_end"]),
        learning_rate_start=float(c["learning_rate_start"]),
        learning_rate_end=float(c["learning_rate_end"]),
        kmeans_restarts=int(c["kmeans_restarts"]),
        weight_by_hits=bool(c["weight_by_hits"]),
        random_state=int(cfg["seed"]),
    ).fit(train_fields)
    artifacts = []
    clf.save(out / "classifier.json")
    artifacts.append(out / "classifier.json")
    diagnostics = []
    for k, grouping in sorted(clf.groupings_.items()):
        modes = clf.predict(fields, k)
        write_mode_csv(modes, _mode_path(out, k))
        artifacts.append(_mode_path(out, k))
        db = float("nan")
        if k >= 2:
            try:
                db = davies_bouldin(clf.som_.weights_, grouping.assignment)
            except CvarWindError:
                pass
        diagnostics.append((k, grouping.wcss, db))
    chosen = clf.predict(fields)
    write_mode_csv(chosen, out / "modes.csv")
    artifacts.append(out / "modes.csv")
    artifacts += write_modestats(mode_stats(chosen), out)
    artifacts.append(write_grouping_diagnostics(diagnostics, out))
    _write_manifest(out, "classify", cfg, [fields_path], artifacts, {
        "n_components": int(clf.pca_.n_components_),
        "quantization_errors": [float(q) for q in clf.som_.quantization_errors_],
    })
    logger.info("classified %d timestamps into %d modes (K=%d PCs)", len(fields), clf.n_modes, clf.pca_.n_components_)
    return 0


def _grid(cfg) -> list:
    cv = cfg["crossval"]
    m = cfg["model"]
    grid = []
    for fam in cv["families"]:
        family = Family(fam)
        if family is Family.PERSISTENCE:
            grid.append(ModelSpec(family, 1, tuple(m["horizons"]), tuple(m["hours"])))
            continue
        for p in cv["p_values"]:
            counts = cv["n_modes"] if family.needs_modes else [1]
            for k in counts:
                grid.append(ModelSpec(family, int(p), tuple(m["horizons"]), tuple(m["hours"]), int(k)))
    return grid


def cmd_crossval(cfg, jobs=1) -> int:
    (panel_path,) = _require(cfg, "panel")
    out = _out_dir(cfg)
    grid = _grid(cfg)
    if not grid:
        raise UserError("crossval grid is empty")
    panel = _training_panel(cfg, load_panel_csv(panel_path))
    counts = sorted({s.n_modes for s in grid if s.family.needs_modes})
    modes = _load_modes_for(out, panel, counts)
    inputs = [panel_path] + [_mode_path(out, k) for k in counts]
    result = cross_validate(panel, modes, grid, k=int(cfg["crossval"]["folds"]), n_jobs=jobs)
    for cell, msg in result.failures.items():
        logger.warning("crossval cell %s failed: %s", cell, msg)
    if result.summary.empty:
        raise UserError("no crossval cell could be fitted")
    artifacts = [write_fig4(result, out)]
    result.scores.to_csv(out / "cv_scores.csv", index=False, float_format="%.6f")
    artifacts.append(out / "cv_scores.csv")
    w = result.winner
    winner = {"family": w.family.value, "p": w.p, "n_modes": w.n_modes}
    (out / "crossval.json").write_text(json.dumps({"winner": winner, "failures": result.failures}, indent=2) + "\n")
    artifacts.append(out / "crossval.json")
    _write_manifest(out, "crossval", cfg, inputs, artifacts, {"winner": winner})
    logger.info("crossval winner: %s", winner)
    return 0


def cmd_train(cfg, jobs=1) -> int:
    (panel_path,) = _require(cfg, "panel")
    out = _out_dir(cfg)
    spec = _resolve_model_spec(cfg, out)
    panel = _training_panel(cfg, load_panel_csv(panel_path))
    modes = None
    inputs = [panel_path]
    if spec.family.needs_modes:
        modes = _load_modes_for(out, panel, [spec.n_modes])[spec.n_modes]
        inputs.append(_mode_path(out, spec.n_modes))
    model = fit(panel, modes, spec, n_jobs=jobs)
    model.save(out / "model.json")
    _write_manifest(out, "train", cfg, inputs, [out / "model.json"], {"spec": spec.to_dict()})
    logger.info("trained %s on %d rows", spec.family.value, len(panel))
    return 0


def _test_window(cfg, panel):
    ev = cfg["evaluation"]
    first = max(to_utc(ev["test_start"]), panel.start)
    last = to_utc(ev["test_end"]) if ev.get("test_end") else panel.end
    last = min(last, panel.end)
    if last < first:
        raise UserError("test window lies outside the panel")
    return panel.index_of(first), panel.index_of(last)


def _load_model(path) -> FittedModelSet:
    if not Path(path).exists():
        raise UserError(f"model file not found: {path}; run train first")
    return FittedModelSet.load(path)


def cmd_forecast(cfg) -> int:
    (panel_path,) = _require(cfg, "panel")
    out = _out_dir(cfg)
    model = _load_model(out / "model.json")
    panel = load_panel_csv(panel_path)
    inputs = [panel_path, out / "model.json"]
    modes = None
    if model.spec.family.needs_modes:
        modes = _load_modes_for(out, panel, [model.spec.n_modes])[model.spec.n_modes]
        panel, modes = align(panel, modes)
        inputs.append(_mode_path(out, model.spec.n_modes))
    window = _test_window(cfg, panel)
    fc = rolling_forecast(model, panel, modes, window, clamp=bool(cfg["clamp"]))
    write_forecast_csv(fc, out / "forecasts.csv")
    n_fallback = int(fc["fallback"].sum())
    _write_manifest(out, "forecast", cfg, inputs, [out / "forecasts.csv"], {"n_records": len(fc), "n_fallback": n_fallback})
    logger.info("wrote %d forecast records (%d fallback)", len(fc), n_fallback)
    return 0


def _model_name(spec: ModelSpec) -> str:
    return spec.family.value


def cmd_evaluate(cfg, jobs=1) -> int:
    (panel_path,) = _require(cfg, "panel")
    out = _out_dir(cfg)
    model = _load_model(out / "model.json")
    fc_path = out / "forecasts.csv"
    if not fc_path.exists():
        raise UserError(f"forecast file not found: {fc_path}; run forecast first")
    panel = load_panel_csv(panel_path)
    conditional = model.spec.family.needs_modes
    k = model.spec.n_modes if conditional else int(cfg["classification"]["n_modes"])
    modes = _load_modes_for(out, panel, [k])[k]
    panel, modes = align(panel, modes)
    train = _training_panel(cfg, panel)
    train_modes = modes.slice(0, len(train))
    window = _test_window(cfg, panel)

    records = [read_forecast_csv(fc_path, panel).assign(model=_model_name(model.spec))]
    for name in cfg["evaluation"]["benchmarks"]:
        family = Family(name)
        if family is model.spec.family:
            continue
        spec = model.spec.replace(family=family.value, n_modes=k if family.needs_modes else 1)
        bench = fit(train, train_modes if family.needs_modes else None, spec, n_jobs=jobs)
        fc = rolling_forecast(bench, panel, modes if family.needs_modes else None, window, clamp=bool(cfg["clamp"]))
        records.append(fc.assign(model=_model_name(spec)))
    allfc = pd.concat(records, ignore_index=True)

    per_site = rmse(allfc, panel, by=("model", "horizon", "site"))
    table = site_average(per_site, by=("model", "horizon"))
    artifacts = [write_table1(table, out)]
    ref = "Persistence" if "Persistence" in set(table["model"]) else None
    if ref is not None:
        artifacts.append(write_fig7(improvement(table, ref), out))
    artifacts.append(write_fig8(per_site, out))
    main = allfc[(allfc["model"] == _model_name(model.spec)) & (allfc["horizon"] == cfg["evaluation"]["fig9_horizon"])]
    hist, moments = error_distribution(main, panel, modes, bin_width=float(cfg["evaluation"]["bin_width"]))
    artifacts += write_fig9(hist, moments, out)
    inputs = [panel_path, out / "model.json", fc_path, _mode_path(out, k)]
    _write_manifest(out, "evaluate", cfg, inputs, artifacts)
    logger.info("evaluation tables written to %s", out)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvarwind", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="run configuration JSON")
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override a config value (dotted key; value parsed as JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the random seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for independent fits")
        p.add_argument("--quiet", action="store_true", help="only report warnings and errors")

    p = sub.add_parser("simulate", help="generate a synthetic panel, modes and fields")
    p.add_argument("spec", help="synthetic spec JSON")
    common(p, config=False)
    for name, text in [
        ("classify", "train PCA+SOM+k-means and write mode series"),
        ("crossval", "k-fold cross-validation over the model grid"),
        ("train", "fit the selected model on the training period"),
        ("forecast", "rolling forecasts over the test period"),
        ("evaluate", "score forecasts and write report tables"),
        ("pipeline", "classify, crossval, train, forecast and evaluate"),
    ]:
        common(sub.add_parser(name, help=text))
    return parser


def _dispatch(args) -> int:
    if args.command == "simulate":
        return cmd_simulate(args)
    cfg = load_config(args.config, args.set, args.out, args.seed)
    jobs = max(1, args.jobs)
    steps = {
        "classify": lambda: cmd_classify(cfg),
        "crossval": lambda: cmd_crossval(cfg, jobs),
        "train": lambda: cmd_train(cfg, jobs),
        "forecast": lambda: cmd_forecast(cfg),
        "evaluate": lambda: cmd_evaluate(cfg, jobs),
    }
    if args.command == "pipeline":
        for name in ("classify", "crossval", "train", "forecast", "evaluate"):
            steps[name]()
        return 0
    return steps[args.command]()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except (UserError, CvarWindError, FileNotFoundError, KeyError, ValueError) as exc:
        msg = f"{exc.filename}: file not found" if isinstance(exc, FileNotFoundError) and exc.filename else str(exc)
        print(f"cvarwind {args.command}: error: {msg}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"cvarwind {args.command}: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
