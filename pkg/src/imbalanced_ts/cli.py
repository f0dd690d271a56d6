"""Command-line interface: ``imbts {synth,weights,sample,evaluate,select}``.

Every subcommand reads one YAML (or JSON) config file; ``--set key.path=value``
and the dedicated flags override individual fields.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import dataset as D
from . import evaluation as E
from . import histogram as H
from . import models as M
from . import sampling as S
from . import weights as W
from .errors import ConfigError, ImbalancedTSError, UnknownChannel

OUTPUT_DIR_ENV = "IMBTS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "imbts-out"

logger = logging.getLogger("imbalanced_ts")


# --------------------------------------------------------------------------
# Config
# --------------------------------------------------------------------------


@dataclass
class DataConfig:
    csv: Path | None = None
    synthetic: D.SyntheticConfig | None = None
    target_channel: str | None = None
    interval_seconds: float = 10.0


@dataclass
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    window: D.WindowSpec = field(default_factory=lambda: D.WindowSpec(30, 30))
    weight_function: W.WeightFunctionSpec = field(default_factory=lambda: W.TargetVariation(30))
    samplers: list = field(default_factory=lambda: [S.SUS(1.0), S.SUS(3.0), S.IHS()])
    model: M.ModelSpec = field(default_factory=M.Ridge)
    n_train: int = 10_000
    n_eval: int = 2_000
    train_fraction: float = 0.7
    n_replicates: int = 10
    seed: int = 0
    output_dir: Path | None = None
    n_jobs: int = 1


_TOP_KEYS = {
    "data", "window", "weight_function", "samplers", "model", "n_train", "n_eval",
    "train_fraction", "n_replicates", "seed", "output_dir", "n_jobs",
}


def _require_int(d, key, path, minimum):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(path, f"must be an integer >= {minimum}, got {v!r}")
    return v


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(path, f"expected a mapping, got {type(d).__name__}")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}" if path else sorted(extra)[0], f"unknown field; allowed: {sorted(allowed)}")


def _build(cls, kwargs, path):
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    except (ImbalancedTSError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_data(d) -> DataConfig:
    _check_keys(d, {"csv", "synthetic", "target_channel", "interval_seconds"}, "data")
    if ("csv" in d) == ("synthetic" in d):
        raise ConfigError("data", "give exactly one of 'csv' or 'synthetic'")
    interval = d.get("interval_seconds", 10.0)
    if not isinstance(interval, (int, float)) or isinstance(interval, bool) or not interval > 0:
        raise ConfigError("data.interval_seconds", f"must be a positive number, got {interval!r}")
    out = DataConfig(target_channel=d.get("target_channel"), interval_seconds=float(interval))
    if "csv" in d:
        out.csv = Path(d["csv"])
    else:
        syn = d["synthetic"] or {}
        allowed = {f.name for f in fields(D.SyntheticConfig)}
        _check_keys(syn, allowed, "data.synthetic")
        syn = dict(syn)
        syn.setdefault("interval_seconds", out.interval_seconds)
        if out.target_channel is not None:
            syn.setdefault("target_channel", out.target_channel)
        out.synthetic = _build(D.SyntheticConfig, syn, "data.synthetic")
        out.target_channel = out.synthetic.target_channel
    return out


def _parse_weight(d, window: D.WindowSpec):
    _check_keys(d, {"kind", "delta_steps", "channel", "stat"}, "weight_function")
    kind = str(d.get("kind", "target_variation")).lower()
    if kind == "target_variation":
        return _build(W.TargetVariation, {"delta_steps": d.get("delta_steps", window.horizon_steps)}, "weight_function")
    if kind == "target_level":
        return W.TargetLevel()
    if kind == "channel_window_stat":
        if "channel" not in d:
            raise ConfigError("weight_function.channel", "required for channel_window_stat")
        return _build(W.ChannelWindowStat, {"channel": d["channel"], "stat": d.get("stat", "mean")}, "weight_function")
    raise ConfigError(
        "weight_function.kind",
        f"unknown kind {kind!r}; expected target_variation, target_level or channel_window_stat",
    )


def _parse_sampler_entry(entry, path):
    if isinstance(entry, dict):
        entry = dict(entry)
        kind = str(entry.pop("kind", "")).upper()
        param = next(iter(entry.values()), None) if entry else None
        entry = kind if param is None else f"{kind}-{param}"
    try:
        return S.parse_sampler(str(entry))
    except ImbalancedTSError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(raw: dict) -> PipelineConfig:
    raw = raw or {}
    _check_keys(raw, _TOP_KEYS, "")
    cfg = PipelineConfig()
    cfg.data = _parse_data(raw.get("data", {"synthetic": {}}))
    if "window" in raw:
        w = raw["window"]
        _check_keys(w, {"length_steps", "horizon_steps"}, "window")
        cfg.window = _build(
            D.WindowSpec,
            {"length_steps": w.get("length_steps", 30), "horizon_steps": w.get("horizon_steps", 30)},
            "window",
        )
    cfg.weight_function = _parse_weight(raw.get("weight_function", {}), cfg.window)
    if "samplers" in raw:
        if not isinstance(raw["samplers"], list) or not raw["samplers"]:
            raise ConfigError("samplers", "must be a nonempty list of sampler labels")
        cfg.samplers = [_parse_sampler_entry(s, f"samplers[{i}]") for i, s in enumerate(raw["samplers"])]
    if "model" in raw:
        try:
            cfg.model = M.model_spec_from_dict(raw["model"])
        except ImbalancedTSError as exc:
            raise ConfigError("model", str(exc)) from None
    for key, minimum in (("n_train", 1), ("n_eval", 1), ("n_replicates", 1), ("seed", 0), ("n_jobs", 1)):
        if key in raw:
            setattr(cfg, key, _require_int(raw, key, key, minimum))
    if "train_fraction" in raw:
        tf = raw["train_fraction"]
        if isinstance(tf, bool) or not isinstance(tf, (int, float)) or not 0 < tf < 1:
            raise ConfigError("train_fraction", f"must lie in (0, 1), got {tf!r}")
        cfg.train_fraction = float(tf)
    if raw.get("output_dir") is not None:
        cfg.output_dir = Path(raw["output_dir"])
    return cfg


def _set_path(tree: dict, dotted: str, value):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def load_config(path=None, overrides=()) -> PipelineConfig:
    """Read a config file (YAML or JSON) and apply ``key.path=value`` overrides."""
    raw = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(str(path), f"not valid YAML: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key.path=value")
        key, value = item.split("=", 1)
        _set_path(raw, key.strip(), yaml.safe_load(value))
    return parse_config(raw)


def resolve_output_dir(cfg: PipelineConfig) -> Path:
    if cfg.output_dir is not None:
        return cfg.output_dir
    return Path(os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def load_dataset(cfg: PipelineConfig) -> D.TimeSeriesDataset:
    """Materialise the configured data source and check referenced channels."""
    if cfg.data.csv is not None:
        try:
            ds = D.load_csv(cfg.data.csv, cfg.data.target_channel, cfg.data.interval_seconds)
        except UnknownChannel as exc:
            raise ConfigError("data.target_channel", str(exc)) from None
    else:
        ds = D.generate_synthetic(cfg.data.synthetic)
    if isinstance(cfg.weight_function, W.ChannelWindowStat) and cfg.weight_function.channel not in ds.channel_names:
        raise ConfigError(
            "weight_function.channel",
            f"unknown channel {cfg.weight_function.channel!r}; available: {list(ds.channel_names)}",
        )
    try:
        E.check_weight_horizon(cfg.weight_function, cfg.window)
    except ImbalancedTSError as exc:
        raise ConfigError("weight_function.delta_steps", str(exc)) from None
    return ds


def _file_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", label)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_synth(cfg: PipelineConfig, out_dir: Path) -> Path:
    if cfg.data.synthetic is None:
        raise ConfigError("data.synthetic", "the synth command needs a synthetic data source")
    series = D.simulate(cfg.data.synthetic)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "dataset.csv"
    D.write_csv(series.dataset, path)
    ds = series.dataset
    print(f"wrote {path}: T={ds.n_steps} C={ds.n_channels} events={series.n_events} target={ds.target_channel}")
    return path


def _train_weights(cfg, ds):
    train_range, _ = D.split_chronological(ds, cfg.window, cfg.train_fraction)
    return W.compute_weights(ds, cfg.window, cfg.weight_function, train_range)


def cmd_weights(cfg: PipelineConfig, out_dir: Path) -> dict:
    ds = load_dataset(cfg)
    series = _train_weights(cfg, ds)
    summary = W.summarize(series)
    out_dir.mkdir(parents=True, exist_ok=True)
    W.write_weights_csv(series, out_dir / "weights.csv")
    (out_dir / "weights_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / 'weights.csv'} ({summary['count']} train-pool weights)")
    print("  ".join(f"{k}={v:.4g}" for k, v in summary.items() if k != "count"))
    return summary


def cmd_sample(cfg: PipelineConfig, out_dir: Path, label: str):
    try:
        sampler = S.parse_sampler(label)
    except ImbalancedTSError:
        configured = ", ".join(s.label for s in [S.NoSampling(), *cfg.samplers])
        raise ConfigError(
            "sampler",
            f"unknown sampler label {label!r}; valid labels: {', '.join(S.LABEL_FORMS)} "
            f"(configured: {configured})",
        ) from None
    ds = load_dataset(cfg)
    series = _train_weights(cfg, ds)
    sample = S.draw(sampler, series, cfg.n_train, E.derive_seed(cfg.seed, sampler.label, 0, "train"))
    report = H.density_report(series, series.weight_of(sample.indices))
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _file_label(sampler.label)
    S.write_sample(sample, out_dir / f"sample_{stem}.csv", out_dir / f"sample_{stem}.json")
    H.write_density_csv(report, out_dir / f"density_{stem}.csv")
    print(f"{sampler.label}: drew {len(sample)} of {len(series)} train-pool indices")
    print(
        f"flatness (max/min positive-bin density): before={H.flatness_ratio(report.density_before):.4g} "
        f"after={H.flatness_ratio(report.density_after):.4g}"
    )
    print(H.render_ascii(report))
    return sample, report


def cmd_evaluate(cfg: PipelineConfig, out_dir: Path) -> tuple[E.EvalMatrix, E.SelectionResult]:
    ds = load_dataset(cfg)
    matrix = E.cross_evaluate(
        ds, cfg.window, cfg.weight_function, cfg.samplers, cfg.model,
        n_train=cfg.n_train, n_eval=cfg.n_eval, n_replicates=cfg.n_replicates,
        seed=cfg.seed, train_fraction=cfg.train_fraction, n_jobs=cfg.n_jobs,
    )
    selection = E.select_sampler(matrix)
    out_dir.mkdir(parents=True, exist_ok=True)
    E.write_matrix_csv(matrix, out_dir / "matrix.csv")
    table = E.format_table(matrix)
    (out_dir / "matrix.txt").write_text(table + "\n", encoding="utf-8")
    E.write_triples_csv(matrix.records, out_dir / "triples.csv")
    E.write_selection_json(selection, out_dir / "selection.json")

    # refit the selected sampler's replicate-0 model for later use
    chosen = S.parse_sampler(selection.selected)
    series = _train_weights(cfg, ds)
    sample = S.draw(chosen, series, cfg.n_train, E.derive_seed(cfg.seed, chosen.label, 0, "train"))
    windows, targets = D.windows_at(ds, cfg.window, sample.indices)
    spec = cfg.model
    if isinstance(spec, M.MLP):
        spec = M.MLP(**{**vars(spec), "seed": E.derive_seed(spec.seed, chosen.label, 0, "fit") % 2**32})
    model = M.fit(spec, windows, targets, target_index=ds.channel_index(cfg.window.target_channel or ds.target_channel))
    M.save_model(model, out_dir / f"model_{_file_label(chosen.label)}.json")

    print(table)
    print(json.dumps(selection.to_dict(), indent=2))
    return matrix, selection


def cmd_select(matrix_csv, output=None) -> E.SelectionResult:
    matrix = E.read_matrix_csv(matrix_csv)
    selection = E.select_sampler(matrix)
    text = json.dumps(selection.to_dict(), indent=2)
    if output is not None:
        Path(output).write_text(text + "\n", encoding="utf-8")
    print(text)
    return selection


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML/JSON pipeline config")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. --set model.lambda=0.1 (repeatable)")
    common.add_argument("-o", "--output-dir", help=f"output directory (default: config, ${OUTPUT_DIR_ENV}, ./{DEFAULT_OUTPUT_DIR})")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--n-jobs", type=int, help="threads for cross-evaluation")
    common.add_argument("--n-replicates", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="imbts", description="Weight-based under-sampling for imbalanced time-series forecasting.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic dataset CSV")
    sub.add_parser("weights", parents=[common], help="compute train-pool weights and a summary")
    sp = sub.add_parser("sample", parents=[common], help="draw a sample and compare weight densities")
    sp.add_argument("sampler", help="sampler label, e.g. None, TUS-2, SUS-3, IHS, IHS-0.5")
    sub.add_parser("evaluate", parents=[common], help="build the train x eval RMSE matrix")
    sel = sub.add_parser("select", help="apply the min-of-max heuristic to a matrix CSV")
    sel.add_argument("matrix_csv")
    sel.add_argument("--output", help="also write the selection JSON here")
    return p


def _config_from_args(args) -> PipelineConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.n_jobs is not None:
        overrides.append(f"n_jobs={args.n_jobs}")
    if args.n_replicates is not None:
        overrides.append(f"n_replicates={args.n_replicates}")
    cfg = load_config(args.config, overrides)
    if args.output_dir is not None:
        cfg.output_dir = Path(args.output_dir)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "select":
            cmd_select(args.matrix_csv, args.output)
            return 0
        cfg = _config_from_args(args)
        out_dir = resolve_output_dir(cfg)
        if args.command == "synth":
            cmd_synth(cfg, out_dir)
        elif args.command == "weights":
            cmd_weights(cfg, out_dir)
        elif args.command == "sample":
            cmd_sample(cfg, out_dir, args.sampler)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, out_dir)
    except (ImbalancedTSError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            err["field"] = exc.field
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
