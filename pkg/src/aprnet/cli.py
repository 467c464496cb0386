"""Command-line entry point.

Commands: train, eval, forecast, synth, ablate.  Flags override a flat
``key = value`` config file, which overrides built-in defaults.  Exit codes:
0 success, 1 internal error, 2 usage/config error, 3 data error.
"""
from __future__ import annotations

import argparse
import itertools
import os
import sys

import numpy as np

from .data import default_ratios_for, load_csv, make_windows, save_csv, synth_multifreq
from .errors import AprnetError, ConfigError, DataError
from .model import AprnetModel
from .training import (
    TrainConfig,
    evaluate,
    load_checkpoint,
    model_from_records,
    read_checkpoint,
    save_checkpoint,
    train,
)

DEFAULTS = {
    "lookback": 96,
    "horizon": 96,
    "latent_dim": 128,
    "klc": "kan",
    "seq_branch": True,
    "chan_branch": True,
    "amp": True,
    "phase": True,
    "epochs": 30,
    "batch_size": 32,
    "patience": 5,
    "learning_rate": 1e-3,
    "seed": 0,
    "out": ".",
    "ratios": None,
    "synth_length": 4000,
    "synth_channels": 3,
    "synth_noise": 0.1,
    "synth_drift": 0.0,
}

_BOOL_KEYS = {"seq_branch", "chan_branch", "amp", "phase"}


def _build_parser():
    parser = argparse.ArgumentParser(prog="aprnet", description=__doc__)
    parser.add_argument("command", choices=["train", "eval", "forecast", "synth", "ablate"])
    parser.add_argument("--data", help="input CSV path")
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--checkpoint", help="checkpoint path (eval/forecast)")
    parser.add_argument("--lookback", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--latent-dim", dest="latent_dim", type=int)
    parser.add_argument("--klc", choices=["kan", "linear", "conv1d"])
    parser.add_argument("--no-seq-branch", dest="seq_branch", action="store_false", default=None)
    parser.add_argument("--no-chan-branch", dest="chan_branch", action="store_false", default=None)
    parser.add_argument("--no-amp", dest="amp", action="store_false", default=None)
    parser.add_argument("--no-phase", dest="phase", action="store_false", default=None)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--ratios", help="train/val/test ratios, e.g. 0.7,0.1,0.2")
    parser.add_argument("--synth-length", dest="synth_length", type=int)
    parser.add_argument("--synth-channels", dest="synth_channels", type=int)
    parser.add_argument("--synth-noise", dest="synth_noise", type=float)
    parser.add_argument("--synth-drift", dest="synth_drift", type=float)
    return parser


def _parse_config_file(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS and key not in ("data", "checkpoint"):
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def _coerce_like(key, value, default):
    if key in _BOOL_KEYS:
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def resolve_config(args):
    """Built-in defaults, overridden by config file, overridden by flags."""
    cfg = dict(DEFAULTS)
    cfg["data"] = None
    cfg["checkpoint"] = None
    if args.config:
        for key, value in _parse_config_file(args.config).items():
            cfg[key] = _coerce_like(key, value, DEFAULTS.get(key))
    for key in list(DEFAULTS) + ["data", "checkpoint"]:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if isinstance(cfg["ratios"], str):
        parts = [float(p) for p in cfg["ratios"].split(",")]
        if len(parts) != 3:
            raise ConfigError(f"--ratios needs three values, got {cfg['ratios']!r}")
        cfg["ratios"] = tuple(parts)
    return cfg


def _load_table(cfg):
    if not cfg["data"]:
        raise ConfigError("missing --data PATH")
    return load_csv(cfg["data"])


def _windows(cfg, table):
    ratios = cfg["ratios"] or default_ratios_for(cfg["data"])
    return make_windows(table, cfg["lookback"], cfg["horizon"], ratios)


def _build_model(cfg, n_channels, **overrides):
    opts = dict(
        lookback=cfg["lookback"],
        horizon=cfg["horizon"],
        n_channels=n_channels,
        latent_dim=cfg["latent_dim"],
        klc_kind=cfg["klc"],
        seq_enabled=cfg["seq_branch"],
        chan_enabled=cfg["chan_branch"],
        amp_enabled=cfg["amp"],
        phase_enabled=cfg["phase"],
        seed=cfg["seed"],
    )
    opts.update(overrides)
    return AprnetModel(**opts)


def _train_config(cfg, checkpoint_path, seed=None):
    return TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        patience=cfg["patience"],
        seed=cfg["seed"] if seed is None else seed,
        checkpoint_path=checkpoint_path,
        learning_rate=cfg["learning_rate"],
    )


def run_train(cfg):
    table = _load_table(cfg)
    dataset = _windows(cfg, table)
    os.makedirs(cfg["out"], exist_ok=True)
    ckpt = os.path.join(cfg["out"], "checkpoint.aprnet")
    model = _build_model(cfg, table.n_channels)
    report = train(model, dataset, _train_config(cfg, ckpt))
    with open(os.path.join(cfg["out"], "train_report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    mse, mae = evaluate(model, dataset, "test")
    print(f"best_epoch={report.best_epoch} val_mse={report.best_val:.6f}")
    print(f"test_mse={mse:.6f} test_mae={mae:.6f}")
    with open(os.path.join(cfg["out"], "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write("split,mse,mae\n")
        fh.write(f"test,{mse:.17g},{mae:.17g}\n")
    return 0


def run_eval(cfg):
    table = _load_table(cfg)
    ckpt = cfg["checkpoint"] or os.path.join(cfg["out"], "checkpoint.aprnet")
    if not os.path.exists(ckpt):
        raise ConfigError(f"checkpoint not found: {ckpt}")
    model = model_from_records(read_checkpoint(ckpt))
    cfg = dict(cfg, lookback=model.lookback, horizon=model.horizon)
    dataset = _windows(cfg, table)
    mse, mae = evaluate(model, dataset, "test")
    print(f"test_mse={mse:.6f} test_mae={mae:.6f}")
    return 0


def run_forecast(cfg):
    table = _load_table(cfg)
    ckpt = cfg["checkpoint"] or os.path.join(cfg["out"], "checkpoint.aprnet")
    if not os.path.exists(ckpt):
        raise ConfigError(f"checkpoint not found: {ckpt}")
    model = model_from_records(read_checkpoint(ckpt))
    if table.length < model.lookback:
        raise ConfigError(
            f"series has {table.length} rows, model lookback is {model.lookback}"
        )
    if table.n_channels != model.n_channels:
        raise ConfigError(
            f"series has {table.n_channels} channels, model expects {model.n_channels}"
        )
    window = table.values[-model.lookback :][None].astype(model.dtype)
    pred, _ = model.forward(window)
    os.makedirs(cfg["out"], exist_ok=True)
    out_path = os.path.join(cfg["out"], "forecast.csv")
    from .data import SeriesTable

    save_csv(SeriesTable(values=pred.data[0], channel_names=table.channel_names), out_path)
    print(f"wrote {out_path}")
    return 0


def run_synth(cfg):
    components = _default_components(cfg["synth_channels"])
    table = synth_multifreq(
        cfg["synth_length"],
        cfg["synth_channels"],
        components,
        drift=cfg["synth_drift"],
        noise_sd=cfg["synth_noise"],
        seed=cfg["seed"],
    )
    os.makedirs(cfg["out"], exist_ok=True)
    out_path = os.path.join(cfg["out"], "synth.csv")
    save_csv(table, out_path)
    print(f"wrote {out_path}")
    return 0


def _default_components(n_channels):
    """Two incommensurate sinusoids per channel, staggered across channels."""
    comps = []
    for c in range(n_channels):
        comps.append(
            [
                (0.041 + 0.013 * c, 1.0, 0.3 * c),
                (0.137 + 0.017 * c, 0.6, 1.1 * c),
            ]
        )
    return comps


def ablation_grid(cfg):
    """(branch, head, kind) cells, restricted by the configured flags."""
    branches = [("seq+chan", True, True), ("seq", True, False), ("chan", False, True)]
    heads = [("amp+phase", True, True), ("amp", True, False), ("phase", False, True)]
    if not cfg["seq_branch"]:
        branches = [b for b in branches if not b[1]]
    if not cfg["chan_branch"]:
        branches = [b for b in branches if not b[2]]
    if not cfg["amp"]:
        heads = [h for h in heads if not h[1]]
    if not cfg["phase"]:
        heads = [h for h in heads if not h[2]]
    kinds = ["kan", "linear", "conv1d"]
    if cfg.get("klc_restrict"):
        kinds = [cfg["klc"]]
    return [
        (f"{b[0]}|{h[0]}|{k}", b, h, k)
        for b, h, k in itertools.product(branches, heads, kinds)
    ]


def run_ablate(cfg, seeds=None, horizons=None):
    table = _load_table(cfg)
    seeds = seeds if seeds is not None else [cfg["seed"]]
    horizons = horizons if horizons is not None else [cfg["horizon"]]
    os.makedirs(cfg["out"], exist_ok=True)
    rows = []
    for cell_id, branch, head, kind in ablation_grid(cfg):
        for horizon in horizons:
            hcfg = dict(cfg, horizon=horizon)
            dataset = _windows(hcfg, table)
            for seed in seeds:
                model = _build_model(
                    hcfg,
                    table.n_channels,
                    klc_kind=kind,
                    seq_enabled=branch[1],
                    chan_enabled=branch[2],
                    amp_enabled=head[1],
                    phase_enabled=head[2],
                    seed=seed,
                )
                train(model, dataset, _train_config(hcfg, None, seed=seed))
                mse, mae = evaluate(model, dataset, "test")
                rows.append((cell_id, horizon, mse, mae, seed))
                print(f"{cell_id} horizon={horizon} seed={seed} mse={mse:.6f} mae={mae:.6f}")
    out_path = os.path.join(cfg["out"], "ablation.csv")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("cell,horizon,mse,mae,seed\n")
        for cell_id, horizon, mse, mae, seed in rows:
            fh.write(f"{cell_id},{horizon},{mse:.17g},{mae:.17g},{seed}\n")
    return 0


_COMMANDS = {
    "train": run_train,
    "eval": run_eval,
    "forecast": run_forecast,
    "synth": run_synth,
    "ablate": run_ablate,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"aprnet: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"aprnet: data error: {exc}", file=sys.stderr)
        return 3
    except AprnetError as exc:
        print(f"aprnet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
