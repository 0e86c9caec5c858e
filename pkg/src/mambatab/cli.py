"""Command-line entry point: train, evaluate, and sweep hyperparameters.

    mambatab train --dataset d.csv --schema d.schema --out runs/d
    mambatab eval  --checkpoint runs/d/seed_0/model.ckpt --dataset d.csv --schema d.schema
    mambatab sweep --dataset d.csv --schema d.schema --knob state-size --values 4,8,16 --out runs/sweep

Every artifact under the output directory is a pure function of the
resolved run spec and seed; wall-clock timings go to a separate
timing.json so reports and checkpoints are byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics, model as model_mod, tabular, training
from .model import MambaTabModel, ModelConfig, count_parameters
from .tabular import SchemaConfig, SchemaError, Table
from .tensor import NumericsError
from .training import Stage, TrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

# spawn_key tags for per-seed run streams (training uses its own tags)
_STREAM_SPLIT = 10
_STREAM_INIT = 11
_STREAM_TRAIN = 12
_STREAM_PLAN = 13

REGIMES = ("supervised", "incremental", "ssl")
SWEEP_KNOBS = {
    "block-expansion": "expand",
    "state-size": "state_size",
    "embed-dim": "embed_dim",
    "m-blocks": "n_blocks",
}


class UsageError(ValueError):
    pass


def _child_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(stream,)).generate_state(1)[0])


@dataclass
class RunSpec:
    dataset: str
    schema: str
    out_dir: str
    regime: str = "supervised"
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    embed_dim: int = 32
    state_size: int = 32
    expand: int = 2
    d_conv: int = 4
    n_blocks: int = 1
    use_layer_norm: bool = True
    max_epochs: int = 1000
    patience: int = 5
    lr: float = 1e-4
    batch_size: int = 128

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise UsageError(f"unknown regime '{self.regime}', expected one of {REGIMES}")
        if not self.seeds:
            raise UsageError("need at least one seed")

    def model_config(self, n_features: int, head: str = "classification") -> ModelConfig:
        return ModelConfig(
            n_features=n_features,
            embed_dim=self.embed_dim,
            state_size=self.state_size,
            expand=self.expand,
            d_conv=self.d_conv,
            n_blocks=self.n_blocks,
            head=head,
            use_layer_norm=self.use_layer_norm,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            max_epochs=self.max_epochs,
            patience=self.patience,
            lr=self.lr,
            batch_size=self.batch_size,
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "schema": self.schema,
            "out_dir": self.out_dir,
            "regime": self.regime,
            "seeds": self.seeds,
            "embed_dim": self.embed_dim,
            "state_size": self.state_size,
            "expand": self.expand,
            "d_conv": self.d_conv,
            "n_blocks": self.n_blocks,
            "use_layer_norm": self.use_layer_norm,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "lr": self.lr,
            "batch_size": self.batch_size,
        }


@dataclass
class SeedOutcome:
    seed: int
    result: metrics.EvalResult
    report_payload: dict
    checkpoint_metadata: dict
    model: MambaTabModel
    wall_time_s: float
    param_count: int


def _encode_splits(table: Table, pre, parts) -> list:
    return [tabular.transform(pre, p) for p in parts]


def run_one_seed(spec: RunSpec, table: Table, schema: SchemaConfig, seed: int) -> SeedOutcome:
    """Split, preprocess, train under the requested regime, evaluate on test."""
    t0 = time.perf_counter()
    split_seed = _child_seed(seed, _STREAM_SPLIT)
    init_seed = _child_seed(seed, _STREAM_INIT)
    train_seed = _child_seed(seed, _STREAM_TRAIN)
    train_t, val_t, test_t = tabular.split(table, split_seed)
    pre = tabular.fit(train_t, overrides=schema.kinds)
    cfg = spec.train_config(train_seed)
    base_meta = {
        "regime": spec.regime,
        "seed": seed,
        "split_seed": split_seed,
        "preprocessor": pre.to_dict(),
        "columns": list(table.column_names),
        "schema": {"label_column": schema.label_column,
                   "positive_label": schema.positive_label},
    }

    if spec.regime == "supervised":
        enc_train, enc_val, enc_test = _encode_splits(table, pre, (train_t, val_t, test_t))
        model = MambaTabModel(spec.model_config(table.n_features), rng=init_seed)
        best, report = training.train_supervised(model, enc_train, enc_val, cfg)
        payload = {"report": None, "stage_reports": None, "pretrain_report": None}
        main_report = report

    elif spec.regime == "ssl":
        enc_train, enc_val, enc_test = _encode_splits(table, pre, (train_t, val_t, test_t))
        recon = MambaTabModel(spec.model_config(table.n_features, head="reconstruction"),
                              rng=init_seed)
        body, pre_report = training.pretrain_ssl(recon, enc_train, enc_val, cfg)
        best, report = training.finetune_after_ssl(body, enc_train, enc_val, cfg)
        payload = {"report": None, "stage_reports": None,
                   "pretrain_report": pre_report.to_dict()}
        main_report = report

    else:  # incremental
        plan_seed = _child_seed(seed, _STREAM_PLAN)
        plan = tabular.make_incremental_plan(table.n_features, plan_seed)
        tr_chunks = np.array_split(np.arange(train_t.n_rows), 3)
        va_chunks = np.array_split(np.arange(val_t.n_rows), 3)
        stages = []
        for i, cols in enumerate(plan.cumulative()):
            stages.append(Stage(
                train=tabular.transform(pre, train_t.select_rows(tr_chunks[i]).select_columns(cols)),
                val=tabular.transform(pre, val_t.select_rows(va_chunks[i]).select_columns(cols)),
                columns=cols,
            ))
        best, stage_reports = training.train_incremental(
            stages, spec.model_config(table.n_features), cfg, init_rng=init_seed)
        enc_test = tabular.transform(pre, test_t)
        payload = {"report": None,
                   "stage_reports": [r.to_dict() for r in stage_reports],
                   "pretrain_report": None}
        main_report = stage_reports[-1]
        base_meta["plan"] = {"s1": plan.s1, "s2": plan.s2, "s3": plan.s3}

    scores = best.predict_proba(enc_test.values)
    result = metrics.evaluate(scores, enc_test.labels, seed=seed)
    main_report.test_auroc = result.auroc
    main_report.test_accuracy = result.accuracy
    payload["report"] = main_report.to_dict()
    payload["eval"] = result.to_dict()
    return SeedOutcome(
        seed=seed,
        result=result,
        report_payload=payload,
        checkpoint_metadata=base_meta,
        model=best,
        wall_time_s=time.perf_counter() - t0,
        param_count=count_parameters(best),
    )


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_train(spec: RunSpec, quiet: bool = False) -> dict:
    """Run every seed, write per-seed artifacts and the aggregate summary."""
    schema = SchemaConfig.from_file(spec.schema)
    table = tabular.load_csv(spec.dataset, schema)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "runspec.json", spec.to_dict())

    outcomes = []
    for seed in spec.seeds:
        outcome = run_one_seed(spec, table, schema, seed)
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        _write_json(seed_dir / "report.json", outcome.report_payload)
        model_mod.save(outcome.model, seed_dir / "model.ckpt",
                       metadata=outcome.checkpoint_metadata)
        outcomes.append(outcome)
        if not quiet:
            print(f"seed {seed}: test AUROC {outcome.result.auroc:.4f} "
                  f"accuracy {outcome.result.accuracy:.4f} "
                  f"({outcome.wall_time_s:.1f}s)")

    results = [o.result for o in outcomes]
    mean, std = metrics.aggregate(results)
    acc_mean = float(np.mean([r.accuracy for r in results]))
    param_count = outcomes[0].param_count
    summary = {
        "regime": spec.regime,
        "n_seeds": len(spec.seeds),
        "auroc_mean": mean,
        "auroc_std": std,
        "accuracy_mean": acc_mean,
        "param_count": param_count,
        "use_layer_norm": spec.use_layer_norm,
    }
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(summary))
        writer.writerow([summary[k] for k in summary])
    with open(out / "per_seed.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "auroc", "accuracy", "best_epoch", "epochs_run"])
        for o in outcomes:
            writer.writerow([o.seed, o.result.auroc, o.result.accuracy,
                             o.report_payload["report"]["best_epoch"],
                             o.report_payload["report"]["epochs_run"]])
    lines = [
        f"regime:          {spec.regime}",
        f"dataset:         {spec.dataset}",
        f"seeds:           {len(spec.seeds)}",
        f"layer norm:      {'on' if spec.use_layer_norm else 'off'}",
        f"test AUROC:      {mean:.4f} +/- {std:.4f}",
        f"test accuracy:   {acc_mean:.4f}",
        f"parameters:      {param_count}",
    ]
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "timing.json",
                {"per_seed_s": {str(o.seed): o.wall_time_s for o in outcomes}})
    if not quiet:
        print("\n".join(lines))
    return summary


def cmd_eval(checkpoint_path: str, dataset: str, schema_path: str,
             quiet: bool = False) -> metrics.EvalResult:
    """Re-derive the checkpoint's own test split and score it. No training."""
    model, meta = model_mod.load_with_metadata(checkpoint_path)
    schema = SchemaConfig(meta["schema"]["label_column"], meta["schema"]["positive_label"])
    if schema_path:
        schema = SchemaConfig.from_file(schema_path)
    table = tabular.load_csv(dataset, schema)
    if table.column_names != meta["columns"]:
        raise SchemaError(
            f"dataset columns {table.column_names} differ from checkpoint's {meta['columns']}")
    pre = tabular.Preprocessor.from_dict(meta["preprocessor"])
    _, _, test_t = tabular.split(table, meta["split_seed"])
    enc_test = tabular.transform(pre, test_t)
    if enc_test.n_features != model.config.n_features:
        raise SchemaError(
            f"checkpoint expects {model.config.n_features} features, "
            f"dataset provides {enc_test.n_features}")
    scores = model.predict_proba(enc_test.values)
    result = metrics.evaluate(scores, enc_test.labels, seed=meta.get("seed", 0))
    if not quiet:
        print(f"test AUROC {result.auroc:.4f}")
        print(f"test accuracy {result.accuracy:.4f}")
    return result


def cmd_sweep(spec: RunSpec, knob: str, values: list[int], quiet: bool = False) -> list[dict]:
    """One full seeded run per knob value; emits a machine-readable table."""
    if knob not in SWEEP_KNOBS:
        raise UsageError(f"unknown sweep knob '{knob}', expected one of {sorted(SWEEP_KNOBS)}")
    if not values:
        raise UsageError("sweep needs at least one value")
    attr = SWEEP_KNOBS[knob]
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        sub = replace(spec, out_dir=str(out / f"{attr}_{value}"), **{attr: value})
        summary = cmd_train(sub, quiet=True)
        row = {"knob": knob, "value": value,
               "auroc_mean": summary["auroc_mean"], "auroc_std": summary["auroc_std"],
               "param_count": summary["param_count"]}
        rows.append(row)
        if not quiet:
            print(f"{knob}={value}: AUROC {row['auroc_mean']:.4f} "
                  f"+/- {row['auroc_std']:.4f}, {row['param_count']} params")
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["knob", "value", "auroc_mean", "auroc_std", "param_count"])
        for row in rows:
            writer.writerow([row["knob"], row["value"], row["auroc_mean"],
                             row["auroc_std"], row["param_count"]])
    return rows


# -- argument plumbing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


_SPEC_FIELDS = {
    # spec field -> type used to parse config-file strings
    "regime": str,
    "embed_dim": int,
    "state_size": int,
    "expand": int,
    "d_conv": int,
    "n_blocks": int,
    "max_epochs": int,
    "patience": int,
    "lr": float,
    "batch_size": int,
}


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise UsageError(f"bad seeds list: {text!r}") from None


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="CSV file with a header row")
    p.add_argument("--schema", required=True, help="key=value schema file")
    p.add_argument("--out", required=True, dest="out_dir", help="output directory")
    p.add_argument("--config", help="key=value run defaults; flags override")
    p.add_argument("--regime", choices=REGIMES)
    p.add_argument("--seeds", help="comma-separated seed list (default 0..9)")
    p.add_argument("--embed-dim", type=int, dest="embed_dim")
    p.add_argument("--state-size", type=int, dest="state_size")
    p.add_argument("--expand", type=int)
    p.add_argument("--d-conv", type=int, dest="d_conv")
    p.add_argument("--m-blocks", type=int, dest="n_blocks")
    p.add_argument("--no-layer-norm", action="store_true")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--patience", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--quiet", action="store_true")


def _build_spec(args) -> RunSpec:
    file_values: dict[str, str] = {}
    if args.config:
        file_values = tabular.read_kv_file(args.config)
        unknown = set(file_values) - set(_SPEC_FIELDS) - {"seeds", "no_layer_norm"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {"dataset": args.dataset, "schema": args.schema, "out_dir": args.out_dir}
    for name, typ in _SPEC_FIELDS.items():
        cli_val = getattr(args, name, None)
        if cli_val is not None:
            kwargs[name] = cli_val
        elif name in file_values:
            try:
                kwargs[name] = typ(file_values[name])
            except ValueError:
                raise UsageError(f"bad value for config key {name}: {file_values[name]!r}") from None
    if args.seeds is not None:
        kwargs["seeds"] = _parse_seeds(args.seeds)
    elif "seeds" in file_values:
        kwargs["seeds"] = _parse_seeds(file_values["seeds"])
    if args.no_layer_norm:
        kwargs["use_layer_norm"] = False
    elif file_values.get("no_layer_norm", "").lower() in ("1", "true", "yes"):
        kwargs["use_layer_norm"] = False
    return RunSpec(**kwargs)


def build_parser() -> _Parser:
    parser = _Parser(prog="mambatab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train and evaluate over seeds")
    _add_run_options(p_train)

    p_eval = sub.add_parser("eval", help="score a saved checkpoint, no training")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--schema", default="", help="optional schema override")
    p_eval.add_argument("--quiet", action="store_true")

    p_sweep = sub.add_parser("sweep", help="repeat training across one knob")
    _add_run_options(p_sweep)
    p_sweep.add_argument("--knob", required=True, choices=sorted(SWEEP_KNOBS))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, e.g. 4,8,16,32,64,128")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            cmd_train(_build_spec(args), quiet=args.quiet)
        elif args.command == "eval":
            cmd_eval(args.checkpoint, args.dataset, args.schema, quiet=args.quiet)
        elif args.command == "sweep":
            values = _parse_seeds(args.values)
            cmd_sweep(_build_spec(args), args.knob, values, quiet=args.quiet)
        return EXIT_OK
    except (UsageError, SchemaError, model_mod.CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericsError, ArithmeticError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
