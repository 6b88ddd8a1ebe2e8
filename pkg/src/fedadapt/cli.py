"""Command-line surface: synthesize feature files, train, re-evaluate
checkpoints, aggregate multi-seed reports, and inspect feature files.

Exit codes: 0 success, 1 configuration error, 2 data/format error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .data import generate_synthetic_suite, read_feature_file, write_feature_file
from .errors import (ConfigError, DataValidationError, FedAdaptError,
                     FormatError, NumericError, ParameterError, ShapeError)
from .evaluation import (EvalReport, evaluate_run, summary_payload,
                         report_payload, write_json, write_reports_csv)
from .federation import (CommLedger, TrainedRun, load_checkpoint, make_client,
                         parameter_count, run_federation, save_checkpoint)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedadapt",
        description="Federated attention-adapter training over frozen image-text features",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic domain-shifted feature suite")
    p_synth.add_argument("--domains", type=int, default=4)
    p_synth.add_argument("--per-domain", type=int, default=200)
    p_synth.add_argument("--dim", type=int, default=32)
    p_synth.add_argument("--classes", type=int, default=4)
    p_synth.add_argument("--shift", type=float, default=0.5)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--noise-lo", type=float, default=0.05)
    p_synth.add_argument("--noise-hi", type=float, default=0.8)
    p_synth.add_argument("-o", "--out-dir", required=True)

    p_train = sub.add_parser("train", help="run a federated training experiment")
    p_train.add_argument("-c", "--config", required=True, help="TOML run config")
    p_train.add_argument("--algorithm")
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--batch-size", type=int)
    p_train.add_argument("--local-epochs", type=int)
    p_train.add_argument("--rounds", type=int)
    p_train.add_argument("--scale", type=float)
    p_train.add_argument("--mu", type=float)
    p_train.add_argument("--seeds", help="comma-separated, e.g. 0,1,2")
    p_train.add_argument("-o", "--out-dir")

    p_eval = sub.add_parser("eval", help="re-evaluate a saved adapter checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--clients", nargs="+", required=True)
    p_eval.add_argument("--target")
    p_eval.add_argument("--seed", type=int, default=0,
                        help="seed that produced the training splits")
    p_eval.add_argument("--scale", type=float, default=100.0)
    p_eval.add_argument("-o", "--out-json")

    p_report = sub.add_parser("report", help="aggregate per-seed report.json files")
    p_report.add_argument("reports", nargs="+")
    p_report.add_argument("-o", "--out-prefix", required=True,
                          help="writes <prefix>.csv and <prefix>.json")

    p_inspect = sub.add_parser("inspect", help="print an FCF1 file header")
    p_inspect.add_argument("path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "synth": cmd_synth,
        "train": cmd_train,
        "eval": cmd_eval,
        "report": cmd_report,
        "inspect": cmd_inspect,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, DataValidationError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FedAdaptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def cmd_synth(args) -> int:
    suite = generate_synthetic_suite(
        args.domains, args.per_domain, args.dim, args.classes,
        args.shift, args.seed, noise_lo=args.noise_lo, noise_hi=args.noise_hi,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    for ds in suite:
        path = os.path.join(args.out_dir, f"{ds.domain_name}.fcf")
        write_feature_file(ds, path)
        print(f"wrote {path} (d={ds.feature_dim}, C={ds.n_classes}, N={ds.n_samples})")
    return EXIT_OK


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.algorithm is not None:
        cfg.algorithm = args.algorithm
    if args.lr is not None:
        cfg.lr = args.lr
    if args.batch_size is not None:
        cfg.batch_size = args.batch_size
    if args.local_epochs is not None:
        cfg.local_epochs = args.local_epochs
    if args.rounds is not None:
        cfg.rounds = args.rounds
    if args.scale is not None:
        cfg.scale = args.scale
    if args.mu is not None:
        cfg.mu = args.mu
    if args.seeds is not None:
        try:
            cfg.seeds = [int(s) for s in args.seeds.split(",") if s != ""]
        except ValueError as exc:
            raise ConfigError(f"bad --seeds value {args.seeds!r}") from exc
    if args.out_dir is not None:
        cfg.output_dir = args.out_dir
    return cfg


def _load_datasets(cfg: RunConfig):
    clients = [read_feature_file(p) for p in cfg.client_paths]
    target = read_feature_file(cfg.target_path) if cfg.target_path else None
    d = clients[0].feature_dim
    for ds in clients + ([target] if target else []):
        if ds.feature_dim != d:
            raise ConfigError(
                f"feature dims differ across files: {ds.domain_name} has "
                f"{ds.feature_dim}, expected {d}")
    if cfg.feature_dim is not None and cfg.feature_dim != d:
        raise ConfigError(
            f"config says feature_dim={cfg.feature_dim} but files carry d={d}")
    return clients, target


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    for warning in cfg.validate():
        print(f"warning: {warning}", file=sys.stderr)
    client_data, target = _load_datasets(cfg)
    cfg_hash = cfg.config_hash()

    os.makedirs(cfg.output_dir, exist_ok=True)
    reports: list[EvalReport] = []
    last_run: TrainedRun | None = None
    for seed in cfg.seeds:
        run = run_federation(
            client_data,
            algorithm=cfg.algorithm,
            lr=cfg.lr,
            batch_size=cfg.batch_size,
            local_epochs=cfg.local_epochs,
            rounds=cfg.rounds,
            scale=cfg.scale,
            mu=cfg.mu,
            seed=seed,
            reference_full_model_params=cfg.reference_full_model_params,
        )
        report = evaluate_run(run, run.clients, target)
        reports.append(report)
        last_run = run

        seed_dir = os.path.join(cfg.output_dir, f"seed{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        write_json(os.path.join(seed_dir, "report.json"), report_payload(report))
        write_reports_csv(os.path.join(seed_dir, "results.csv"), [report],
                          include_mean=False)
        if run.best_adapter is not None:
            save_checkpoint(os.path.join(seed_dir, "adapter.ckpt"),
                            run.best_adapter, run.best_round, cfg_hash)
        elif run.best_client_adapters is not None:
            for client, adapter in zip(run.clients, run.best_client_adapters):
                save_checkpoint(
                    os.path.join(seed_dir, f"adapter_{client.name}.ckpt"),
                    adapter, run.best_round, cfg_hash)

    write_reports_csv(os.path.join(cfg.output_dir, "summary.csv"), reports)
    write_json(os.path.join(cfg.output_dir, "summary.json"),
               summary_payload(reports, last_run.ledger))
    write_json(os.path.join(cfg.output_dir, "run_meta.json"),
               {"config_hash": cfg_hash, "version": __version__})

    _print_report_table(reports)
    _print_ledger(last_run.ledger)
    return EXIT_OK


def _print_report_table(reports: list[EvalReport]) -> None:
    first = reports[0]
    task = first.task or "(no target)"
    print(f"task={task} algorithm={first.algorithm}")
    names = ", ".join(first.client_names)
    print(f"{'seed':>6}  {'generalization':>14}  {'comprehensive':>13}  personalization ({names})")
    for r in reports:
        gen = f"{100 * r.generalization:.2f}" if r.generalization is not None else "-"
        pers = ", ".join(f"{100 * p:.2f}" for p in r.personalization)
        print(f"{r.seed:>6}  {gen:>14}  {100 * r.comprehensive:>13.2f}  {pers}")
    if len(reports) > 1:
        gens = [r.generalization for r in reports]
        gen = f"{100 * float(np.mean(gens)):.2f}" if gens[0] is not None else "-"
        comp = 100 * float(np.mean([r.comprehensive for r in reports]))
        pers = ", ".join(
            f"{100 * float(np.mean([r.personalization[i] for r in reports])):.2f}"
            for i in range(len(first.client_names)))
        print(f"{'mean':>6}  {gen:>14}  {comp:>13.2f}  {pers}")


def _print_ledger(ledger: CommLedger) -> None:
    d = ledger.as_dict()
    print(
        f"ledger: {d['bytes_per_round']} bytes/round (up+down), "
        f"{d['uploaded_bytes']} uploaded + {d['downloaded_bytes']} downloaded total, "
        f"adapter params {d['adapter_params']}, "
        f"compression vs full model {d['compression_ratio']:.1f}x"
    )


def cmd_eval(args) -> int:
    adapter, round_index, cfg_hash = load_checkpoint(args.checkpoint)
    client_data = [read_feature_file(p) for p in args.clients]
    target = read_feature_file(args.target) if args.target else None
    d = adapter.feature_dim
    for ds in client_data + ([target] if target else []):
        if ds.feature_dim != d:
            raise ConfigError(
                f"{ds.domain_name} has d={ds.feature_dim}, checkpoint has d={d}")
    clients = [make_client(i, ds, args.seed, lr=1.0, d=d)
               for i, ds in enumerate(client_data)]
    run = TrainedRun(
        algorithm="fedclip", seed=args.seed, feature_dim=d, scale=args.scale,
        best_round=round_index, best_adapter=adapter, best_client_adapters=None,
        initial_adapter=None, history=[],
        ledger=CommLedger(adapter_params=parameter_count(d)), clients=clients,
    )
    report = evaluate_run(run, clients, target)
    print(f"checkpoint {args.checkpoint} (round {round_index}, config {cfg_hash[:12]})")
    _print_report_table([report])
    if args.out_json:
        write_json(args.out_json, report_payload(report))
    return EXIT_OK


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        with open(path) as fh:
            payload = json.load(fh)
        reports.append(EvalReport(
            task=payload["task"],
            algorithm=payload["algorithm"],
            seed=payload["seed"],
            best_round=payload["best_round"],
            client_names=tuple(payload["personalization"].keys()),
            personalization=tuple(payload["personalization"].values()),
            generalization=payload["generalization"],
            comprehensive=payload["comprehensive"],
        ))
    first = reports[0]
    for r in reports[1:]:
        if r.task != first.task or r.algorithm != first.algorithm:
            raise ConfigError(
                "all reports must come from the same task and algorithm")
    write_reports_csv(f"{args.out_prefix}.csv", reports)
    write_json(f"{args.out_prefix}.json", summary_payload(reports))
    _print_report_table(reports)
    return EXIT_OK


def cmd_inspect(args) -> int:
    ds = read_feature_file(args.path)
    size = os.path.getsize(args.path)
    print(f"{args.path}: FCF1 v1, {size} bytes")
    print(f"domain: {ds.domain_name}")
    print(f"d: {ds.feature_dim}")
    print(f"C: {ds.n_classes}")
    print(f"N: {ds.n_samples}")
    print(f"classes: {', '.join(ds.class_names)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
