"""Command-line entry point.

Subcommands: ``gradcheck``, ``synth``, ``crossval``, ``noise``, ``coeffs``.
Every run writes into a fresh run directory under --out (timestamp plus
seed in the name, so concurrent runs never clobber each other), while the
files themselves embed only deterministic metadata (flags, seed, code
version): identical flags reproduce identical file contents.

Exit status: 0 on success, 1 when the command's contract fails (bad data,
failed tolerance, missing checkpoint), 2 for usage errors. Failures print
one line ``error: <category>: <message>`` on stderr. ND_THREADS caps the
number of worker processes used for cross-validation folds (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import data as data_mod
from . import evaluation as ev
from . import network as net


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError, data_mod.DataFormatError) as exc:
        category = type(exc).__name__
        print(f"error: {category}: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndnet",
        description="Trainable normalized-difference features: gradient "
                    "checks, synthetic data, cross-validation, noise sweeps "
                    "and coefficient exports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck",
                       help="compare analytic and finite-difference gradients")
    p.add_argument("--arch", choices=net.ARCHITECTURES, default="nd")
    p.add_argument("--depth", type=int, choices=net.DEPTHS, default=3)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--out", default="runs")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--synth", required=True, metavar="SPEC",
                   help="synthetic spec JSON path")
    p.add_argument("--seed", type=int, default=None,
                   help="override the spec's seed")
    p.add_argument("--out", default="runs")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("crossval",
                       help="10-fold stratified cross-validation run")
    _add_data_flags(p)
    p.add_argument("--arch", choices=net.ARCHITECTURES, default="nd")
    p.add_argument("--depth", type=int, choices=net.DEPTHS, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--wd", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--patience", type=int, default=25)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--out", default="runs")
    p.set_defaults(handler=cmd_crossval)

    p = sub.add_parser("noise",
                       help="noise-robustness sweep over saved checkpoints")
    p.add_argument("checkpoints", nargs="+", metavar="CKPT",
                   help="checkpoint JSON files from a crossval run")
    _add_data_flags(p)
    p.add_argument("--etas", default="0,0.02,0.04,0.06,0.08,0.10",
                   help="comma-separated noise levels in [0, 0.5]")
    p.add_argument("--seed", type=int, default=0,
                   help="noise realization seed")
    p.add_argument("--out", default="runs")
    p.set_defaults(handler=cmd_noise)

    p = sub.add_parser("coeffs",
                       help="coefficient ratio matrix and top asymmetric pairs")
    p.add_argument("checkpoint", metavar="CKPT")
    p.add_argument("--topk", type=int, default=15)
    p.add_argument("--out", default="runs")
    p.set_defaults(handler=cmd_coeffs)
    return parser


def _add_data_flags(p):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--data", metavar="PATH", help="dataset CSV path")
    group.add_argument("--synth", metavar="SPEC",
                       help="synthetic spec JSON path")


def _load_dataset(args) -> data_mod.Dataset:
    if args.data is not None:
        return data_mod.load_csv(args.data)
    return data_mod.synth_generate(data_mod.load_synth_spec(args.synth))


def _meta(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("handler", "command") and v is not None}
    return {
        "command": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "version": __version__,
    }


def _run_dir(args) -> str:
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    seed = getattr(args, "seed", None)
    base = f"{args.command}-{stamp}-seed{seed if seed is not None else 'na'}"
    path = os.path.join(args.out, base)
    suffix = 0
    while True:
        candidate = path if suffix == 0 else f"{path}-{suffix}"
        try:
            os.makedirs(candidate)
            return candidate
        except FileExistsError:
            suffix += 1


def _write_json(path, meta: dict, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"meta": meta, **payload}, fh, indent=2)
        fh.write("\n")


def _write_csv(path, meta: dict, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key in ("command", "seed", "version"):
            fh.write(f"# {key}: {meta[key]}\n")
        fh.write(f"# flags: {json.dumps(meta['flags'])}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gradcheck(args) -> int:
    report = ev.gradcheck(args.arch, depth=args.depth, trials=args.trials,
                          tolerance=args.tol, seed=args.seed, eps=args.eps)
    run_dir = _run_dir(args)
    out_path = os.path.join(run_dir, "gradcheck.json")
    _write_json(out_path, _meta(args), {"report": {
        "target": report.target,
        "depth": report.depth,
        "trials": report.trials,
        "tolerance": report.tolerance,
        "eps": report.eps,
        "max_errors": report.max_errors,
        "passed": report.passed,
    }})
    print(f"gradcheck {args.arch} depth={args.depth}: "
          f"worst relative error {report.worst():.3e} "
          f"(tolerance {report.tolerance:g})")
    for family, err in sorted(report.max_errors.items()):
        print(f"  {family:10s} {err:.3e}")
    print(f"report: {out_path}")
    if not report.passed:
        print("error: tolerance: gradient check exceeded tolerance",
              file=sys.stderr)
        return 1
    return 0


def cmd_synth(args) -> int:
    spec = data_mod.load_synth_spec(args.synth)
    if args.seed is not None:
        spec.seed = args.seed
    dataset = data_mod.synth_generate(spec)
    run_dir = _run_dir(args)
    csv_path = os.path.join(run_dir, "dataset.csv")
    data_mod.save_csv(dataset, csv_path)
    meta = dict(_meta(args))
    meta["seed"] = spec.seed
    _write_json(os.path.join(run_dir, "manifest.json"), meta,
                {"spec": spec.to_dict(),
                 "rows": dataset.n_samples,
                 "class_counts": {
                     "0": int((dataset.y == 0).sum()),
                     "1": int((dataset.y == 1).sum()),
                 }})
    print(f"wrote {dataset.n_samples} rows "
          f"({int((dataset.y == 0).sum())} class 0, "
          f"{int((dataset.y == 1).sum())} class 1) to {csv_path}")
    return 0


def _fold_star(packed):
    return ev.crossval_fold(*packed)


def _fold_runner():
    threads = int(os.environ.get("ND_THREADS", "1"))
    if threads <= 1:
        return None

    def runner(argslist):
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_fold_star, argslist))

    return runner


def cmd_crossval(args) -> int:
    dataset = _load_dataset(args)
    config = net.TrainConfig(learning_rate=args.lr, weight_decay=args.wd,
                             batch_size=args.batch, max_epochs=args.epochs,
                             patience=args.patience, seed=args.seed,
                             eps=args.eps)
    result = ev.run_crossval(args.arch, args.depth, dataset, config,
                             n_folds=args.folds, fold_runner=_fold_runner())
    report = result.report

    run_dir = _run_dir(args)
    meta = _meta(args)
    _write_json(os.path.join(run_dir, "report.json"), meta,
                {"report": ev.report_to_dict(report)})
    with open(os.path.join(run_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"# command: {meta['command']}\n# seed: {meta['seed']}\n"
                 f"# version: {meta['version']}\n"
                 f"# flags: {json.dumps(meta['flags'])}\n\n")
        fh.write(ev.report_to_text(report))
    for metric in ("train_loss", "val_loss", "val_accuracy"):
        rows = ev.history_csv_rows(result.histories, args.arch, args.depth,
                                   metric)
        _write_csv(os.path.join(run_dir, f"history_{metric}.csv"), meta,
                   ("epoch", "value", "fold", "arch", "depth"), rows)
    ckpt_dir = os.path.join(run_dir, "checkpoints")
    os.makedirs(ckpt_dir)
    for fold, model in enumerate(result.models):
        ckpt_meta = dict(meta)
        ckpt_meta.update({"fold": fold, "split_seed": result.split.seed,
                          "n_folds": result.split.n_folds})
        net.save_checkpoint(model, os.path.join(ckpt_dir, f"fold_{fold}.json"),
                            meta=ckpt_meta)

    print(f"crossval {args.arch} depth={args.depth}: "
          f"mean accuracy {report.mean_accuracy:.4f} "
          f"+/- {report.std_accuracy:.4f}, params {report.n_params}, "
          f"efficiency {report.efficiency:.2f}")
    print(f"report: {os.path.join(run_dir, 'report.json')}")
    return 0


def _parse_etas(text: str):
    try:
        etas = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"could not parse --etas list {text!r}") from None
    if not etas:
        raise ValueError("--etas list is empty")
    return etas


def cmd_noise(args) -> int:
    etas = _parse_etas(args.etas)
    dataset = _load_dataset(args)
    run_dir = _run_dir(args)
    meta = _meta(args)

    rows = []
    curves = []
    for path in args.checkpoints:
        if not os.path.exists(path):
            raise ValueError(f"missing checkpoint {path}")
        model = net.load_checkpoint(path)
        ckpt_meta = net.load_checkpoint_meta(path)
        if {"fold", "split_seed", "n_folds"} <= ckpt_meta.keys():
            split = data_mod.SplitSpec(n_folds=int(ckpt_meta["n_folds"]),
                                       seed=int(ckpt_meta["split_seed"]))
            fold = int(ckpt_meta["fold"])
            test_set = ev.fold_test_split(dataset, split, fold)
        else:
            fold = -1  # evaluated on the full dataset
            test_set = dataset
        accs = ev.noise_sweep(model, test_set, etas, args.seed)
        curves.append({"checkpoint": path, "fold": fold, "arch": model.arch,
                       "depth": model.depth, "etas": etas,
                       "accuracies": accs})
        for eta, acc in zip(etas, accs):
            rows.append((eta, acc, fold, model.arch, model.depth))
        print(f"{path}: " + "  ".join(
            f"eta={eta:g}:{acc:.4f}" for eta, acc in zip(etas, accs)))

    _write_csv(os.path.join(run_dir, "sweep.csv"), meta,
               ("eta", "value", "fold", "arch", "depth"), rows)
    _write_json(os.path.join(run_dir, "noise.json"), meta, {"curves": curves})
    print(f"sweep: {os.path.join(run_dir, 'sweep.csv')}")
    return 0


def cmd_coeffs(args) -> int:
    if not os.path.exists(args.checkpoint):
        raise ValueError(f"missing checkpoint {args.checkpoint}")
    model = net.load_checkpoint(args.checkpoint)
    ratios = ev.coeff_ratios(model)  # raises for archs without the layer
    top = ev.top_asymmetric(ratios, args.topk)

    run_dir = _run_dir(args)
    meta = _meta(args)
    matrix_rows = []
    for i, name in enumerate(ratios.band_names):
        matrix_rows.append([name] + [repr(float(v)) for v in ratios.matrix[i]])
    _write_csv(os.path.join(run_dir, "ratio_matrix.csv"), meta,
               ["band"] + list(ratios.band_names), matrix_rows)
    _write_csv(os.path.join(run_dir, "top_pairs.csv"), meta,
               ("rank", "band_i", "band_j", "ratio", "asymmetry"),
               [(rank + 1, e["band_i"], e["band_j"], repr(e["ratio"]),
                 repr(e["asymmetry"])) for rank, e in enumerate(top)])

    print(f"{'rank':>4}  {'pair':12s}  {'ratio':>10s}  {'asymmetry':>10s}")
    for rank, e in enumerate(top, start=1):
        pair = f"{e['band_i']}/{e['band_j']}"
        print(f"{rank:>4}  {pair:12s}  {e['ratio']:>10.4f}  "
              f"{e['asymmetry']:>10.4f}")
    print(f"matrix: {os.path.join(run_dir, 'ratio_matrix.csv')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
