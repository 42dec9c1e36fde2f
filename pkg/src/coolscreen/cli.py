"""coolscreen command line.

Exit codes: 0 on success, 2 on usage errors (argparse), 1 when a stage
fails.  ``COOLANT_THREADS`` caps BLAS/OpenMP worker threads; it has to be
applied before numpy is imported, so this module defers every package
import into the command handlers.
"""

import argparse
import json
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def apply_thread_cap(environ=os.environ):
    value = environ.get("COOLANT_THREADS")
    if not value:
        return None
    n = int(value)
    if n < 1:
        raise ValueError("COOLANT_THREADS must be a positive integer")
    for var in _THREAD_VARS:
        environ[var] = str(n)
    return n


class UsageError(Exception):
    pass


def _shard(text):
    try:
        k, n = (int(x) for x in text.split("/"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"shard must look like k/n, got {text!r}") from None
    if not 0 <= k < n:
        raise argparse.ArgumentTypeError(f"shard {text} out of range")
    return k, n


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _read_graphs(path):
    from .molgraph import parse_smiles, read_smiles_file

    return [parse_smiles(s) for s in read_smiles_file(path)]


def _reactant_sets(args):
    from .reactor import ReactantSets

    return ReactantSets(
        _read_graphs(args.alcohols),
        _read_graphs(args.chlorides) if args.chlorides else [],
        _read_graphs(args.acids) if args.acids else [],
    )


def _add_reactant_args(p, required=True):
    p.add_argument("--alcohols", required=required, help="alcohol SMILES file")
    p.add_argument("--chlorides", help="alkyl chloride SMILES file")
    p.add_argument("--acids", help="carboxylic acid SMILES file")


def cmd_parse(args):
    from .molgraph import CSV_HEADER, descriptors, parse_smiles, read_smiles_file, write_smiles

    smiles = list(args.smiles)
    if args.input:
        smiles += list(read_smiles_file(args.input))
    if not smiles:
        raise UsageError("give SMILES strings or --input")
    graphs = [parse_smiles(s) for s in smiles]
    print(CSV_HEADER)
    for g in graphs:
        print(descriptors(g).csv_row(write_smiles(g)))
    return 0


def cmd_filter(args):
    from .filters import STAGES, FilterReport
    from .molgraph import write_smiles

    check = STAGES[args.stage]
    report = FilterReport()
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        for g in _read_graphs(args.input):
            v = check(g)
            report.add(v)
            if v.passed:
                out.write(write_smiles(g) + "\n")
    finally:
        if args.output:
            out.close()
    if args.report:
        report.write(args.report)
    print(f"{report.passed}/{report.total} passed", file=sys.stderr)
    return 0


def cmd_react(args):
    import csv

    from .molgraph import write_smiles
    from .reactor import count_products, enumerate_library

    sets = _reactant_sets(args)
    if args.count_only:
        _emit(count_products(sets, args.shard).to_dict(), args.report)
        return 0
    if not args.output:
        raise UsageError("--output is required unless --count-only")
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["smiles", "reaction", "alcohol", "partner"])
        counts = enumerate_library(
            sets, "stream",
            lambda r: w.writerow([write_smiles(r.product), r.reaction.value, r.parents[0], r.parents[1]]),
            shard=args.shard,
        )
    _emit(counts.to_dict(), args.report)
    return 0


def _train_config(args):
    from .gate import TrainConfig

    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides.update(json.load(fh))
    for key in ("epochs", "lr", "batch", "seed"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    return TrainConfig(**overrides)


def _dataset(args):
    from .gate import MultiTaskDataset, make_synthetic_tasks

    if args.data:
        return MultiTaskDataset.from_csv(args.data)
    if args.synthetic:
        counts = None
        if args.label_counts:
            counts = dict(zip(("A", "B"), (int(x) for x in args.label_counts.split(","))))
        return make_synthetic_tasks(args.synthetic, seed=args.seed or 0, label_counts=counts)
    raise UsageError("give --data or --synthetic")


def _add_train_args(p):
    p.add_argument("--data", help="CSV with smiles,task_id,value")
    p.add_argument("--synthetic", type=int, metavar="N", help="use an N-molecule synthetic two-task set")
    p.add_argument("--label-counts", help="synthetic training labels per task, e.g. 2000,50")
    p.add_argument("--config", help="JSON training hyperparameters")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")


def _summary(result):
    last = result.history[-1]
    return {"epochs": len(result.history), "final_loss": last["total"], "val_r": last.get("val_r", {}),
            "checkpoint": result.checkpoint, "weights_sha256": result.weights_sha256}


def cmd_train_gate(args):
    from .gate import train_gate

    result = train_gate(_dataset(args), _train_config(args), out_dir=args.out)
    _emit(_summary(result))
    return 0


def cmd_train_stl(args):
    from .gate import train_stl

    result = train_stl(_dataset(args), args.task, _train_config(args), out_dir=args.out)
    _emit(_summary(result))
    return 0


def _teacher(path):
    from .gate import load_model
    from .pipeline import sha256_file
    from .surrogate import Teacher

    model, _ = load_model(path)
    return Teacher(model, sha256_file(path))


def _lookup(sets, teacher):
    from .surrogate import build_lookup

    reactants = list(zip(sets.alcohol_smiles, sets.alcohols))
    reactants += list(zip(sets.chloride_smiles, sets.chlorides))
    reactants += list(zip(sets.acid_smiles, sets.acids))
    return build_lookup(reactants, teacher)


def cmd_train_surrogate(args):
    from .demo import DemoConfig, distill
    from .pipeline import write_fidelity

    teacher = _teacher(args.teacher)
    sets = _reactant_sets(args)
    table = _lookup(sets, teacher)
    os.makedirs(args.out, exist_ok=True)
    table.save(os.path.join(args.out, "reactants.emb1"))
    cfg = DemoConfig(seed=args.seed, surrogate_fraction=args.fraction, surrogate_epochs=args.epochs,
                     fidelity_pairs=args.fidelity_pairs)
    d = distill(cfg, sets, teacher, table)
    d.surrogate.save(os.path.join(args.out, "surrogate.cfw"), {"teacher_sha256": teacher.weights_sha256})
    write_fidelity(os.path.join(args.out, "fidelity.csv"), d.fidelity)
    _emit({"train_pairs": len(d.train_pairs), "teacher_calls": d.teacher_calls,
           "fidelity": {r["task"]: r["pearson_r"] for r in d.fidelity}})
    return 0


def _criteria(args):
    from .screening import DEFAULT_CRITERIA, CriteriaSet, relax

    final = CriteriaSet.load(args.criteria) if args.criteria else DEFAULT_CRITERIA
    if args.relax is None:
        relaxed = relax(final)
    else:
        try:
            relaxed = relax(final, float(args.relax))
        except ValueError:
            relaxed = CriteriaSet.load(args.relax)
    return final, relaxed


def cmd_screen(args):
    from .screening import brute_force_screen, two_stage_screen, write_candidates
    from .surrogate import SurrogateModel

    final, relaxed = _criteria(args)
    teacher = _teacher(args.teacher)
    surrogate, _ = SurrogateModel.load(args.surrogate)
    sets = _reactant_sets(args)
    purch = _read_graphs(args.purchasables) if args.purchasables else []
    oracle = brute_force_screen(sets, teacher, final) if args.oracle else None
    report, candidates = two_stage_screen(sets, teacher, surrogate, relaxed, final, purch, oracle)
    if args.candidates:
        write_candidates(args.candidates, candidates)
    _emit(report.to_dict(), args.report)
    return 0


def cmd_bias(args):
    from . import biaslab

    if args.mode == "sim":
        corr = (biaslab.banded_correlation if args.structure == "banded" else biaslab.equicorrelation)(args.k, args.rho)
        points = biaslab.fp_inflation_sim(corr, args.threshold, args.sigma_pred, args.n, args.seed)
        if args.csv:
            biaslab.write_curve(args.csv, points)
        _emit({"k": [p.k for p in points], "gap": [p.gap for p in points], "gap_err": [p.gap_se for p in points],
               "fp_fraction": [p.fp_fraction for p in points],
               "strictly_increasing": biaslab.strictly_increasing(points)}, args.summary)
        return 0
    if args.mode == "scan":
        import numpy as np

        rhos = np.round(np.linspace(-0.95, 0.95, args.steps), 10)
        rows, monotone = biaslab.monotonicity_scan(args.t1, args.t2, rhos)
        if args.csv:
            import csv

            with open(args.csv, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["rho", "joint", "err"])
                for r, p in rows:
                    w.writerow([f"{r:.6f}", f"{p:.12f}", f"{biaslab.INTEGRATOR_TOL:.1e}"])
        _emit({"t1": args.t1, "t2": args.t2, "monotone": monotone, "points": len(rows)}, args.summary)
        return 0
    grid = (-0.9, -0.45, 0.0, 0.45, 0.9)
    ts = (-1.0, -0.5, 0.0, 0.5, 1.0)
    failed, cells = [], 0
    for rho in grid:
        for t1 in ts:
            for t2 in ts:
                if rho <= 0:
                    cells += 1
                    if not biaslab.case1_check(rho, t1, t2):
                        failed.append(["I", rho, t1, t2])
                if rho >= 0:
                    cells += 1
                    if not biaslab.case2_check(rho, t1, t2):
                        failed.append(["II", rho, t1, t2])
    _emit({"cells": cells, "failed": failed}, args.summary)
    return 0 if not failed else 1


def cmd_bench(args):
    from .pipeline import bench, load_config

    config = load_config(args.config) if args.config else {}
    if args.teacher:
        config["teacher"] = args.teacher
    if args.empty:
        config["library"] = False
    _emit(bench(config), args.output)
    return 0


def cmd_report(args):
    from .pipeline import STAGES, ChainBroken, verify_chain

    try:
        checked = verify_chain(args.run_dir)
    except ChainBroken as exc:
        print(f"manifest chain broken: {exc}", file=sys.stderr)
        return 1
    summary = {"verified": checked}
    for stage in STAGES:
        path = os.path.join(args.run_dir, "manifests", f"{stage}.json")
        if os.path.exists(path):
            with open(path) as fh:
                m = json.load(fh)
            summary[stage] = {"status": m["status"], "counts": m["counts"]}
    _emit(summary)
    return 0


def cmd_run(args):
    from .pipeline import load_config, run_pipeline

    config = load_config(args.config)
    if args.out:
        config["out_dir"] = args.out
    if args.stages:
        config["stages"] = args.stages.split(",")
    code, manifests = run_pipeline(config)
    for m in manifests:
        print(f"{m['stage']}: {m['status']}" + (f" ({m['error']})" if m.get("error") else ""))
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="coolscreen", description="Multi-criteria coolant screening pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="canonical SMILES and descriptors")
    p.add_argument("smiles", nargs="*")
    p.add_argument("--input", help="SMILES file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("filter", help="structure filters")
    p.add_argument("--input", "--in", dest="input", required=True)
    p.add_argument("--stage", choices=("pre", "post"), default="pre")
    p.add_argument("--output", "--out", dest="output")
    p.add_argument("--report")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("react", help="enumerate ether and ester products")
    _add_reactant_args(p)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--shard", type=_shard)
    p.add_argument("--output", "--out", dest="output", help="products CSV")
    p.add_argument("--report", help="counts JSON")
    p.set_defaults(func=cmd_react)

    p = sub.add_parser("train-gate", help="train the multi-task model")
    _add_train_args(p)
    p.set_defaults(func=cmd_train_gate)

    p = sub.add_parser("train-stl", help="train a single-task baseline")
    _add_train_args(p)
    p.add_argument("--task", required=True)
    p.set_defaults(func=cmd_train_stl)

    p = sub.add_parser("train-surrogate", help="distill the pair surrogate from a teacher")
    p.add_argument("--teacher", required=True)
    _add_reactant_args(p)
    p.add_argument("--fraction", type=float, default=0.005)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--fidelity-pairs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_surrogate)

    p = sub.add_parser("screen", help="two-stage screen of the product grid")
    p.add_argument("--teacher", required=True)
    p.add_argument("--surrogate", required=True)
    _add_reactant_args(p)
    p.add_argument("--purchasables")
    p.add_argument("--criteria", help="criteria JSON (default thresholds otherwise)")
    p.add_argument("--relax", help="relaxation margin (e.g. 0.15) or relaxed criteria JSON")
    p.add_argument("--oracle", action="store_true", help="also run the all-teacher reference screen")
    p.add_argument("--report")
    p.add_argument("--candidates")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("bias", help="independence-product bias tools")
    bsub = p.add_subparsers(dest="mode", required=True)
    b = bsub.add_parser("sim", help="false-positive inflation simulation")
    b.add_argument("--k", type=int, default=6)
    b.add_argument("--rho", type=float, default=-0.3)
    b.add_argument("--structure", choices=("banded", "equi"), default="banded")
    b.add_argument("--threshold", type=float, default=-1.0)
    b.add_argument("--sigma-pred", type=float, default=0.0)
    b.add_argument("--n", type=int, default=1_000_000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv")
    b.add_argument("--summary")
    b = bsub.add_parser("scan", help="joint probability along a correlation grid")
    b.add_argument("--t1", type=float, default=0.0)
    b.add_argument("--t2", type=float, default=0.0)
    b.add_argument("--steps", type=int, default=39)
    b.add_argument("--csv")
    b.add_argument("--summary")
    b = bsub.add_parser("check", help="case I / case II inequality grid")
    b.add_argument("--summary")
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("bench", help="per-stage throughput")
    p.add_argument("--config")
    p.add_argument("--teacher")
    p.add_argument("--empty", action="store_true", help="benchmark an empty library")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="verify and summarise a pipeline run")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run the staged pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--stages", help="comma-separated subset of stages")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    try:
        apply_thread_cap()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
