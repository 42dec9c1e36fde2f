"""End-to-end staged pipeline with hash-chained JSON manifests.

Stages run in order: library, filter, react, train-gate, embed,
train-surrogate, screen, bias.  Each writes ``manifests/<stage>.json``
holding input and output file hashes, counts, the seed and the hash of the
previous manifest, so any tampered intermediate breaks the chain.  Wall
times go to ``timings.json`` which is kept out of the manifests so reruns
are byte-identical.
"""

import csv
import hashlib
import json
import os
import time
from dataclasses import asdict

import numpy as np

from . import biaslab, demo
from .filters import FilterReport, postfilter, prefilter
from .gate import load_model
from .molgraph import parse_smiles, read_smiles_file, write_smiles
from .properties import PROPERTY_NAMES
from .reactor import ReactantSets, Reaction, count_products, enumerate_library, stream_products
from .screening import (
    DEFAULT_CRITERIA,
    CriteriaSet,
    bias_report,
    brute_force_screen,
    relax,
    two_stage_screen,
    write_candidates,
)
from .surrogate import EmbeddingTable, SurrogateModel, Teacher, build_lookup, pair_inputs

STAGES = ("library", "filter", "react", "train-gate", "embed", "train-surrogate", "screen", "bias")


class StageFailure(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class ChainBroken(ValueError):
    pass


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_smiles_file(path, smiles):
    with open(path, "w") as fh:
        for s in smiles:
            fh.write(s + "\n")


def write_fidelity(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "pearson_r", "mae"])
        for r in rows:
            w.writerow([r["task"], f"{r['pearson_r']:.6f}", f"{r['mae']:.6g}"])


def load_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    cfg.setdefault("out_dir", "run")
    if not os.path.isabs(cfg["out_dir"]):
        cfg["out_dir"] = os.path.join(base, cfg["out_dir"])
    cfg["_base"] = base
    return cfg


class Run:
    """State shared by the stages of one pipeline run."""

    def __init__(self, config):
        self.config = dict(config)
        self.out = self.config["out_dir"]
        self.demo = demo.DemoConfig.from_dict({"seed": self.config.get("seed", 0), **self.config.get("demo", {})})
        self.manifests = os.path.join(self.out, "manifests")
        os.makedirs(self.manifests, exist_ok=True)
        self.previous = None
        self.timings = {}
        self.cache = {}
        public = {k: v for k, v in self.config.items() if not k.startswith("_") and k != "out_dir"}
        self.config_sha256 = hashlib.sha256(json.dumps(public, sort_keys=True).encode()).hexdigest()

    def path(self, name):
        return os.path.join(self.out, name)

    def rel(self, path):
        return os.path.relpath(path, self.out)

    def criteria(self):
        spec = self.config.get("criteria")
        if not spec:
            return DEFAULT_CRITERIA
        return CriteriaSet.load(self._resolve(spec))

    def relaxed(self, final):
        spec = self.config.get("relax", "default")
        if spec == "default":
            return relax(final, self.demo.margin)
        if isinstance(spec, (int, float)):
            return relax(final, float(spec))
        return CriteriaSet.load(self._resolve(spec))

    def _resolve(self, p):
        return p if os.path.isabs(p) else os.path.join(self.config.get("_base", "."), p)

    def record(self, stage, inputs, outputs, counts, status="ok", error=None):
        manifest = {
            "stage": stage,
            "seed": self.demo.seed,
            "config_sha256": self.config_sha256,
            "status": status,
            "inputs": {self.rel(p): sha256_file(p) for p in inputs},
            "outputs": {self.rel(p): sha256_file(p) for p in outputs if os.path.exists(p)},
            "counts": counts,
            "previous_manifest": self.previous,
        }
        if error:
            manifest["error"] = error
        path = os.path.join(self.manifests, f"{stage}.json")
        _dump(path, manifest)
        self.previous = sha256_file(path)
        return manifest


def _stage_library(run):
    cfg = run.demo
    paths = run.config.get("reactants")
    if paths:
        sets = {k: [parse_smiles(s) for s in read_smiles_file(run._resolve(v))] for k, v in paths.items()}
        alcohols, chlorides, acids = sets.get("alcohols", []), sets.get("chlorides", []), sets.get("acids", [])
        purch = sets.get("purchasables", [])
    else:
        rs = demo.make_reactants(cfg)
        alcohols, chlorides, acids = rs.alcohols, rs.chlorides, rs.acids
        purch = demo.make_purchasables(cfg)
    outs = []
    for name, graphs in (("alcohols", alcohols), ("chlorides", chlorides), ("acids", acids), ("purchasables", purch)):
        p = run.path(f"{name}.smi")
        write_smiles_file(p, [write_smiles(g) for g in graphs])
        outs.append(p)
    counts = {"alcohols": len(alcohols), "chlorides": len(chlorides), "acids": len(acids), "purchasables": len(purch)}
    return [], outs, counts


def _read(run, name):
    return [parse_smiles(s) for s in read_smiles_file(run.path(name))]


def _filter_sources(run):
    sources = []
    if run.config.get("library"):
        path = run._resolve(run.config["library"])
        if not os.path.exists(path):
            raise StageFailure("filter", f"library file {path} does not exist")
        sources.append(("library", path))
    for name in ("alcohols", "chlorides", "acids", "purchasables"):
        if os.path.exists(run.path(f"{name}.smi")):
            sources.append((name, run.path(f"{name}.smi")))
    if not sources:
        raise StageFailure("filter", "no library file and no reactant files from the library stage")
    return sources


def _stage_filter(run):
    inputs, outputs, counts = [], [], {}
    report = FilterReport()
    n_in = n_out = 0
    for name, src in _filter_sources(run):
        inputs.append(src)
        graphs = [parse_smiles(s) for s in read_smiles_file(src)]
        check = postfilter if name == "purchasables" else prefilter
        ok = []
        for g in graphs:
            v = check(g)
            report.add(v)
            if v.passed:
                ok.append(g)
        dst = run.path(f"{name}.filtered.smi")
        write_smiles_file(dst, [write_smiles(g) for g in ok])
        outputs.append(dst)
        counts[name] = {"in": len(graphs), "out": len(ok)}
        n_in += len(graphs)
        n_out += len(ok)
    counts["in"], counts["out"] = n_in, n_out
    rp = run.path("filter_report.json")
    report.write(rp)
    outputs.append(rp)
    return inputs, outputs, counts


def _sets(run):
    if "sets" not in run.cache:
        run.cache["sets"] = ReactantSets(
            _read(run, "alcohols.filtered.smi"), _read(run, "chlorides.filtered.smi"), _read(run, "acids.filtered.smi")
        )
    return run.cache["sets"]


def _stage_react(run):
    sets = _sets(run)
    inputs = [run.path(f"{n}.filtered.smi") for n in ("alcohols", "chlorides", "acids")]
    shard = run.config.get("shard")
    shard = tuple(shard) if shard else None
    out = run.path("products.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["smiles", "reaction", "alcohol", "partner"])

        def sink(rec):
            w.writerow([write_smiles(rec.product), rec.reaction.value, rec.parents[0], rec.parents[1]])

        counts = enumerate_library(sets, "stream", sink, shard=shard)
    expected = count_products(sets, shard)
    if counts != expected:
        raise StageFailure("react", f"streamed {counts} but counted {expected}")
    return inputs, [out], counts.to_dict()


def _teacher(run):
    if "teacher" not in run.cache:
        model, _ = load_model(run.path("teacher.cfw"))
        run.cache["teacher"] = Teacher(model, sha256_file(run.path("teacher.cfw")))
    return run.cache["teacher"]


def _stage_train_gate(run):
    model, world, result = demo.build_teacher(run.demo, out_dir=run.out)
    os.replace(run.path("gate.cfw"), run.path("teacher.cfw"))
    os.replace(run.path("gate.cfw.json"), run.path("teacher.cfw.json"))
    os.replace(run.path("gate_metrics.jsonl"), run.path("teacher_metrics.jsonl"))
    last = result.history[-1]
    counts = {
        "epochs": len(result.history),
        "first_loss": result.history[0]["total"],
        "final_loss": last["total"],
        "val_r": last.get("val_r", {}),
    }
    outs = [run.path("teacher.cfw"), run.path("teacher.cfw.json"), run.path("teacher_metrics.jsonl")]
    return [], outs, counts


def _stage_embed(run):
    sets = _sets(run)
    teacher = _teacher(run)
    before = teacher.embed_calls
    reactants = list(zip(sets.alcohol_smiles, sets.alcohols))
    reactants += list(zip(sets.chloride_smiles, sets.chlorides))
    reactants += list(zip(sets.acid_smiles, sets.acids))
    table = build_lookup(reactants, teacher)
    out = run.path("reactants.emb1")
    table.save(out)
    return [run.path("teacher.cfw")], [out], {"entries": len(table), "dim": table.dim,
                                              "teacher_calls": teacher.embed_calls - before}


def _stage_train_surrogate(run):
    sets = _sets(run)
    teacher = _teacher(run)
    table = EmbeddingTable.load(run.path("reactants.emb1"))
    table.check_provenance(teacher.weights_sha256)
    d = demo.distill(run.demo, sets, teacher, table)
    wpath = run.path("surrogate.cfw")
    d.surrogate.save(wpath, {"teacher_sha256": teacher.weights_sha256})
    fpath = run.path("fidelity.csv")
    write_fidelity(fpath, d.fidelity)
    counts = {
        "train_pairs": len(d.train_pairs),
        "teacher_calls": d.teacher_calls,
        "final_loss": d.history[-1]["loss"],
        "heads_r_ge_0.9": sum(1 for r in d.fidelity if r["pearson_r"] >= 0.9),
    }
    return [run.path("teacher.cfw"), run.path("reactants.emb1")], [wpath, wpath + ".json", fpath], counts


def _stage_screen(run):
    sets = _sets(run)
    teacher = _teacher(run)
    surrogate, _ = SurrogateModel.load(run.path("surrogate.cfw"))
    final = run.criteria()
    relaxed = run.relaxed(final)
    purch = _read(run, "purchasables.filtered.smi")
    oracle = brute_force_screen(sets, teacher, final) if run.config.get("oracle") else None
    scored = []
    report, candidates = two_stage_screen(
        sets, teacher, surrogate, relaxed, final, purch, oracle,
        scored_sink=lambda s, src, row: scored.append((s, src, row)),
    )
    rpath, cpath, spath = run.path("screen_report.json"), run.path("candidates.csv"), run.path("teacher_scores.csv")
    report.write(rpath)
    write_candidates(cpath, candidates)
    with open(spath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["smiles", "source", *PROPERTY_NAMES])
        for s, src, row in scored:
            w.writerow([s, src, *(repr(float(v)) for v in row)])
    inputs = [run.path("teacher.cfw"), run.path("surrogate.cfw"), run.path("purchasables.filtered.smi")]
    counts = {"candidates": len(candidates), **report.to_dict()["stages"],
              "teacher_embed_calls": report.teacher_embed_calls}
    if report.missed is not None:
        counts["missed_candidates"] = report.missed
    return inputs, [rpath, cpath, spath], counts


def _stage_bias(run):
    spath = run.path("teacher_scores.csv")
    with open(spath, newline="") as fh:
        rows = [[float(r[p]) for p in PROPERTY_NAMES] for r in csv.DictReader(fh)]
    out = run.path("bias.json")
    P = np.array(rows).reshape(-1, len(PROPERTY_NAMES))
    summary = {"teacher_scored": len(rows)}
    if len(rows):
        summary["screen"] = bias_report(P, run.criteria()).to_dict()
    sim = run.config.get("bias_sim", {"k": 6, "rho": -0.3, "threshold": -1.0, "sigma_pred": 0.3, "n": 200000})
    pts = biaslab.fp_inflation_sim(biaslab.banded_correlation(sim["k"], sim["rho"]), sim["threshold"],
                                   sim["sigma_pred"], sim["n"], run.demo.seed)
    curve = run.path("fp_inflation.csv")
    biaslab.write_curve(curve, pts)
    summary["simulation"] = {**sim, "gaps": [p.gap for p in pts]}
    _dump(out, summary)
    return [spath], [out, curve], {"teacher_scored": len(rows)}


_RUNNERS = {
    "library": _stage_library,
    "filter": _stage_filter,
    "react": _stage_react,
    "train-gate": _stage_train_gate,
    "embed": _stage_embed,
    "train-surrogate": _stage_train_surrogate,
    "screen": _stage_screen,
    "bias": _stage_bias,
}


def run_pipeline(config):
    """Run the enabled stages in order.  Returns (exit_code, manifests)."""
    run = Run(config)
    enabled = config.get("stages") or list(STAGES)
    unknown = set(enabled) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}")
    out = []
    code = 0
    for stage in STAGES:
        if stage not in enabled:
            continue
        t0 = time.perf_counter()
        try:
            inputs, outputs, counts = _RUNNERS[stage](run)
            out.append(run.record(stage, inputs, outputs, counts))
        except Exception as exc:  # recorded in the manifest, reported by exit code
            out.append(run.record(stage, [], [], {}, status="error", error=f"{type(exc).__name__}: {exc}"))
            code = 1
            break
        finally:
            run.timings[stage] = time.perf_counter() - t0
    _dump(run.path("timings.json"), run.timings)
    return code, out


def verify_chain(out_dir):
    """Recompute every hash in the manifest chain; raise :class:`ChainBroken`."""
    mdir = os.path.join(out_dir, "manifests")
    previous = None
    checked = []
    for stage in STAGES:
        path = os.path.join(mdir, f"{stage}.json")
        if not os.path.exists(path):
            continue
        with open(path) as fh:
            m = json.load(fh)
        if m["previous_manifest"] != previous:
            raise ChainBroken(f"{stage}: previous manifest hash mismatch")
        for rel, digest in {**m["inputs"], **m["outputs"]}.items():
            p = os.path.join(out_dir, rel)
            if not os.path.exists(p) or sha256_file(p) != digest:
                raise ChainBroken(f"{stage}: {rel} changed since it was recorded")
        previous = sha256_file(path)
        checked.append(stage)
    return checked


def bench(config):
    """Molecules per second for parse, filter, react, teacher and surrogate."""
    cfg = demo.DemoConfig.from_dict({"seed": config.get("seed", 0), **config.get("demo", {})})
    limit = config.get("bench_products", 2000)
    sets = demo.make_reactants(cfg) if config.get("library", True) else ReactantSets()
    smiles = sets.alcohol_smiles + sets.chloride_smiles + sets.acid_smiles
    out = {}

    def rate(n, seconds):
        return n / seconds if n and seconds > 0 else 0.0

    t = time.perf_counter()
    graphs = [parse_smiles(s) for s in smiles]
    out["parse"] = {"molecules": len(graphs), "per_second": rate(len(graphs), time.perf_counter() - t)}
    t = time.perf_counter()
    for g in graphs:
        prefilter(g)
    out["filter"] = {"molecules": len(graphs), "per_second": rate(len(graphs), time.perf_counter() - t)}
    products = []
    t = time.perf_counter()
    if graphs:
        for _, rec in stream_products(sets):
            products.append(rec)
            if len(products) >= limit:
                break
    out["react"] = {"molecules": len(products), "per_second": rate(len(products), time.perf_counter() - t)}
    teacher_path = config.get("teacher")
    if products and teacher_path:
        model, _ = load_model(teacher_path)
        teacher = Teacher(model)
        t = time.perf_counter()
        teacher.predict([r.product for r in products])
        out["teacher"] = {"molecules": len(products), "per_second": rate(len(products), time.perf_counter() - t)}
        surrogate = SurrogateModel(teacher.latent_dim)
        reactants = list(zip(sets.alcohol_smiles, sets.alcohols)) + list(zip(sets.chloride_smiles, sets.chlorides))
        reactants += list(zip(sets.acid_smiles, sets.acids))
        table = build_lookup(reactants, teacher)
        pairs = []
        for r in products:
            i, j = r.parents
            partner = sets.chloride_smiles[j] if r.reaction is Reaction.Ether else sets.acid_smiles[j]
            pairs.append((sets.alcohol_smiles[i], partner))
        t = time.perf_counter()
        surrogate.infer(pair_inputs(pairs, table))
        out["surrogate"] = {"molecules": len(pairs), "per_second": rate(len(pairs), time.perf_counter() - t)}
    else:
        out["teacher"] = {"molecules": 0, "per_second": 0.0}
        out["surrogate"] = {"molecules": 0, "per_second": 0.0}
    out["config"] = asdict(cfg)
    return out
