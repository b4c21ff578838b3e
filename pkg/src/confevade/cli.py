"""Command-line driver: ``confevade <command> ...``.

Every command that writes a file also writes ``<file>.manifest.json`` with
the resolved argument list, seed, SHA-256 digests of inputs and outputs and
the tool version.  ``confevade rerun <manifest>`` replays it and checks the
outputs come out byte-identical.

The seed comes from ``--seed``, else from the ``CONFEVADE_SEED`` environment
variable, else 0.  Exit codes: 0 success, 2 unreadable or malformed input,
3 precondition violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from . import attack as atk
from . import campaign as cp
from . import classifier, data
from .errors import (AugmentationError, ConfevadeError, InversionError, NumericalError, ParseError,
                     PreconditionError, SamplingExhaustedError, StructuralError)
from .vm import VariabilityModel, config_space_log10, gen_motiv_like, sample_random

SEED_ENV = "CONFEVADE_SEED"


# -- helpers ----------------------------------------------------------------

def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolve_seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ParseError(f"{SEED_ENV}={env!r} is not an integer") from None


def float_list(text):
    """``"1e-6,1e-4,1"`` or ``"1e-4..1e1"`` (every power of ten in between)."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (float(v) for v in text.split(".."))
            a, b = math.log10(lo), math.log10(hi)
            if a != round(a) or b != round(b) or a > b:
                raise ValueError
            return tuple(float(10.0 ** k) for k in range(round(a), round(b) + 1))
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _load_model(path):
    return VariabilityModel.load(path)


def _load_svm(path, model):
    svm = classifier.LinearSvm.load(path)
    if svm.n_features != model.n_features:
        raise StructuralError(f"classifier has {svm.n_features} weights, the model has {model.n_features} features")
    return svm


def _benchmark(args, seed):
    """Model and oracle from files, or the generated benchmark for ``seed``."""
    model = _load_model(args.model) if args.model else gen_motiv_like(seed)
    if args.oracle:
        oracle = cp.SyntheticOracle.load(args.oracle)
        if oracle.n_features != model.n_features:
            raise StructuralError("oracle and model dimensions differ")
    elif args.model:
        oracle = None
    else:
        oracle = cp.benchmark_oracle(model, seed)
    return model, oracle


def _train_params(args, seed):
    return classifier.TrainParams(regularization=args.regularization, epochs=args.epochs,
                                  learning_rate=args.learning_rate, seed=seed, scale=args.scale,
                                  solver=args.solver, tolerance=args.tolerance)


# -- commands ---------------------------------------------------------------
# Each returns (inputs, outputs): the files it read and wrote.

def cmd_model_gen(args, seed):
    model = gen_motiv_like(seed, n_constraints=args.constraints)
    model.save(args.out)
    print(f"wrote {model.n_features} features and {len(model.constraints)} constraints to {args.out}")
    return [], [args.out]


def cmd_model_inspect(args, seed):
    model = _load_model(args.path)
    c = model.counts()
    print(f"features: {model.n_features} (boolean {c['boolean']}, enumeration {c['enumeration']}, "
          f"real {c['real']})")
    print(f"constraints: {len(model.constraints)}")
    for con in model.constraints:
        print(f"  {con}")
    print(f"log10(size) ≈ {config_space_log10(model):.1f}")
    return [args.path], []


def cmd_oracle(args, seed):
    model = _load_model(args.model)
    oracle = cp.benchmark_oracle(model, seed, target_ratio=args.ratio, n=args.n,
                                 n_quality=args.n_quality, curvature=args.curvature)
    oracle.save(args.out)
    print(f"oracle over {len(oracle.weights)} features, threshold {oracle.threshold:.6g}")
    return [args.model], [args.out]


def cmd_sample(args, seed):
    model = _load_model(args.model)
    X = sample_random(model, args.n, seed)
    inputs = [args.model]
    if args.oracle:
        oracle = cp.SyntheticOracle.load(args.oracle)
        ds = data.Dataset(model, X, cp.oracle_label(oracle, X) if len(X) else [])
        data.save_csv(ds, args.out)
        inputs.append(args.oracle)
        print(f"sampled {len(X)} configurations, {ds.class_counts()[1]} non-acceptable")
    else:
        data.save_configs(model, X, args.out)
        print(f"sampled {len(X)} configurations")
    return inputs, [args.out]


def cmd_label(args, seed):
    model = _load_model(args.model)
    oracle = cp.SyntheticOracle.load(args.oracle)
    X = data.load_configs(model, args.input)
    ds = data.Dataset(model, X, cp.oracle_label(oracle, X) if len(X) else [])
    data.save_csv(ds, args.out)
    print(f"labeled {len(ds)} rows: {ds.class_counts()}")
    return [args.model, args.oracle, args.input], [args.out]


def cmd_split(args, seed):
    model = _load_model(args.model)
    ds = data.load_csv(model, args.input)
    train, test = data.split_stratified(ds, args.train_n, seed)
    data.save_csv(train, args.train_out)
    data.save_csv(test, args.test_out)
    print(f"train {len(train)} rows {train.class_counts()}, test {len(test)} rows {test.class_counts()}")
    return [args.model, args.input], [args.train_out, args.test_out]


def cmd_balance(args, seed):
    model = _load_model(args.model)
    ds = data.load_csv(model, args.input)
    out = data.balance_with_centroids(ds, seed)
    data.save_csv(out, args.out)
    print(f"added {len(out) - len(ds)} centroids: {out.class_counts()}")
    return [args.model, args.input], [args.out]


def cmd_train(args, seed):
    model = _load_model(args.model)
    ds = data.load_csv(model, args.input)
    svm = classifier.train(ds, _train_params(args, seed))
    svm.save(args.out)
    print(f"training accuracy {classifier.accuracy(svm, ds):.4f}")
    for name, mag in classifier.top_features(svm, min(8, svm.n_features)):
        print(f"  {name:>12s}  |w| = {mag:.6g}")
    return [args.model, args.input], [args.out]


def _run_attack(args, seed, kind):
    model = _load_model(args.model)
    svm = _load_svm(args.svm, model)
    ds = data.load_csv(model, args.input)
    seeds = atk.attack_pool_seeds(svm, ds, args.source)
    params = atk.AttackParams(args.t, args.disp, args.source, repair_each_step=not args.repair_at_end,
                              sign_per_step=not args.sign_once)
    results = atk.run_attack_pool(model, svm, seeds, args.attacks, params, seed, kind)
    atk.save_results_csv(model, svm, results, args.source, args.out)
    mis, valid = atk.summarize_results(model, svm, results, args.source)
    print(f"{kind}: {len(seeds)} seed rows, {args.attacks} attacks, {mis} misclassified, {valid} valid")
    return [args.model, args.svm, args.input], [args.out]


def cmd_attack(args, seed):
    return _run_attack(args, seed, atk.EVASION)


def cmd_baseline(args, seed):
    return _run_attack(args, seed, atk.RANDOM)


def cmd_rq1(args, seed):
    model, oracle = _benchmark(args, seed)
    if oracle is None:
        raise PreconditionError("rq1 with --model also needs --oracle")
    balanced = {"no": (False,), "yes": (True,), "both": (False, True)}[args.balanced]
    kw = dict(step_sizes=args.t_grid, nb_disps=args.disp, balanced=balanced)
    if args.reps is not None:
        kw["repetitions"] = args.reps
    if args.attacks is not None:
        kw["n_attacks"] = args.attacks
    grid = cp.GridSpec.full_scale(**kw) if args.paper_scale else cp.GridSpec(**kw)
    report = cp.rq1_campaign(model, oracle, grid, args.kind, seed, args.source, args.n_samples,
                             args.train_n, _train_params(args, seed), args.jobs)
    report.save(args.out)
    print(f"rq1 {args.kind}: {len(report.records)} records, {len(report.errors)} errors")
    for (t, nd, bal), med in cp.median_by_cell(report, "n_misclassified").items():
        print(f"  t={t:g} nb_disp={nd} balanced={int(bal)}  median misclassified {med:g} / {grid.n_attacks}")
    return [p for p in (args.model, args.oracle) if p], [args.out]


def cmd_rq2(args, seed):
    model, oracle = _benchmark(args, seed)
    if args.label_mode == "oracle" and oracle is None:
        raise PreconditionError("oracle label mode needs --oracle")
    inputs = [p for p in (args.model, args.oracle) if p]
    if (args.train is None) != (args.test is None):
        raise PreconditionError("--train and --test go together")
    if args.train:
        train = data.load_csv(model, args.train)
        test = data.load_csv(model, args.test)
        inputs += [args.train, args.test]
    else:
        if oracle is None:
            raise PreconditionError("rq2 without --train/--test needs an oracle to label a sample")
        full = cp.labeled_sample(model, oracle, args.n_samples, cp.derive_seed(seed, "sample"))
        train, test = cp.prepare_split(full, args.train_n, seed, 0, False)
    params = _train_params(args, seed)
    report = cp.rq2_retrain(model, oracle, train, test, args.t_grid, args.n_adv, args.reps, seed,
                            args.disp, args.source, args.label_mode, params, args.jobs)
    report.save(args.out)
    base = report.baselines[0]["accuracy"]
    print(f"rq2: baseline accuracy {base:.4f}")
    for (t, _nd, _b), med in cp.median_by_cell(report, "accuracy").items():
        print(f"  t={t:g}  median accuracy {med:.4f} ({med - base:+.4f})")
    return inputs, [args.out]


def cmd_report(args, seed):
    report = cp.CampaignReport.load(args.input)
    Path(args.out).write_text(cp.summary_csv(report), encoding="utf-8", newline="\n")
    print(f"summarized {len(report.records)} records into {args.out}")
    return [args.input], [args.out]


def cmd_rerun(args, seed):
    try:
        doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        argv, inputs, outputs = doc["argv"], doc["inputs"], doc["outputs"]
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.manifest}: invalid JSON: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{args.manifest}: not a run manifest ({exc})") from exc
    for path, digest in inputs.items():
        if _sha256(path) != digest:
            raise PreconditionError(f"input {path} changed since the recorded run")
    code = main(argv)
    if code != 0:
        raise NumericalError(f"replayed command exited with status {code}")
    differ = [p for p, d in outputs.items() if _sha256(p) != d]
    if differ:
        raise NumericalError(f"outputs differ from the recorded run: {', '.join(differ)}")
    print(f"reproduced {len(outputs)} output file(s) byte for byte")
    return [], []


# -- parser -----------------------------------------------------------------

def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: ${SEED_ENV}, else 0)")


def _add_train_args(p):
    d = classifier.TrainParams()
    g = p.add_argument_group("training")
    g.add_argument("--regularization", type=float, default=d.regularization, help="hinge-loss weight C")
    g.add_argument("--epochs", type=int, default=d.epochs)
    g.add_argument("--learning-rate", type=float, default=d.learning_rate, help="initial rate (sgd solver)")
    g.add_argument("--solver", choices=classifier.SOLVERS, default=d.solver)
    g.add_argument("--tolerance", type=float, default=d.tolerance, help="stopping tolerance (smo solver)")
    g.add_argument("--scale", action="store_true", help="min-max scale features before training")


def _add_benchmark_args(p):
    p.add_argument("--model", help="variability model JSON (default: generated benchmark for --seed)")
    p.add_argument("--oracle", help="oracle JSON (default: calibrated benchmark oracle for --seed)")
    p.add_argument("--n-samples", type=int, default=4500)
    p.add_argument("--train-n", type=int, default=500)
    p.add_argument("--source", type=int, choices=(-1, 1), default=1, help="class the attacks start from")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser():
    ap = argparse.ArgumentParser(prog="confevade", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"confevade {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="generate or inspect variability models")
    msub = p.add_subparsers(dest="action", required=True)
    q = msub.add_parser("gen", help="write a generated model")
    q.add_argument("--preset", choices=("motiv-like",), default="motiv-like")
    q.add_argument("--constraints", type=int, default=3, help="number of requires/excludes constraints")
    q.add_argument("--out", required=True)
    _add_seed(q)
    q.set_defaults(func=cmd_model_gen, name="model gen")
    q = msub.add_parser("inspect", help="print feature counts and space size")
    q.add_argument("path")
    q.set_defaults(func=cmd_model_inspect, name="model inspect")

    p = sub.add_parser("oracle", help="calibrate a synthetic quality oracle")
    p.add_argument("--model", required=True)
    p.add_argument("--ratio", type=float, default=0.1, help="target fraction of non-acceptable configurations")
    p.add_argument("--n", type=int, default=4500, help="calibration sample size")
    p.add_argument("--n-quality", type=int, default=8)
    p.add_argument("--curvature", type=float, default=0.02)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_oracle, name="oracle")

    p = sub.add_parser("sample", help="sample valid configurations")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--oracle", help="label the sample with this oracle")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_sample, name="sample")

    p = sub.add_parser("label", help="label configurations with an oracle")
    p.add_argument("--model", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label, name="label")

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--train-n", type=int, required=True)
    p.add_argument("--train-out", default="train.csv")
    p.add_argument("--test-out", default="test.csv")
    _add_seed(p)
    p.set_defaults(func=cmd_split, name="split")

    p = sub.add_parser("balance", help="balance classes with minority centroids")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_balance, name="balance")

    p = sub.add_parser("train", help="train a linear classifier")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_train_args(p)
    _add_seed(p)
    p.set_defaults(func=cmd_train, name="train")

    for name, func, help_ in (("attack", cmd_attack, "pooled gradient evasion attacks"),
                              ("baseline", cmd_baseline, "pooled random-perturbation attacks")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model", required=True)
        p.add_argument("--svm", required=True)
        p.add_argument("--in", dest="input", required=True, help="labeled CSV whose source-class rows seed the pool")
        p.add_argument("--t", type=float, required=True, help="step size")
        p.add_argument("--disp", type=int, default=20, help="displacements per attack")
        p.add_argument("--attacks", type=int, default=400)
        p.add_argument("--source", type=int, choices=(-1, 1), default=1)
        p.add_argument("--repair-at-end", action="store_true", help="repair types once after the last step")
        p.add_argument("--sign-once", action="store_true", help="random baseline: one sign per attack")
        p.add_argument("--out", required=True)
        _add_seed(p)
        p.set_defaults(func=func, name=name)

    p = sub.add_parser("rq1", help="success and validity over a step-size grid")
    _add_benchmark_args(p)
    p.add_argument("--kind", choices=(atk.EVASION, atk.RANDOM), default=atk.EVASION)
    p.add_argument("--t-grid", type=float_list, default=cp.STEP_SIZES)
    p.add_argument("--disp", type=int_list, default=cp.NB_DISPS)
    p.add_argument("--reps", type=int, default=None, help="repetitions (default 5, 10 with --paper-scale)")
    p.add_argument("--attacks", type=int, default=None, help="attacks per cell (default 400, 4000 with --paper-scale)")
    p.add_argument("--paper-scale", action="store_true", help="full grid: 10 repetitions of 4000 attacks")
    p.add_argument("--balanced", choices=("no", "yes", "both"), default="both")
    p.add_argument("--out", required=True)
    _add_train_args(p)
    _add_seed(p)
    p.set_defaults(func=cmd_rq1, name="rq1")

    p = sub.add_parser("rq2", help="accuracy after retraining with injected attacks")
    _add_benchmark_args(p)
    p.add_argument("--train", help="training CSV (default: split of a labeled sample)")
    p.add_argument("--test", help="test CSV")
    p.add_argument("--t-grid", type=float_list, default=cp.RQ2_STEP_SIZES)
    p.add_argument("--disp", type=int, default=20)
    p.add_argument("--n-adv", type=int, default=25)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--label-mode", choices=("oracle", "source"), default="oracle")
    p.add_argument("--out", required=True)
    _add_train_args(p)
    _add_seed(p)
    p.set_defaults(func=cmd_rq2, name="rq2")

    p = sub.add_parser("report", help="five-number summary CSV of a campaign report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report, name="report")

    p = sub.add_parser("rerun", help="replay a run manifest and verify its outputs")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun, name="rerun")
    return ap


def _write_manifest(args, argv, seed, inputs, outputs):
    params = {k: list(v) if isinstance(v, tuple) else v for k, v in vars(args).items()
              if k not in ("func", "name")}
    if "seed" in params:
        params["seed"] = seed
    if hasattr(args, "seed") and args.seed is None:
        argv = list(argv) + ["--seed", str(seed)]
    doc = {"command": args.name, "argv": list(argv), "params": params,
           "seed": seed if hasattr(args, "seed") else None,
           "inputs": {p: _sha256(p) for p in inputs},
           "outputs": {p: _sha256(p) for p in outputs},
           "version": __version__}
    Path(f"{outputs[0]}.manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                                     encoding="utf-8")


_EXIT = ((ParseError, 2), (OSError, 2), (StructuralError, 3), (PreconditionError, 3),
         (SamplingExhaustedError, 3), (AugmentationError, 3), (InversionError, 3), (NumericalError, 4))


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        seed = _resolve_seed(args)
        inputs, outputs = args.func(args, seed)
        if outputs:
            _write_manifest(args, argv, seed, inputs, outputs)
    except (ConfevadeError, OSError) as exc:
        print(f"confevade: error: {exc}", file=sys.stderr)
        for cls, code in _EXIT:
            if isinstance(exc, cls):
                return code
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
