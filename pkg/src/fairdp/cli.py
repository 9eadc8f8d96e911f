"""Command-line interface.

Subcommands: train, sweep, calibrate, audit-sensitivity, evaluate, synth.
Exit codes: 0 success, 2 configuration error, 3 divergence in a train run.
Runs execute sequentially, so results are deterministic for a fixed seed;
--deterministic is accepted for interface stability and pins that behavior.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from .classifier import (
    ModelParams,
    load_checkpoint,
    proba_lipschitz_bound,
    save_checkpoint,
)
from .dataset import load_csv, sensitive_stats, train_test_split
from .exceptions import DivergenceError, FairdpError
from .fairness import DEMOGRAPHIC_PARITY, EQUALIZED_ODDS, DualMatrix, FermiConfig
from .harness import (
    ALL_FEATURES,
    NO_PRIVACY,
    SENSITIVE_ONLY,
    ExperimentConfig,
    SyntheticSpec,
    calibrate_for_run,
    emit_csv,
    evaluate_metrics,
    run_sweep,
    synth_dataset,
)
from .optimizer import SgdaConfig, dp_fermi_train
from .privacy import empirical_sensitivity_audit, sensitivity_bounds

NOTIONS = {"dp": DEMOGRAPHIC_PARITY, "eo": EQUALIZED_ODDS}
GRANULARITY_FLAGS = {"sensitive": SENSITIVE_ONLY, "all": ALL_FEATURES, "none": NO_PRIVACY}


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="input CSV path")
    p.add_argument("--label-col", default="label")
    p.add_argument("--sensitive-col", default="sensitive")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--notion", choices=sorted(NOTIONS), default="dp")
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--eta-theta", type=float, default=0.01)
    p.add_argument("--eta-w", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--box-radius", type=float, default=1.0)
    p.add_argument("--clip", type=float, default=1.0, help="per-sample loss-gradient clip; 0 disables")
    p.add_argument("--granularity", choices=sorted(GRANULARITY_FLAGS), default="sensitive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairdp")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="one private fair training run")
    _add_schema_flags(p)
    _add_train_flags(p)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--out", help="checkpoint JSON path")

    p = sub.add_parser("sweep", help="grid over epsilon, lambda and seeds")
    _add_schema_flags(p)
    _add_train_flags(p)
    p.add_argument("--epsilon", type=float, nargs="+", default=[1.0])
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", default=[0.0])
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=True, help="records CSV path")

    p = sub.add_parser("calibrate", help="print the noise/sensitivity table")
    p.add_argument("--epsilon", type=float, nargs="+", required=True)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--batch-size", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--l-theta", type=float, default=1.0)
    p.add_argument("--box-radius", type=float, default=1.0)
    p.add_argument("--labels", type=int, default=2, help="number of classes l")
    p.add_argument("--granularity", choices=sorted(GRANULARITY_FLAGS), default="sensitive")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("audit-sensitivity", help="empirical adjacent-dataset audit")
    _add_schema_flags(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--box-radius", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="metrics of a checkpoint on a dataset")
    _add_schema_flags(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d-x", type=int, default=5)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--bias", type=float, default=0.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _cmd_train(args) -> int:
    ds = load_csv(args.dataset, args.label_col, args.sensitive_col)
    train, test = train_test_split(ds, 0.25, args.seed)
    m = min(args.batch_size, train.n)
    T = args.epochs * math.ceil(train.n / m)
    noise = calibrate_for_run(
        GRANULARITY_FLAGS[args.granularity],
        args.epsilon,
        args.delta,
        T,
        train.n,
        m,
        sensitive_stats(train).rho,
        proba_lipschitz_bound(train.features),
        args.box_radius,
        train.l,
    )
    config = SgdaConfig(
        eta_theta=args.eta_theta,
        eta_w=args.eta_w,
        T=T,
        m=m,
        box_radius=args.box_radius,
        clip_theta=args.clip if args.clip > 0 else None,
        seed=args.seed,
    )
    result = dp_fermi_train(
        train,
        ModelParams.zeros(train.l, train.d_x),
        FermiConfig(args.lam, NOTIONS[args.notion]),
        config,
        noise,
    )
    metrics = evaluate_metrics(result.params, test)
    print(f"T={T} m={m} sigma_theta_sq={noise.sigma_theta_sq:.6g} sigma_w_sq={noise.sigma_w_sq:.6g}")
    for name, value in metrics.items():
        print(f"{name}={value:.6g}")
    if args.out:
        save_checkpoint(
            result.params,
            args.out,
            metadata={
                "label_names": list(ds.label_names or []),
                "sensitive_names": list(ds.sensitive_names or []),
                "feature_names": list(ds.feature_names or []),
            },
        )
    return 0


def _cmd_sweep(args) -> int:
    config = ExperimentConfig(
        dataset=args.dataset,
        notion=NOTIONS[args.notion],
        lambdas=tuple(args.lam),
        epsilons=tuple(args.epsilon),
        delta=args.delta,
        trials=args.trials,
        granularity=GRANULARITY_FLAGS[args.granularity],
        eta_theta=args.eta_theta,
        eta_w=args.eta_w,
        epochs=args.epochs,
        batch_size=args.batch_size,
        box_radius=args.box_radius,
        clip_theta=args.clip if args.clip > 0 else None,
        master_seed=args.seed,
        label_col=args.label_col,
        sensitive_col=args.sensitive_col,
    )
    emit_csv(run_sweep(config), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_calibrate(args) -> int:
    m = args.batch_size
    T = args.epochs * math.ceil(args.n / m)
    rows = []
    for epsilon in args.epsilon:
        noise = calibrate_for_run(
            GRANULARITY_FLAGS[args.granularity],
            epsilon,
            args.delta,
            T,
            args.n,
            m,
            args.rho,
            args.l_theta,
            args.box_radius,
            args.labels,
        )
        bounds = sensitivity_bounds(args.box_radius, args.l_theta, m, args.rho)
        rows.append(
            [epsilon, args.delta, T, args.n, m, args.rho,
             noise.sigma_theta_sq, noise.sigma_w_sq, bounds.delta_theta, bounds.delta_w]
        )
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    writer = csv.writer(out)
    writer.writerow(
        ["epsilon", "delta", "T", "n", "m", "rho",
         "sigma_theta_sq", "sigma_w_sq", "delta_theta", "delta_w"]
    )
    for row in rows:
        writer.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])
    if args.out:
        out.close()
    return 0


def _cmd_audit(args) -> int:
    ds = load_csv(args.dataset, args.label_col, args.sensitive_col)
    rng = np.random.default_rng(args.seed)
    theta = ModelParams(
        rng.normal(scale=0.5, size=(ds.l, ds.d_x)), rng.normal(scale=0.5, size=ds.l)
    )
    w = DualMatrix(rng.uniform(-args.box_radius, args.box_radius, size=(ds.k, ds.l)), args.box_radius)
    observed_theta, observed_w = empirical_sensitivity_audit(
        theta, w, ds, args.trials, args.batch_size, rng
    )
    L_theta = proba_lipschitz_bound(ds.features)
    rho = sensitive_stats(ds).rho
    bounds = sensitivity_bounds(args.box_radius, L_theta, args.batch_size, rho)
    print(f"observed_delta_theta={observed_theta:.6g} bound={bounds.delta_theta:.6g}")
    print(f"observed_delta_w={observed_w:.6g} bound={bounds.delta_w:.6g}")
    ok = observed_theta <= bounds.delta_theta and observed_w <= bounds.delta_w
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_evaluate(args) -> int:
    ds = load_csv(args.dataset, args.label_col, args.sensitive_col)
    theta, _ = load_checkpoint(args.checkpoint)
    for name, value in evaluate_metrics(theta, ds).items():
        print(f"{name}={value:.6g}")
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n=args.n,
        d_x=args.d_x,
        k=args.k,
        l=args.l,
        bias=args.bias,
        noise_scale=args.noise_scale,
        seed=args.seed,
    )
    ds = synth_dataset(spec)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(ds.d_x)] + ["label", "sensitive"])
        for i in range(ds.n):
            writer.writerow(
                [f"{v:.10g}" for v in ds.features[i]]
                + [int(ds.labels[i]), int(ds.sensitive[i])]
            )
    print(f"wrote {args.out} ({ds.n} rows, {ds.d_x} features)")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "calibrate": _cmd_calibrate,
    "audit-sensitivity": _cmd_audit,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FairdpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
