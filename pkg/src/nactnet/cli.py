"""Command-line interface.

Every command prints one JSON object on stdout.  Exit codes: 0 when all
checks pass, 1 when a check fails, 2 for usage and input/output errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import compiler
from .data import DatasetError, flip_and_crop, load_cifar10, synthetic_2d
from .layers import LayerKind, lipschitz_audit
from .nn import (
    Network,
    TrainConfig,
    TrainingDiverged,
    build_mlp,
    certify,
    grad_check,
    network_lipschitz_audit,
    train,
)
from .nn.certify import EPS_COLUMNS
from .nn.toy import TOY_ACTIVATIONS, fit_toy, sample_learned
from .pwl import DEFAULT_MAX_K, CpwlError, cpwl_random, load_function, save_function

log = logging.getLogger("nactnet")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
GRAD_TOL = 1e-5
AUDIT_TOL = 1e-6
ACTIVATIONS = ("nact", "maxmin", "abs", "relu-unconstrained")


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, default=_json_default)
    sys.stdout.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _out_dir(path) -> Path:
    if path is None:
        raise UsageError("--out is required")
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_net(path) -> Network:
    try:
        return Network.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read network {path}: {exc}") from exc
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _load_fn(path):
    try:
        return load_function(path)
    except OSError as exc:
        raise UsageError(f"cannot read function {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc


def _dataset(args):
    if args.data_dir:
        (X, y), (Xt, yt), _ = load_cifar10(args.data_dir)
        return (X, y), (Xt, yt), True
    (X, y), (Xt, yt) = synthetic_2d(seed=args.seed)
    return (X, y), (Xt, yt), False


def cmd_compile(args) -> int:
    f = _load_fn(args.input)
    if args.lo is not None or args.hi is not None:
        if args.lo is None or args.hi is None:
            raise UsageError("--lo and --hi go together")
        net = compiler.compile_bounded(f, args.lo, args.hi)
        report = compiler.verify_compiled(net, f, args.lo, args.hi, check_tails=False)
    else:
        net = compiler.compile(f)
        report = compiler.verify_compiled(net, f)
    if args.out:
        net.save(args.out)
    _emit({"command": "compile", "out": args.out, **report.to_json()})
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    net, f = _load_net(args.net), _load_fn(args.fn)
    if net.input_dim != 1 or net.output_dim != 1:
        raise UsageError("verify needs a network with one input and one output")
    bounded = args.lo is not None or args.hi is not None
    report = compiler.verify_compiled(net, f, args.lo, args.hi,
                                      check_tails=not (bounded or args.no_tails))
    _emit({"command": "verify", **report.to_json()})
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_random_fn(args) -> int:
    rng = np.random.default_rng(args.seed)
    f = cpwl_random(args.k, args.lo, args.hi, rng, max_k=args.max_k)
    if args.out:
        save_function(f, args.out)
    _emit({"command": "random-fn", "out": args.out, **f.to_json()})
    return EXIT_OK


def cmd_fit_toy(args) -> int:
    out = _out_dir(args.out)
    net, hist = fit_toy(args.activation, args.seed, args.epochs, args.nact_init,
                        learning_rate=args.lr if args.lr is not None else 0.01)
    hist.write_csv(out / "history.csv")
    xs, ys = sample_learned(net)
    with open(out / "learned.json", "w") as fh:
        json.dump({"x": xs.tolist(), "y": ys.tolist()}, fh)
    net.save(out / "network.json")
    _emit({"command": "fit-toy", "activation": args.activation, "seed": args.seed,
           "epochs": args.epochs, "final_mse": float(hist.losses[-1]),
           "first_mse": float(hist.losses[0]), "out": str(out)})
    return EXIT_OK


def _audit(net: Network, trials: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    constrained = all(l.kind is not LayerKind.LINEAR for l in net.dense_layers)
    layers = []
    for layer in net.dense_layers:
        a = lipschitz_audit(layer.p, trials, rng)
        layers.append({"kind": layer.kind.value, "ratio": a.ratio, "bound": a.bound})
    ratio = network_lipschitz_audit(net, trials, rng)
    ok = (not constrained) or (ratio <= 1 + AUDIT_TOL
                               and all(l["ratio"] <= 1 + AUDIT_TOL for l in layers))
    return {"constrained": constrained, "network_ratio": ratio, "layers": layers, "passed": ok}


def _augmenter(args, images: bool):
    if not (args.augment and images):
        return None
    return flip_and_crop


def cmd_train(args) -> int:
    out = _out_dir(args.out)
    (X, y), (Xt, yt), images = _dataset(args)
    n_cls = int(max(y.max(), yt.max())) + 1
    scale = args.nact_lr_scale
    net = build_mlp(X.shape[1], n_cls, args.width, args.depth, args.layer_type,
                    args.activation, args.nact_init, seed=args.seed, nact_scale=scale)
    config = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                         epsilon=args.epsilon, nact_init=args.nact_init, layer_type=args.layer_type,
                         nact_lr_scale=scale, schedule=args.schedule, seed=args.seed)
    net.meta["train_config"] = config.to_dict()
    net, hist = train(net, (X, y), config, eval_data=(Xt, yt), augment=_augmenter(args, images))
    hist.write_csv(out / "history.csv")
    net.save(out / "checkpoint.json")
    audit = _audit(net, args.audit_trials, args.seed)
    train_acc = certify(net, X, y).accuracy
    _emit({"command": "train", "epochs": args.epochs, "train_accuracy": train_acc,
           "final": hist.rows[-1], "audit": audit, "out": str(out)})
    return EXIT_OK if audit["passed"] else EXIT_FAIL


def cmd_certify(args) -> int:
    net = _load_net(args.net)
    (X, y), (Xt, yt), _ = _dataset(args)
    if args.split == "train":
        Xt, yt = X, y
    if Xt.shape[1] != net.input_dim:
        raise UsageError(f"dataset has dimension {Xt.shape[1]}, network expects {net.input_dim}")
    rep = certify(net, Xt, yt)
    cra = rep.cra()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "label", "predicted", "correct", "radius", *EPS_COLUMNS])
            for i in range(len(yt)):
                flags = (rep.robust[i] & rep.correct[i]).astype(int).tolist()
                w.writerow([i, int(yt[i]), int(rep.predicted[i]), int(rep.correct[i]),
                            repr(float(rep.radius[i])), *flags])
            w.writerow(["all", "", "", rep.accuracy, "", *cra.tolist()])
    _emit({"command": "certify", "split": args.split, "n": len(yt), "accuracy": rep.accuracy,
           **dict(zip(EPS_COLUMNS, cra.tolist())), "out": args.out})
    return EXIT_OK


def _net_from_args(args) -> Network:
    if args.net:
        return _load_net(args.net)
    return build_mlp(args.in_dim, args.out_dim, args.width, args.depth, args.layer_type,
                     args.activation, args.nact_init, seed=args.seed)


def cmd_grad_check(args) -> int:
    net = _net_from_args(args)
    x = np.random.default_rng(args.seed).standard_normal((args.batch, net.input_dim))
    res = grad_check(net, x, h=args.h, seed=args.seed)
    ok = res.max_rel_error <= GRAD_TOL
    _emit({"command": "grad-check", "max_rel_error": res.max_rel_error, "checked": res.checked,
           "skipped": res.skipped, "tol": GRAD_TOL, "passed": ok})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_audit(args) -> int:
    net = _net_from_args(args)
    res = _audit(net, args.trials, args.seed)
    bounds = [b for b in net.layer_bounds() if b is not None]
    res["max_layer_bound"] = max(bounds) if bounds else None
    _emit({"command": "audit", **res})
    return EXIT_OK if res["passed"] else EXIT_FAIL


def _model_flags(p, with_io: bool = False):
    p.add_argument("--activation", choices=ACTIVATIONS, default="nact")
    p.add_argument("--layer-type", choices=[k.value for k in LayerKind if k is not LayerKind.LINEAR],
                   default="aol")
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--nact-init", choices=["absid", "zero", "random"], default="absid")
    if with_io:
        p.add_argument("--net", help="network JSON; otherwise a fresh one is built")
        p.add_argument("--in-dim", type=int, default=4)
        p.add_argument("--out-dim", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nactnet", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a function JSON into a network JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("verify", help="check a network against a function")
    p.add_argument("--net", required=True)
    p.add_argument("--fn", required=True)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--no-tails", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("random-fn", help="write a seeded random function JSON")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lo", type=float, default=-5.0)
    p.add_argument("--hi", type=float, default=5.0)
    p.add_argument("--max-k", type=int, default=DEFAULT_MAX_K)
    p.add_argument("--out")
    p.set_defaults(func=cmd_random_fn)

    p = sub.add_parser("fit-toy", help="fit the N-function on [-3, 3]")
    p.add_argument("--activation", choices=TOY_ACTIVATIONS, default="nact")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr", type=float)
    p.add_argument("--nact-init", choices=["absid", "zero", "random"], default="absid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_toy)

    p = sub.add_parser("train", help="train a classifier with the offset loss")
    _model_flags(p)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, help="peak rate; defaults to the per-layer table")
    p.add_argument("--epsilon", type=float, default=36 / 255)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--schedule", choices=["one_cycle", "constant"], default="one_cycle")
    p.add_argument("--nact-lr-scale", type=float, default=0.1)
    p.add_argument("--augment", action="store_true", help="flip and crop (CIFAR-10 only)")
    p.add_argument("--audit-trials", type=int, default=1000)
    p.add_argument("--data-dir", help="CIFAR-10 binary directory; default is the synthetic 2D set")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", help="per-example certified radii")
    p.add_argument("--net", required=True)
    p.add_argument("--data-dir")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("grad-check", help="backward against central differences")
    _model_flags(p, with_io=True)
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--batch", type=int, default=3)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("audit", help="empirical Lipschitz audit")
    _model_flags(p, with_io=True)
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CpwlError, DatasetError, OSError) as exc:
        _emit({"command": args.command, "error": type(exc).__name__, "message": str(exc)})
        return EXIT_USAGE
    except (TrainingDiverged, compiler.CompileError) as exc:
        _emit({"command": args.command, "error": type(exc).__name__, "message": str(exc)})
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
