"""Command-line surface.

Subcommands: synth, train, eval, gradcheck, scanbench, erf, params.
Configuration comes from an optional JSON file (sections "model", "train",
"synth", "bench") plus repeated `--set key=value` overrides; bare keys are
resolved against the sections a subcommand uses, dotted keys
("train.epochs=50") are explicit. Exit codes: 0 success, 1 validation
failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from .. import kernels
from ..model import ModelConfig, flop_estimate, init_weights, param_count
from ..numerics import ConfigError, NumericsError, ShapeError
from ..ssm import ContractViolation
from . import gradsuite
from .erf import model_erf_map, support_fraction
from .synth import SplitError, load_manifest, synth_generate
from .tensorfile import FormatError, write_tensor
from .train import (
    TrainConfig,
    TrainingDiverged,
    evaluate,
    load_checkpoint,
    train,
)

_VALIDATION_ERRORS = (
    ConfigError,
    ShapeError,
    FormatError,
    SplitError,
    ContractViolation,
    FileNotFoundError,
    KeyError,
    json.JSONDecodeError,
)

_SYNTH_DEFAULTS = {
    "classes": 3,
    "patch": 8,
    "bands": 32,
    "aux_channels": 2,
    "n_train": 300,
    "n_test": 300,
    "noise": 0.05,
}

_BENCH_DEFAULTS = {"P": 4096, "C": 8, "N": 16, "chunk": 64, "reps": 3}


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{message}\n{self.format_usage()}")


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _parse_sets(pairs):
    out = []
    for item in pairs or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        out.append((key.strip(), _coerce(raw.strip())))
    return out


def _load_config_file(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise CliError("config file must hold a JSON object")
    return doc


def _resolve(sections: dict, overrides, order):
    """Apply --set pairs onto named section dicts, bare keys by search order."""
    for key, value in overrides:
        if "." in key:
            sec, field = key.split(".", 1)
            if sec not in sections:
                raise CliError(f"unknown config section {sec!r} in --set {key}")
            sections[sec][field] = value
            continue
        for sec in order:
            fields = sections[f"_{sec}_fields"]
            if key in fields:
                sections[sec][key] = value
                break
        else:
            raise CliError(f"--set key {key!r} matches no config field in {order}")
    return sections


def _model_fields():
    return {f.name for f in dataclasses.fields(ModelConfig)}


def _train_fields():
    return {f.name for f in dataclasses.fields(TrainConfig)}


def _gather(args, use):
    doc = _load_config_file(getattr(args, "config", None))
    sections = {
        "model": dict(doc.get("model", {})),
        "train": dict(doc.get("train", {})),
        "synth": {**_SYNTH_DEFAULTS, **doc.get("synth", {})},
        "bench": {**_BENCH_DEFAULTS, **doc.get("bench", {})},
        "_model_fields": _model_fields(),
        "_train_fields": _train_fields(),
        "_synth_fields": set(_SYNTH_DEFAULTS),
        "_bench_fields": set(_BENCH_DEFAULTS),
    }
    return _resolve(sections, _parse_sets(getattr(args, "set", None)), use)


def _emit(line: str):
    print(line)


def _cmd_synth(args) -> int:
    sections = _gather(args, ("synth",))
    path = synth_generate(args.out, seed=args.seed, **sections["synth"])
    _emit(f"manifest={path}")
    return 0


def _cmd_train(args) -> int:
    sections = _gather(args, ("model", "train"))
    model_cfg = ModelConfig.from_dict(sections["model"])
    train_cfg = TrainConfig.from_dict(sections["train"])
    manifest = load_manifest(args.manifest)
    log_path = args.out + ".log"
    with open(log_path, "w", encoding="utf-8") as log_file:

        def log_fn(kv):
            line = " ".join(
                f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}"
                for k, v in kv.items()
            )
            log_file.write(line + "\n")
            _emit(line)

        result = train(manifest, model_cfg, train_cfg, args.seed, args.out, log_fn)
    _emit(f"checkpoint={result.checkpoint_path} epochs={result.epochs_run}")
    return 0


def _cmd_eval(args) -> int:
    metrics = evaluate(args.checkpoint, load_manifest(args.manifest), args.split)
    _emit(f"split={args.split} {metrics.summary()}")
    for row in metrics.confusion:
        _emit("confusion=" + ",".join(str(int(v)) for v in row))
    return 0


def _cmd_gradcheck(args) -> int:
    entries = gradsuite.run_suite(emit=_emit)
    ok = gradsuite.suite_passed(entries)
    _emit(f"gradcheck_suite={'pass' if ok else 'FAIL'} checks={len(entries)}")
    return 0 if ok else 1


def _bench_instance(rng, P, C, N, dtype):
    delta = rng.uniform(0.05, 0.8, (P, C)).astype(dtype)
    A = -rng.uniform(0.5, 4.0, (C, N)).astype(dtype)
    Abar = np.exp(delta[:, :, None] * A[None])
    Bbar = (delta[:, :, None] * rng.standard_normal((P, 1, N))).astype(dtype)
    Cmat = np.ascontiguousarray(
        np.broadcast_to(rng.standard_normal((P, 1, N)).astype(dtype), (P, C, N))
    )
    D = rng.standard_normal(C).astype(dtype)
    x = rng.standard_normal((P, C)).astype(dtype)
    return np.ascontiguousarray(Abar.astype(dtype)), np.ascontiguousarray(Bbar), Cmat, D, x


def _cmd_scanbench(args) -> int:
    sections = _gather(args, ("bench",))
    b = sections["bench"]
    P, C, N, chunk, reps = (
        int(b["P"]),
        int(b["C"]),
        int(b["N"]),
        int(b["chunk"]),
        int(b["reps"]),
    )
    rng = np.random.default_rng(args.seed)
    worst = {}
    for dtype, bound in ((np.float32, 1e-5), (np.float64, 1e-12)):
        Abar, Bbar, Cmat, D, x = _bench_instance(rng, P, C, N, dtype)
        names = dtype.__name__
        y_ref, h = kernels.available_backends()["numpy"].scan_fwd(Abar, Bbar, Cmat, D, x)
        scale = np.abs(y_ref).max()
        for name, backend in sorted(kernels.available_backends().items()):
            t0 = time.perf_counter()
            for _ in range(reps):
                y, h = backend.scan_fwd(Abar, Bbar, Cmat, D, x)
            dt_f = (time.perf_counter() - t0) / reps
            gy = np.ones_like(x)
            t0 = time.perf_counter()
            for _ in range(reps):
                backend.scan_bwd(Abar, Bbar, Cmat, D, x, h, gy)
            dt_b = (time.perf_counter() - t0) / reps
            err = np.abs(y - y_ref).max() / scale
            _emit(
                f"bench=sequential backend={name} dtype={names} P={P} C={C} N={N} "
                f"fwd_ms={dt_f * 1e3:.3f} bwd_ms={dt_b * 1e3:.3f} max_rel_err={err:.3e}"
            )
        t0 = time.perf_counter()
        for _ in range(reps):
            yc, _hc = kernels.chunked_fwd(Abar, Bbar, Cmat, D, x, chunk)
        dt_c = (time.perf_counter() - t0) / reps
        err = np.abs(yc - y_ref).max() / scale
        worst[names] = (err, bound)
        _emit(
            f"bench=chunked backend=numpy dtype={names} P={P} C={C} N={N} "
            f"chunk={chunk} fwd_ms={dt_c * 1e3:.3f} max_rel_err={err:.3e} bound={bound:.0e}"
        )
    ok = all(err < bound for err, bound in worst.values())
    _emit(f"scanbench={'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_erf(args) -> int:
    from ..numerics import Tensor

    if args.checkpoint:
        cfg, weights, _pca, _meta = load_checkpoint(args.checkpoint)
        weights = {k: Tensor(t.data.astype(np.float64), requires_grad=True)
                   for k, t in weights.items()}
    else:
        sections = _gather(args, ("model",))
        cfg = ModelConfig.from_dict(sections["model"])
        weights = init_weights(cfg, seed=args.seed, dtype=np.float64)
    rng = np.random.default_rng(args.seed)
    hsi = rng.standard_normal((cfg.patch, cfg.patch, cfg.N_p))
    aux = rng.standard_normal((cfg.patch, cfg.patch, cfg.aux_channels))
    erf = model_erf_map(weights, cfg, hsi, aux)
    write_tensor(args.out, erf)
    frac = support_fraction(erf)
    _emit(f"erf_out={args.out} shape={erf.shape[0]}x{erf.shape[1]} support_fraction={frac:.4f}")
    return 0


def _cmd_params(args) -> int:
    sections = _gather(args, ("model",))
    cfg = ModelConfig.from_dict(sections["model"])
    _emit(f"params={param_count(cfg)}")
    _emit(f"flops_forward_per_patch={flop_estimate(cfg)}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="ssmfusion", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (repeatable)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    common(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    common(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("gradcheck", help="run the finite-difference suite")
    common(p)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("scanbench", help="time scan backends, check the oracle bound")
    common(p)
    p.set_defaults(fn=_cmd_scanbench)

    p = sub.add_parser("erf", help="effective-receptive-field map")
    p.add_argument("--checkpoint", help="checkpoint path (omit for random weights)")
    p.add_argument("--out", required=True, help="output tensor file")
    common(p)
    p.set_defaults(fn=_cmd_erf)

    p = sub.add_parser("params", help="parameter count and FLOP estimate")
    common(p)
    p.set_defaults(fn=_cmd_params)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise CliError(parser.format_usage())
        return args.fn(args)
    except (CliError, *_VALIDATION_ERRORS) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (TrainingDiverged, NumericsError, ArithmeticError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
