"""Command-line entry point: ``twoscale <command> [flags]``.

Every run writes into its own directory under the output root (``--out-root``,
else ``$TWOSCALE_OUTPUT_ROOT``, else ``./runs``) and starts with a
``manifest.json`` holding the fully resolved configuration.  Resolution order:
built-in defaults, then ``--config FILE`` (JSON), then explicit flags.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure.
"""

import argparse
import hashlib
import json
import math
import os
import shutil
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io as tio
from . import lab
from .energy import OperatorError, OperatorSpec, consistency_residual, total_energy
from .frames import FrameError, build_frame_system, named_bank, robust_support_delta, save_frame_system, verify_uep
from .geometry import GeometryError
from .scene import SceneError, disk_scene, format_scene, halfplane_scene, parse_scene, sample, sinusoid_scene
from .solver import SolverError, SolverParams, restore
from .transform import ModelParams, analyze, two_scale

VALIDATION_ERRORS = (ValueError, KeyError, FileNotFoundError, SceneError, FrameError, GeometryError, OperatorError)
NUMERICAL_ERRORS = (SolverError, FloatingPointError, ArithmeticError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


DEFAULTS = {
    "common": {"bank": "haar", "depth": 8, "alpha": 1.0, "r": "inf", "q": 2.0, "p": 1.0, "seed": 0, "threads": None},
    "build-frame": {"delta": False, "angle_steps": 64, "shift_steps": 16},
    "verify-uep": {"n_freq": 256},
    "sample": {"scene": None, "n": 7, "noise": 0.0, "quad_depth": 6},
    "transform": {"input": None, "scene": None, "n": 7},
    "energy": {"input": None, "data": None, "scene": None, "n": 7, "op": "identity", "op_radius": None,
               "op_taps": None, "op_region": None},
    "restore": {"input": None, "n": None, "op": "identity", "op_radius": None, "op_taps": None, "op_region": None,
                "schedule": None, "max_iter": 200},
    "sweep": {"scene": None, "n": "5..9"},
    "boxcount": {"scene": None, "n": "6..9", "tube_H": None, "raster": 11},
    "consistency": {"scene": None, "n": "4..8", "op": "convolution", "op_radius": 0.1, "op_taps": None,
                    "op_region": None},
}

BUILTIN_SCENES = {"disk": disk_scene, "sinusoid": sinusoid_scene, "halfplane": lambda: halfplane_scene(0.3)}


def parse_range(text):
    """``"5..9"`` -> [5, 6, 7, 8, 9]; ``"4,6,8"`` -> [4, 6, 8]; ``"7"`` -> [7]."""
    text = str(text)
    if ".." in text:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",") if v]


def _float_or_inf(v):
    return math.inf if str(v).lower() in ("inf", "infinity") else float(v)


def build_parser():
    p = _Parser(prog="twoscale", description="Two-scale truncated wavelet-frame regularisation toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out-root", help="output root directory")
        sp.add_argument("--run-name", help="run directory name (default: command + timestamp)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        sp.add_argument("--bank", choices=["haar", "linear"], default=None)
        sp.add_argument("--depth", type=int, default=None, help="cascade depth")
        sp.add_argument("--seed", type=int, default=None)

    def model(sp):
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--r", default=None, help="neighbourhood exponent (inf for max)")
        sp.add_argument("--q", default=None, help="channel exponent")
        sp.add_argument("--p", type=float, default=None, help="energy exponent")

    def op(sp):
        sp.add_argument("--op", choices=["identity", "convolution", "mask"], default=None)
        sp.add_argument("--op-radius", type=float, default=None, help="physical radius of the bump kernel")
        sp.add_argument("--op-taps", default=None, help="JSON list of lists with pixel-unit taps")
        sp.add_argument("--op-region", default=None, help='JSON region, e.g. {"kind":"box","x":[0,0.5],"y":[0,1]}')

    sp = sub.add_parser("build-frame", help="assemble a frame system and write an FRMS container")
    common(sp)
    sp.add_argument("--delta", action="store_true", default=None, help="also estimate the robust-support constant")
    sp.add_argument("--angle-steps", type=int, default=None)
    sp.add_argument("--shift-steps", type=int, default=None)

    sp = sub.add_parser("verify-uep", help="check the unitary extension identities")
    common(sp)
    sp.add_argument("--n-freq", type=int, default=None)

    sp = sub.add_parser("sample", help="sample a scene to a lattice image")
    common(sp)
    sp.add_argument("--scene", help="scene file or builtin:disk|sinusoid|halfplane")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--noise", type=float, default=None, help="std of additive Gaussian noise")
    sp.add_argument("--quad-depth", type=int, default=None)

    sp = sub.add_parser("transform", help="two-scale coefficient field of an image or scene")
    common(sp)
    model(sp)
    sp.add_argument("--in", dest="input", default=None)
    sp.add_argument("--scene", default=None)
    sp.add_argument("--n", type=int, default=None)

    sp = sub.add_parser("energy", help="evaluate E_n = R_n + F_n")
    common(sp)
    model(sp)
    op(sp)
    sp.add_argument("--in", dest="input", default=None)
    sp.add_argument("--data", default=None)
    sp.add_argument("--scene", default=None)
    sp.add_argument("--n", type=int, default=None)

    sp = sub.add_parser("restore", help="minimise the model energy for given data")
    common(sp)
    model(sp)
    op(sp)
    sp.add_argument("--in", dest="input", default=None)
    sp.add_argument("--n", type=int, default=None, help="expected level of the input")
    sp.add_argument("--schedule", default=None, help="comma-separated decreasing eps values")
    sp.add_argument("--max-iter", type=int, default=None)

    sp = sub.add_parser("sweep", help="R_n over a range of levels")
    common(sp)
    model(sp)
    sp.add_argument("--scene", default=None)
    sp.add_argument("--n", default=None, help="level range, e.g. 5..9")

    sp = sub.add_parser("boxcount", help="box-counting checks and tubular area of a scene's curves")
    common(sp)
    sp.add_argument("--scene", default=None)
    sp.add_argument("--n", default=None)
    sp.add_argument("--tube-H", type=float, default=None)
    sp.add_argument("--raster", type=int, default=None)

    sp = sub.add_parser("consistency", help="discrete/continuum operator consistency residuals")
    common(sp)
    op(sp)
    sp.add_argument("--scene", default=None)
    sp.add_argument("--n", default=None)

    sp = sub.add_parser("replay", help="re-run a previous run from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out-root", default=None)
    sp.add_argument("--run-name", default=None)
    return p


# ---------------------------------------------------------------- config


def resolve_config(args):
    cfg = dict(DEFAULTS["common"])
    cfg.update(DEFAULTS[args.command])
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg.get("threads") is None:
        cfg["threads"] = os.cpu_count() or 1
    if cfg.get("scene") and not str(cfg["scene"]).startswith("builtin:") and "scene_text" not in cfg:
        with open(cfg["scene"]) as fh:
            cfg["scene_text"] = fh.read()
    for k in ("input", "data"):
        if cfg.get(k):
            cfg[k] = os.path.abspath(cfg[k])
            with open(cfg[k], "rb") as fh:
                cfg[k + "_sha256"] = hashlib.sha256(fh.read()).hexdigest()
    return cfg


def _scene(cfg):
    if not cfg.get("scene"):
        raise ValueError("--scene is required")
    s = str(cfg["scene"])
    if s.startswith("builtin:"):
        name = s.split(":", 1)[1]
        if name not in BUILTIN_SCENES:
            raise ValueError(f"unknown builtin scene {name!r}")
        return BUILTIN_SCENES[name]()
    return parse_scene(cfg["scene_text"])


def _system(cfg):
    return lab_system(cfg["bank"], int(cfg["depth"]))


_SYSTEMS = {}


def lab_system(bank, depth):
    key = (bank, depth)
    if key not in _SYSTEMS:
        _SYSTEMS[key] = build_frame_system(named_bank(bank), depth)
    return _SYSTEMS[key]


def _model(cfg):
    return ModelParams(alpha=float(cfg["alpha"]), r=_float_or_inf(cfg["r"]), q=_float_or_inf(cfg["q"]),
                       p=float(cfg["p"]))


def _op(cfg):
    kind = cfg["op"]
    if kind == "identity":
        return OperatorSpec.identity()
    if kind == "convolution":
        if cfg.get("op_taps"):
            taps = json.loads(cfg["op_taps"]) if isinstance(cfg["op_taps"], str) else cfg["op_taps"]
            return OperatorSpec("convolution", taps=tuple(map(tuple, taps)))
        if cfg.get("op_radius") is None:
            raise ValueError("convolution needs --op-radius or --op-taps")
        return OperatorSpec.bump(float(cfg["op_radius"]))
    region = cfg.get("op_region")
    if not region:
        raise ValueError("mask needs --op-region")
    return OperatorSpec("mask", region=json.loads(region) if isinstance(region, str) else region)


# ---------------------------------------------------------------- commands


def cmd_build_frame(cfg, out):
    bank = named_bank(cfg["bank"])
    system = build_frame_system(bank, int(cfg["depth"]))
    save_frame_system(system, os.path.join(out, "frame.frms"))
    rep = verify_uep(bank)
    info = {
        "bank": cfg["bank"],
        "depth": system.depth,
        "channel_integrals": {f"{a},{b}": v for (a, b), v in system.channel_integrals.items()},
        "support_radius": system.support_radius,
        "moment_tags": {f"{a},{b}": t for (a, b), t in system.moment_tags.items()},
        "cascade_converged": system.samples.converged,
        "cascade_increment": system.samples.increment,
        "uep": {"partition": rep.partition_residual, "shift": rep.shift_residual},
    }
    if cfg["delta"]:
        est = robust_support_delta(system, int(cfg["angle_steps"]), int(cfg["shift_steps"]))
        info["delta"] = {"value": est.value, "nu": list(est.nu), "shift": [float(v) for v in est.shift]}
    tio.write_json(os.path.join(out, "frame.json"), info)
    print(json.dumps(info, indent=2, default=tio._json_default))


def cmd_verify_uep(cfg, out):
    rows = []
    for tensor in (False, True):
        rep = verify_uep(named_bank(cfg["bank"], tensor=tensor), int(cfg["n_freq"]))
        rows.append({"bank": cfg["bank"], "dimension": 2 if tensor else 1, "partition": rep.partition_residual,
                     "shift": rep.shift_residual, "passed": rep.passed()})
        print(f"{cfg['bank']} d={2 if tensor else 1}: partition residual {rep.partition_residual:.3e}, "
              f"shift residual {rep.shift_residual:.3e}")
    tio.write_csv(os.path.join(out, "uep.csv"), rows, ("bank", "dimension", "partition", "shift", "passed"))


def cmd_sample(cfg, out):
    scene = _scene(cfg)
    img = sample(scene, _system(cfg), int(cfg["n"]), int(cfg["quad_depth"]))
    if cfg["noise"]:
        rng = np.random.default_rng(int(cfg["seed"]))
        img.values = np.where(img.mask, img.values + float(cfg["noise"]) * rng.standard_normal(img.shape), 0.0)
    tio.save_image(os.path.join(out, "image.grid"), img)
    tio.write_pgm(os.path.join(out, "image.pgm"), img.values)
    with open(os.path.join(out, "scene.txt"), "w") as fh:
        fh.write(format_scene(scene))


def _input_image(cfg, key="input"):
    img = tio.load_image(cfg[key])
    if cfg.get(key + "_sha256"):
        with open(cfg[key], "rb") as fh:
            if hashlib.sha256(fh.read()).hexdigest() != cfg[key + "_sha256"]:
                raise ValueError(f"{cfg[key]} changed since the manifest was written")
    return img


def cmd_transform(cfg, out):
    system = _system(cfg)
    img = _input_image(cfg) if cfg.get("input") else sample(_scene(cfg), system, int(cfg["n"]))
    params = _model(cfg)
    fld = two_scale(img, system, params)
    tio.save_field(os.path.join(out, "field.grid"), fld)
    tio.save_stack(os.path.join(out, "coeff"), analyze(img, system, params.weights))
    tio.write_pgm(os.path.join(out, "field.pgm"), fld.values, 0.0, fld.M)


def cmd_energy(cfg, out):
    system = _system(cfg)
    scene = _scene(cfg) if cfg.get("scene") else None
    if cfg.get("input"):
        img = _input_image(cfg)
    elif scene is not None:
        img = sample(scene, system, int(cfg["n"]))
    else:
        raise ValueError("energy needs --in or --scene")
    data = _input_image(cfg, "data") if cfg.get("data") else None
    rep = total_energy(img, system, _model(cfg), _op(cfg), data, scene)
    with open(os.path.join(out, "energy.json"), "w") as fh:
        fh.write(rep.to_json() + "\n")
    tio.write_csv(os.path.join(out, "energy.csv"), [rep.row()], rep.CSV_FIELDS)
    print(f"R_n={rep.R!r} F_n={rep.F!r} E_n={rep.E!r}")


def cmd_restore(cfg, out):
    system = _system(cfg)
    data = _input_image(cfg) if cfg.get("input") else None
    if data is None:
        raise ValueError("restore needs --in")
    if cfg.get("n") is not None and int(cfg["n"]) != data.level:
        raise ValueError(f"input level {data.level} does not match --n {cfg['n']}")
    kw = {"model": _model(cfg), "seed": int(cfg["seed"]), "max_iter": int(cfg["max_iter"])}
    if cfg.get("schedule"):
        sched = cfg["schedule"]
        kw["schedule"] = tuple(float(v) for v in (sched.split(",") if isinstance(sched, str) else sched))
    trace = restore(data, _op(cfg), system, SolverParams(**kw))
    with open(os.path.join(out, "trace.csv"), "w") as fh:
        fh.write(trace.to_csv())
    tio.save_image(os.path.join(out, "restored.grid"), trace.image)
    tio.write_pgm(os.path.join(out, "restored.pgm"), trace.image.values)
    e = trace.energies()
    print(f"energy {e[0]!r} -> {e[-1]!r} over {len(e)} rounds")


def cmd_sweep(cfg, out):
    scene = _scene(cfg)
    system = _system(cfg)
    params = _model(cfg)
    levels = parse_range(cfg["n"])
    with ThreadPoolExecutor(max_workers=max(1, int(cfg["threads"]))) as ex:
        parts = list(ex.map(lambda n: lab.sweep_regularity(scene, system, [n], params=params).rows[0], levels))
    tio.write_csv(os.path.join(out, "sweep.csv"), parts, lab.SweepResult.FIELDS)
    tio.write_json(os.path.join(out, "sweep.json"), {"scene": scene.to_spec(), "params": params.to_dict()})
    for r in parts:
        print(f"n={r['n']} R_n={r['R_n']:.6f} ref={r['R_ref']:.6f} rel={r['rel_error']:.4f}")


def cmd_boxcount(cfg, out):
    scene = _scene(cfg)
    rep = lab.box_counting_checks(scene.curves, parse_range(cfg["n"]), scene.domain)
    rows = [{k: v for k, v in r.items() if k != "failures"} for r in rep["rows"]]
    tio.write_csv(os.path.join(out, "boxcount.csv"), rows, ("n", "cells", "robust_ok", "C"))
    meta = {"N": rep["N"], "feature": rep["feature"], "arc_bound": rep["arc_bound"]}
    if cfg.get("tube_H"):
        area = lab.tubular_area(scene.curves, float(cfg["tube_H"]), int(cfg["raster"]), scene.domain)
        meta["tubular_area"] = area
        meta["length_estimate"] = area / (2 * float(cfg["tube_H"]))
        meta["length"] = scene.jump_length()
    tio.write_json(os.path.join(out, "boxcount.json"), meta)
    for r in rows:
        print(f"n={r['n']} robust={r['robust_ok']} C={r['C']:.4f}")


def cmd_consistency(cfg, out):
    scene = _scene(cfg)
    system = _system(cfg)
    spec = _op(cfg)
    levels = parse_range(cfg["n"])
    with ThreadPoolExecutor(max_workers=max(1, int(cfg["threads"]))) as ex:
        res = list(ex.map(lambda n: consistency_residual(spec, scene, system, n), levels))
    rows = [{"n": n, "residual": r} for n, r in zip(levels, res)]
    tio.write_csv(os.path.join(out, "consistency.csv"), rows, ("n", "residual"))
    for r in rows:
        print(f"n={r['n']} residual={r['residual']:.6e}")


COMMANDS = {
    "build-frame": cmd_build_frame,
    "verify-uep": cmd_verify_uep,
    "sample": cmd_sample,
    "transform": cmd_transform,
    "energy": cmd_energy,
    "restore": cmd_restore,
    "sweep": cmd_sweep,
    "boxcount": cmd_boxcount,
    "consistency": cmd_consistency,
}


def _run(command, cfg, out_root, run_name):
    out_root = out_root or os.environ.get("TWOSCALE_OUTPUT_ROOT") or "runs"
    name = run_name or f"{command}-{time.strftime('%Y%m%d-%H%M%S')}-{os.getpid()}"
    out = os.path.join(out_root, name)
    if os.path.exists(out):
        raise ValueError(f"run directory {out} already exists")
    os.makedirs(out)
    try:
        tio.write_json(os.path.join(out, "manifest.json"), {"command": command, "config": cfg})
        COMMANDS[command](cfg, out)
    except BaseException:
        shutil.rmtree(out, ignore_errors=True)
        raise
    print(f"run directory: {out}")
    return out


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        if args.command == "replay":
            with open(args.manifest) as fh:
                man = json.load(fh)
            _run(man["command"], man["config"], args.out_root, args.run_name)
            return 0
        cfg = resolve_config(args)
        _run(args.command, cfg, args.out_root, args.run_name)
        return 0
    except UsageError as exc:
        print(f"twoscale: error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"twoscale: numerical failure: {exc}", file=sys.stderr)
        return 2
    except VALIDATION_ERRORS as exc:
        print(f"twoscale: invalid input: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
