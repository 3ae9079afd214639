"""Command-line driver: ``hmamp {train,eval,plot-data,gen-ref,check-grad}``."""

from __future__ import annotations

import argparse
import csv
import glob
import os
import sys
from dataclasses import replace

import numpy as np

from . import experiment, gradcheck
from .config import METHODS, ConfigError, dumps, load_config, write_snapshot
from .metrics import frechet_distance, resample_by_arclength
from .motion import ClipFormatError, generate_reference, windup_clips, write_clip

__all__ = ["main", "build_parser"]

PLOT_COLUMNS = ("path", "source", "index", "x", "y")


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "method", None):
        cfg = cfg.for_method(args.method)
    elif cfg.method == "rl-noamp":
        cfg = cfg.for_method("rl-noamp")
    training = cfg.training
    if getattr(args, "seed", None) is not None:
        training = replace(training, seed=args.seed)
    if getattr(args, "episodes", None) is not None and args.command == "train":
        training = replace(training, episodes=args.episodes)
    cfg = replace(cfg, training=training)
    if getattr(args, "out", None):
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def cmd_train(args):
    cfg = _config(args)
    if cfg.method == "dppcp":
        raise ConfigError("dppcp is a planned baseline; run `eval --method dppcp` instead")
    reference = experiment.load_reference(cfg)
    out = cfg.output_dir
    write_snapshot(cfg, out)

    def progress(trainer, stats):
        if args.verbose and (stats.episode % 25 == 0):
            print(f"episode {stats.episode:4d}  success {stats.success_rate:.2f}  "
                  f"r_s {stats.mean_r_s:.3f}  frechet {stats.frechet_eval:.3f}", flush=True)

    trainer = experiment.train(cfg, reference, progress)
    experiment.save_run(trainer, cfg, out)
    res = experiment.evaluate(cfg, trainer.policy, reference)
    print(experiment.write_eval_outputs({cfg.method: res}, out, cfg.env.dt), end="")
    return 0


def cmd_eval(args):
    cfg = _config(args)
    if args.episodes is not None:
        cfg = replace(cfg, eval_episodes=args.episodes)
    reference = experiment.load_reference(cfg, required=False)
    results = {}
    for path in args.checkpoint or []:
        policy, header = experiment.load_policy(path, cfg)
        method = header.get("method", os.path.basename(os.path.dirname(path)) or path)
        results[method] = experiment.evaluate(cfg, policy, reference)
    if not results or args.method == "dppcp":
        if cfg.method != "dppcp" and not results:
            raise ConfigError("eval needs --checkpoint or --method dppcp")
        results["dppcp"] = experiment.evaluate(cfg, None, reference)
    write_snapshot(cfg, cfg.output_dir)
    print(experiment.write_eval_outputs(results, cfg.output_dir, cfg.env.dt), end="")
    return 0


def _read_path(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "xf_x" not in rows[0]:
        raise ClipFormatError(f"{path}: not a trajectory log (needs xf_x, xf_y columns)")
    return np.array([[float(r["xf_x"]), float(r["xf_y"])] for r in rows])


def cmd_plot_data(args):
    cfg = _config(args)
    files = []
    for item in args.logs:
        if os.path.isdir(item):
            files.extend(sorted(glob.glob(os.path.join(item, "**", "*.csv"), recursive=True)))
        elif os.path.exists(item):
            files.append(item)
        else:
            raise FileNotFoundError(f"trajectory log {item} does not exist")
    if not files:
        raise FileNotFoundError("no trajectory logs found")
    n = cfg.n_resample
    paths = [(os.path.relpath(f), "policy", resample_by_arclength(_read_path(f), n)) for f in files]
    reference = experiment.load_reference(cfg, required=False)
    if reference is not None:
        for motion, head in zip(reference.motions, reference.head_paths):
            paths.append((motion.name, "reference", resample_by_arclength(head, n)))
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = os.path.join(cfg.output_dir, "ee_paths.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for name, source, pts in paths:
            for k, (x, y) in enumerate(pts):
                w.writerow([name, source, k, repr(float(x)), repr(float(y))])
    refs = [p for _, s, p in paths if s == "reference"]
    for name, source, pts in paths:
        if source == "policy" and refs:
            d = min(frechet_distance(pts, r) for r in refs)
            print(f"{name}: frechet to reference {d:.4f} m")
    print(f"wrote {len(paths)} paths x {n} points to {out}")
    return 0


def cmd_gen_ref(args):
    cfg = _config(args)
    out = args.out or cfg.dataset
    os.makedirs(out, exist_ok=True)
    if args.amplitude is not None:
        clips = [generate_reference(args.amplitude, args.backswing, args.duration, cfg.env)]
    else:
        clips = windup_clips(cfg.env)
    for clip in clips:
        path = os.path.join(out, f"{clip.name}.csv")
        write_clip(path, clip)
        print(f"wrote {path} ({len(clip)} frames, {clip.duration:.2f} s)")
    return 0


def cmd_check_grad(args):
    results = gradcheck.run_checks(args.seed or 0, args.instances, args.corrupt)
    print(gradcheck.format_results(results), end="")
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="hmamp", description="Adversarial motion prior hammering.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, method=True):
        sp.add_argument("--config", help="JSON experiment config (defaults fill the rest)")
        sp.add_argument("--seed", type=int)
        if method:
            sp.add_argument("--method", choices=METHODS)
        sp.add_argument("--out", help="output directory")

    t = sub.add_parser("train", help="train a policy")
    common(t)
    t.add_argument("--episodes", type=int)
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate checkpoints and/or the planned baseline")
    common(e)
    e.add_argument("--checkpoint", action="append", help="policy checkpoint (repeatable)")
    e.add_argument("--episodes", type=int)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("plot-data", help="resampled end-effector paths for plotting")
    common(d, method=False)
    d.add_argument("--logs", nargs="+", required=True, help="trajectory CSVs or directories")
    d.set_defaults(func=cmd_plot_data)

    g = sub.add_parser("gen-ref", help="write synthetic reference clips")
    common(g, method=False)
    g.add_argument("--amplitude", type=float, help="single clip: wind-up amplitude (rad)")
    g.add_argument("--backswing", type=float, default=0.4)
    g.add_argument("--duration", type=float, default=0.8)
    g.set_defaults(func=cmd_gen_ref)

    c = sub.add_parser("check-grad", help="finite-difference gradient checks")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--instances", type=int, default=100)
    c.add_argument("--corrupt", choices=list(gradcheck.CHECKS), help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_check_grad)

    s = sub.add_parser("show-config", help="print the fully defaulted config")
    common(s)
    s.set_defaults(func=lambda a: print(dumps(_config(a)), end="") or 0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ClipFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
