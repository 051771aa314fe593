"""Command-line entry point: ``graspkit <command> [options]``.

Defaults may come from ``--config file.toml``.  Top-level keys apply to every
command that has an option of that name; a table named after a command
(``[train]``, ``[build-dataset]``) applies to that command only.  Flags given
on the command line always win.

Exit codes: 0 success, 1 usage, 2 no graspable region, 3 no stable
configuration, 4 I/O or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import dataset as vpt
from . import harness, learning, pgm, scene, shake, tactile
from .pipeline import PlanningError, plan

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 4

SCENARIO_HELP = """\
A scenario is one CSV line `mode,param,base_pressure,noise_std,seed` where mode
is none, fall or slip; param is the movement index k (1-4) for fall and the
slip magnitude m for slip.  Example: slip,200,100,0.5,0
"""

DECISION_HELP = "Classifiers call a patch positive when p >= 0.5."


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Options:
    """Option registry so config values can sit between flags and defaults."""

    def __init__(self):
        self.defaults: Dict[str, Dict[str, object]] = {}
        self.required: Dict[str, List[str]] = {}

    def add(self, command: str, p, *flags, default=None, required=False, **kw):
        action = p.add_argument(*flags, default=None, **kw)
        self.defaults.setdefault(command, {})[action.dest] = default
        if required:
            self.required.setdefault(command, []).append(action.dest)
        if default is not None and "help" in kw:
            action.help = f"{kw['help']} (default: {default})"
        return action


def _mix(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("mix needs three comma-separated weights")
    return tuple(parts)


def build_parser():
    opts = _Options()
    parser = _Parser(prog="graspkit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="TOML file supplying option defaults")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def command(name, helptext, epilog=None):
        return sub.add_parser(name, help=helptext, description=helptext, epilog=epilog,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    p = command("simulate-shake", "synthesize tactile images from contact scenarios", SCENARIO_HELP)
    opts.add("simulate-shake", p, "--scenario", help="one scenario line")
    opts.add("simulate-shake", p, "--batch", help="file of scenario lines; prints one score row per scenario")
    opts.add("simulate-shake", p, "--seed", type=int, help="override the scenario noise seed")
    opts.add("simulate-shake", p, "--out", help="write output here instead of stdout")

    p = command("score", "score and categorize a tactile image",
                "The tactile file holds 5 lines of 5 comma-separated pressures, one line per time step.")
    opts.add("score", p, "--tactile", required=True, help="tactile CSV file")

    p = command("build-dataset", "build and save a synthetic VPT dataset")
    opts.add("build-dataset", p, "--out", required=True, help="output directory")
    opts.add("build-dataset", p, "--seed", type=int, default=7, help="dataset seed")
    opts.add("build-dataset", p, "--per-object", type=int, default=300, help="grasps per object")
    opts.add("build-dataset", p, "--world", help="object preset CSV (default: built-in known objects)")
    opts.add("build-dataset", p, "--augment", action=argparse.BooleanOptionalAction, default=True,
             help="add a 180 degree rotated copy of every record")

    p = command("train", "train a reference classifier on a saved dataset", DECISION_HELP)
    opts.add("train", p, "--dataset", required=True, help="dataset directory")
    opts.add("train", p, "--preset", required=True, choices=[s.value for s in vpt.LabelScheme],
             help="label scheme and hyperparameter preset")
    opts.add("train", p, "--out", required=True, help="model JSON path")
    opts.add("train", p, "--epochs", type=int, help="override preset epochs")
    opts.add("train", p, "--batch", type=int, help="override preset batch size")
    opts.add("train", p, "--lr", type=float, help="override preset learning rate")
    opts.add("train", p, "--seed", type=int, help="override preset shuffle seed")

    p = command("grasp", "plan a grasp on a PGM scene", DECISION_HELP + "\nPrints {\"u\", \"v\", \"a\", \"p\"} as JSON.")
    opts.add("grasp", p, "--scene", required=True, help="8-bit binary PGM scene")
    opts.add("grasp", p, "--gre", required=True, help="region model JSON")
    opts.add("grasp", p, "--scg", required=True, help="configuration model JSON (SCG or vision)")
    opts.add("grasp", p, "--seed", type=int, default=0, help="region selection seed")

    p = command("evaluate", "compare Bayesian and vision policies on a simulated world",
                "Without model flags, a VPT dataset is built from the world (same seed) and all three\n"
                "presets are trained on it.  Writes table.csv and summary.json to --out.")
    opts.add("evaluate", p, "--world", help="object preset CSV (default: built-in known objects)")
    opts.add("evaluate", p, "--trials", type=int, default=100, help="paired trials per object")
    opts.add("evaluate", p, "--seed", type=int, default=7, help="experiment seed")
    opts.add("evaluate", p, "--out", required=True, help="report directory")
    opts.add("evaluate", p, "--dataset", help="train on this saved dataset instead of building one")
    opts.add("evaluate", p, "--per-object", type=int, default=300, help="grasps per object when building")
    opts.add("evaluate", p, "--gre", help="region model JSON")
    opts.add("evaluate", p, "--scg", help="SCG model JSON")
    opts.add("evaluate", p, "--vision", help="vision baseline model JSON")

    p = command("benchmark-metric", "rank-correlate the grasp score with the endurance metric")
    opts.add("benchmark-metric", p, "--n", type=int, default=500, help="number of scenarios")
    opts.add("benchmark-metric", p, "--seed", type=int, default=7, help="sampling seed")
    opts.add("benchmark-metric", p, "--noise-std", type=float, default=0.5, help="sensor noise")
    opts.add("benchmark-metric", p, "--mix", type=_mix, default=harness.DEFAULT_MIX,
             help="none,fall,slip weights")
    opts.add("benchmark-metric", p, "--out", help="paired-sample CSV")

    p = command("accuracy", "held-out classification accuracy on a saved dataset", DECISION_HELP)
    opts.add("accuracy", p, "--dataset", required=True, help="dataset directory")
    opts.add("accuracy", p, "--preset", default="scg", choices=[s.value for s in vpt.LabelScheme],
             help="label scheme")
    opts.add("accuracy", p, "--split-seed", type=int, default=0, help="80/20 split seed")
    opts.add("accuracy", p, "--novel", help="dataset of unseen objects to test on instead of a split")

    p = command("render-scene", "render a random scene to PGM")
    opts.add("render-scene", p, "--world", help="object preset CSV (default: built-in known objects)")
    opts.add("render-scene", p, "--objects", help="comma-separated object ids to place (default: all, max 5)")
    opts.add("render-scene", p, "--seed", type=int, default=0, help="placement seed")
    opts.add("render-scene", p, "--out", required=True, help="PGM path")
    opts.add("render-scene", p, "--poses", help="also write poses as JSON here")
    return parser, opts


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def resolve(args, opts: _Options, config: dict) -> None:
    """Fill unset options from the config, then the built-in defaults."""
    cmd = args.command
    known = opts.defaults.get(cmd, {})
    section = config.get(cmd, {})
    if not isinstance(section, dict):
        raise UsageError(f"config entry {cmd!r} must be a table")
    for key in section:
        if key.replace("-", "_") not in known:
            raise UsageError(f"config [{cmd}] has unknown option {key!r}")
    merged = {k.replace("-", "_"): v for k, v in config.items() if not isinstance(v, dict)}
    merged.update({k.replace("-", "_"): v for k, v in section.items()})
    for dest, default in known.items():
        if getattr(args, dest) is None:
            value = merged.get(dest, default)
            if dest == "mix" and isinstance(value, (list, tuple)):
                value = tuple(float(x) for x in value)
            setattr(args, dest, value)
    missing = [d for d in opts.required.get(cmd, []) if getattr(args, d) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + d.replace("_", "-") for d in missing))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _world(path: Optional[str]):
    return scene.load_presets(path) if path else list(scene.KNOWN_OBJECTS)


# -- commands -------------------------------------------------------------------

def cmd_simulate_shake(args) -> int:
    if bool(args.scenario) == bool(args.batch):
        raise UsageError("give exactly one of --scenario or --batch")
    if args.scenario:
        sc = shake.parse_scenario_line(args.scenario)
        if args.seed is not None:
            sc = replace(sc, seed=args.seed)
        _emit(tactile.format_tactile(shake.simulate_shake(sc)), args.out)
        return EXIT_OK
    with open(args.batch, encoding="utf-8") as fh:
        batch = shake.read_scenario_batch(fh)
    lines = ["index,mode,param,seed,grasp_score,category,endurance_score"]
    for j, sc in enumerate(batch):
        if args.seed is not None:
            sc = replace(sc, seed=harness.derive_seed(args.seed, j))
        s = tactile.grasp_score(shake.simulate_shake(sc))
        lines.append(f"{j},{sc.mode.value},{float(sc.param)!r},{sc.seed},{s!r},"
                     f"{tactile.categorize(s).value},{shake.endurance_score(sc)!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_score(args) -> int:
    a = tactile.assess(tactile.read_tactile(args.tactile))
    _print_json({"score": a.score, "category": a.category.value, "failure": a.failed,
                 "fall_index": a.fall_index, "slip_magnitude": a.slip})
    return EXIT_OK


def cmd_build_dataset(args) -> int:
    ds = vpt.build_vpt(_world(args.world), args.per_object, args.seed, augment=args.augment)
    vpt.save_dataset(ds, args.out)
    counts: Dict[str, int] = {}
    for r in ds.records:
        counts[r.category.value] = counts.get(r.category.value, 0) + 1
    _print_json({"out": str(args.out), "total": len(ds), "categories": counts,
                 "warnings": ds.manifest["warnings"]})
    return EXIT_OK


def cmd_train(args) -> int:
    ds = vpt.load_dataset(args.dataset)
    cfg = learning.preset_config(args.preset, epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed)
    model, rep = learning.train(vpt.project_labels(ds, args.preset), cfg)
    learning.save_model(model, args.out)
    _print_json({"out": str(args.out), "preset": args.preset, "records": len(ds),
                 "first_loss": rep.epoch_losses[0], "final_loss": rep.epoch_losses[-1],
                 "train_accuracy": rep.train_accuracy, "wall_time_s": round(rep.wall_time_s, 3)})
    return EXIT_OK


def cmd_grasp(args) -> int:
    img = pgm.read_pgm(args.scene)
    gre, scg = learning.load_model(args.gre), learning.load_model(args.scg)
    prop = plan(img, gre, scg, args.seed)
    _print_json({"u": prop.config.u, "v": prop.config.v, "a": prop.config.a, "p": prop.probability})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    world = _world(args.world)
    paths = (args.gre, args.scg, args.vision)
    if any(paths) and not all(paths):
        raise UsageError("give all of --gre, --scg and --vision, or none")
    if all(paths):
        gre, scg, vis = (learning.load_model(p) for p in paths)
    else:
        ds = vpt.load_dataset(args.dataset) if args.dataset else vpt.build_vpt(world, args.per_object, args.seed)
        models = harness.train_presets(ds)
        gre, scg, vis = (models[s] for s in vpt.LabelScheme)
    report = harness.run_comparison(world, gre, scg, vis, args.trials, args.seed)
    report.write(args.out)
    s = report.summary()
    _print_json({"out": str(args.out), "mean_bayesian_rate": s["mean_bayesian_rate"],
                 "mean_vision_rate": s["mean_vision_rate"], "point_gain": s["point_gain"]})
    print(f"wall time {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return EXIT_OK


def cmd_benchmark_metric(args) -> int:
    bench = harness.benchmark_metric(args.n, args.mix, args.seed, noise_std=args.noise_std)
    if args.out:
        Path(args.out).write_text(bench.pairs_csv(), encoding="utf-8")
    _print_json({"n": args.n, "rho": bench.rho, "degenerate": bench.degenerate})
    return EXIT_OK


def cmd_accuracy(args) -> int:
    ds = vpt.load_dataset(args.dataset)
    if args.novel:
        rep = harness.novel_object_accuracy(ds, vpt.load_dataset(args.novel), args.preset)
    else:
        rep = harness.run_accuracy(ds, args.preset, args.split_seed)
    _print_json(rep.to_dict())
    return EXIT_OK


def cmd_render_scene(args) -> int:
    world = _world(args.world)
    if args.objects:
        by_id = {o.id: o for o in world}
        unknown = [i for i in args.objects.split(",") if i not in by_id]
        if unknown:
            raise ValueError(f"unknown object id(s): {unknown}")
        world = [by_id[i] for i in args.objects.split(",")]
    poses = scene.place_objects_random(world, args.seed)
    sc = scene.render_scene(world, poses)
    pgm.write_pgm(args.out, np.asarray(sc.image))
    if args.poses:
        Path(args.poses).write_text(json.dumps([{"object_id": p.object_id, "u": p.u, "v": p.v, "theta": p.theta}
                                                for p in poses], indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "simulate-shake": cmd_simulate_shake,
    "score": cmd_score,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "grasp": cmd_grasp,
    "evaluate": cmd_evaluate,
    "benchmark-metric": cmd_benchmark_metric,
    "accuracy": cmd_accuracy,
    "render-scene": cmd_render_scene,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser, opts = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        config = load_config(args.config) if args.config else {}
    except (OSError, ValueError) as exc:
        print(f"graspkit: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        resolve(args, opts, config)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"graspkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlanningError as exc:
        print(f"graspkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"graspkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
