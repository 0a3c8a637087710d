"""``werewolf-rl`` command line: baseline, train, evaluate and sweep.

Every run directory gets ``manifest.yaml`` (the fully resolved config). Training
also writes ``metrics.csv``, ``summary.json`` and ``checkpoint.npz``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from .baseline import exact_win_prob, monte_carlo_win_prob
from .config import ExperimentConfig, dump_manifest, load_config, load_manifest, seed_from_env
from .env import CommSpec
from .game import ConfigError
from .learner.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .learner.ppo import Adam
from .learner.train import DivergenceError, IterationStats, evaluate, new_params, train
from .policies import RandomPolicy, make_wolf_policy
from .seeding import derive_seed

log = logging.getLogger("werewolf_rl")

METRICS_COLUMNS = ("iteration", "win_rate", "accord", "suicides", "days", "objective", "entropy")
SWEEP_COLUMNS = (
    "cell", "signal_length", "signal_range", "status", "iterations", "train_win_rate",
    "eval_win_rate", "eval_win_se", "eval_accord", "eval_suicides", "eval_days", "error",
)
CHECKPOINT_NAME = "checkpoint.npz"
_EVAL_STREAM = 0x4

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--manifest", help="re-run from a manifest.yaml written by an earlier run")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="run seed (unsigned 64-bit)")
    p.add_argument("--players", type=int, help="number of players N")
    p.add_argument("--wolves", type=int, help="number of werewolves W")
    p.add_argument("--day-cap", type=int, help="truncate matches after this many days")
    p.add_argument("--sl", type=int, help="signal length")
    p.add_argument("--sr", type=int, help="signal range")
    p.add_argument("--wolf-policy", choices=("random", "unite", "revenge"))
    p.add_argument("--iterations", type=int, help="total training iterations (a resumed run stops here too)")
    p.add_argument("--eval-episodes", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="werewolf-rl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("baseline", help="exact random-play win probability and a Monte Carlo check")
    _add_common(p)
    p.add_argument("--tree", choices=("text", "outline"), help="also print the expanded tree")

    p = sub.add_parser("train", help="train the shared villager policy")
    _add_common(p)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--checkpoint-every", type=int, default=10, help="iterations between checkpoints")

    p = sub.add_parser("evaluate", help="frozen-policy evaluation of a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", help="checkpoint file (default: OUT/checkpoint.npz)")

    p = sub.add_parser("sweep", help="train and evaluate one run per (SL, SR) cell")
    _add_common(p)
    p.add_argument("--cells", required=True, help="comma list such as 0SL,1SL-2SR,9SL-2SR")
    return parser


def resolve_config(args) -> ExperimentConfig:
    """flag > environment (seed only) > config file or manifest > default."""
    if args.config and args.manifest:
        raise UsageError("give either --config or --manifest, not both")
    cfg = load_manifest(args.manifest) if args.manifest else load_config(args.config)
    game = {k: v for k, v in (("num_players", args.players), ("num_wolves", args.wolves),
                              ("day_cap", args.day_cap)) if v is not None}
    comm = {k: v for k, v in (("signal_length", args.sl), ("signal_range", args.sr)) if v is not None}
    run = {k: v for k, v in (("iterations", args.iterations), ("eval_episodes", args.eval_episodes),
                             ("workers", args.workers), ("out", args.out)) if v is not None}
    env_seed = seed_from_env()
    if args.seed is not None:
        run["seed"] = args.seed
    elif env_seed is not None:
        run["seed"] = env_seed
    top = {"wolf_policy": args.wolf_policy} if args.wolf_policy else {}
    return ExperimentConfig(
        game=dataclasses.replace(cfg.game, **game),
        comm=dataclasses.replace(cfg.comm, **comm),
        rewards=cfg.rewards,
        wolf_policy=top.get("wolf_policy", cfg.wolf_policy),
        ppo=cfg.ppo,
        run=dataclasses.replace(cfg.run, **run),
    )


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_baseline(cfg: ExperimentConfig, args) -> int:
    w = cfg.game.num_wolves
    v = cfg.game.num_players - w
    exact = exact_win_prob(w, v)
    print(f"exact = {exact} ({float(exact):.5f})")
    if getattr(args, "tree", None):
        from .baseline import enumerate_tree

        tree = enumerate_tree(w, v)
        print(tree.to_text() if args.tree == "text" else tree.to_outline())
    mc = monte_carlo_win_prob(
        cfg.game, make_wolf_policy("random"), RandomPolicy(), cfg.run.eval_episodes, cfg.run.seed,
        workers=cfg.run.workers,
    )
    se = (float(exact) * (1 - float(exact)) / mc.episodes) ** 0.5
    agree = mc.agrees_with(float(exact))
    print(f"monte carlo = {mc.estimate:.5f} over {mc.episodes} episodes, "
          f"95% CI [{mc.ci_low:.5f}, {mc.ci_high:.5f}], se at exact = {se:.5f}")
    print("agreement within 3 SE: " + ("yes" if agree else "NO"))
    if args.out:
        out = Path(cfg.run.out)
        out.mkdir(parents=True, exist_ok=True)
        dump_manifest(cfg, out / "manifest.yaml", {"command": "baseline"})
        _write_json(out / "summary.json", {
            "wolves": w, "villagers": v,
            "exact": {"numerator": exact.numerator, "denominator": exact.denominator, "value": float(exact)},
            "monte_carlo": {"wins": mc.wins, "episodes": mc.episodes, "estimate": mc.estimate,
                            "ci95": [mc.ci_low, mc.ci_high]},
            "agree_3se": agree,
        })
    return EXIT_OK if agree else EXIT_FAIL


def _read_metrics(path: Path, before: int) -> list[dict]:
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        return [r for r in csv.DictReader(fh) if int(r["iteration"]) < before]


def run_training(cfg: ExperimentConfig, out: Path, resume: str | None = None,
                 checkpoint_every: int = 10) -> dict:
    """Train, checkpoint and evaluate into ``out``; return the summary document."""
    out.mkdir(parents=True, exist_ok=True)
    env_cfg = cfg.env
    seed = cfg.run.seed
    params = optimizer = None
    start = 0
    if resume:
        ckpt = load_checkpoint(resume, env_cfg)
        params, start = ckpt.params, ckpt.iteration
        optimizer = ckpt.optimizer(cfg.ppo.learning_rate)
        if start > cfg.run.iterations:
            raise UsageError(f"checkpoint is at iteration {start}, past the requested {cfg.run.iterations}")
    else:
        params = new_params(env_cfg, cfg.ppo, seed)
        optimizer = Adam(params, cfg.ppo.learning_rate)
    dump_manifest(cfg, out / "manifest.yaml", {"command": "train", "resumed_from_iteration": start})

    metrics_path = out / "metrics.csv"
    kept = _read_metrics(metrics_path, start) if resume else []
    fh = metrics_path.open("w", newline="")
    writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(kept)
    fh.flush()

    def save(iteration: int) -> None:
        save_checkpoint(out / CHECKPOINT_NAME,
                        Checkpoint(params, iteration, optimizer.state_dict(), cfg.to_dict()))

    def on_iteration(stats: IterationStats, _params) -> None:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in stats.row().items()})
        fh.flush()
        done = stats.iteration + 1
        if checkpoint_every > 0 and done % checkpoint_every == 0:
            save(done)

    t0 = time.perf_counter()
    try:
        result = train(env_cfg, cfg.ppo, cfg.run.iterations - start, seed, cfg.wolf_policy,
                       params=params, optimizer=optimizer, start_iteration=start, on_iteration=on_iteration)
    finally:
        fh.close()
    train_seconds = time.perf_counter() - t0
    end = cfg.run.iterations
    save(end)

    t0 = time.perf_counter()
    ev = evaluate(env_cfg, result.params, cfg.wolf_policy, cfg.run.eval_episodes,
                  derive_seed(seed, _EVAL_STREAM), workers=cfg.run.workers)
    last = result.history[-1].row() if result.history else None
    summary = {
        "cell": cfg.comm.label,
        "players": cfg.game.num_players,
        "wolves": cfg.game.num_wolves,
        "wolf_policy": cfg.wolf_policy,
        "seed": seed,
        "iterations": end,
        "final_iteration": last,
        "evaluation": ev.to_dict(),
        "random_baseline": float(exact_win_prob(cfg.game.num_wolves, cfg.game.num_players - cfg.game.num_wolves)),
        "train_seconds": train_seconds,
        "eval_seconds": time.perf_counter() - t0,
    }
    _write_json(out / "summary.json", summary)
    return summary


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = Path(cfg.run.out)
    try:
        summary = run_training(cfg, out, args.resume, args.checkpoint_every)
    except DivergenceError as exc:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "divergence.json", exc.snapshot)
        print(f"error: training diverged: {exc} (snapshot in {out / 'divergence.json'})", file=sys.stderr)
        return EXIT_DIVERGED
    ev = summary["evaluation"]["villager_win_rate"]
    print(f"{summary['cell']}: evaluation win rate {ev['mean']:.4f} +/- {ev['se']:.4f} "
          f"(random baseline {summary['random_baseline']:.5f}); outputs in {out}")
    return EXIT_OK


def cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    out = Path(cfg.run.out)
    path = args.checkpoint or str(out / CHECKPOINT_NAME)
    ckpt = load_checkpoint(path, cfg.env)
    ev = evaluate(cfg.env, ckpt.params, cfg.wolf_policy, cfg.run.eval_episodes,
                  derive_seed(cfg.run.seed, _EVAL_STREAM), workers=cfg.run.workers)
    doc = {"checkpoint": str(path), "trained_iterations": ckpt.iteration, "cell": cfg.comm.label,
           "wolf_policy": cfg.wolf_policy, **ev.to_dict()}
    if args.out:
        out.mkdir(parents=True, exist_ok=True)
        dump_manifest(cfg, out / "manifest.yaml", {"command": "evaluate", "checkpoint": str(path)})
        _write_json(out / "evaluation.json", doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def parse_cell(label: str) -> CommSpec:
    s = label.strip().upper()
    try:
        if s == "0SL":
            return CommSpec(0)
        sl, sr = s.split("-")
        if not (sl.endswith("SL") and sr.endswith("SR")):
            raise ValueError
        return CommSpec(int(sl[:-2]), int(sr[:-2]))
    except ValueError:
        raise UsageError(f"bad sweep cell {label!r}; expected forms like 0SL or 1SL-2SR") from None


def parse_cells(text: str) -> list[CommSpec]:
    labels = [c for c in (x.strip() for x in text.split(",")) if c]
    if not labels:
        raise UsageError("sweep needs at least one cell")
    cells, seen = [], set()
    for label in labels:
        cell = parse_cell(label)
        if cell.signal_length == 0:
            cell = CommSpec(0)
        if cell in seen:
            log.warning("duplicate sweep cell %s ignored", cell.label)
            continue
        seen.add(cell)
        cells.append(cell)
    return cells


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    cells = parse_cells(args.cells)
    out = Path(cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_manifest(cfg, out / "manifest.yaml", {"command": "sweep", "cells": [c.label for c in cells]})
    rows = []
    for cell in cells:
        row = {"cell": cell.label, "signal_length": cell.signal_length,
               "signal_range": cell.signal_range if cell.signal_length else "", "iterations": cfg.run.iterations}
        try:
            cell_cfg = cfg.replace(comm=cell)
            summary = run_training(cell_cfg, out / cell.label)
            ev = summary["evaluation"]
            last = summary["final_iteration"] or {}
            row.update(status="ok", train_win_rate=last.get("win_rate", ""),
                       eval_win_rate=ev["villager_win_rate"]["mean"], eval_win_se=ev["villager_win_rate"]["se"],
                       eval_accord=ev["mean_accord"]["mean"], eval_suicides=ev["mean_suicide_rate"]["mean"],
                       eval_days=ev["mean_days"]["mean"], error="")
        except (ConfigError, DivergenceError, CheckpointError, ValueError) as exc:
            log.error("cell %s failed: %s", cell.label, exc)
            row.update(status="failed", error=str(exc))
        rows.append(row)
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, restval="", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        shown = f"{row['eval_win_rate']:.4f}" if row["status"] == "ok" else "failed: " + row["error"]
        print(f"{row['cell']:>10}  {shown}")
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_FAIL


COMMANDS = {"baseline": cmd_baseline, "train": cmd_train, "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
