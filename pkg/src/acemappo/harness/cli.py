"""Command-line entry point: ``acemappo {train,eval,round-robin,export}``.

Results go to stdout as one JSON object. Failures exit non-zero with a single
JSON line ``{"error": ..., "type": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..config import ABLATIONS, TrainConfig, load_config
from ..env import CombatEnv


def _config(path: str | None) -> TrainConfig:
    return load_config(path) if path else TrainConfig()


def cmd_train(args) -> dict:
    from .train import train

    cfg = _config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.episodes is not None:
        cfg.total_episodes = args.episodes
    for name in args.ablate or []:
        cfg.ablate(name)
    cfg.validate()
    out = Path(args.out or f"runs/seed{cfg.seed}")
    res = train(cfg, out)
    last = res.metrics[-1] if res.metrics else {}
    return {"out_dir": str(out), "episodes": len(res.metrics),
            "evolution_phases": res.evolution_phases, "injections": res.injections,
            "final_rolling_win_rate": last.get("rolling_win_rate"),
            "actor": str(out / "actor.npz")}


def cmd_eval(args) -> dict:
    from .evaluate import evaluate_winrate, resolve_policy

    cfg = _config(args.config)
    env = CombatEnv(cfg.env, cfg.airsim)
    blue = resolve_policy(args.blue, cfg, greedy=args.greedy)
    red = resolve_policy(args.red, cfg, greedy=args.greedy)
    wa, wb, d = evaluate_winrate(blue, red, args.episodes, args.seed, env)
    return {"blue": args.blue, "red": args.red, "episodes": args.episodes,
            "blue_wins": wa, "red_wins": wb, "draws": d, "blue_win_rate": wa / args.episodes}


def cmd_round_robin(args) -> dict:
    from .evaluate import round_robin
    from .plotting import winrate_heatmap

    cfg = _config(args.config)
    res = round_robin(args.ckpts, args.episodes, args.seed, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = res.to_csv(out / "winrate_matrix.csv")
    png = winrate_heatmap(res.names, res.win_rate, out / "winrate_matrix.png")
    return {"policies": res.names, "csv": str(csv_path), "figure": str(png),
            "win_rate": res.win_rate.tolist()}


def cmd_export(args) -> dict:
    from .evaluate import resolve_policy
    from .export import export_trajectories

    cfg = _config(args.config)
    paths = export_trajectories(resolve_policy(args.blue, cfg), resolve_policy(args.red, cfg),
                                args.episodes, args.out, args.seed, cfg)
    return {"files": [str(p) for p in paths]}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acemappo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run the full training loop")
    t.add_argument("--config")
    t.add_argument("--seed", type=int)
    t.add_argument("--episodes", type=int, help="override total_episodes")
    t.add_argument("--ablate", action="append", choices=ABLATIONS)
    t.add_argument("--out", help="run directory (default runs/seed<N>)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="blue vs red win/loss/draw counts")
    e.add_argument("--blue", required=True, help="actor checkpoint, 'rule' or 'random'")
    e.add_argument("--red", required=True, help="actor checkpoint, 'rule' or 'random'")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--greedy", action="store_true", help="argmax actions for neural policies")
    e.add_argument("--config")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("round-robin", help="win-rate matrix over several policies")
    r.add_argument("--ckpts", nargs="+", required=True)
    r.add_argument("--episodes", type=int, default=100)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default="round_robin")
    r.add_argument("--config")
    r.set_defaults(func=cmd_round_robin)

    x = sub.add_parser("export", help="write per-episode trajectory CSVs")
    x.add_argument("--blue", required=True)
    x.add_argument("--red", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--episodes", type=int, default=1)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--config")
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one error line
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
