"""Command-line entry point: ``fris-ambc <subcommand> [options]``.

On failure the process prints ``error: <category>: <message>`` on one line
to stderr and exits nonzero.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench
from .channel import draw_channel_set
from .config import ConfigError, ScenarioConfig, load_config
from .pso import PsoConfig, brute_force_mask, brute_force_subset, optimize

EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_RUNTIME = 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file (defaults when omitted)")
    common.add_argument("--seed", type=int, help="base seed (u64)")
    common.add_argument("--seeds", type=int, help="number of seeds per point")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--encoding", choices=["general", "mask"])
    common.add_argument("--mode", choices=["grid", "continuous"])

    p = argparse.ArgumentParser(prog="fris-ambc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("layout", parents=[common], help="optimize once and dump the ON/OFF layout")
    sub.add_parser("convergence", parents=[common], help="mean global-best trace per ON budget")
    sub.add_parser("rate-vs-snr", parents=[common], help="FRIS vs RIS over average SNR")
    sub.add_parser("rate-vs-lattice", parents=[common], help="FRIS vs RIS over lattice size")
    sub.add_parser("oracle-check", parents=[common], help="PSO vs brute force on small instances")
    return p


def _configs(args):
    if args.config is not None:
        scenario, cfg = load_config(args.config)
    else:
        scenario, cfg = ScenarioConfig(), PsoConfig()
    changes = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        changes["base_seed"] = args.seed
    if args.seeds is not None:
        changes["n_seeds"] = args.seeds
    if changes:
        scenario = scenario.replace(**changes)
    pso_changes = {k: getattr(args, k) for k in ("encoding", "mode") if getattr(args, k)}
    if pso_changes:
        cfg = cfg.replace(**pso_changes)
    return scenario, cfg


def oracle_check(scenario, cfg, seeds, out=None) -> bool:
    """Small-instance comparison of the swarm against exhaustive search."""
    lines = ["check,seed,pso,oracle,ratio"]
    ok = True
    small_mask = scenario.replace(grid_dims=(8, 8), m_o=4, mask_dims=(2, 2), n_draws=10)
    small_gen = scenario.replace(grid_dims=(4, 3), m_o=3, mask_dims=None, n_draws=5)
    checks = [
        ("mask", small_mask, cfg.replace(encoding="mask", mode="grid"), 0.99,
         lambda scn, cs: brute_force_mask(scn, cs)[1]),
        ("general", small_gen, cfg.replace(encoding="general", mode="grid"), 0.97,
         lambda scn, cs: brute_force_subset(scn, cs, scn.m_o)[1]),
    ]
    for name, scn, c, threshold, oracle in checks:
        hits = 0
        for s in seeds:
            cs = draw_channel_set(scn, s, scn.n_draws)
            got = optimize(scn, c, s, cs=cs).best_fitness
            best = oracle(scn, cs)
            ratio = got / best
            hits += ratio >= threshold
            lines.append(f"{name},{s},{got!r},{best!r},{ratio!r}")
        passed = hits >= int(np.ceil(0.9 * len(seeds)))
        print(f"{name}: {hits}/{len(seeds)} seeds within {threshold:.0%} of the oracle "
              f"-> {'PASS' if passed else 'FAIL'}")
        ok &= passed
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "oracle_check.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ok


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        scenario, cfg = _configs(args)
        seeds = bench.seed_list(scenario)
        if args.command == "layout":
            rec = bench.run_layout(scenario, cfg, seeds[0])
        elif args.command == "convergence":
            rec = bench.run_convergence(scenario, cfg, seeds)
        elif args.command == "rate-vs-snr":
            rec = bench.run_rate_vs_snr(scenario, cfg, seeds)
        elif args.command == "rate-vs-lattice":
            rec = bench.run_rate_vs_lattice(scenario, cfg, seeds)
        else:
            if not oracle_check(scenario, cfg, seeds, args.out):
                print("error: oracle-mismatch: swarm fell short of the exhaustive optimum",
                      file=sys.stderr)
                return EXIT_CHECK
            return 0
        path = rec.write(args.out)
        print(path)
        return 0
    except ConfigError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: runtime: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_RUNTIME
