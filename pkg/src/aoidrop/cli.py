"""Experiment runner: parses a YAML config, dispatches to the computational
modules, and writes plot-ready CSV or JSON records.

Every output embeds the effective config hash and the seed, so a result file
can always be traced back to the exact run that produced it.  CSV files carry
the hash and seed in leading ``#`` comment lines; JSON files carry them as
top-level fields.  Numeric CSV fields use 9 significant digits and infinite
thresholds serialize as the literal token ``inf``.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 the game solver
did not converge (partial results are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys

import numpy as np
import yaml

from . import analytic, csma, multisource
from .distributions import from_spec
from .errors import AoiError, ConfigError
from .policies import Threshold, policy_from_spec
from .sim import SimConfig, simulate_policy, simulate_trace

MODES = ("single-analytic", "theta-sweep", "simulate", "multisource",
         "csma-game", "crossover")


# ---------------------------------------------------------------------------
# config handling

def load_config(path: str, overrides=()) -> dict:
    """Read the YAML config and apply dotted-path overrides (last wins)."""
    try:
        with open(path) as fh:
            config = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a mapping")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY.PATH=VALUE")
        dotted, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override value {raw!r} does not parse") from exc
        node = config
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {dotted!r} crosses a scalar")
        node[keys[-1]] = value
    return config


def config_hash(config: dict) -> str:
    """Stable short hash of the effective config."""
    canon = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _require(config, key, kind=None):
    if key not in config:
        raise ConfigError(f"missing config key {key!r}")
    value = config[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"config key {key!r} has wrong type")
    return value


def _theta_grid(spec):
    if isinstance(spec, dict):
        grid = list(np.linspace(float(spec["start"]), float(spec["stop"]),
                                int(spec["num"])))
    elif isinstance(spec, list) and spec:
        grid = [math.inf if str(v) == "inf" else float(v) for v in spec]
    else:
        raise ConfigError("grid must be a nonempty list or start/stop/num")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("grid must be sorted ascending")
    return grid


# ---------------------------------------------------------------------------
# output

def _fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.9g}"
    return str(value)


def write_rows(path: str, fmt: str, rows: list, meta: dict) -> None:
    """Write result rows with the run metadata embedded."""
    if fmt == "csv":
        lines = [f"# {key}={value}" for key, value in sorted(meta.items())]
        if rows:
            header = list(rows[0])
            lines.append(",".join(header))
            for row in rows:
                lines.append(",".join(_fmt(row[key]) for key in header))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({**meta, "rows": rows}, fh, sort_keys=True, indent=1,
                      default=float)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r}")


def read_result(path: str):
    """Re-parse a result file; returns (meta, rows)."""
    if path.endswith(".json"):
        with open(path) as fh:
            payload = json.load(fh)
        rows = payload.pop("rows")
        return payload, rows
    meta, header, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                meta[key] = value
            elif header is None:
                header = line.split(",")
            else:
                rows.append(dict(zip(header, line.split(","))))
    return meta, rows


# ---------------------------------------------------------------------------
# mode runners (each returns a row list)

def _single_dist(config):
    dist = from_spec(_require(config, "distribution", dict))
    lam = float(_require(config, "lam"))
    if lam <= 0:
        raise ConfigError("lam must be positive")
    return dist, lam


def run_single_analytic(config):
    dist, lam = _single_dist(config)
    verdict = analytic.classify_optimal_policy(dist, lam)
    row = {
        "lam": lam,
        "aaoi_dnp": analytic.aaoi_dnp(dist, lam).value,
        "aaoi_dop": analytic.aaoi_dop(dist, lam).value,
        "verdict": verdict.verdict,
    }
    if "policy" in config:
        policy = policy_from_spec(config["policy"])
        if isinstance(policy, Threshold):
            row["aaoi_policy"] = analytic.aaoi_threshold(
                dist, lam, policy.theta).value
        else:
            row["aaoi_policy"] = analytic.aaoi_smr(dist, lam, policy).value
    return [row]


def run_theta_sweep(config, seed, replications):
    dist, lam = _single_dist(config)
    grid = _theta_grid(_require(config, "theta_grid"))
    cycles = int(config.get("cycles", 100_000))
    rows = []
    for theta in grid:
        sim = simulate_policy(SimConfig(
            dist=dist, lam=lam, policy=Threshold(theta), cycles=cycles,
            seed=seed, replications=replications))
        rows.append({
            "theta": theta,
            "aaoi_analytic": analytic.aaoi_threshold(dist, lam, theta).value,
            "aaoi_sim": sim.value,
            "ci_half_width": sim.half_width,
        })
    return rows


def run_simulate(config, seed, replications):
    dist, lam = _single_dist(config)
    policy = policy_from_spec(_require(config, "policy"))
    sim = simulate_policy(SimConfig(
        dist=dist, lam=lam, policy=policy,
        cycles=int(config["cycles"]) if "cycles" in config else None,
        horizon=float(config["horizon"]) if "horizon" in config else None,
        seed=seed, replications=replications))
    rows = [{"aaoi_sim": sim.value, "ci_half_width": sim.half_width,
             "replications": sim.replications, "seed": seed}]
    if "trace" in config:
        trace_cfg = config["trace"]
        events = simulate_trace(
            SimConfig(dist=dist, lam=lam, policy=policy,
                      cycles=int(config.get("cycles", 1)), seed=seed),
            max_events=int(trace_cfg.get("max_events", 100)))
        with open(trace_cfg["path"], "w") as fh:
            fh.write("t,event,age_after\n")
            for ev in events:
                fh.write(f"{_fmt(ev.t)},{ev.event},{_fmt(ev.age_after)}\n")
    return rows


def run_multisource(config, seed, replications):
    ms = _require(config, "multisource", dict)
    sources = [multisource.SourceConfig(lam=float(s["lam"]),
                                        dist=from_spec(s["distribution"]))
               for s in _require(ms, "sources", list)]
    scheme = ms.get("scheme", multisource.DNP)
    backend = ms.get("backend", "corrected")
    analytic_vals = multisource.aaoi_multisource(sources, scheme, backend)
    rows = []
    sims = None
    if "horizon" in ms:
        sims = multisource.simulate_multisource(
            sources, scheme, float(ms["horizon"]), seed, replications)
    for s, est in enumerate(analytic_vals):
        row = {"source": s, "scheme": scheme, "aaoi_analytic": est.value}
        if sims is not None:
            row["aaoi_sim"] = sims[s].value
            row["ci_half_width"] = sims[s].half_width
        rows.append(row)
    return rows


def run_csma_game(config, seed):
    game = _require(config, "csma", dict)
    grid = _theta_grid(_require(game, "theta_grid"))
    n_samples = int(game.get("n_samples", 200_000))
    rows, all_converged = [], True
    for theta in grid:
        channel = csma.ChannelModel(
            sigma2=tuple(game["sigma2"]), sigma_n2=float(game["sigma_n2"]),
            theta=float(theta), c=tuple(game["c"]),
            lam=tuple(game["lam"]))
        cache = csma.ChannelMomentCache(channel, n_samples=n_samples,
                                        seed=seed)
        q_ne, aaoi_ne, converged = csma.nash_equilibrium(channel, cache=cache)
        all_converged = all_converged and converged
        ne_social = float(np.mean([v.value for v in aaoi_ne]))
        q_coop, social = csma.cooperative_optimum(channel, cache=cache)
        row = {"theta": theta, "ne_converged": int(converged),
               "ne_social_aaoi": ne_social,
               "coop_social_aaoi": social.value}
        for s in range(channel.n_sources):
            row[f"ne_q_{s}"] = float(q_ne[s])
            row[f"coop_q_{s}"] = float(q_coop[s])
            row[f"ne_aaoi_{s}"] = aaoi_ne[s].value
        rows.append(row)
    return rows, all_converged


def run_crossover(config):
    dist, _ = _single_dist(config)
    spec = config.get("crossover", {})
    lam_star = analytic.find_crossover(
        dist, float(spec.get("lam_lo", 0.05)), float(spec.get("lam_hi", 20.0)),
        tol=float(spec.get("tol", 1e-4)))
    return [{"lam_star": lam_star,
             "lam_scale": lam_star * dist.moments().m1 * 2.0
             if config["distribution"].get("kind") == "uniform"
             else lam_star}]


# ---------------------------------------------------------------------------
# scheme-comparison report

def report_scheme_comparison(lam_grid, families):
    """Evaluate the DNP-vs-DOP comparison criterion next to the direct AAoI
    comparison on every (family, lam) cell; disagreements are defects.

    ``families`` is a list of (label, TransferDistribution).  Returns a list
    of row dicts with a boolean ``agree`` per cell.
    """
    if not lam_grid or not families:
        raise ValueError("grids must be nonempty")
    rows = []
    for label, dist in families:
        for lam in lam_grid:
            dnp_better, margin = analytic.dnp_beats_dop(dist, lam)
            direct = (analytic.aaoi_dnp(dist, lam).value
                      < analytic.aaoi_dop(dist, lam).value)
            rows.append({
                "family": label, "lam": lam,
                "criterion_dnp_better": dnp_better,
                "direct_dnp_better": direct,
                "margin": margin,
                "agree": dnp_better == direct,
            })
    return rows


# ---------------------------------------------------------------------------
# entry point

def run(config_path: str, overrides=(), mode=None, seed=None,
        replications=None, out=None, fmt=None) -> int:
    """Execute one experiment; returns the process exit status."""
    try:
        config = load_config(config_path, overrides)
        if mode is not None:
            config["mode"] = mode
        if seed is not None:
            config["seed"] = seed
        if replications is not None:
            config["replications"] = replications
        if out is not None:
            config.setdefault("output", {})["path"] = out
        if fmt is not None:
            config.setdefault("output", {})["format"] = fmt
        run_mode = _require(config, "mode")
        if run_mode not in MODES:
            raise ConfigError(f"unknown mode {run_mode!r}")
        out_cfg = _require(config, "output", dict)
        out_path = _require(out_cfg, "path")
        out_fmt = out_cfg.get("format", "csv")
        if out_fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {out_fmt!r}")
        run_seed = int(config.get("seed", 0))
        reps = int(config.get("replications", 4))
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2

    status = 0
    try:
        if run_mode == "single-analytic":
            rows = run_single_analytic(config)
        elif run_mode == "theta-sweep":
            rows = run_theta_sweep(config, run_seed, reps)
        elif run_mode == "simulate":
            rows = run_simulate(config, run_seed, reps)
        elif run_mode == "multisource":
            rows = run_multisource(config, run_seed, reps)
        elif run_mode == "csma-game":
            rows, converged = run_csma_game(config, run_seed)
            if not converged:
                status = 4
        else:
            rows = run_crossover(config)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    except AoiError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    meta = {"config_hash": config_hash(config), "seed": run_seed,
            "mode": run_mode}
    write_rows(out_path, out_fmt, rows, meta)
    if status == 4:
        print("NonConvergence: game solver hit the round limit; partial "
              "results written", file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aoidrop",
        description="AAoI experiments under packet-drop policies")
    parser.add_argument("--config", required=True, help="YAML config path")
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--replications", type=int)
    parser.add_argument("--out", help="output file path")
    parser.add_argument("--format", choices=("csv", "json"), dest="fmt")
    parser.add_argument("overrides", nargs="*", metavar="KEY.PATH=VALUE",
                        help="dotted-path config overrides (last wins)")
    args = parser.parse_args(argv)
    return run(args.config, args.overrides, mode=args.mode, seed=args.seed,
               replications=args.replications, out=args.out, fmt=args.fmt)


if __name__ == "__main__":
    sys.exit(main())
