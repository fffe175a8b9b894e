"""Command-line front end for simulations, scans, and audits.

Configuration is layered: built-in defaults, then a ``--config`` JSON
file, then explicit command-line flags, later layers winning.  Every run
resolves to a :class:`RunConfig` that is validated before dispatch and
echoed into the emitted manifest, so a result file is enough to repeat
the run.  ``--seed`` defaults to a fresh entropy draw; the resolved
value always lands in the manifest.

Exit codes: 0 on success, 2 for invalid configuration (the diagnostic
names the offending field and its legal range), 3 for runtime failures.

Environment: ``SPINDUAL_OUT_DIR`` prefixes relative ``--out`` paths;
``SPINDUAL_THREADS`` sets the thread count when ``--threads`` is absent.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import experiments, lattice, oracle, percolation, rules
from . import engine
from .experiments import StudyResult
from .io import emit_results
from .rng import EVENTS, INIT_FILL, derive_seed, fresh_entropy_seed

COMMANDS = ("simulate", "dual", "duality", "percolation", "anneal",
            "survival", "audit", "equilibrium")

# Keys kept out of the emitted manifest: they change where or how fast a
# run executes, never what it computes.
_NON_REPRODUCIBLE = ("out", "threads")


class ConfigError(ValueError):
    """A parameter failed validation; message names field and legal range."""


@dataclass(frozen=True)
class RunConfig:
    """One resolved invocation: subcommand plus canonical parameters.

    ``params`` is normalized through a JSON round trip so that a config
    rebuilt from an emitted manifest compares equal to the original.
    """

    command: str
    params: dict

    def __post_init__(self):
        object.__setattr__(
            self, "params", json.loads(json.dumps(self.params, sort_keys=True)))

    def manifest_config(self) -> dict:
        return {k: v for k, v in self.params.items()
                if k not in _NON_REPRODUCIBLE}

    @classmethod
    def from_manifest(cls, manifest: dict) -> "RunConfig":
        return cls(manifest["command"], manifest["config"])


# ---------------------------------------------------------------------------
# validation

def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _all_unit(v) -> bool:
    return all(_is_num(a) and 0.0 <= a <= 1.0 for a in v)


_MODEL_CHOICES = rules.X_MODEL_NAMES + tuple(rules.DUAL_ALIASES)

# field -> (legal-range text, predicate)
_RANGES = {
    "alpha": ("a real in [0, 1]", lambda v: _is_num(v) and 0.0 <= v <= 1.0),
    "model": (f"one of {', '.join(_MODEL_CHOICES)}",
              lambda v: isinstance(v, str) and v.lower() in _MODEL_CHOICES),
    "sites": ("an integer >= 2", lambda v: isinstance(v, int) and v >= 2),
    "dim": ("an integer in [1, 3]", lambda v: isinstance(v, int) and 1 <= v <= 3),
    "radius": ("an integer >= 1", lambda v: isinstance(v, int) and v >= 1),
    "t_end": ("a real > 0", lambda v: _is_num(v) and v > 0),
    "t": ("a real > 0", lambda v: _is_num(v) and v > 0),
    "t_total": ("a real > 0", lambda v: _is_num(v) and v > 0),
    "t_relax": ("a real > 0", lambda v: _is_num(v) and v > 0),
    "samples": ("an integer >= 1", lambda v: isinstance(v, int) and v >= 1),
    "replicas": ("an integer >= 1", lambda v: isinstance(v, int) and v >= 1),
    "replicates": ("an integer >= 2", lambda v: isinstance(v, int) and v >= 2),
    "seed": ("a nonnegative integer",
             lambda v: isinstance(v, int) and v >= 0),
    "threads": ("an integer >= 1", lambda v: isinstance(v, int) and v >= 1),
    "format": ("csv or json", lambda v: v in ("csv", "json")),
    "cap": ("an integer >= 2", lambda v: isinstance(v, int) and v >= 2),
    "levels": ("an integer >= 1", lambda v: isinstance(v, int) and v >= 1),
    "L": ("an integer >= 1", lambda v: isinstance(v, int) and v >= 1),
    "T": ("a real > 0 (or null for 2L)",
          lambda v: v is None or (_is_num(v) and v > 0)),
    "p_grid": ("reals in [0, 1]", lambda v: len(v) > 0 and _all_unit(v)),
    "alpha_grid": ("reals in [0, 1] (or null for the default grid)",
                   lambda v: v is None or (len(v) > 0 and _all_unit(v))),
    "y0": ("a nonempty list of integer sites", lambda v: len(v) > 0),
    "probes": ("odd positive integers (or null for the default set)",
               lambda v: v is None or (len(v) > 0 and
                                       all(x > 0 and x % 2 == 1 for x in v))),
    "preset": ("interval or far-edge", lambda v: v in ("interval", "far-edge")),
    "mode": ("scan, window, survival, or good-events",
             lambda v: v in ("scan", "window", "survival", "good-events")),
    "kind": ("structural or drift", lambda v: v in ("structural", "drift")),
    "N_grid": ("integers >= 2",
               lambda v: len(v) > 0 and all(isinstance(x, int) and x >= 2 for x in v)),
    "t_grid": ("reals > 0",
               lambda v: len(v) > 0 and all(_is_num(x) and x > 0 for x in v)),
    "init": ("an initial-state spec", lambda v: isinstance(v, str) and v != ""),
    "laws": ("a nonempty list of law names", lambda v: len(v) > 0),
    "lags": ("an integer >= 1", lambda v: isinstance(v, int) and v >= 1),
    "allow_1d": ("a boolean", lambda v: isinstance(v, bool)),
    "critical_point": ("a boolean", lambda v: isinstance(v, bool)),
    "burn_in": ("an integer >= 0", lambda v: isinstance(v, int) and v >= 0),
    "out": ("a file path or null", lambda v: v is None or isinstance(v, str)),
}


def validate(cfg: RunConfig) -> None:
    """Range-check every parameter; raise ConfigError on the first failure."""
    if cfg.command not in COMMANDS:
        raise ConfigError(
            f"command={cfg.command!r} invalid; legal values: {', '.join(COMMANDS)}")
    for field, value in sorted(cfg.params.items()):
        spec = _RANGES.get(field)
        if spec is None:
            raise ConfigError(f"unknown field {field!r} for {cfg.command}")
        legal, ok = spec
        try:
            good = ok(value)
        except TypeError:
            good = False
        if not good:
            raise ConfigError(f"{field}={value!r} invalid; legal range: {legal}")
    if cfg.command == "duality" and cfg.params["sites"] > oracle.MAX_GRID_SITES:
        raise ConfigError(
            f"sites={cfg.params['sites']} invalid for duality; legal range: "
            f"an integer in [2, {oracle.MAX_GRID_SITES}]")
    if cfg.command == "survival" and cfg.params["mode"] == "scan" \
            and len(cfg.params["y0"]) % 2 == 1:
        raise ConfigError(
            "y0 has odd size; legal range for survival --mode scan: "
            "an even number of sites (parity pins odd starts alive)")


# ---------------------------------------------------------------------------
# argument parsing

def _int_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}")


def _str_list(text: str) -> list:
    return [tok for tok in text.replace(",", " ").split() if tok]


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="JSON file of defaults; explicit flags override it")
    common.add_argument("--seed", type=int, default=None,
                        help="base seed (default: fresh entropy, echoed in the manifest)")
    common.add_argument("--out", default=None, metavar="PATH",
                        help="output file (default: print a summary to stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $SPINDUAL_THREADS or CPU count)")

    p = argparse.ArgumentParser(
        prog="spindual",
        description="Interacting spin systems, their annihilating duals, and "
                    "the scans and audits built on them.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parsers = {}

    sp = parsers["simulate"] = sub.add_parser(
        "simulate", parents=[common],
        help="run one spin configuration forward and emit its trajectory")
    sp.add_argument("--model", default="rebellious")
    sp.add_argument("--alpha", type=float, default=0.3)
    sp.add_argument("--sites", type=int, default=201)
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--radius", type=int, default=1)
    sp.add_argument("--allow-1d", dest="allow_1d", action="store_true", default=False)
    sp.add_argument("--t-end", dest="t_end", type=float, default=1000.0)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--init", default="single",
                    help='"single", "zeros", "ones", a 0/1 pattern string, '
                         '"product:P", "interval:A:B", or "sites:I,J,..."')

    sp = parsers["dual"] = sub.add_parser(
        "dual", parents=[common],
        help="run the sparse annihilating dual from a finite set of sites")
    sp.add_argument("--model", default="adbarw")
    sp.add_argument("--alpha", type=float, default=0.3)
    sp.add_argument("--y0", type=_int_list, default=[0, 1],
                    help="comma-separated initial sites")
    sp.add_argument("--t-end", dest="t_end", type=float, default=1000.0)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--cap", type=int, default=100_000,
                    help="particle cap; hitting it marks the run capped")

    sp = parsers["duality"] = sub.add_parser(
        "duality", parents=[common],
        help="exact parity-duality residual over every initial pair on a small ring")
    sp.add_argument("--model", default="rebellious")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--sites", type=int, default=6)
    sp.add_argument("--t", type=float, default=1.0)

    sp = parsers["percolation"] = sub.add_parser(
        "percolation", parents=[common],
        help="oriented-percolation survival, or the renormalization-box estimate")
    sp.add_argument("--mode", choices=("survival", "good-events"), default="survival")
    sp.add_argument("--p-grid", dest="p_grid", type=_float_list,
                    default=[0.55, 0.65, 0.75, 0.85, 0.95])
    sp.add_argument("--levels", type=int, default=60)
    sp.add_argument("--replicas", type=int, default=400)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--L", type=int, default=16)
    sp.add_argument("--T", type=float, default=None, help="block time (default 2L)")
    sp.add_argument("--preset", choices=("interval", "far-edge"), default="interval")
    sp.add_argument("--probes", type=_int_list, default=None,
                    help="odd probe offsets (default 1,3,...,29)")
    sp.add_argument("--cap", type=int, default=4096)

    sp = parsers["anneal"] = sub.add_parser(
        "anneal", parents=[common],
        help="density under a slow selection-strength ramp; optionally locate "
             "the threshold over replicates")
    sp.add_argument("--sites", type=int, default=201)
    sp.add_argument("--t-total", dest="t_total", type=float, default=3e4)
    sp.add_argument("--samples", type=int, default=300)
    sp.add_argument("--critical-point", dest="critical_point",
                    action="store_true", default=False)
    sp.add_argument("--replicates", type=int, default=8)

    sp = parsers["survival"] = sub.add_parser(
        "survival", parents=[common],
        help="dual survival probability over an alpha grid, or the "
             "small-window extinction-vs-growth study")
    sp.add_argument("--mode", choices=("scan", "window"), default="scan")
    sp.add_argument("--model", default="adbarw")
    sp.add_argument("--alpha", type=float, default=0.2,
                    help="alpha for --mode window")
    sp.add_argument("--alpha-grid", dest="alpha_grid", type=_float_list, default=None)
    sp.add_argument("--y0", type=_int_list, default=[0, 1])
    sp.add_argument("--t-end", dest="t_end", type=float, default=1e4)
    sp.add_argument("--replicas", type=int, default=400)
    sp.add_argument("--cap", type=int, default=512)
    sp.add_argument("--N-grid", dest="N_grid", type=_int_list, default=[2, 6, 10])
    sp.add_argument("--t-grid", dest="t_grid", type=_float_list,
                    default=[10.0, 100.0, 1000.0])

    sp = parsers["audit"] = sub.add_parser(
        "audit", parents=[common],
        help="structural identities (interface, reductions, holding times) "
             "or the conditional edge-drift table")
    sp.add_argument("--kind", choices=("structural", "drift"), default="structural")
    sp.add_argument("--replicas", type=int, default=100_000,
                    help="holding-time replicas for --kind structural")
    sp.add_argument("--samples", type=int, default=100_000,
                    help="conditioned events for --kind drift")
    sp.add_argument("--alpha", type=float, default=0.0,
                    help="alpha for --kind drift (the reference table is alpha=0)")

    sp = parsers["equilibrium"] = sub.add_parser(
        "equilibrium", parents=[common],
        help="long-run statistics from several initial laws, cross-checked")
    sp.add_argument("--model", default="rebellious")
    sp.add_argument("--alpha", type=float, default=0.2)
    sp.add_argument("--sites", type=int, default=200)
    sp.add_argument("--t-relax", dest="t_relax", type=float, default=2000.0)
    sp.add_argument("--replicas", type=int, default=24)
    sp.add_argument("--laws", type=_str_list,
                    default=list(experiments._INITIAL_LAWS))
    sp.add_argument("--lags", type=int, default=5)

    return p, parsers


def _peek_config(argv) -> tuple[str | None, str | None]:
    """Extract (subcommand, --config path) without a full parse."""
    command = next((a for a in argv if a in COMMANDS), None)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    return command, path


def parse_config(argv) -> RunConfig:
    parser, parsers = build_parser()
    command, cfg_path = _peek_config(argv)
    if cfg_path is not None:
        if command is None:
            raise ConfigError("--config requires a subcommand")
        try:
            with open(cfg_path) as f:
                overrides = json.load(f)
        except OSError as exc:
            raise ConfigError(f"config={cfg_path!r} invalid; {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config={cfg_path!r} invalid; not JSON ({exc})")
        if not isinstance(overrides, dict):
            raise ConfigError(f"config={cfg_path!r} invalid; expected a JSON object")
        known = {a.dest for a in parsers[command]._actions}
        for key in overrides:
            if key not in known:
                raise ConfigError(
                    f"unknown field {key!r} in config file for {command}")
        parsers[command].set_defaults(**overrides)
    ns = parser.parse_args(argv)
    params = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    if params.get("seed") is None:
        params["seed"] = fresh_entropy_seed()
    if params.get("threads") is None:
        env = os.environ.get("SPINDUAL_THREADS", "")
        params["threads"] = int(env) if env.isdigit() and int(env) > 0 \
            else (os.cpu_count() or 1)
    return RunConfig(ns.command, params)


# ---------------------------------------------------------------------------
# dispatch

def _parse_init(spec: str):
    if ":" not in spec:
        return spec
    tag, _, rest = spec.partition(":")
    if tag == "product":
        return ("product", float(rest))
    if tag == "interval":
        a, _, b = rest.partition(":")
        return ("interval", int(a), int(b))
    if tag == "sites":
        return ("sites", [int(s) for s in rest.split(",")])
    if tag == "single":
        return ("single", int(rest))
    raise ConfigError(f"init={spec!r} invalid; legal range: an initial-state spec")


def _cmd_simulate(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    t0 = time.time()
    shape = lattice.LatticeShape.torus(*((p["sites"],) * p["dim"]))
    r = rules.model(p["model"], p["alpha"], d=p["dim"], R=p["radius"],
                    allow_1d=p["allow_1d"])
    x0 = lattice.make_config(shape, _parse_init(p["init"]),
                             seed=derive_seed(p["seed"], INIT_FILL))
    ts = np.linspace(0.0, p["t_end"], p["samples"] + 1)[1:]
    traj = engine.run_dense(r, x0, ts, p["seed"])
    rows = []
    for x, t in zip([x0] + list(traj.samples), [0.0] + list(ts)):
        st = lattice.config_statistics(x)
        rows.append((float(t), st.ones, st.gradient,
                     "".join("1" if b else "0" for b in x.bits.ravel())))
    return StudyResult(
        "simulate",
        {k: p[k] for k in ("model", "alpha", "sites", "dim", "radius",
                           "t_end", "samples", "init")},
        ("t", "particles", "gradient", "pattern"),
        rows, p["seed"], time.time() - t0)


def _cmd_dual(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    t0 = time.time()
    shape = lattice.LatticeShape.infinite(1)
    # dual=True on an alias is a no-op; on a spin-model name it takes the
    # transpose, so "dual --model rebellious" and "--model adbarw" agree.
    r = rules.model(p["model"], p["alpha"], dual=True)
    y0 = lattice.sparse_config(shape, p["y0"])
    ts = np.linspace(0.0, p["t_end"], p["samples"] + 1)[1:]
    caps = engine.EngineCaps(max_particles=p["cap"])
    traj = engine.run_sparse(r, y0, ts, p["seed"], caps=caps)
    rows = []
    for y, t in zip([y0] + list(traj.samples), [0.0] + list(ts)):
        supp = sorted(s[0] for s in y.support)
        rows.append((float(t), len(supp),
                     supp[0] if supp else "", supp[-1] if supp else "",
                     " ".join(str(s) for s in supp)))
    return StudyResult(
        "dual",
        {k: p[k] for k in ("model", "alpha", "y0", "t_end", "samples", "cap")}
        | {"capped": bool(traj.capped), "cap_reason": traj.cap_reason},
        ("t", "particles", "min_site", "max_site", "support"),
        rows, p["seed"], time.time() - t0)


def _cmd_duality(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    t0 = time.time()
    shape = lattice.LatticeShape.torus(p["sites"])
    # this subcommand only offers a ring, so the degenerate d = R = 1
    # variant of the block models is the intended one
    r = rules.model(p["model"], p["alpha"], allow_1d=True)
    gap, gaps = oracle.duality_gap_grid(r, shape, p["t"])
    print(f"max duality gap {gap:.3e} over {gaps.size} initial pairs "
          f"({p['model']}, alpha={p['alpha']}, {p['sites']} sites, t={p['t']})")
    rows = [(p["model"], p["alpha"], p["sites"], p["t"],
             float(gap), float(gaps.mean()))]
    return StudyResult(
        "duality", {k: p[k] for k in ("model", "alpha", "sites", "t")},
        ("model", "alpha", "sites", "t", "max_gap", "mean_gap"),
        rows, p["seed"], time.time() - t0)


def _cmd_percolation(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    t0 = time.time()
    if p["mode"] == "survival":
        rows = []
        for i, prob in enumerate(p["p_grid"]):
            out = percolation.percolation_survival(
                float(prob), p["levels"], p["replicas"],
                derive_seed(p["seed"], EVENTS, i))
            rows.append((float(prob), p["levels"], p["replicas"],
                         out["survival"], out["ci_low"], out["ci_high"]))
        return StudyResult(
            "percolation_survival",
            {k: p[k] for k in ("p_grid", "levels", "replicas")},
            ("p", "levels", "replicas", "survival", "ci_low", "ci_high"),
            rows, p["seed"], time.time() - t0)
    T = p["T"] if p["T"] is not None else 2.0 * p["L"]
    est = percolation.good_event_estimate(
        p["alpha"], p["L"], T, p["replicas"], p["preset"], p["seed"],
        probes=p["probes"], caps=engine.EngineCaps(max_particles=p["cap"]),
        threads=p["threads"])
    rows = [(f"probe_{x}", float(est.p_hat[j]),
             float(est.ci_low[j]), float(est.ci_high[j]))
            for j, x in enumerate(est.probes)]
    rows.append(("capped_replicas", float(est.n_capped), math.nan, math.nan))
    for k, corr in enumerate(est.dependence_profile):
        if math.isfinite(corr):
            rows.append((f"corr_offset_{k + 1}", float(corr), math.nan, math.nan))
    worst = float(np.nanmin(est.p_hat))
    print(f"block probability >= {worst:.4f} across {len(est.probes)} probes "
          f"at L={p['L']}, T={T}, alpha={p['alpha']} ({p['preset']} start)")
    return StudyResult(
        "percolation_good_events",
        {k: p[k] for k in ("alpha", "L", "replicas", "preset", "cap")}
        | {"T": T, "probes": list(est.probes)},
        ("quantity", "value", "ci_low", "ci_high"),
        rows, p["seed"], time.time() - t0)


def _cmd_anneal(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    if p["critical_point"]:
        return experiments.anneal_critical_point(
            sites=p["sites"], t_total=p["t_total"], replicates=p["replicates"],
            seed=p["seed"], n_samples=p["samples"])
    return experiments.density_anneal(
        sites=p["sites"], t_total=p["t_total"], seed=p["seed"],
        n_samples=p["samples"], threads=p["threads"])


def _cmd_survival(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    if p["mode"] == "scan":
        return experiments.survival_scan(
            model_name=p["model"], alpha_grid=p["alpha_grid"],
            y0_sites=p["y0"], T=p["t_end"], replicas=p["replicas"],
            seed=p["seed"], max_particles=p["cap"], threads=p["threads"])
    return experiments.extinction_vs_growth(
        model_name=p["model"], alpha=p["alpha"], y0_sites=p["y0"],
        N_grid=p["N_grid"], t_grid=p["t_grid"], replicas=p["replicas"],
        seed=p["seed"], max_particles=p["cap"], threads=p["threads"])


def _cmd_audit(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    if p["kind"] == "drift":
        return experiments.drift_audit(alpha=p["alpha"], samples=p["samples"],
                                       seed=p["seed"])
    return experiments.structural_audits(seed=p["seed"], replicas=p["replicas"],
                                         threads=p["threads"])


def _cmd_equilibrium(cfg: RunConfig) -> StudyResult:
    p = cfg.params
    return experiments.equilibrium_probe(
        model_name=p["model"], alpha=p["alpha"], sites=p["sites"],
        t_relax=p["t_relax"], replicas=p["replicas"],
        initial_laws=p["laws"], seed=p["seed"], lags=p["lags"])


_DISPATCH = {
    "simulate": _cmd_simulate,
    "dual": _cmd_dual,
    "duality": _cmd_duality,
    "percolation": _cmd_percolation,
    "anneal": _cmd_anneal,
    "survival": _cmd_survival,
    "audit": _cmd_audit,
    "equilibrium": _cmd_equilibrium,
}


def _resolve_out(path: str) -> str:
    base = os.environ.get("SPINDUAL_OUT_DIR", "")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _print_summary(result: StudyResult, limit: int = 12) -> None:
    print(f"{result.name}: {len(result.rows)} rows, seed {result.seed}")
    print("  " + "\t".join(result.columns))
    for row in result.rows[:limit]:
        print("  " + "\t".join(str(c) for c in row))
    if len(result.rows) > limit:
        print(f"  ... {len(result.rows) - limit} more rows (use --out to keep them)")


def run_command(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = parse_config(argv)
        validate(cfg)
    except ConfigError as exc:
        print(f"spindual: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse reports its own diagnostics
        return 0 if exc.code in (0, None) else 2
    try:
        result = _DISPATCH[cfg.command](cfg)
        extra = {"command": cfg.command, "config": cfg.manifest_config()}
        if cfg.params.get("out"):
            path = _resolve_out(cfg.params["out"])
            emit_results(result, path, cfg.params["format"], extra_manifest=extra)
            print(f"wrote {path} ({len(result.rows)} rows, {cfg.params['format']}, "
                  f"seed {result.seed})")
        else:
            _print_summary(result)
    except (ValueError, OSError) as exc:
        print(f"spindual: {exc}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    try:
        return run_command(argv)
    except KeyboardInterrupt:
        print("spindual: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
