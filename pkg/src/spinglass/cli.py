"""Batch experiment driver.

Each subcommand wraps one part of the library with seeded, reproducible
runs.  Results land under --out as report.json (config echo, metrics,
aggregates, wall clock, content hash) plus metrics.csv; reruns of the
same config produce byte-identical metric CSVs.  Repetitions use
independent seed streams labeled rep/0, rep/1, ...

Exit codes: 0 success, 2 usage error, 3 resource limit, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, amp, bp, iamp, parisi, spiked
from .ensembles import (
    PriorSpec,
    Seed,
    sample_goe,
    sample_potentials,
    sample_pspin,
    sample_spiked,
    sample_tree,
)
from .errors import NumericError, ResourceLimitError, SpinGlassError
from .hamiltonian import (
    MixingPolynomial,
    brute_force_opt,
    free_energy,
)


@dataclasses.dataclass
class ExperimentConfig:
    """Flat, JSON-round-trippable description of one run."""

    subcommand: str
    seed: int
    params: dict
    repetitions: int
    out: str | None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def parse_mixing(spec: str) -> MixingPolynomial:
    """"coeff:degree,coeff:degree" -> MixingPolynomial."""
    coeffs = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            coeff, degree = part.split(":")
            coeffs[int(degree)] = coeffs.get(int(degree), 0.0) + float(coeff)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(
                f"bad mixing term {part!r}, expected coeff:degree"
            ) from exc
    return MixingPolynomial(coeffs)


def parse_prior(spec: str) -> PriorSpec:
    parts = spec.split(":")
    kind = parts[0]
    if kind in ("rademacher", "gaussian"):
        return PriorSpec(kind)
    if kind == "sparse":
        return PriorSpec("sparse", (float(parts[1]),))
    if kind == "twopoint":
        return PriorSpec("twopoint", tuple(float(p) for p in parts[1:4]))
    raise argparse.ArgumentTypeError(f"unknown prior {spec!r}")


def parse_float_list(spec: str) -> list[float]:
    return [float(v) for v in spec.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# report plumbing


def aggregate(metrics: list[dict]) -> dict:
    keys = sorted({k for row in metrics for k in row})
    out = {}
    for k in keys:
        vals = np.array([row[k] for row in metrics if k in row], dtype=float)
        out[k] = {
            "mean": float(np.mean(vals)),
            "stderr": float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0,
            "count": int(len(vals)),
        }
    return out


def write_report(config: ExperimentConfig, metrics: list[dict], extra_files: dict, started: float) -> dict:
    report = {
        "config": dataclasses.asdict(config),
        "content_hash": config.content_hash(),
        "version": __version__,
        "metrics": metrics,
        "aggregate": aggregate(metrics),
        "wall_clock_s": time.time() - started,
    }
    if config.out:
        os.makedirs(config.out, exist_ok=True)
        with open(os.path.join(config.out, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
        lines = ["repetition,metric,value"]
        for i, row in enumerate(metrics):
            for k in sorted(row):
                lines.append(f"{i},{k},{row[k]:.17g}")
        with open(os.path.join(config.out, "metrics.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        for name, text in extra_files.items():
            with open(os.path.join(config.out, name), "w") as fh:
                fh.write(text)
    return report


def print_aggregate(report: dict):
    for k, stats in sorted(report["aggregate"].items()):
        print(f"{k}: {stats['mean']:.6f} +- {stats['stderr']:.6f}  (n={stats['count']})")


# ---------------------------------------------------------------------------
# subcommands


def cmd_parisi(args) -> int:
    config = ExperimentConfig(
        subcommand="parisi", seed=args.seed,
        params={"xi": args.xi, "boundary": args.boundary, "rsb": args.rsb,
                "grid": args.grid, "budget": args.budget},
        repetitions=1, out=args.out,
    )
    started = time.time()
    mixing = parse_mixing(args.xi)
    grid = parisi.GridSpec(num_x=args.grid)
    result = parisi.minimize(
        mixing, args.boundary, args.rsb, grid=grid,
        budget=args.budget, seed=args.seed,
    )
    metrics = [{
        "value": result.value.value,
        "phi00": result.value.phi00,
        "correction": result.value.correction,
        "converged": float(result.converged),
        "evaluations": float(result.evaluations),
    }]
    extra = {
        "profile.json": json.dumps({
            "breakpoints": list(result.profile.breakpoints),
            "values": list(result.profile.values),
            "terminal_scale": result.value.terminal_scale,
        }, indent=2),
    }
    if args.boundary == "spherical":
        metrics[0]["closed_form"] = parisi.spherical_value(mixing)
    if args.dump_grid and args.boundary == "ising":
        sol = parisi.solve_pde(result.profile, mixing, "ising", grid=grid,
                               times=np.linspace(0, 1, 21))
        extra["grid.csv"] = sol.to_csv()
    report = write_report(config, metrics, extra, started)
    print_aggregate(report)
    return 0


def cmd_iamp(args) -> int:
    config = ExperimentConfig(
        subcommand="iamp", seed=args.seed,
        params={"n": args.n, "delta": args.delta, "control": args.control,
                "xi": args.xi, "rsb": args.rsb},
        repetitions=args.seeds, out=args.out,
    )
    started = time.time()
    mixing = parse_mixing(args.xi)
    delta = args.delta
    if args.control == "spherical":
        control = iamp.spherical_control(mixing, delta)
        flavor = "sphere"
    else:
        opt = parisi.minimize(mixing, "ising", args.rsb, seed=args.seed)
        times = np.round(np.arange(0.0, 1.0 + delta / 2, delta), 12)
        sol = parisi.solve_pde(opt.profile, mixing, "ising", times=times)
        control = parisi.export_control(sol, opt.profile, delta=delta)
        flavor = "cube"
    metrics = []
    trajectory_csv = None
    for rep in range(args.seeds):
        seed = Seed(args.seed, f"rep/{rep}")
        inst = sample_pspin(mixing, args.n, seed)
        traj = iamp.run_iamp(inst, control, seed=rep + 1)
        m = traj.final_m
        if flavor == "cube":
            sigma = iamp.round_to_cube(iamp.clip_magnetization(m))
        else:
            sigma = iamp.round_to_sphere(m)
        from .hamiltonian import energy_density

        rounded = energy_density(inst, sigma)
        metrics.append({
            "energy_m": traj.energies[-1],
            "energy_rounded": rounded,
            "rounding_loss": rounded - traj.energies[-1],
            "final_norm_sq": float(m @ m) / args.n,
            "max_ortho": float(np.max(np.abs(traj.increment_orthos))),
            "flagged": float(traj.flagged),
        })
        if trajectory_csv is None:
            trajectory_csv = traj.to_csv()
    report = write_report(config, metrics, {"trajectory.csv": trajectory_csv or ""}, started)
    print_aggregate(report)
    return 0


def cmd_spiked(args) -> int:
    config = ExperimentConfig(
        subcommand="spiked", seed=args.seed,
        params={"lambda_grid": args.lambda_grid, "prior": args.prior, "n": args.n,
                "steps": args.steps},
        repetitions=1, out=args.out,
    )
    started = time.time()
    prior = parse_prior(args.prior)
    lams = parse_float_list(args.lambda_grid)
    metrics = []
    for lam in lams:
        row = {"lambda": lam}
        ga = spiked.gamma_alg(prior, lam)
        row["gamma_alg"] = ga
        row["rho_alg"] = spiked.rho_from_gamma(ga)
        if lam > 0:
            gb = spiked.gamma_bayes(prior, lam)
            row["gamma_bayes"] = gb
            row["rho_bayes"] = spiked.rho_from_gamma(gb)
        if args.n:
            inst = sample_spiked(args.n, lam, prior, Seed(args.seed, f"spiked/{lam}"))
            res = spiked.run_bayes_amp(inst, args.steps, seed=args.seed)
            row["overlap"] = float(res.overlaps[-1])
        metrics.append(row)
    extra = {"thresholds.csv": spiked.threshold_table_csv(prior, lams)}
    report = write_report(config, metrics, extra, started)
    print_aggregate(report)
    return 0


def cmd_amp_se(args) -> int:
    config = ExperimentConfig(
        subcommand="amp_se", seed=args.seed,
        params={"schedule": args.schedule, "n": args.n, "steps": args.steps},
        repetitions=args.seeds, out=args.out,
    )
    started = time.time()
    if args.schedule == "tanh":
        schedule = amp.tanh_schedule(args.steps)
    elif args.schedule == "identity":
        schedule = amp.identity_schedule(args.steps)
    else:
        raise argparse.ArgumentTypeError(f"unknown schedule {args.schedule!r}")
    se = amp.state_evolution(
        schedule,
        lambda ns, rng: (rng.standard_normal(ns), np.zeros(ns)),
        args.steps, mc_samples=200_000, seed=args.seed,
    )
    metrics = []
    report_csv = None
    for rep in range(args.seeds):
        seed = Seed(args.seed, f"rep/{rep}")
        a = sample_goe(args.n, seed)
        x0 = seed.child("x0").rng().standard_normal(args.n)
        traj = amp.amp_run(a, schedule, x0)
        cmp = amp.se_compare(traj, se)
        metrics.append({"max_deviation": cmp["max_deviation"]})
        if report_csv is None:
            report_csv = amp.report_to_csv(cmp)
    report = write_report(config, metrics, {"se_compare.csv": report_csv or ""}, started)
    print_aggregate(report)
    return 0


def cmd_bp(args) -> int:
    config = ExperimentConfig(
        subcommand="bp", seed=args.seed,
        params={"model_file": args.model_file, "tree_n": args.tree_n,
                "alphabet": args.alphabet, "max_iters": args.max_iters,
                "tol": args.tol, "damping": args.damping},
        repetitions=1, out=args.out,
    )
    started = time.time()
    if args.model_file:
        with open(args.model_file) as fh:
            model = bp.read_model(fh.read())
    else:
        edges = sample_tree(args.tree_n, Seed(args.seed, "tree"))
        pots = sample_potentials(edges, args.alphabet, Seed(args.seed, "pots"))
        model = bp.GraphicalModel(num_vertices=args.tree_n, alphabet=args.alphabet,
                                  potentials=pots)
    messages, converged, iters = bp.run_bp(
        model, max_iters=args.max_iters, tol=args.tol, damping=args.damping
    )
    beliefs = bp.bp_marginals(model, messages)
    metrics = [{
        "converged": float(converged),
        "iterations": float(iters),
        "normalization_error": messages.max_normalization_error(),
    }]
    if model.alphabet ** model.num_vertices <= bp.EXACT_MAX_STATES and args.check_exact:
        exact = bp.exact_marginals(model)
        metrics[0]["max_marginal_error"] = float(np.max(np.abs(beliefs - exact)))
    extra = {"beliefs.csv": bp.beliefs_to_csv(beliefs), "model.txt": bp.write_model(model)}
    report = write_report(config, metrics, extra, started)
    print_aggregate(report)
    return 0


def cmd_oracle(args) -> int:
    config = ExperimentConfig(
        subcommand="oracle", seed=args.seed,
        params={"n": args.n, "beta": args.beta, "xi": args.xi, "matrix": args.matrix},
        repetitions=args.instances, out=args.out,
    )
    started = time.time()
    betas = parse_float_list(args.beta)
    metrics = []
    if args.matrix:
        # explicit symmetric matrix: rows separated by ';', entries by ','
        rows = [[float(v) for v in row.split(",")] for row in args.matrix.split(";")]
        a = np.array(rows)
        from .hamiltonian import brute_force_opt_quadratic

        opt, sigma = brute_force_opt_quadratic(a)
        metrics.append({"opt_quadratic": opt})
    else:
        mixing = parse_mixing(args.xi)
        for rep in range(args.instances):
            inst = sample_pspin(mixing, args.n, Seed(args.seed, f"rep/{rep}"))
            opt, _ = brute_force_opt(inst)
            row = {"opt": opt}
            for beta in betas:
                phi = free_energy(inst, beta)
                row[f"free_energy_beta_{beta:g}"] = phi
                row[f"sandwich_gap_beta_{beta:g}"] = phi / beta - opt
            metrics.append(row)
    report = write_report(config, metrics, {}, started)
    print_aggregate(report)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinglass",
        description="Seeded batch experiments for the mean-field spin glass toolkit.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap (default: SPINGLASS_THREADS or library default)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("parisi", help="minimize the variational functional")
    p.add_argument("--xi", default="0.5:2", help="mixing, coeff:degree pairs")
    p.add_argument("--boundary", choices=["ising", "spherical"], default="ising")
    p.add_argument("--rsb", type=int, default=3, help="number of profile levels K")
    p.add_argument("--grid", type=int, default=2048, help="space grid nodes")
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--dump-grid", action="store_true")
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_parisi)

    p = sub.add_parser("iamp", help="incremental-AMP optimization runs")
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--delta", type=float, default=1.0 / 40)
    p.add_argument("--control", choices=["spherical", "parisi"], default="spherical")
    p.add_argument("--xi", default="0.5:2")
    p.add_argument("--rsb", type=int, default=3)
    p.add_argument("--seeds", type=int, default=1, help="independent repetitions")
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_iamp)

    p = sub.add_parser("spiked", help="thresholds and Bayes-AMP overlaps")
    p.add_argument("--lambda-grid", default="0.5,1.0,1.5,2.0")
    p.add_argument("--prior", default="rademacher",
                   help="rademacher | gaussian | sparse:eps | twopoint:a:b:p")
    p.add_argument("--n", type=int, default=0, help="matrix size for AMP runs (0 = scalar only)")
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spiked)

    p = sub.add_parser("amp-se", help="AMP empirics vs state evolution")
    p.add_argument("--schedule", default="tanh", help="tanh | identity")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_amp_se)

    p = sub.add_parser("bp", help="belief propagation on a model file or random tree")
    p.add_argument("--model-file", default=None)
    p.add_argument("--tree-n", type=int, default=10)
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--check-exact", action="store_true")
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bp)

    p = sub.add_parser("oracle", help="exhaustive ground state and free energy")
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--beta", default="1,2,4")
    p.add_argument("--xi", default="0.5:2")
    p.add_argument("--matrix", default=None,
                   help="explicit symmetric matrix, rows ';'-separated, entries ','-separated")
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads or os.environ.get("SPINGLASS_THREADS")
    try:
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(threads)):
                return args.func(args)
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except SpinGlassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
