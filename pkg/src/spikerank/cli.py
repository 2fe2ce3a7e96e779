"""Command-line interface.

Exit status: 0 on success, 1 when a verification fails, 2 on usage or domain errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Sequence

from . import criteria as crit
from . import simulate as sim
from .errors import ConvergenceError, DomainError
from .specmath import (
    GapMargin,
    MpParams,
    gap_margin,
    limit_variance,
    m1,
    m2,
    mp_cdf,
    mp_density,
    psi,
    psi_inv,
    varphi,
)
from .spectra import (
    SampleSpectrum,
    dbar,
    read_data_csv,
    read_spectrum_csv,
    spectrum_of,
    write_spectrum_csv,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

# Below this min(n, p) the fixed-p criterion is the default.
LARGE_P_THRESHOLD = 50


@dataclass
class Diagnostics:
    c: float
    varphi: float
    gamma: float | None = None
    spike_gaps: list[float] = field(default_factory=list)
    lambda_hat: float | None = None
    gap: GapMargin | None = None
    warnings: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"c = p/n = {self.c:.6g}", f"varphi(c) = {self.varphi:.6g}"]
        if self.gamma is not None:
            out.append(f"gamma = {self.gamma:.6g}")
        if self.spike_gaps:
            out.append("spike gaps d_i/dbar - 1: " + ", ".join(f"{g:.4g}" for g in self.spike_gaps))
        if self.lambda_hat is not None:
            out.append(f"lambda_hat_k = psi_inv(d_k_hat) = {self.lambda_hat:.6g}")
        if self.gap is not None:
            out.append(
                f"gap margins: aic {self.gap.aic_gap:.4g}, quasi-aic {self.gap.quasi_aic_gap:.4g}, "
                f"kappa {self.gap.kappa:.4g}"
            )
        out += [f"warning: {w}" for w in self.warnings]
        return out

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "varphi": self.varphi,
            "gamma": self.gamma,
            "spike_gaps": self.spike_gaps,
            "lambda_hat": self.lambda_hat,
            "gap": None if self.gap is None else self.gap._asdict(),
            "warnings": self.warnings,
        }


def report_diagnostics(spec: SampleSpectrum, k_hat: int, gamma: float | None = None) -> Diagnostics:
    """Phase-transition diagnostics for an estimated spike count.

    The smallest selected eigenvalue is mapped back to a population spike only
    when it clears the bulk edge ``(1 + sqrt(c))^2``; otherwise a warning is
    recorded.
    """
    mp = MpParams.from_dims(spec.sample_size, spec.p)
    diag = Diagnostics(c=mp.c, varphi=varphi(mp))
    if k_hat == 0:
        return diag
    diag.gamma = gamma if gamma is not None else crit.default_gamma(spec.sample_size, spec.p)
    d = spec.eigenvalues
    noise = dbar(spec, k_hat)
    if noise > 0:
        diag.spike_gaps = [float(v / noise - 1.0) for v in d[:k_hat]]
    d_k = float(d[k_hat - 1])
    if d_k > mp.b:
        diag.lambda_hat = psi_inv(d_k, mp)
        diag.gap = gap_margin(diag.lambda_hat, mp)
    else:
        diag.warnings.append(
            f"d_{k_hat} = {d_k:.6g} is not above the bulk edge (1 + sqrt(c))^2 = {mp.b:.6g}; "
            "no distant-spike preimage"
        )
    if d[0] <= mp.b:
        diag.warnings.append(
            f"largest eigenvalue {d[0]:.6g} is below the bulk edge {mp.b:.6g}"
        )
    return diag


# -- subcommands ------------------------------------------------------------


def _default_criterion(spec: SampleSpectrum) -> str:
    return "gic-large:auto" if min(spec.sample_size, spec.p) >= LARGE_P_THRESHOLD else "gic-fixed:ilp"


def cmd_estimate(args: argparse.Namespace) -> int:
    if args.spectrum:
        spec = read_spectrum_csv(args.spectrum)
    else:
        spec = spectrum_of(read_data_csv(args.data), center=args.center)
    if args.write_spectrum:
        write_spectrum_csv(args.write_spectrum, spec)
    ids = args.criteria or [_default_criterion(spec)]
    print(f"n = {spec.sample_size}, p = {spec.p}")
    results = []
    for cid in ids:
        res = crit.evaluate(cid, spec, args.k_max)
        results.append(res)
        print(f"{cid}: k_hat={res.k_hat}")
    first = results[0]
    diag = report_diagnostics(spec, first.k_hat, first.params.get("gamma"))
    for line in diag.lines():
        print("  " + line)
    if args.json:
        payload = {
            "n": spec.sample_size,
            "p": spec.p,
            "results": [
                {
                    "criterion": r.criterion_id,
                    "k_hat": r.k_hat,
                    "scores": [float(s) for s in r.scores],
                    "params": r.params,
                }
                for r in results
            ],
            "diagnostics": diag.to_dict(),
        }
        _dump_json(payload, args.json)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    configs = sim.load_configs(args.config)
    reports = []
    for cfg in configs:
        rep = sim.run_sim(cfg, workers=args.workers)
        reports.append(rep)
        cells = ", ".join(
            f"{cid} {rep.success_rate(cid):.2f}/{rep.mean_khat(cid):.2f}" for cid in cfg.criteria
        )
        print(f"n={cfg.n} p={cfg.p} k={cfg.k} snr={cfg.resolved_snr:.4g}: {cells}")
    if args.output:
        sim.emit_table(reports, args.output)
    else:
        sim.emit_table(reports, sys.stdout)
    return EXIT_OK


_MP_QUANTITIES = ("density", "cdf", "psi", "psi-inv", "m1", "m2", "varphi", "limit-variance", "gap")


def _need(args: argparse.Namespace, name: str) -> float:
    val = getattr(args, name)
    if val is None:
        raise _UsageError(f"mp-eval {args.quantity} needs --{name.replace('_', '-')}")
    return val


def cmd_mp_eval(args: argparse.Namespace) -> int:
    mp = MpParams(args.c)
    q = args.quantity
    if q == "density":
        print(repr(mp_density(_need(args, "x"), mp)))
    elif q == "cdf":
        print(repr(mp_cdf(_need(args, "x"), mp)))
    elif q == "psi":
        print(repr(psi(_need(args, "lam"), mp)))
    elif q == "psi-inv":
        print(repr(psi_inv(_need(args, "d"), mp)))
    elif q == "m1":
        print(repr(m1(_need(args, "d"), mp)))
    elif q == "m2":
        print(repr(m2(_need(args, "d"), mp)))
    elif q == "varphi":
        print(repr(varphi(mp)))
    elif q == "limit-variance":
        print(repr(limit_variance(_need(args, "lam"), mp)))
    elif q == "gap":
        g = gap_margin(_need(args, "lam"), mp)
        print(f"aic_gap={g.aic_gap!r}")
        print(f"quasi_aic_gap={g.quasi_aic_gap!r}")
        print(f"kappa={g.kappa!r}")
        print(f"varphi={varphi(mp)!r}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    t = args.target
    if t == "thm2":
        rep = sim.verify_limit_thm2(args.lam, MpParams(args.c), args.n, args.reps or 50, args.seed)
    elif t == "thm3":
        grid = [int(v) for v in args.n_grid.split(",")]
        rep = sim.verify_rate_thm3(args.lam, args.c, grid, args.reps or 200, args.seed)
    elif t == "thm4":
        rep = sim.verify_normality_thm4(
            args.lam, args.c, args.n, args.reps or 2000, args.seed, args.noise
        )
    else:
        rep = sim.verify_esd(args.c, args.n, args.seed)
    for line in rep.lines():
        print(line)
    if args.json:
        _dump_json(
            {"target": rep.target, "summary": rep.summary, "tolerance": rep.tolerance, "pass": rep.passed},
            args.json,
        )
    return EXIT_OK if rep.passed else EXIT_FAILED


def _dump_json(payload: dict, path: str) -> None:
    text = json.dumps(payload, indent=2, default=_json_default)
    if path == "-":
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- parser -----------------------------------------------------------------


class _UsageError(Exception):
    pass


def _criteria_list(text: str) -> list[str]:
    ids = [s.strip() for s in text.split(",") if s.strip()]
    for cid in ids:
        try:
            crit.parse_criterion(cid)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return ids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikerank", description="Estimate and study the number of spiked covariance eigenvalues."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate the spike count from data or a spectrum")
    src = est.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="headerless CSV, rows are samples")
    src.add_argument("--spectrum", help="spectrum file with n=/p= header lines")
    est.add_argument("--criteria", type=_criteria_list, help="comma-separated criterion ids")
    est.add_argument("--k-max", type=int, help="largest candidate spike count")
    est.add_argument("--center", action="store_true", help="subtract column means, divide by n-1")
    est.add_argument("--write-spectrum", metavar="PATH", help="save the computed spectrum")
    est.add_argument("--json", metavar="PATH", help="write results as JSON ('-' for stdout)")
    est.set_defaults(func=cmd_estimate)

    smp = sub.add_parser("simulate", help="run Monte Carlo experiments from a JSON config")
    smp.add_argument("--config", required=True)
    smp.add_argument("--output", help="CSV path; a .full.csv companion is written next to it")
    smp.add_argument("--workers", type=int, default=1)
    smp.set_defaults(func=cmd_simulate)

    mpe = sub.add_parser("mp-eval", help="evaluate Marchenko-Pastur quantities")
    mpe.add_argument("quantity", choices=_MP_QUANTITIES)
    mpe.add_argument("--c", type=float, required=True, help="aspect ratio p/n")
    mpe.add_argument("--x", type=float)
    mpe.add_argument("--lambda", dest="lam", type=float)
    mpe.add_argument("--d", type=float)
    mpe.set_defaults(func=cmd_mp_eval)

    ver = sub.add_parser("verify", help="Monte Carlo checks of the spike limit laws")
    ver.add_argument("target", choices=("thm2", "thm3", "thm4", "esd"))
    ver.add_argument("--lambda", dest="lam", type=float, default=5.0)
    ver.add_argument("--c", type=float, default=0.5)
    ver.add_argument("--n", type=int, default=2000)
    ver.add_argument("--n-grid", default="500,1000,2000,4000")
    ver.add_argument("--reps", type=int)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--noise", choices=("gaussian", "rademacher", "uniform"), default="gaussian")
    ver.add_argument("--json", metavar="PATH")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"eigensolver error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
