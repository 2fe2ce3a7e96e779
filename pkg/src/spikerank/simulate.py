"""Deterministic Monte Carlo experiments for spike-count estimators and spike limit laws.

Replication ``r`` of an experiment with master seed ``s`` draws its data from
the stream keyed by ``(s, r)``, so reports do not depend on how replications
are scheduled across workers.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from .criteria import LARGE_P_KMAX, parse_criterion
from .errors import DomainError
from .specmath import MpParams, limit_variance, mp_cdf, psi
from .spectra import (
    NOISE_KINDS,
    SpikedPopulation,
    build_population,
    eigvals_sym,
    leading_eigenvalues,
    sample_covariance,
    sample_population,
    snr_fixed_p,
    standardized_noise,
)

DEFAULT_REPLICATIONS = 200

# Stream-key tags keep the verifiers' draws disjoint from table runs.
_THM2, _THM3, _THM4, _ESD = 2, 3, 4, 5


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: int
    k: int
    criteria: tuple[str, ...]
    snr: float | None = None
    delta: float | None = None
    noise: str = "gaussian"
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    k_max: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "criteria", tuple(self.criteria))
        if (self.snr is None) == (self.delta is None):
            raise ValueError("give exactly one of snr or delta")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 1 <= self.k < min(self.n, self.p):
            raise ValueError(f"need 1 <= k < min(n, p), got k={self.k}, n={self.n}, p={self.p}")
        if not self.criteria:
            raise ValueError("at least one criterion is required")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise!r}")
        for cid in self.criteria:
            parse_criterion(cid)

    @property
    def resolved_snr(self) -> float:
        if self.snr is not None:
            return float(self.snr)
        return snr_fixed_p(self.delta, self.p, self.k, self.n)

    @property
    def resolved_k_max(self) -> int:
        """Candidate grid bound: ``p - 1`` for delta designs, 15 otherwise, capped by ``min(n, p) - 1``."""
        if self.k_max is not None:
            return self.k_max
        cap = min(self.n, self.p) - 1
        if self.delta is not None:
            return min(self.p - 1, cap)
        if any(c == "bcf" for c in self.criteria):
            cap = min(cap, min(self.n - 2, self.p - 1) - 1)
        return min(LARGE_P_KMAX, cap)

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        known = {"n", "p", "k", "snr", "delta", "noise", "criteria", "replications", "seed", "k_max"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown configuration keys: {sorted(extra)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["criteria"] = list(self.criteria)
        return out


@dataclass(frozen=True)
class CriterionSummary:
    khats: tuple[int, ...]
    k: int

    @property
    def success_rate(self) -> float:
        return sum(1 for v in self.khats if v == self.k) / len(self.khats)

    @property
    def mean_khat(self) -> float:
        return sum(self.khats) / len(self.khats)


@dataclass(frozen=True)
class SimReport:
    config: SimConfig
    results: dict[str, CriterionSummary]

    def success_rate(self, criterion_id: str) -> float:
        return self.results[criterion_id].success_rate

    def mean_khat(self, criterion_id: str) -> float:
        return self.results[criterion_id].mean_khat


def _replicate(cfg: SimConfig, pop: SpikedPopulation, scorers, k_max: int, r: int) -> tuple[int, ...]:
    x = sample_population(pop, cfg.n, cfg.noise, seed=(cfg.seed, r))
    spec = eigvals_sym(sample_covariance(x), n=cfg.n, backend="lapack")
    out = []
    for cid, scorer in scorers:
        try:
            out.append(scorer(spec, k_max).k_hat)
        except DomainError as exc:
            raise DomainError(f"replication {r}, criterion {cid}: {exc}") from exc
    return tuple(out)


def run_sim(cfg: SimConfig, workers: int = 1) -> SimReport:
    """Run every replication of ``cfg`` and score all criteria on each shared spectrum.

    Any criterion failure aborts the run.  The report is identical for any
    ``workers`` value.
    """
    pop = build_population(cfg.p, cfg.k, cfg.resolved_snr)
    scorers = [(cid, parse_criterion(cid)) for cid in cfg.criteria]
    k_max = cfg.resolved_k_max

    def task(r: int) -> tuple[int, ...]:
        return _replicate(cfg, pop, scorers, k_max, r)

    reps = range(cfg.replications)
    if workers <= 1:
        rows = [task(r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, reps))
    results = {
        cid: CriterionSummary(tuple(row[j] for row in rows), cfg.k)
        for j, cid in enumerate(cfg.criteria)
    }
    return SimReport(cfg, results)


# -- configuration files ----------------------------------------------------

_SWEEPABLE = ("n", "p", "snr", "delta")


def expand_config(data: dict) -> list[SimConfig]:
    """Turn one JSON object into configs; list-valued ``n``, ``p``, ``snr``, ``delta`` are crossed."""
    axes = [(key, data[key]) for key in _SWEEPABLE if isinstance(data.get(key), list)]
    if not axes:
        return [SimConfig.from_dict(data)]
    out = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        item = dict(data)
        item.update({key: val for (key, _), val in zip(axes, combo)})
        out.append(SimConfig.from_dict(item))
    return out


def load_configs(path: str | Path) -> list[SimConfig]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    items = data if isinstance(data, list) else [data]
    return [cfg for item in items for cfg in expand_config(item)]


# -- tables -----------------------------------------------------------------

_SETTING_COLUMNS = ("n", "p", "k", "snr", "delta", "noise", "replications", "seed", "k_max")


def _setting_row(cfg: SimConfig) -> list[str]:
    return [
        str(cfg.n),
        str(cfg.p),
        str(cfg.k),
        repr(cfg.resolved_snr),
        "" if cfg.delta is None else repr(float(cfg.delta)),
        cfg.noise,
        str(cfg.replications),
        str(cfg.seed),
        str(cfg.resolved_k_max),
    ]


def emit_table(
    reports: SimReport | Sequence[SimReport],
    destination: TextIO | str | Path,
    full_precision: TextIO | str | Path | None = None,
) -> None:
    """Write one CSV row per report with a rate and mean-k-hat column per criterion.

    The main table rounds to 2 decimals.  ``full_precision`` (defaulting to
    ``<destination stem>.full.csv`` when ``destination`` is a path) gets exact
    values plus the per-replication ``k_hat`` lists, and parses back with
    :func:`read_table`.
    """
    if isinstance(reports, SimReport):
        reports = [reports]
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    criteria = reports[0].config.criteria
    if not criteria or any(r.config.criteria != criteria for r in reports):
        raise ValueError("all reports must share the same nonempty criteria list")
    if full_precision is None and isinstance(destination, (str, Path)):
        dest = Path(destination)
        full_precision = dest.with_name(dest.stem + ".full" + (dest.suffix or ".csv"))

    header = list(_SETTING_COLUMNS)
    for cid in criteria:
        header += [f"{cid}:success_rate", f"{cid}:mean_khat"]

    def rounded(rep: SimReport) -> list[str]:
        row = _setting_row(rep.config)
        row[3] = f"{rep.config.resolved_snr:.4g}"
        for cid in criteria:
            row += [f"{rep.success_rate(cid):.2f}", f"{rep.mean_khat(cid):.2f}"]
        return row

    def exact(rep: SimReport) -> list[str]:
        row = _setting_row(rep.config)
        for cid in criteria:
            row += [repr(rep.success_rate(cid)), repr(rep.mean_khat(cid))]
        return row

    _write_csv(destination, header, [rounded(r) for r in reports])
    if full_precision is not None:
        full_header = header + ["criteria", "snr_spec", "k_max_spec"]
        full_header += [f"{cid}:khats" for cid in criteria]
        rows = []
        for rep in reports:
            cfg = rep.config
            spec = "delta" if cfg.delta is not None else "snr"
            kmax_spec = "" if cfg.k_max is None else str(cfg.k_max)
            row = exact(rep) + [";".join(criteria), spec, kmax_spec]
            row += [" ".join(str(v) for v in rep.results[cid].khats) for cid in criteria]
            rows.append(row)
        _write_csv(full_precision, full_header, rows)


def _write_csv(destination, header: list[str], rows: Iterable[list[str]]) -> None:
    if isinstance(destination, (str, Path)):
        with open(destination, "w", newline="", encoding="utf-8") as fh:
            _write_csv(fh, header, rows)
        return
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def read_table(source: TextIO | str | Path) -> list[SimReport]:
    """Parse a full-precision companion file back into reports."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_table(fh)
    out = []
    for row in csv.DictReader(source):
        criteria = tuple(row["criteria"].split(";"))
        spec_key = row["snr_spec"]
        cfg = SimConfig(
            n=int(row["n"]),
            p=int(row["p"]),
            k=int(row["k"]),
            criteria=criteria,
            snr=float(row["snr"]) if spec_key == "snr" else None,
            delta=float(row["delta"]) if spec_key == "delta" else None,
            noise=row["noise"],
            replications=int(row["replications"]),
            seed=int(row["seed"]),
            k_max=int(row["k_max_spec"]) if row["k_max_spec"] else None,
        )
        results = {
            cid: CriterionSummary(tuple(int(v) for v in row[f"{cid}:khats"].split()), cfg.k)
            for cid in criteria
        }
        out.append(SimReport(cfg, results))
    return out


# -- limit-law checks -------------------------------------------------------


def _pass_thm2(s: dict, t: dict) -> bool:
    return s["mean_abs_dev"] < t["mean_abs_dev"]


def _pass_thm3(s: dict, t: dict) -> bool:
    return t["slope_low"] <= s["slope"] <= t["slope_high"]


def _pass_thm4(s: dict, t: dict) -> bool:
    mean_ok = abs(s["mean"]) < t["mean_sigmas"] * math.sqrt(s["variance_theory"] / s["reps"])
    var_ok = abs(s["variance"] / s["variance_theory"] - 1.0) <= t["variance_rel"]
    return mean_ok and var_ok


def _pass_esd(s: dict, t: dict) -> bool:
    return s["sup_distance"] < t["sup_factor"] / math.sqrt(s["p"])


_PASS_RULES: dict[str, Callable[[dict, dict], bool]] = {
    "thm2": _pass_thm2,
    "thm3": _pass_thm3,
    "thm4": _pass_thm4,
    "esd": _pass_esd,
}


@dataclass(frozen=True, eq=False)
class LimitCheckReport:
    target: str
    statistics: np.ndarray
    summary: dict
    tolerance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return _PASS_RULES[self.target](self.summary, self.tolerance)

    def lines(self) -> list[str]:
        out = [f"target: {self.target}"]
        out += [f"{key}: {_fmt(val)}" for key, val in self.summary.items()]
        out += [f"tolerance {key}: {_fmt(val)}" for key, val in self.tolerance.items()]
        out.append(f"pass: {self.passed}")
        return out


def _fmt(val) -> str:
    if isinstance(val, float):
        return f"{val:.6g}"
    return str(val)


def _dims(c: float, n: int) -> int:
    p = int(round(c * n))
    if p < 2:
        raise ValueError(f"p = round(c n) = {p} is too small")
    return p


def _top_eigenvalues(
    lam: float, c: float, n: int, reps: int, seed: int, tag: int, noise: str = "gaussian"
) -> tuple[int, np.ndarray]:
    p = _dims(c, n)
    pop = SpikedPopulation(p, (lam,))
    tops = np.empty(reps)
    for r in range(reps):
        x = sample_population(pop, n, noise, seed=(seed, tag, n, r))
        tops[r] = leading_eigenvalues(x, 1)[0]
    return p, tops


def verify_limit_thm2(
    lam: float, mp_target: MpParams, n: int, reps: int = 50, seed: int = 0, tol: float = 0.05
) -> LimitCheckReport:
    """Check that the top sample eigenvalue tracks ``psi(lam)``: mean ``|d_1/psi - 1| < tol``."""
    target = psi(lam, mp_target)
    _, tops = _top_eigenvalues(lam, mp_target.c, n, reps, seed, _THM2)
    dev = np.abs(tops / target - 1.0)
    summary = {
        "lambda": lam,
        "c": mp_target.c,
        "n": n,
        "psi": target,
        "mean_ratio": float(np.mean(tops / target)),
        "mean_abs_dev": float(np.mean(dev)),
        "max_abs_dev": float(np.max(dev)),
    }
    return LimitCheckReport("thm2", tops / target, summary, {"mean_abs_dev": tol})


def verify_rate_thm3(
    lam: float, c: float, n_grid: Sequence[int], reps: int = 200, seed: int = 0
) -> LimitCheckReport:
    """Regress log RMSE of ``(d_1 - psi(lam)) / lam`` on log n; pass when the slope is in [-0.65, -0.35].

    ``slope_se`` is the Monte Carlo standard error of the slope, from the
    delta-method variance of each log RMSE.
    """
    if len(n_grid) < 4:
        raise ValueError("need at least four sample sizes")
    mp = MpParams(c)
    target = psi(lam, mp)
    log_n, log_rmse, var_log = [], [], []
    for n in n_grid:
        _, tops = _top_eigenvalues(lam, c, n, reps, seed, _THM3)
        sq = ((tops - target) / lam) ** 2
        mse = float(np.mean(sq))
        log_n.append(math.log(n))
        log_rmse.append(0.5 * math.log(mse))
        var_log.append(float(np.var(sq, ddof=1)) / (4.0 * reps * mse * mse))
    xs = np.array(log_n)
    xc = xs - xs.mean()
    weights = xc / np.dot(xc, xc)
    slope = float(np.dot(weights, log_rmse))
    slope_se = float(math.sqrt(np.dot(weights**2, var_log)))
    summary = {
        "lambda": lam,
        "c": c,
        "reps": reps,
        "n_grid": list(n_grid),
        "rmse": [math.exp(v) for v in log_rmse],
        "slope": slope,
        "slope_se": slope_se,
    }
    return LimitCheckReport(
        "thm3", np.exp(log_rmse), summary, {"slope_low": -0.65, "slope_high": -0.35}
    )


def verify_normality_thm4(
    lam: float, c: float, n: int, reps: int = 2000, seed: int = 0, noise: str = "gaussian"
) -> LimitCheckReport:
    """Compare ``sqrt(n)(d_1 - psi(lam)) / lam`` with ``N(0, 2 - 2c/(lam - 1)^2)``.

    Passes when the mean is within 3 standard errors of 0 and the variance is
    within 15% of the limit.
    """
    mp = MpParams(c)
    target = psi(lam, mp)
    theory = limit_variance(lam, mp)
    _, tops = _top_eigenvalues(lam, c, n, reps, seed, _THM4, noise)
    z = math.sqrt(n) * (tops - target) / lam
    summary = {
        "lambda": lam,
        "c": c,
        "n": n,
        "noise": noise,
        "reps": reps,
        "mean": float(np.mean(z)),
        "variance": float(np.var(z, ddof=1)),
        "variance_theory": theory,
    }
    return LimitCheckReport("thm4", z, summary, {"mean_sigmas": 3.0, "variance_rel": 0.15})


def empirical_cdf(eigenvalues: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Fraction of eigenvalues strictly below each grid point."""
    d = np.sort(np.asarray(eigenvalues))
    return np.searchsorted(d, grid, side="left") / d.size


def verify_esd(c: float, n: int, seed: int = 0, grid_size: int = 1000) -> LimitCheckReport:
    """Sup distance between the spike-free empirical spectral CDF and the Marchenko-Pastur CDF."""
    p = _dims(c, n)
    mp = MpParams(c)
    x = standardized_noise(n, p, "gaussian", seed=(seed, _ESD, n, p))
    spec = eigvals_sym(sample_covariance(x), n=n, backend="lapack")
    d = spec.eigenvalues
    lo = min(0.0, mp.a) - 0.05
    hi = mp.b + 0.5
    grid = np.linspace(lo, hi, grid_size)
    dist = float(np.max(np.abs(empirical_cdf(d, grid) - mp_cdf(grid, mp))))
    rank = min(n, p)
    summary = {
        "c": c,
        "n": n,
        "p": p,
        "sup_distance": dist,
        "d_min_nonzero": float(d[rank - 1]),
        "lower_edge": mp.a,
        "d_max": float(d[0]),
        "upper_edge": mp.b,
        "zero_count": int(np.count_nonzero(d == 0.0)),
    }
    return LimitCheckReport("esd", d, summary, {"sup_factor": 5.0})

