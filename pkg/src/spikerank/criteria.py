"""Rank-selection criteria for the number of spikes.

Every criterion scores each candidate ``k'`` in ``{0, ..., k_max}`` on one
sample spectrum and returns the minimiser; exact ties go to the smaller
``k'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .specmath import MpParams, varphi
from .spectra import SampleSpectrum, dbar

LARGE_P_KMAX = 15

_SCHEDULES = ("bic", "aic", "ilp", "ilp_half", "constant")


@dataclass(frozen=True)
class PenaltySchedule:
    """Penalty multiplier ``C_n`` of the fixed-p GIC."""

    kind: str
    constant: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _SCHEDULES:
            raise ValueError(f"unknown penalty schedule {self.kind!r}")
        if self.kind == "constant":
            if self.constant is None or not self.constant > 0:
                raise ValueError("constant schedule needs a positive constant")

    def value(self, n: int) -> float:
        if self.kind == "aic":
            return 1.0
        if self.kind == "constant":
            return float(self.constant)
        if self.kind == "bic":
            return math.log(n) / 2.0
        if n < 3 or math.log(math.log(n)) <= 0:
            raise DomainError(f"iterated-log penalty needs log log n > 0, got n={n}")
        lln = math.log(math.log(n))
        return lln if self.kind == "ilp" else math.sqrt(lln)

    @property
    def label(self) -> str:
        if self.kind == "constant":
            return f"const:{self.constant:g}"
        return self.kind.replace("_", "-")


@dataclass(frozen=True, eq=False)
class CriterionResult:
    criterion_id: str
    scores: np.ndarray  # scores[k'] for k' = 0..k_max
    k_hat: int
    params: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return self.scores.size - 1

    def table(self) -> list[tuple[int, float]]:
        return [(k, float(s)) for k, s in enumerate(self.scores)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CriterionResult):
            return NotImplemented
        return (
            self.criterion_id == other.criterion_id
            and self.k_hat == other.k_hat
            and self.params == other.params
            and np.array_equal(self.scores, other.scores)
        )


def _finish(criterion_id: str, scores, params: dict) -> CriterionResult:
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        raise DomainError(f"{criterion_id}: non-finite score on the candidate grid")
    scores.setflags(write=False)
    # np.argmin returns the first minimiser, i.e. the smallest k'
    return CriterionResult(criterion_id, scores, int(np.argmin(scores)), params)


def _check_kmax(k_max: int, bound: int, what: str) -> None:
    if not 0 <= k_max < bound:
        raise ValueError(f"k_max={k_max} must satisfy 0 <= k_max < {what} = {bound}")


def _log_head(d: np.ndarray, kprime: int) -> float:
    if kprime and d[kprime - 1] <= 0:
        raise DomainError(f"d_{kprime} = {d[kprime - 1]} is not positive; k'={kprime} beyond numerical rank")
    return math.fsum(np.log(d[:kprime]))


def penalty_dim(kprime: int, p: int) -> float:
    """Free-parameter count ``k'(p - k'/2 + 1/2)`` of the ``k'``-spike model."""
    return kprime * (p - kprime / 2.0 + 0.5)


def loglik(spec: SampleSpectrum, kprime: int) -> float:
    """Profile log-likelihood of the ``k'``-spike model.

    Any ``0 <= k' < p`` is accepted; a ``k'`` at or beyond the numerical rank
    surfaces as a :class:`DomainError` from a non-positive log argument.
    """
    n, p = spec.sample_size, spec.p
    if not 0 <= kprime < p:
        raise ValueError(f"kprime={kprime} outside [0, {p})")
    d = spec.eigenvalues
    head = _log_head(d, kprime)
    tail = dbar(spec, kprime)
    if tail <= 0:
        raise DomainError(f"trailing mean d-bar_{kprime + 1} = {tail} is not positive")
    return -0.5 * n * (head + (p - kprime) * math.log(tail))


def loglik_tilde(spec: SampleSpectrum, kprime: int) -> float:
    """Quadratic-expansion log-likelihood used by the fixed-p GIC."""
    n, p = spec.sample_size, spec.p
    if not 0 <= kprime < p:
        raise ValueError(f"kprime={kprime} outside [0, {p})")
    d = spec.eigenvalues
    head = _log_head(d, kprime)
    tail = math.fsum(d[kprime:]) - (p - kprime)
    return -0.5 * n * (head + tail)


def gic_fixed(
    spec: SampleSpectrum, pen: PenaltySchedule, k_max: int | None = None
) -> CriterionResult:
    """Fixed-p GIC: ``-log L~_{k'} + k'(p - k'/2 + 1/2) C_n``.

    ``pen=PenaltySchedule("bic")`` gives the BIC-type criterion and
    ``PenaltySchedule("ilp")`` the iterated-log penalty ``C_n = log log n``.
    The default grid is ``{0, ..., min(n, p) - 1}``.
    """
    n, p = spec.sample_size, spec.p
    if k_max is None:
        k_max = min(n, p) - 1
    _check_kmax(k_max, min(n, p), "min(n, p)")
    cn = pen.value(n)
    scores = [-loglik_tilde(spec, k) + penalty_dim(k, p) * cn for k in range(k_max + 1)]
    return _finish(
        f"gic-fixed:{pen.label}", scores, {"n": n, "p": p, "C_n": cn, "k_max": k_max}
    )


def _large_p_kmax(spec: SampleSpectrum, k_max: int | None) -> int:
    return min(LARGE_P_KMAX, min(spec.sample_size, spec.p) - 1) if k_max is None else k_max


def gic_large(
    spec: SampleSpectrum, gamma: float, k_max: int | None = None, criterion_id: str | None = None
) -> CriterionResult:
    """Large-p GIC with multiplier ``gamma``.

    Scores ``(n/2){sum_{i<=k'} log d_i + (p - k') log dbar_{k'+1}} + gamma k'(p - k'/2 + 1/2)``.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    n, p = spec.sample_size, spec.p
    k_max = _large_p_kmax(spec, k_max)
    _check_kmax(k_max, min(n, p), "min(n, p)")
    d = spec.eigenvalues
    if k_max and d[k_max - 1] <= 0:
        raise DomainError(f"d_{k_max} = {d[k_max - 1]} is not positive")
    logs = np.log(d[:k_max])
    scores = np.empty(k_max + 1)
    for k in range(k_max + 1):
        tail = math.fsum(d[k:]) / (p - k)
        if tail <= 0:
            raise DomainError(f"trailing mean d-bar_{k + 1} is not positive")
        lik = math.fsum(logs[:k]) + (p - k) * math.log(tail)
        scores[k] = 0.5 * n * lik + gamma * penalty_dim(k, p)
    cid = criterion_id or f"gic-large:{gamma:g}"
    return _finish(cid, scores, {"n": n, "p": p, "gamma": gamma, "k_max": k_max})


def aic(spec: SampleSpectrum, k_max: int | None = None) -> CriterionResult:
    """``-log L_{k'} + k'(p - k'/2 + 1/2)``."""
    n, p = spec.sample_size, spec.p
    k_max = _large_p_kmax(spec, k_max)
    scores = [-loglik(spec, k) + penalty_dim(k, p) for k in range(k_max + 1)]
    return _finish("aic", scores, {"n": n, "p": p, "gamma": 1.0, "k_max": k_max})


def bic(spec: SampleSpectrum, k_max: int | None = None) -> CriterionResult:
    """``-log L_{k'} + k'(p - k'/2 + 1/2) log(n) / 2``."""
    n, p = spec.sample_size, spec.p
    k_max = _large_p_kmax(spec, k_max)
    g = math.log(n) / 2.0
    scores = [-loglik(spec, k) + penalty_dim(k, p) * g for k in range(k_max + 1)]
    return _finish("bic", scores, {"n": n, "p": p, "gamma": g, "k_max": k_max})


def default_gamma(n: int, p: int) -> float:
    """Practical multiplier ``min(1.1 varphi(p/n), 1)``."""
    return min(1.1 * varphi(MpParams.from_dims(n, p)), 1.0)


def bcf(spec: SampleSpectrum, k_max: int | None = None) -> CriterionResult:
    """AIC-type estimator for ``p <= n`` and its quasi-AIC variant for ``p > n``.

    For ``p <= n``::

        l1(k') = -sum_{i>k'} log d_i + (p-k') log dbar_{k'+1} - (p-k'-1)(p-k'+2)/n

    For ``p > n`` only ``d_{k'+1}, ..., d_{n-1}`` enter::

        l2(k') = -sum_{i=k'+1}^{n-1} log d_i + (n-1-k') log dcheck_{k'+1} - (n-k'-2)(n-k'+1)/p

    ``p == n`` uses ``l1``.
    """
    n, p = spec.sample_size, spec.p
    bound = min(n - 2, p - 1)
    if k_max is None:
        k_max = min(LARGE_P_KMAX, bound - 1)
    _check_kmax(k_max, bound, "min(n - 2, p - 1)")
    d = spec.eigenvalues
    if p <= n:
        m, denom, branch = p, n, "l1"
    else:
        m, denom, branch = n - 1, p, "l2"
    kept = d[:m]
    if kept[-1] <= 0:
        raise DomainError(f"d_{m} = {kept[-1]} is not positive; {branch} needs all logs finite")
    logs = np.log(kept)
    scores = np.empty(k_max + 1)
    for k in range(k_max + 1):
        r = m - k
        mean = math.fsum(kept[k:]) / r
        if branch == "l1":
            corr = (p - k - 1) * (p - k + 2) / denom
        else:
            corr = (n - k - 2) * (n - k + 1) / denom
        scores[k] = -math.fsum(logs[k:]) + r * math.log(mean) - corr
    return _finish("bcf", scores, {"n": n, "p": p, "branch": branch, "k_max": k_max})


# -- identifiers ------------------------------------------------------------

_FIXED_KINDS = {"bic": "bic", "aic": "aic", "ilp": "ilp", "ilp-half": "ilp_half"}


def parse_criterion(criterion_id: str) -> Callable[[SampleSpectrum, int | None], CriterionResult]:
    """Resolve a stable criterion identifier into a scoring function.

    Recognised: ``gic-fixed:{bic,aic,ilp,ilp-half,const:<C>}``,
    ``gic-large:<gamma>``, ``gic-large:auto``, ``bcf``, ``aic``, ``bic``.
    """
    head, _, rest = criterion_id.partition(":")
    if head == "gic-fixed":
        if rest in _FIXED_KINDS:
            pen = PenaltySchedule(_FIXED_KINDS[rest])
        elif rest.startswith("const:"):
            pen = PenaltySchedule("constant", _parse_positive(rest[6:], criterion_id))
        else:
            raise ValueError(f"unknown criterion {criterion_id!r}")

        def fixed(spec, k_max=None):
            res = gic_fixed(spec, pen, k_max)
            return CriterionResult(criterion_id, res.scores, res.k_hat, res.params)

        return fixed
    if head == "gic-large":
        if rest == "auto":
            return lambda spec, k_max=None: gic_large(
                spec, default_gamma(spec.sample_size, spec.p), k_max, criterion_id
            )
        gamma = _parse_positive(rest, criterion_id)
        return lambda spec, k_max=None: gic_large(spec, gamma, k_max, criterion_id)
    if criterion_id == "bcf":
        return bcf
    if criterion_id == "aic":
        return aic
    if criterion_id == "bic":
        return bic
    raise ValueError(f"unknown criterion {criterion_id!r}")


def _parse_positive(text: str, criterion_id: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ValueError(f"bad numeric parameter in criterion {criterion_id!r}") from None
    if not (math.isfinite(val) and val > 0):
        raise ValueError(f"criterion {criterion_id!r} needs a positive parameter")
    return val


def evaluate(criterion_id: str, spec: SampleSpectrum, k_max: int | None = None) -> CriterionResult:
    return parse_criterion(criterion_id)(spec, k_max)
