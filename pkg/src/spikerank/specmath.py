"""Marchenko-Pastur law and the spike-location transforms built on it.

Integrals against the Marchenko-Pastur density are evaluated with the
substitution ``x = a + (b - a) sin^2(u / 2)``, ``u`` in ``[0, pi]``.  Under it
``sqrt((b - x)(x - a)) dx = h^2 sin^2(u) du`` with ``h = (b - a) / 2``, so the
square-root behaviour at both edges disappears and a fixed-order
Gauss-Legendre rule converges quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError

QUADRATURE_ORDER = 200

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(QUADRATURE_ORDER)


@dataclass(frozen=True)
class MpParams:
    """Aspect ratio ``c = p / n`` of a white-noise sample covariance."""

    c: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"aspect ratio c must be positive and finite, got {self.c}")

    @classmethod
    def from_dims(cls, n: int, p: int) -> MpParams:
        return cls(p / n)

    @property
    def a(self) -> float:
        """Lower edge of the support, ``(1 - sqrt(c))^2``."""
        return (1.0 - math.sqrt(self.c)) ** 2

    @property
    def b(self) -> float:
        """Upper edge of the support, ``(1 + sqrt(c))^2``."""
        return (1.0 + math.sqrt(self.c)) ** 2

    @property
    def threshold(self) -> float:
        """Phase-transition level ``1 + sqrt(c)`` for population spikes."""
        return 1.0 + math.sqrt(self.c)

    @property
    def half_width(self) -> float:
        return 2.0 * math.sqrt(self.c)


def _support_nodes(
    mp: MpParams, lower: float = 0.0, upper: float = math.pi
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on ``u in [lower, upper]``.

    Returns ``(x, b - x, w)`` where ``w`` already contains ``h^2 sin^2 u / (2 pi c)``
    times the quadrature weight, i.e. ``x f_c(x) dx`` per node.
    """
    half = 0.5 * (upper - lower)
    u = lower + half * (_GL_NODES + 1.0)
    h = mp.half_width
    s = np.sin(0.5 * u)
    x = mp.a + 2.0 * h * s * s
    co = np.cos(0.5 * u)
    b_minus_x = 2.0 * h * co * co
    w = half * _GL_WEIGHTS * (h * np.sin(u)) ** 2 / (2.0 * math.pi * mp.c)
    return x, b_minus_x, w


def _outside_nodes(d: float, mp: MpParams) -> tuple[np.ndarray, np.ndarray]:
    """Nodes for integrands with a pole at ``d > b``.

    Near ``u = pi`` the factor ``1 / (d - x)`` varies on a scale of
    ``sqrt((d - b) / h)``; that stretch gets its own panel when it is short.
    """
    width = math.sqrt((d - mp.b) / mp.half_width)
    edge = min(0.5 * math.pi, 40.0 * width)
    panels = [(0.0, math.pi - edge), (math.pi - edge, math.pi)]
    parts = [_support_nodes(mp, lo, hi) for lo, hi in panels]
    b_minus_x = np.concatenate([p[1] for p in parts])
    w = np.concatenate([p[2] for p in parts])
    return (d - mp.b) + b_minus_x, w


def mp_density(x, mp: MpParams):
    """Density of the continuous part of the Marchenko-Pastur law.

    Zero outside ``(a, b)``.  For ``c > 1`` the atom ``1 - 1/c`` at the origin
    is not part of the density; see :func:`mp_cdf`.
    """
    x = np.asarray(x, dtype=float)
    a, b = mp.a, mp.b
    inside = (x > a) & (x < b)
    safe = np.where(inside, x, 0.5 * (a + b))
    val = np.sqrt(np.maximum((b - safe) * (safe - a), 0.0)) / (2.0 * math.pi * mp.c * safe)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _continuous_mass(mp: MpParams, upper: float) -> float:
    x, _, w = _support_nodes(mp, 0.0, upper)
    return float(np.sum(w / x))


def mp_cdf(x, mp: MpParams):
    """Distribution function of the Marchenko-Pastur law, atom at 0 included."""
    x_arr = np.asarray(x, dtype=float)
    atom = max(0.0, 1.0 - 1.0 / mp.c)
    a, b, h = mp.a, mp.b, mp.half_width
    out = np.empty_like(x_arr)
    for idx, xv in np.ndenumerate(x_arr):
        if xv < 0:
            out[idx] = 0.0
        elif xv >= b:
            out[idx] = 1.0
        elif xv <= a:
            out[idx] = atom
        else:
            # x = a + 2h sin^2(u/2)  =>  u = 2 asin(sqrt((x - a) / (2h)))
            u_x = 2.0 * math.asin(math.sqrt(min(1.0, (xv - a) / (2.0 * h))))
            out[idx] = min(1.0, atom + _continuous_mass(mp, u_x))
    return float(out) if out.ndim == 0 else out


def _require_distant(lam: float, mp: MpParams) -> None:
    if not lam >= mp.threshold:
        raise DomainError(
            f"spike {lam} is not distant: need lambda >= 1 + sqrt(c) = {mp.threshold}"
        )


def psi(lam: float, mp: MpParams) -> float:
    """Almost-sure limit ``lam + c lam / (lam - 1)`` of a distant spike's sample eigenvalue."""
    _require_distant(lam, mp)
    return lam + mp.c * lam / (lam - 1.0)


def psi_inv(d: float, mp: MpParams) -> float:
    """Population spike whose sample eigenvalue limit is ``d``.

    Raises :class:`DomainError` below the edge ``(1 + sqrt(c))^2``.
    """
    if not d >= mp.b:
        raise DomainError(f"d={d} lies below the upper bulk edge (1 + sqrt(c))^2 = {mp.b}")
    t = d + 1.0 - mp.c
    disc = max(t * t - 4.0 * d, 0.0)
    return 0.5 * (t + math.sqrt(disc))


def _require_outside(d: float, mp: MpParams) -> None:
    if not d > mp.b:
        raise DomainError(f"d={d} must exceed the upper bulk edge b = {mp.b}")


def m1(d: float, mp: MpParams) -> float:
    r"""``\int x / (d - x) dF_c(x)`` for ``d > b``."""
    _require_outside(d, mp)
    gap, w = _outside_nodes(d, mp)
    return float(np.sum(w / gap))


def m2(d: float, mp: MpParams) -> float:
    r"""``\int x / (d - x)^2 dF_c(x)`` for ``d > b``; equals ``-m1'(d)``."""
    _require_outside(d, mp)
    gap, w = _outside_nodes(d, mp)
    return float(np.sum(w / (gap * gap)))


def varphi(mp: MpParams) -> float:
    """Lower bound on the large-p GIC multiplier, ``1/2 + 1/sqrt(c) - log(1 + sqrt(c)) / c``."""
    s = math.sqrt(mp.c)
    if s < 1e-4:
        # cancellation between 1/s and log1p(s)/s^2
        return 1.0 - s / 3.0 + s * s / 4.0 - s**3 / 5.0
    return 0.5 + 1.0 / s - math.log1p(s) / mp.c


def limit_variance(lam: float, mp: MpParams) -> float:
    """Variance ``2 - 2c / (lam - 1)^2`` of the Gaussian limit of ``sqrt(n)(d - psi(lam)) / lam``."""
    _require_distant(lam, mp)
    return max(0.0, 2.0 - 2.0 * mp.c / (lam - 1.0) ** 2)


class GapMargin(NamedTuple):
    aic_gap: float
    quasi_aic_gap: float
    kappa: float


def gap_margin(lambda_k: float, mp: MpParams) -> GapMargin:
    """Slack in the gap conditions for the smallest spike ``lambda_k``.

    ``aic_gap`` and ``quasi_aic_gap`` are positive exactly when the AIC-type
    (``c < 1``) and quasi-AIC (``c > 1``) gap conditions hold.  ``kappa`` is
    the largest multiplier allowed by the general gap condition; the GIC
    window ``varphi(c) < gamma <= kappa`` is nonempty iff ``kappa > varphi(c)``.
    """
    s = psi(lambda_k, mp)
    c = mp.c
    base = s - 1.0 - math.log(s)
    return GapMargin(
        aic_gap=base - 2.0 * c,
        quasi_aic_gap=s / c - 1.0 - math.log(s / c) - 2.0 / c,
        kappa=base / (2.0 * c),
    )
