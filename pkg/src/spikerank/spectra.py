"""Spiked populations, sampling, sample covariances and their spectra."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DomainError
from .linalg import symmetric_eigvals

NoiseKind = Literal["gaussian", "rademacher", "uniform"]
NOISE_KINDS: tuple[str, ...] = ("gaussian", "rademacher", "uniform")

SYMMETRY_RTOL = 1e-10
ZERO_CLAMP_RTOL = 1e-12


@dataclass(frozen=True)
class SpikedPopulation:
    """Diagonal population covariance ``Diag(spikes, 1, ..., 1)`` of dimension ``p``."""

    p: int
    spikes: tuple[float, ...]
    noise_level: float = field(default=1.0, init=False)

    def __post_init__(self) -> None:
        spikes = tuple(float(s) for s in self.spikes)
        object.__setattr__(self, "spikes", spikes)
        if not spikes:
            raise ValueError("a spiked population needs at least one spike")
        if len(spikes) >= self.p:
            raise ValueError(f"number of spikes {len(spikes)} must be below p={self.p}")
        if any(s <= self.noise_level for s in spikes):
            raise ValueError(f"every spike must exceed the noise level 1, got {spikes}")
        if any(a < b for a, b in zip(spikes, spikes[1:])):
            raise ValueError("spikes must be sorted in nonincreasing order")

    @property
    def k(self) -> int:
        return len(self.spikes)

    @property
    def snr(self) -> float:
        return self.spikes[-1] - 1.0

    def variances(self) -> np.ndarray:
        out = np.ones(self.p)
        out[: self.k] = self.spikes
        return out


@dataclass(frozen=True, eq=False)
class SampleSpectrum:
    """Sample eigenvalues ``d_1 >= ... >= d_p >= 0`` and the sample size they came from."""

    eigenvalues: np.ndarray
    n: int | None = None

    def __post_init__(self) -> None:
        d = np.array(self.eigenvalues, dtype=float)
        if d.ndim != 1 or d.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-d sequence")
        if np.any(np.diff(d) > 0):
            raise ValueError("eigenvalues must be sorted in nonincreasing order")
        if d[-1] < 0:
            raise ValueError("eigenvalues must be nonnegative")
        if self.n is not None and self.n < 1:
            raise ValueError(f"sample size must be positive, got {self.n}")
        d.setflags(write=False)
        object.__setattr__(self, "eigenvalues", d)

    @property
    def p(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def c(self) -> float:
        return self.p / self.sample_size

    @property
    def sample_size(self) -> int:
        if self.n is None:
            raise ValueError("spectrum has no sample size attached")
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleSpectrum):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.eigenvalues, other.eigenvalues)

    def __len__(self) -> int:
        return self.p


def _generator(seed: int | Sequence[int]) -> np.random.Generator:
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def standardized_noise(
    n: int, p: int, kind: NoiseKind = "gaussian", seed: int | Sequence[int] = 0
) -> np.ndarray:
    """``n x p`` i.i.d. entries with mean 0 and variance 1."""
    rng = _generator(seed)
    if kind == "gaussian":
        return rng.standard_normal((n, p))
    if kind == "rademacher":
        return np.where(rng.random((n, p)) < 0.5, -1.0, 1.0)
    if kind == "uniform":
        r3 = math.sqrt(3.0)
        return rng.uniform(-r3, r3, size=(n, p))
    raise ValueError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")


def sample_population(
    pop: SpikedPopulation,
    n: int,
    kind: NoiseKind = "gaussian",
    seed: int | Sequence[int] = 0,
) -> np.ndarray:
    """Draw ``n`` rows ``Sigma^{1/2} z``.

    The result is a pure function of the arguments.  ``seed`` may be an int or
    a sequence of ints (e.g. ``(master_seed, replication)``) which keys an
    independent counter-based stream.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    z = standardized_noise(n, pop.p, kind, seed)
    return z * np.sqrt(pop.variances())


def sample_covariance(x: np.ndarray, center: bool = False) -> np.ndarray:
    """``X^T X / n``, or the unbiased centred covariance when ``center`` is set."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"expected an n x p data matrix with n >= 1, got shape {x.shape}")
    n = x.shape[0]
    if center:
        if n < 2:
            raise ValueError("centring needs at least two samples")
        x = x - x.mean(axis=0)
        s = x.T @ x / (n - 1)
    else:
        s = x.T @ x / n
    return 0.5 * (s + s.T)


def eigvals_sym(
    s: np.ndarray, n: int | None = None, backend: Literal["householder", "lapack"] = "householder"
) -> SampleSpectrum:
    """Eigenvalues of a symmetric positive semidefinite matrix, sorted descending.

    ``backend="householder"`` uses the package's own tridiagonal QL solver;
    ``"lapack"`` delegates to :func:`numpy.linalg.eigvalsh` and is used for
    bulk Monte Carlo work.  Eigenvalues smaller in magnitude than
    ``1e-12 * d_1`` are set to zero; larger negative values raise
    :class:`ConvergenceError`.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("matrix has non-finite entries")
    scale = float(np.max(np.abs(s))) if s.size else 0.0
    if s.size and float(np.max(np.abs(s - s.T))) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    if backend == "householder":
        d = symmetric_eigvals(s)
    elif backend == "lapack":
        try:
            d = np.linalg.eigvalsh(s)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(str(exc)) from exc
    else:
        raise ValueError(f"unknown eigensolver backend {backend!r}")
    d = np.sort(d, kind="stable")[::-1]
    top = max(float(d[0]), 0.0)
    d[np.abs(d) < ZERO_CLAMP_RTOL * top] = 0.0
    if d[-1] < 0:
        raise ConvergenceError(
            f"eigenvalue {d[-1]:.3e} is negative beyond round-off; input is not PSD"
        )
    return SampleSpectrum(d, n)


def spectrum_of(x: np.ndarray, center: bool = False, backend="householder") -> SampleSpectrum:
    """Sample spectrum of a data matrix: covariance then eigenvalues."""
    x = np.asarray(x, dtype=float)
    return eigvals_sym(sample_covariance(x, center=center), n=x.shape[0], backend=backend)


def leading_eigenvalues(x: np.ndarray, count: int = 1) -> np.ndarray:
    """Largest ``count`` eigenvalues of ``X^T X / n`` in descending order.

    Small problems use a dense solve; large ones use deterministic Lanczos
    iterations on ``v -> X^T (X v) / n`` without forming the covariance.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if min(n, p) <= 600 or count >= min(n, p) - 1:
        gram = x @ x.T / n if n < p else x.T @ x / n
        return np.linalg.eigvalsh(gram)[::-1][:count].copy()
    op = spla.LinearOperator(
        (p, p), matvec=lambda v: x.T @ (x @ v) / n, dtype=float
    )
    vals = spla.eigsh(op, k=count, which="LA", v0=np.ones(p), tol=0, return_eigenvectors=False)
    return np.sort(vals)[::-1]


def dbar(spec: SampleSpectrum, kprime: int) -> float:
    """Mean of the trailing eigenvalues ``d_{k'+1}, ..., d_p``."""
    p = spec.p
    if not 0 <= kprime < p:
        raise IndexError(f"kprime={kprime} outside [0, {p})")
    return math.fsum(spec.eigenvalues[kprime:]) / (p - kprime)


def snr_fixed_p(delta: float, p: int, k: int, n: int) -> float:
    """Design SNR ``2 delta ((p - k/2 + 1/2) log log n / n)^{1/2}`` for small-p studies."""
    if n < 2 or math.log(math.log(n)) <= 0:
        raise DomainError(f"log log n must be positive, got n={n}")
    if k > p:
        raise ValueError(f"k={k} exceeds p={p}")
    return 2.0 * delta * math.sqrt((p - k / 2 + 0.5) * math.log(math.log(n)) / n)


def build_population(p: int, k: int, snr: float) -> SpikedPopulation:
    """Population with ``k - 1`` spikes at ``1 + 2 snr`` and the smallest at ``1 + snr``."""
    if not snr > 0:
        raise DomainError(f"SNR must be positive, got {snr}")
    if not 1 <= k < p:
        raise ValueError(f"need 1 <= k < p, got k={k}, p={p}")
    return SpikedPopulation(p, (1.0 + 2.0 * snr,) * (k - 1) + (1.0 + snr,))


# -- files ------------------------------------------------------------------


def read_data_csv(path: str | Path) -> np.ndarray:
    """Headerless CSV, one sample per row."""
    x = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{path}: data contain non-finite values")
    return x


def write_data_csv(path: str | Path, x: np.ndarray) -> None:
    np.savetxt(path, np.asarray(x, dtype=float), delimiter=",", fmt="%.17g")


def write_spectrum_csv(path: str | Path, spec: SampleSpectrum) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"n={spec.sample_size}\n")
        fh.write(f"p={spec.p}\n")
        for v in spec.eigenvalues:
            fh.write(f"{float(v)!r}\n")


def read_spectrum_csv(path: str | Path) -> SampleSpectrum:
    """Single-column spectrum file with ``n=<n>`` and ``p=<p>`` header lines.

    Values are sorted descending on read, so files need not be ordered.
    """
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("n=") or not lines[1].startswith("p="):
        raise ValueError(f"{path}: expected 'n=<n>' and 'p=<p>' header lines")
    n = int(lines[0][2:])
    p = int(lines[1][2:])
    values = np.array([float(v.split(",")[0]) for v in lines[2:]])
    if values.size != p:
        raise ValueError(f"{path}: header says p={p} but found {values.size} values")
    return SampleSpectrum(np.sort(values, kind="stable")[::-1], n)
