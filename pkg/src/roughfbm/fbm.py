"""Fractional Brownian motion: exact covariance formulas and grid sampling.

The covariance kernel is K(s, t) = (|t|^2H + |s|^2H - |t-s|^2H) / 2 for a
Hurst exponent H in (0, 1). Sampling on a uniform grid is exact in law:
circulant embedding of the stationary increment sequence (Davies-Harte,
O(n log n)) with a Cholesky fallback when the embedding is not positive
semidefinite. All randomness flows through an explicit integer seed fed to
``numpy.random.default_rng`` (PCG64); batches of replicates use derived
seeds ``base_seed + i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Embedding eigenvalues in [-EMBEDDING_CLIP * max_eig, 0] are clipped to 0;
# anything more negative triggers the Cholesky fallback.
EMBEDDING_CLIP = 1e-10


class SamplingError(RuntimeError):
    """Raised when neither circulant embedding nor Cholesky can sample."""


@dataclass(frozen=True)
class HurstParam:
    """Validated Hurst exponent, dimensionless, in the open interval (0, 1)."""

    h: float

    def __post_init__(self):
        if not 0.0 < self.h < 1.0:
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.h}")

    def in_rough_regime(self) -> bool:
        """True iff 1/3 < h <= 1/2, the regime the solver machinery targets."""
        return 1.0 / 3.0 < self.h <= 0.5


def as_hurst(h: HurstParam | float) -> HurstParam:
    return h if isinstance(h, HurstParam) else HurstParam(float(h))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of n subintervals on [t0, t1], points t_k = t0 + k*dt."""

    t0: float = 0.0
    t1: float = 1.0
    n: int = 1

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError(f"need t0 < t1, got [{self.t0}, {self.t1}]")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n}")

    @classmethod
    def unit(cls, n: int) -> "TimeGrid":
        """Grid on the default horizon [0, 1]."""
        return cls(0.0, 1.0, n)

    @property
    def n_points(self) -> int:
        return self.n + 1

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n + 1)


@dataclass(eq=False)
class SamplePath:
    """Scalar path sampled on a grid; seed records sampling provenance."""

    grid: TimeGrid
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid with "
                f"{self.grid.n_points} points"
            )


def covariance(h: HurstParam | float, s: float, t: float) -> float:
    """Exact fBm covariance K(s, t) = (t^2H + s^2H - |t-s|^2H) / 2, s,t >= 0."""
    hh = as_hurst(h).h
    if s < 0 or t < 0:
        raise ValueError(f"covariance requires nonnegative times, got ({s}, {t})")
    e = 2.0 * hh
    return 0.5 * (abs(t) ** e + abs(s) ** e - abs(t - s) ** e)


def increment_covariance(
    h: HurstParam | float,
    a: tuple[float, float],
    b: tuple[float, float],
) -> float:
    """Covariance of the path increments over intervals a and b.

    Computed by bilinearity from the kernel:
    E[(W_a1 - W_a0)(W_b1 - W_b0)] = K(a1,b1) - K(a1,b0) - K(a0,b1) + K(a0,b0).
    Degenerate (zero-length) intervals give 0. For h < 1/2 and disjoint
    intervals the value is nonpositive (negatively correlated increments).
    """
    a0, a1 = a
    b0, b1 = b
    if a0 > a1 or b0 > b1:
        raise ValueError(f"intervals must be ordered, got {a} and {b}")
    return (
        covariance(h, a1, b1)
        - covariance(h, a1, b0)
        - covariance(h, a0, b1)
        + covariance(h, a0, b0)
    )


def covariance_matrix(h: HurstParam | float, grid: TimeGrid) -> np.ndarray:
    """Kernel matrix M[i, j] = K(t_{i+1}, t_{j+1}) on the grid points past 0.

    The grid must start at 0 (the t=0 point is excluded since K(0, .) = 0).
    The result is symmetric and positive semidefinite up to tolerance.
    """
    hh = as_hurst(h).h
    if grid.t0 != 0.0:
        raise ValueError("covariance_matrix requires a grid starting at 0")
    t = grid.points[1:]
    e = 2.0 * hh
    return 0.5 * (t[:, None] ** e + t[None, :] ** e - np.abs(t[:, None] - t[None, :]) ** e)


def _fgn_autocovariance(hh: float, dt: float, n_lags: int) -> np.ndarray:
    """Autocovariance of fractional Gaussian noise increments at lags 0..n_lags."""
    k = np.arange(n_lags + 1, dtype=float)
    e = 2.0 * hh
    return 0.5 * dt**e * ((k + 1) ** e - 2 * k**e + np.abs(k - 1) ** e)


def _embedding_eigenvalues(hh: float, dt: float, n: int) -> np.ndarray:
    gamma = _fgn_autocovariance(hh, dt, n)
    c = np.concatenate([gamma, gamma[-2:0:-1]])  # length 2n, symmetric
    return np.fft.fft(c).real


def _sample_embedding(lam: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """One fGn vector of length n from clipped embedding eigenvalues lam (2n)."""
    m = 2 * n
    lam = np.clip(lam, 0.0, None)
    u = rng.standard_normal(n + 1)
    v = rng.standard_normal(max(n - 1, 0))
    a = np.zeros(m, dtype=complex)
    a[0] = np.sqrt(lam[0] / m) * u[0]
    a[n] = np.sqrt(lam[n] / m) * u[n]
    if n > 1:
        j = np.arange(1, n)
        half = np.sqrt(lam[j] / (2 * m))
        a[j] = half * (u[j] + 1j * v)
        a[m - j] = np.conj(a[j])
    return np.fft.fft(a).real[:n]


def _sample_cholesky(
    hh: float, grid: TimeGrid, rng: np.random.Generator
) -> np.ndarray:
    mat = covariance_matrix(hh, grid)
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * float(np.mean(np.diag(mat)))
        try:
            chol = np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise SamplingError(
                f"covariance matrix not positive definite (h={hh}, n={grid.n})"
            ) from exc
    return chol @ rng.standard_normal(grid.n)


def sample_fbm(
    h: HurstParam | float,
    grid: TimeGrid,
    seed: int,
    method: str = "auto",
) -> SamplePath:
    """Draw one exact fBm sample on a uniform grid starting at 0.

    Deterministic given (h, grid, seed). ``method`` is "auto" (circulant
    embedding with Cholesky fallback), "embedding", or "cholesky". The
    embedding route is used when its eigenvalues are nonnegative up to the
    clipping tolerance; both routes draw from a fresh generator seeded with
    ``seed``, so the selected route fully determines the output.
    """
    hh = as_hurst(h).h
    if grid.t0 != 0.0:
        raise ValueError("sample_fbm requires a grid starting at 0")
    if method not in ("auto", "embedding", "cholesky"):
        raise ValueError(f"unknown sampling method {method!r}")
    rng = np.random.default_rng(seed)
    n = grid.n

    use_embedding = method in ("auto", "embedding")
    if use_embedding:
        lam = _embedding_eigenvalues(hh, grid.dt, n)
        lam_ok = lam.min() >= -EMBEDDING_CLIP * lam.max()
        if not lam_ok:
            if method == "embedding":
                raise SamplingError(
                    f"circulant embedding not PSD for h={hh}, n={n} "
                    f"(min eigenvalue {lam.min():.3e})"
                )
            use_embedding = False

    if use_embedding:
        # embedding yields stationary increments; integrate from W_0 = 0
        fgn = _sample_embedding(lam, n, rng)
        tail = np.cumsum(fgn)
    else:
        # Cholesky factors the kernel matrix, yielding W at t_1..t_n directly
        tail = _sample_cholesky(hh, grid, rng)
    values = np.concatenate([[0.0], tail])
    return SamplePath(grid, values, seed)
