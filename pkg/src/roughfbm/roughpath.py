"""Rough paths over a grid: geometric lifts, the Chen consistency relation,
distances, homogeneous norms, and the non-linear scaling (x, xx) -> (λx, λ²xx).

Everything is scalar-valued: the second level of a geometric lift is fully
determined by xx_{s,t} = (x_t - x_s)^2 / 2, and the cross term in the Chen
relation is a plain product. The second level is stored densely as an
(n+1) x (n+1) array; experiment grids stay at or below 2^12 points so the
O(n^2) memory is accepted. Hoelder-type seminorms are evaluated on the grid
only, a lower bound for the continuum quantities. Values are immutable
after construction and safe to share across parallel replicate workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .fbm import SamplePath, TimeGrid
from .variation import GridFunction2D, holder_seminorm, holder_weight_matrix


@dataclass(eq=False)
class RoughPath:
    """First-level path plus two-parameter second level on a shared grid.

    ``alpha`` tags the Hoelder regularity regime, restricted to (1/3, 1/2].
    The diagonal of the second level must vanish; the Chen relation is an
    invariant of lifted paths checked by sampling (see ``max_chen_defect``),
    not enforced at construction so defective objects can be probed.
    """

    x: SamplePath
    xx: GridFunction2D
    alpha: float = 0.5

    def __post_init__(self):
        if not 1.0 / 3.0 < self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in (1/3, 1/2], got {self.alpha}")
        if self.xx.grid_s != self.x.grid or self.xx.grid_t != self.x.grid:
            raise ValueError("second level must live on the path grid")
        if np.any(np.diag(self.xx.values) != 0.0):
            raise ValueError("second level must vanish on the diagonal")

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid


def lift_geometric(x: SamplePath, alpha: float = 0.5) -> RoughPath:
    """Canonical geometric lift xx_{s,t} = (x_t - x_s)^2 / 2 for all pairs.

    Satisfies the Chen relation exactly in exact arithmetic; in floats the
    defect stays at rounding level.
    """
    v = x.values
    xx = 0.5 * (v[None, :] - v[:, None]) ** 2
    np.fill_diagonal(xx, 0.0)
    return RoughPath(x, GridFunction2D(x.grid, x.grid, xx), alpha)


def chen_defect(rp: RoughPath, s: int, u: int, t: int) -> float:
    """xx_{s,t} - xx_{s,u} - xx_{u,t} - (x_u - x_s)(x_t - x_u); zero iff the
    Chen relation holds at the triple (s <= u <= t)."""
    if not s <= u <= t:
        raise ValueError(f"need s <= u <= t, got ({s}, {u}, {t})")
    xv = rp.x.values
    xxv = rp.xx.values
    return float(xxv[s, t] - xxv[s, u] - xxv[u, t] - (xv[u] - xv[s]) * (xv[t] - xv[u]))


def max_chen_defect(
    rp: RoughPath, n_triples: int = 1000, seed: int = 0, exhaustive: bool = False
) -> float:
    """Max |Chen defect| over grid triples s <= u <= t.

    Exhaustive scans all triples (O(n^3), keep n modest); otherwise a
    deterministic sample of ``n_triples`` random triples is used.
    """
    xv = rp.x.values
    xxv = rp.xx.values
    n = rp.grid.n
    if exhaustive:
        worst = 0.0
        for u in range(n + 1):
            block = (
                xxv[: u + 1, u:]
                - xxv[: u + 1, u][:, None]
                - xxv[u, u:][None, :]
                - np.outer(xv[u] - xv[: u + 1], xv[u:] - xv[u])
            )
            worst = max(worst, float(np.abs(block).max()))
        return worst
    rng = np.random.default_rng(seed)
    triples = np.sort(rng.integers(0, n + 1, size=(n_triples, 3)), axis=1)
    s, u, t = triples[:, 0], triples[:, 1], triples[:, 2]
    defect = xxv[s, t] - xxv[s, u] - xxv[u, t] - (xv[u] - xv[s]) * (xv[t] - xv[u])
    return float(np.abs(defect).max())


def scale(rp: RoughPath, lam: float) -> RoughPath:
    """Dilation (x, xx) -> (λx, λ²xx), the scaling that preserves Chen."""
    x = SamplePath(rp.grid, lam * rp.x.values, rp.x.seed)
    xx = GridFunction2D(rp.grid, rp.grid, lam * lam * rp.xx.values)
    return RoughPath(x, xx, rp.alpha)


def two_parameter_seminorm(g: GridFunction2D, exponent: float) -> float:
    """sup over grid pairs s != t of |g(s, t)| / |t - s|^exponent."""
    if g.grid_s != g.grid_t:
        raise ValueError("two-parameter seminorm requires a square grid")
    w = holder_weight_matrix(g.grid_s, exponent)
    return float((np.abs(g.values) * w).max())


def rough_distance(a: RoughPath, b: RoughPath, alpha: float) -> float:
    """Inhomogeneous rough-path distance at exponent alpha on a shared grid:
    alpha-Hoelder seminorm of x_a - x_b plus the 2*alpha two-parameter
    seminorm of xx_a - xx_b."""
    if a.grid != b.grid:
        raise ValueError("rough_distance requires a shared grid")
    diff = SamplePath(a.grid, a.x.values - b.x.values)
    first = holder_seminorm(diff, alpha)
    second = two_parameter_seminorm(
        GridFunction2D(a.grid, a.grid, a.xx.values - b.xx.values), 2 * alpha
    )
    return first + second


def homogeneous_norm(rp: RoughPath, alpha: float) -> float:
    """Scaling-homogeneous size: ||x||_alpha + sqrt(2*alpha seminorm of xx).

    Homogeneous under dilation: the value for (λx, λ²xx) is |λ| times the
    value for (x, xx).
    """
    first = holder_seminorm(rp.x, alpha)
    second = two_parameter_seminorm(rp.xx, 2 * alpha)
    return first + float(np.sqrt(second))


def write_roughpath_csv(rp: RoughPath, path: str, header_lines: list[str] | None = None) -> None:
    """Serialize a rough path to columnar CSV: level, s_index, t_index, value.

    Level-1 rows carry the path values with s_index == t_index == k; level-2
    rows enumerate all (s, t) pairs. Grid metadata rides in comment lines.
    """
    grid = rp.grid
    with open(path, "w", newline="") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        fh.write(
            f"# grid_t0={grid.t0!r} grid_t1={grid.t1!r} grid_n={grid.n} "
            f"alpha={rp.alpha!r} seed={rp.x.seed}\n"
        )
        fh.write("level,s_index,t_index,value\n")
        for k, val in enumerate(rp.x.values):
            fh.write(f"1,{k},{k},{val!r}\n")
        xxv = rp.xx.values
        for i in range(grid.n_points):
            for j in range(grid.n_points):
                fh.write(f"2,{i},{j},{xxv[i, j]!r}\n")


def read_roughpath_csv(path: str) -> RoughPath:
    """Rebuild a rough path from the columnar CSV format."""
    meta: dict[str, str] = {}
    rows: list[tuple[int, int, int, float]] = []
    with open(path, newline="") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, _, val = token.partition("=")
                        meta[key] = val
                continue
            if line.startswith("level,"):
                continue
            level, si, ti, val = next(csv.reader([line]))
            rows.append((int(level), int(si), int(ti), float(val)))
    grid = TimeGrid(float(meta["grid_t0"]), float(meta["grid_t1"]), int(meta["grid_n"]))
    seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
    xvals = np.zeros(grid.n_points)
    xxvals = np.zeros((grid.n_points, grid.n_points))
    for level, si, ti, val in rows:
        if level == 1:
            xvals[si] = val
        else:
            xxvals[si, ti] = val
    x = SamplePath(grid, xvals, seed)
    return RoughPath(x, GridFunction2D(grid, grid, xxvals), float(meta["alpha"]))
