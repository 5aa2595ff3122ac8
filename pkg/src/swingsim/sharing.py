"""Cost-optimal power sharing among the inverters.

With quadratic injection cost ``C(Y) = 0.5 * sum(lam_i * Y_i**2)`` and the
steady-state constraint ``u_bar + sum(Y) - sum(delta_L) = 0`` the minimiser
is ``Y = (sum(delta_L) - u_bar) * xi_opt`` with ``xi_opt ~ 1/lam``.  A
grid-search oracle, independent of that closed form, is provided to check it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionTooLarge, NonpositiveCost, ValidationError, ZeroDenominator

RATIO_RTOL = 1e-9
MAX_ORACLE_DIM = 4


@dataclass(frozen=True)
class CostMatrix:
    """Diagonal of the cost matrix, one strictly positive entry per inverter."""
    lambda_diag: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in np.atleast_1d(self.lambda_diag))
        if not lam:
            raise NonpositiveCost("need at least one cost coefficient")
        if not all(math.isfinite(x) and x > 0 for x in lam):
            raise NonpositiveCost(f"cost coefficients must be finite and > 0, got {lam}")
        object.__setattr__(self, "lambda_diag", lam)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.lambda_diag)

    def cost(self, Upsilon) -> float:
        Upsilon = np.asarray(Upsilon, dtype=float)
        return 0.5 * float(np.dot(self.array * Upsilon, Upsilon))


def _costs(costs) -> CostMatrix:
    return costs if isinstance(costs, CostMatrix) else CostMatrix(tuple(costs))


@dataclass(frozen=True)
class OptimalDispatch:
    xi_opt: np.ndarray
    Upsilon_bar: np.ndarray
    mu: float
    cost: float


def optimal_sharing(costs) -> np.ndarray:
    inv = 1.0 / _costs(costs).array
    return inv / inv.sum()


def optimal_injection(costs, u_bar: float, sum_delta: float) -> OptimalDispatch:
    lam = _costs(costs)
    inv_sum = float(np.sum(1.0 / lam.array))
    xi = optimal_sharing(lam)
    Y = (sum_delta - u_bar) * xi
    mu = (u_bar - sum_delta) / inv_sum
    return OptimalDispatch(xi, Y, mu, lam.cost(Y))


@dataclass(frozen=True)
class OracleResult(OptimalDispatch):
    resolution: float = 0.0
    grid_points: int = 0
    # guaranteed distance of the grid minimiser from the true one (2-norm)
    distance_bound: float = 0.0
    # guaranteed excess cost of the grid minimiser over the true minimum
    cost_bound: float = 0.0


def _discrete_convex_argmin(f, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Smallest integer ``k`` in ``[lo, hi]`` minimising a convex sequence ``f(k)``.

    Vectorised bisection on the sign of the forward difference; each row of
    ``lo``/``hi`` is an independent problem.
    """
    lo = lo.copy()
    hi = hi.copy()
    while True:
        active = lo < hi
        if not active.any():
            return lo
        mid = (lo + hi) // 2
        rising = f(mid + 1) >= f(mid)
        hi = np.where(active & rising, mid, hi)
        lo = np.where(active & ~rising, mid + 1, lo)


def oracle_optimal_injection(costs, u_bar: float, sum_delta: float, resolution: float = 1e-3,
                             exhaustive: bool = False) -> OracleResult:
    """Grid minimiser of the injection cost on the constraint set.

    The first ``n-1`` injections are swept over ``lo + k*resolution`` with
    ``lo = -(2|T|+1)`` up to ``2|T|+1`` (``T = sum_delta - u_bar``); the last
    injection closes the constraint.  Only the grid and the cost function are
    used, never the closed-form minimiser.

    By default the last free coordinate is minimised by bisection on its
    forward differences, which returns exactly the point full enumeration
    would (the cost restricted to a grid line is a convex sequence).
    ``exhaustive=True`` enumerates every point with the compiled kernel.
    """
    lam = _costs(costs).array
    n = lam.size
    if n > MAX_ORACLE_DIM:
        raise DimensionTooLarge(f"oracle supports at most {MAX_ORACLE_DIM} inverters, got {n}")
    if not resolution > 0:
        raise ValidationError("resolution must be > 0")
    target = sum_delta - u_bar
    span = 2.0 * abs(target) + 1.0
    lo = -span
    N = int(math.floor(2.0 * span / resolution + 1e-9))
    d = n - 1

    if n == 1:
        k = np.zeros(0, dtype=np.int64)
    elif exhaustive:
        _, k = kernels.grid_exhaustive(lam, target, lo, resolution, N)
    else:
        # outer coordinates enumerated; innermost by discrete-convex bisection
        if d > 1:
            grids = np.meshgrid(*[np.arange(N + 1)] * (d - 1), indexing="ij")
            outer = np.stack([g.ravel() for g in grids], axis=1)
        else:
            outer = np.zeros((1, 0), dtype=np.int64)
        y_outer = lo + outer * resolution
        acc = np.zeros(len(outer))
        partial = np.zeros(len(outer))
        for j in range(d - 1):
            acc = acc + lam[j] * y_outer[:, j] * y_outer[:, j]
            partial = partial + y_outer[:, j]

        def cost(kl):
            yl = lo + kl * resolution
            rest = target - (partial + yl)
            return 0.5 * ((acc + lam[d - 1] * yl * yl) + lam[d] * rest * rest)

        kl = _discrete_convex_argmin(cost, np.zeros(len(outer), dtype=np.int64),
                                     np.full(len(outer), N, dtype=np.int64))
        best = int(np.argmin(cost(kl)))
        k = np.append(outer[best], kl[best])
    y = lo + k * resolution
    Y = np.append(y, target - y.sum()) if n > 1 else np.array([target])
    total = Y.sum()
    xi = Y / total if total != 0 else np.full(n, math.nan)
    # mu from stationarity on the last coordinate
    mu = -lam[-1] * Y[-1]
    # lattice error bounds: nearest grid point lies within sqrt(d)*res/2 of the
    # optimum; strong convexity turns the cost gap into a distance
    H = np.diag(lam[:-1]) + lam[-1] * np.ones((d, d)) if d else np.zeros((0, 0))
    if d:
        ev = np.linalg.eigvalsh(H)
        r = math.sqrt(d) * resolution / 2.0
        cost_bound = 0.5 * ev[-1] * r * r
        dist_bound = math.sqrt(ev[-1] / ev[0]) * r * math.sqrt(1.0 + d)  # last coord adds
    else:
        cost_bound = dist_bound = 0.0
    C = CostMatrix(tuple(lam))
    return OracleResult(xi, Y, float(mu), C.cost(Y), resolution, (N + 1) ** d,
                        dist_bound, cost_bound)


@dataclass
class ProportionalityReport:
    pairs: list[dict] = field(default_factory=list)
    generator: dict | None = None
    proportional_sharing: bool = False
    ratio_condition: bool = False

    @property
    def mismatches(self) -> list[str]:
        bad = []
        for p in self.pairs:
            if p["applicable"] and not p["match"]:
                bad.append(f"inverters {p['i']}/{p['j']}: {p['total_ratio']:.12g} != {p['xi_ratio']:.12g}")
        if self.generator and self.generator["applicable"] and not self.generator["match"]:
            g = self.generator
            bad.append(f"generator/inverters: {g['total_ratio']:.12g} != {g['alpha_beta']:.12g}")
        return bad

    @property
    def passed(self) -> bool:
        return not self.mismatches


def _close(a, b, rtol=RATIO_RTOL):
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def proportionality_report(P_I_star, Upsilon, xi, P_G_star: float | None = None,
                           u_bar_eq: float | None = None, v_bar: float | None = None,
                           alpha: float | None = None, beta: float | None = None) -> ProportionalityReport:
    """Pairwise inverter ratios and, optionally, the generator/inverter ratio.

    Total-injection ratios ``(P*_i + Y_i)/(P*_j + Y_j)`` are held to
    ``xi_i/xi_j`` only when ``xi`` is proportional to the nominal powers; the
    generator ratio ``(P_G* + u)/(sum P_I* + v)`` is held to ``alpha/beta``
    only when ``alpha/beta = P_G*/sum(P_I*)``.  Other rows are informational.
    """
    P = np.asarray(P_I_star, dtype=float)
    Y = np.asarray(Upsilon, dtype=float)
    xi = np.asarray(xi, dtype=float)
    rep = ProportionalityReport()
    if P.sum() != 0:
        rep.proportional_sharing = bool(np.allclose(xi, P / P.sum(), rtol=RATIO_RTOL, atol=0))
    for i in range(len(P)):
        for j in range(i + 1, len(P)):
            den = P[j] + Y[j]
            if den == 0 or xi[j] == 0:
                raise ZeroDenominator(f"inverter {j + 1} has zero total injection or zero share")
            total = (P[i] + Y[i]) / den
            xr = xi[i] / xi[j]
            dev = Y[i] / Y[j] if Y[j] != 0 else None
            rep.pairs.append({
                "i": i + 1, "j": j + 1, "total_ratio": float(total), "xi_ratio": float(xr),
                "nominal_ratio": float(P[i] / P[j]) if P[j] else math.inf,
                "deviation_ratio": dev, "applicable": rep.proportional_sharing,
                "match": _close(total, xr),
            })
    if P_G_star is not None and None not in (u_bar_eq, v_bar, alpha, beta):
        den = P.sum() + v_bar
        if den == 0 or beta == 0:
            raise ZeroDenominator("inverter total injection or beta is zero")
        total = (P_G_star + u_bar_eq) / den
        ab = alpha / beta
        rep.ratio_condition = _close(ab, P_G_star / P.sum()) if P.sum() else False
        rep.generator = {"total_ratio": float(total), "alpha_beta": float(ab),
                         "applicable": rep.ratio_condition, "match": _close(total, ab)}
    return rep
