"""Torse-forming fits and the vector-field taxonomy.

A field V is torse-forming when ``nabla_X V = f X + theta(X) V`` for every X.
At a point this is ``n*n`` linear equations in the ``n + 1`` unknowns
``(f, theta_1, ..., theta_n)``; :func:`fit_torse` solves them in the least
squares sense and reports how far the best fit is from exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from torselab.config import DEFAULT, Tolerances
from torselab.errors import (
    DomainError,
    InsufficientSamples,
    SingularMetric,
    ZeroVectorAtPoint,
)
from torselab.geometry import ConnectionAt, MetricField, VectorField, christoffel, conorm, norm

log = logging.getLogger(__name__)

PARALLEL = "parallel"
CONCURRENT = "concurrent"
CONCIRCULAR = "concircular"
RECURRENT = "recurrent"
TORQUED = "torqued"
PROPER = "proper-torse-forming"
TORSE_FORMING = "torse-forming"  # torse-forming but in none of the named classes
NOT_TORSE = "not-torse-forming"

CLASSES = (PARALLEL, CONCURRENT, CONCIRCULAR, RECURRENT, TORQUED, PROPER, TORSE_FORMING, NOT_TORSE)

# every torse-forming class implies TORSE_FORMING; these are the extra implications
_IMPLIES = {
    PARALLEL: {CONCIRCULAR},
    CONCURRENT: {CONCIRCULAR},
}

MIN_SAMPLES = 8


def satisfies(observed: str, predicted: str) -> bool:
    """Whether a field of class ``observed`` also belongs to ``predicted``.

    Classes from :func:`classify` are the most specific ones, so a concurrent
    field satisfies a prediction of "concircular".
    """
    if observed == predicted:
        return True
    if observed == NOT_TORSE:
        return False
    if predicted == TORSE_FORMING:
        return True
    return predicted in _IMPLIES.get(observed, set())


@dataclass(frozen=True)
class TorseFit:
    point: np.ndarray
    f: float
    theta: np.ndarray
    residual: float
    V: np.ndarray
    nabla: np.ndarray  # nabla[k, i] = (nabla_{d_i} V)^k
    conn: ConnectionAt

    @property
    def theta_norm(self) -> float:
        return conorm(self.conn.ginv, self.theta)

    @property
    def theta_of_V(self) -> float:
        return float(self.theta @ self.V)

    @property
    def nabla_V_V(self) -> np.ndarray:
        return self.nabla @ self.V

    def reconstruction(self) -> np.ndarray:
        return self.f * np.eye(len(self.V)) + np.outer(self.V, self.theta)


def fit_torse(
    g: MetricField,
    V: VectorField,
    p,
    conn: ConnectionAt | None = None,
    tol: Tolerances = DEFAULT,
) -> TorseFit:
    c = conn if conn is not None else christoffel(g, p, tol)
    v, jac = V.jet(c.point)
    if norm(c.g, v) <= 1e-10:
        raise ZeroVectorAtPoint(f"V vanishes at {c.point.tolist()}")
    M = jac + np.einsum("kij,j->ki", c.gamma, v)
    n = len(v)
    A = np.zeros((n * n, n + 1))
    for k in range(n):
        for i in range(n):
            r = k * n + i
            A[r, 0] = 1.0 if k == i else 0.0
            A[r, 1 + i] = v[k]
    sol, *_ = np.linalg.lstsq(A, M.reshape(-1), rcond=None)
    f, theta = float(sol[0]), sol[1:]
    err = M - f * np.eye(n) - np.outer(v, theta)
    residual = float(np.linalg.norm(err) / (np.linalg.norm(M) + 1.0))
    return TorseFit(c.point, f, theta, residual, v, M, c)


@dataclass(frozen=True)
class RhoAt:
    """Log-norm of V at a point: ``rho = ln |V|`` and its differential."""

    rho: float
    drho: np.ndarray
    omega: np.ndarray  # flat of V


def rho_at(g: MetricField, V: VectorField, p) -> RhoAt:
    p = np.asarray(p, dtype=float)
    G = g.duals(p)
    v = V.duals(p)
    n = len(v)
    gvv = sum(G[i][j] * v[i] * v[j] for i in range(n) for j in range(n))
    if gvv.value <= 0.0:
        raise ZeroVectorAtPoint(f"V vanishes at {p.tolist()}")
    rho = 0.5 * math.log(gvv.value)
    drho = 0.5 * gvv.grad / gvv.value
    Gv = np.array([[G[i][j].value for j in range(n)] for i in range(n)])
    vv = np.array([d.value for d in v])
    return RhoAt(rho, drho, Gv @ vv)


def prop_1_1_residual(fit: TorseFit, r: RhoAt) -> float:
    """Norm of ``theta - (d rho - f exp(-2 rho) omega)``."""
    rhs = r.drho - fit.f * math.exp(-2.0 * r.rho) * r.omega
    return conorm(fit.conn.ginv, fit.theta - rhs)


def check_prop_1_1(g: MetricField, V: VectorField, p, tol: Tolerances = DEFAULT) -> float:
    fit = fit_torse(g, V, p, tol=tol)
    return prop_1_1_residual(fit, rho_at(g, V, p))


@dataclass
class ClassVerdict:
    cls: str
    geodesic: bool
    torqued: bool  # theta(V) ~ 0 at every point; orthogonal to cls like geodesic
    evidence: dict[str, float]
    fits: list[TorseFit] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def satisfies(self, predicted: str) -> bool:
        return satisfies(self.cls, predicted)


def classify_fits(
    fits: Sequence[TorseFit], tol: Tolerances = DEFAULT
) -> tuple[str, bool, bool, dict[str, float]]:
    """Decision procedure over pooled per-point fits."""
    res = np.array([ft.residual for ft in fits])
    f = np.array([ft.f for ft in fits])
    th = np.array([ft.theta_norm for ft in fits])
    thv = np.array([abs(ft.theta_of_V) for ft in fits])
    vv = np.array([norm(ft.conn.g, ft.nabla_V_V) for ft in fits])
    ev = {
        "points": float(len(fits)),
        "max_residual": float(res.max()),
        "min_residual": float(res.min()),
        "max_abs_f": float(np.abs(f).max()),
        "min_abs_f": float(np.abs(f).min()),
        "max_abs_f_minus_1": float(np.abs(f - 1.0).max()),
        "max_theta_norm": float(th.max()),
        "min_theta_norm": float(th.min()),
        "max_abs_theta_V": float(thv.max()),
        "max_nabla_V_V": float(vv.max()),
    }
    c = tol.classify
    geodesic = ev["max_nabla_V_V"] < c
    if ev["max_residual"] > tol.fit:
        return NOT_TORSE, geodesic, False, ev
    torqued = ev["max_abs_theta_V"] < c
    theta_zero = ev["max_theta_norm"] < c
    if theta_zero and ev["max_abs_f"] < c:
        cls = PARALLEL
    elif theta_zero and ev["max_abs_f_minus_1"] < c:
        cls = CONCURRENT
    elif theta_zero:
        cls = CONCIRCULAR
    elif ev["max_abs_f"] < c:
        cls = RECURRENT
    elif ev["min_abs_f"] > c and ev["min_theta_norm"] > c:
        # proper wins over torqued: a proper field may also have theta(V) = 0
        cls = PROPER
    elif torqued:
        cls = TORQUED
    else:
        cls = TORSE_FORMING
    return cls, geodesic, torqued, ev


def collect_fits(
    g: MetricField, V: VectorField, points, tol: Tolerances = DEFAULT
) -> tuple[list[TorseFit], list[str]]:
    fits, skipped = [], []
    for p in points:
        try:
            fits.append(fit_torse(g, V, p, tol=tol))
        except (ZeroVectorAtPoint, DomainError, SingularMetric) as exc:
            msg = f"skipped point {np.asarray(p).tolist()}: {exc}"
            log.warning(msg)
            skipped.append(msg)
    return fits, skipped


def classify(g: MetricField, V: VectorField, points, tol: Tolerances = DEFAULT) -> ClassVerdict:
    fits, skipped = collect_fits(g, V, points, tol)
    if len(fits) < MIN_SAMPLES:
        raise InsufficientSamples(
            f"only {len(fits)} usable sample points, need at least {MIN_SAMPLES}"
        )
    cls, geodesic, torqued, ev = classify_fits(fits, tol)
    return ClassVerdict(cls, geodesic, torqued, ev, fits, skipped)
