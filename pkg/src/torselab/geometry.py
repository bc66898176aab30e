"""Chart-based Riemannian calculus.

Everything is computed in the coordinate basis of a single chart. Fields are
tuples of :mod:`torselab.exprlang` expressions; first derivatives come from
dual-number evaluation, so Christoffel symbols carry no truncation error.

Index conventions: ``gamma[k, i, j]`` is the Christoffel symbol with upper
index ``k``; ``dg[i, j, k]`` is the partial of ``g_ij`` along ``x_k``;
``jac[k, i]`` is the partial of ``V^k`` along ``x_i``; and
``nabla[k, i]`` is the ``k`` component of the covariant derivative of V along
the ``i``-th coordinate vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from torselab import exprlang as el
from torselab.config import DEFAULT, Tolerances
from torselab.errors import SchemaError, SingularMetric
from torselab.exprlang import Dual, Expr


@dataclass(frozen=True)
class Chart:
    dim: int
    names: tuple[str, ...]
    box: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not 1 <= self.dim <= 9:
            raise SchemaError(f"chart dimension must be in 1..9, got {self.dim}")
        if len(self.names) != self.dim or len(self.box) != self.dim:
            raise SchemaError("chart names and box must have one entry per coordinate")
        for lo, hi in self.box:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise SchemaError(f"invalid box interval ({lo}, {hi})")

    @classmethod
    def standard(cls, box: Sequence[tuple[float, float]]) -> "Chart":
        n = len(box)
        return cls(n, tuple(f"x{i + 1}" for i in range(n)), tuple(map(tuple, box)))

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Uniform points in the open box, reproducible for a given seed."""
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return lo + (hi - lo) * rng.random((count, self.dim))


def _parse_all(items: Sequence[Expr | str | float]) -> tuple[Expr, ...]:
    out = []
    for it in items:
        if isinstance(it, str):
            out.append(el.parse(it))
        elif isinstance(it, (int, float)):
            out.append(el.num(it))
        else:
            out.append(it)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric matrix of component expressions ``g_ij``."""

    components: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        n = len(self.components)
        if any(len(row) != n for row in self.components):
            raise SchemaError("metric must be a square array")
        for i in range(n):
            for j in range(i):
                if self.components[i][j] != self.components[j][i]:
                    raise SchemaError(f"metric entries g{j + 1}{i + 1} and g{i + 1}{j + 1} differ")

    @classmethod
    def from_rows(cls, rows) -> "MetricField":
        return cls(tuple(_parse_all(r) for r in rows))

    @classmethod
    def diagonal(cls, diag) -> "MetricField":
        d = _parse_all(diag)
        n = len(d)
        zero = el.Num(0.0)
        return cls(tuple(tuple(d[i] if i == j else zero for j in range(n)) for i in range(n)))

    @property
    def dim(self) -> int:
        return len(self.components)

    def at(self, p) -> np.ndarray:
        n = self.dim
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = el.evaluate(self.components[i][j], p)
        return out

    def jet(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Values ``g[i, j]`` and derivatives ``dg[i, j, k]`` at ``p``."""
        n = self.dim
        g = np.empty((n, n))
        dg = np.empty((n, n, n))
        for i in range(n):
            for j in range(i, n):
                d = el.eval_dual(self.components[i][j], p)
                g[i, j] = g[j, i] = d.value
                dg[i, j] = dg[j, i] = d.grad
        return g, dg

    def duals(self, p) -> list[list[Dual]]:
        n = self.dim
        rows: list[list[Dual | None]] = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                rows[i][j] = rows[j][i] = el.eval_dual(self.components[i][j], p)
        return rows  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class VectorField:
    """Contravariant components ``V^k`` in the coordinate basis."""

    components: tuple[Expr, ...]

    @classmethod
    def of(cls, *items) -> "VectorField":
        return cls(_parse_all(items))

    @property
    def dim(self) -> int:
        return len(self.components)

    def at(self, p) -> np.ndarray:
        return np.array([el.evaluate(c, p) for c in self.components])

    def duals(self, p) -> list[Dual]:
        return [el.eval_dual(c, p) for c in self.components]

    def jet(self, p) -> tuple[np.ndarray, np.ndarray]:
        ds = self.duals(p)
        return np.array([d.value for d in ds]), np.array([d.grad for d in ds])


@dataclass(frozen=True, eq=False)
class OneForm:
    """Covariant components ``w_i`` in the coordinate basis."""

    components: tuple[Expr, ...]

    @classmethod
    def of(cls, *items) -> "OneForm":
        return cls(_parse_all(items))

    @property
    def dim(self) -> int:
        return len(self.components)

    def at(self, p) -> np.ndarray:
        return np.array([el.evaluate(c, p) for c in self.components])

    def jet(self, p) -> tuple[np.ndarray, np.ndarray]:
        ds = [el.eval_dual(c, p) for c in self.components]
        return np.array([d.value for d in ds]), np.array([d.grad for d in ds])


def basis_field(n: int, i: int) -> VectorField:
    """The coordinate vector field along ``x_{i+1}``."""
    return VectorField(tuple(el.Num(1.0 if k == i else 0.0) for k in range(n)))


def flat_field(g: MetricField, V: VectorField) -> OneForm:
    """Expression-level index lowering, ``w_i = g_ij V^j``."""
    n = g.dim
    rows = []
    for i in range(n):
        terms = [
            el.mul(g.components[i][j], V.components[j])
            for j in range(n)
            if not (_is_zero(g.components[i][j]) or _is_zero(V.components[j]))
        ]
        rows.append(el.total(terms))
    return OneForm(tuple(rows))


def _is_zero(e: Expr) -> bool:
    return isinstance(e, el.Num) and e.value == 0.0


# ---------------------------------------------------------------------------
# Connection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectionAt:
    """Levi-Civita connection data at a single point."""

    point: np.ndarray
    gamma: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray

    def torsion_residual(self) -> float:
        return float(np.max(np.abs(self.gamma - self.gamma.transpose(0, 2, 1))))

    def compatibility_residual(self) -> float:
        # d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il
        a = np.einsum("lki,lj->ijk", self.gamma, self.g)
        b = np.einsum("lkj,il->ijk", self.gamma, self.g)
        return float(np.max(np.abs(self.dg - a - b)))


def invert_metric(g: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise SingularMetric("metric has non-finite entries")
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= tol.singular:
        raise SingularMetric(f"metric not positive definite (smallest eigenvalue {eig[0]:.3e})")
    try:
        return np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric(str(exc)) from exc


def christoffel(g: MetricField, p, tol: Tolerances = DEFAULT) -> ConnectionAt:
    """Christoffel symbols of the second kind from the Koszul formula."""
    p = np.asarray(p, dtype=float)
    gv, dg = g.jet(p)
    ginv = invert_metric(gv, tol)
    # first kind: [ij, l] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (dg.transpose(2, 0, 1) + dg.transpose(0, 2, 1) - dg)
    gamma = np.einsum("kl,ijl->kij", ginv, first)
    return ConnectionAt(p, gamma, gv, ginv, dg)


def _conn(g: MetricField, p, conn: ConnectionAt | None, tol: Tolerances) -> ConnectionAt:
    return conn if conn is not None else christoffel(g, p, tol)


def nabla_matrix(
    g: MetricField, V: VectorField, p, conn: ConnectionAt | None = None, tol: Tolerances = DEFAULT
) -> np.ndarray:
    """``nabla[k, i] = d_i V^k + Gamma^k_ij V^j``."""
    c = _conn(g, p, conn, tol)
    v, jac = V.jet(c.point)
    return jac + np.einsum("kij,j->ki", c.gamma, v)


def covariant_derivative(
    g: MetricField,
    V: VectorField,
    X: VectorField,
    p,
    conn: ConnectionAt | None = None,
    tol: Tolerances = DEFAULT,
) -> np.ndarray:
    """Components of nabla_X V at ``p``."""
    c = _conn(g, p, conn, tol)
    return nabla_matrix(g, V, p, c, tol) @ X.at(c.point)


def flat(g: MetricField, V: VectorField, p) -> np.ndarray:
    return g.at(p) @ V.at(p)


def sharp(g: MetricField, w: OneForm, p, tol: Tolerances = DEFAULT) -> np.ndarray:
    return invert_metric(g.at(p), tol) @ w.at(p)


def differential(phi: Expr, p) -> np.ndarray:
    return el.eval_dual(phi, p).grad


def gradient(g: MetricField, phi: Expr, p, tol: Tolerances = DEFAULT) -> np.ndarray:
    return invert_metric(g.at(p), tol) @ differential(phi, p)


def lie_derivative_metric(
    g: MetricField, V: VectorField, p, conn: ConnectionAt | None = None, tol: Tolerances = DEFAULT
) -> np.ndarray:
    """``(L_V g)_ij = g(nabla_i V, d_j) + g(nabla_j V, d_i)``."""
    c = _conn(g, p, conn, tol)
    low = c.g @ nabla_matrix(g, V, p, c, tol)  # low[j, i] = g(nabla_i V, d_j)
    return low + low.T


def exterior_derivative(w: OneForm, p) -> np.ndarray:
    """``dw[i, j] = (d_i w_j - d_j w_i) / 2``.

    The factor one half matches ``2 dw(X, Z) = (nabla_X w)Z - (nabla_Z w)X``.
    """
    _, jac = w.jet(p)  # jac[j, i] = d_i w_j
    return 0.5 * (jac.T - jac)


def frame_matrix(frame: Sequence[VectorField], p) -> np.ndarray:
    """Columns are the frame vectors at ``p``."""
    return np.column_stack([e.at(p) for e in frame])


def frame_connection(
    g: MetricField, frame: Sequence[VectorField], p, tol: Tolerances = DEFAULT
) -> np.ndarray:
    """Coefficients ``C[i, j, k]`` with nabla_{e_i} e_j = sum_k C[i, j, k] e_k."""
    c = christoffel(g, p, tol)
    E = frame_matrix(frame, c.point)
    n = len(frame)
    out = np.empty((n, n, n))
    for j, ej in enumerate(frame):
        nab = nabla_matrix(g, ej, p, c, tol)  # nab @ X = nabla_X e_j
        coords = nab @ E  # column i: nabla_{e_i} e_j
        out[:, j, :] = np.linalg.solve(E, coords).T
    return out


def orthonormality_residual(g: MetricField, frame: Sequence[VectorField], p) -> float:
    E = frame_matrix(frame, p)
    return float(np.max(np.abs(E.T @ g.at(p) @ E - np.eye(len(frame)))))


def norm(G: np.ndarray, v: np.ndarray) -> float:
    """Length of a vector under the metric matrix ``G``."""
    return math.sqrt(max(float(v @ G @ v), 0.0))


def conorm(Ginv: np.ndarray, w: np.ndarray) -> float:
    """Length of a covector under the inverse metric."""
    return math.sqrt(max(float(w @ Ginv @ w), 0.0))
