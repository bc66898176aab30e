"""Metric deformations driven by a torse-forming field and their theorems.

Three deformations of a metric ``g`` are supported, each built as a new
:class:`~torselab.geometry.MetricField` whose components are composed
expressions, so the deformed connection is computed exactly like any other:

* ``conformal``:        ``exp(2 sigma) g``
* ``d-isometric``:      ``g + w (x) w`` with ``w`` the flat of V
* ``omega-conformal``:  ``exp(2 sigma) (g + w (x) w)``

For each kind the closed-form difference between the old and new Levi-Civita
connections is evaluated from data of ``g`` alone (``f``, ``theta``, ``rho``,
``sigma``) and compared against direct Koszul on the deformed metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from torselab import exprlang as el
from torselab import torse
from torselab.config import DEFAULT, Tolerances
from torselab.errors import DomainError, SchemaError, SingularMetric, ZeroVectorAtPoint
from torselab.exprlang import Expr
from torselab.geometry import (
    ConnectionAt,
    MetricField,
    OneForm,
    VectorField,
    christoffel,
    conorm,
    covariant_derivative,
    flat_field,
    norm,
)
from torselab.torse import RhoAt, TorseFit

CONFORMAL = "conformal"
D_ISOMETRIC = "d-isometric"
OMEGA_CONFORMAL = "omega-conformal"
KINDS = (CONFORMAL, D_ISOMETRIC, OMEGA_CONFORMAL)


@dataclass(frozen=True, eq=False)
class Deformation:
    kind: str
    metric: MetricField
    field: VectorField
    sigma: Expr | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown deformation kind {self.kind!r}")
        if self.kind == D_ISOMETRIC and self.sigma is not None:
            raise SchemaError("d-isometric deformation takes no sigma")
        if self.kind != D_ISOMETRIC and self.sigma is None:
            raise SchemaError(f"{self.kind} deformation needs sigma")

    @property
    def name(self) -> str:
        return self.label or self.kind

    @cached_property
    def omega(self) -> OneForm:
        return flat_field(self.metric, self.field)

    @cached_property
    def deformed(self) -> MetricField:
        n = self.metric.dim
        g = self.metric.components
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                if j < i:
                    row.append(rows[j][i])
                    continue
                c = g[i][j]
                if self.kind != CONFORMAL:
                    c = el.add(c, el.mul(self.omega.components[i], self.omega.components[j]))
                if self.kind != D_ISOMETRIC:
                    scale = el.call("exp", el.mul(el.num(2.0), self.sigma))
                    c = el.mul(scale, c)
                row.append(c)
            rows.append(tuple(row))
        return MetricField(tuple(rows))

    def at(self, p) -> np.ndarray:
        return self.deformed.at(p)


def deform_metric(d: Deformation, p) -> np.ndarray:
    return d.at(p)


# ---------------------------------------------------------------------------
# Point data of the source metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceAt:
    """Everything the closed-form laws need at one point, all under ``g``."""

    conn: ConnectionAt
    fit: TorseFit | None
    rho: RhoAt
    dsigma: np.ndarray

    @property
    def V(self) -> np.ndarray:
        if self.fit is not None:
            return self.fit.V
        return self.conn.ginv @ self.rho.omega

    @property
    def f(self) -> float:
        if self.fit is None:
            raise ValueError("law needs a torse fit at this point")
        return self.fit.f

    @property
    def e2rho(self) -> float:
        return math.exp(2.0 * self.rho.rho)

    @property
    def grad_rho(self) -> np.ndarray:
        return self.conn.ginv @ self.rho.drho

    @property
    def grad_sigma(self) -> np.ndarray:
        return self.conn.ginv @ self.dsigma

    @property
    def V_rho(self) -> float:
        return float(self.rho.drho @ self.V)

    @property
    def V_sigma(self) -> float:
        return float(self.dsigma @ self.V)


def source_at(d: Deformation, p, tol: Tolerances = DEFAULT, need_fit: bool = True) -> SourceAt:
    conn = christoffel(d.metric, p, tol)
    fit = torse.fit_torse(d.metric, d.field, p, conn, tol) if need_fit else None
    rho = torse.rho_at(d.metric, d.field, conn.point)
    if d.sigma is None:
        dsigma = np.zeros(len(conn.point))
    else:
        dsigma = el.eval_dual(d.sigma, conn.point).grad
    return SourceAt(conn, fit, rho, dsigma)


# ---------------------------------------------------------------------------
# Closed-form connection laws
# ---------------------------------------------------------------------------


def _conformal_law(s: SourceAt, X, Y, nXY) -> np.ndarray:
    g = s.conn.g
    return nXY + (s.dsigma @ X) * Y + (s.dsigma @ Y) * X - (X @ g @ Y) * s.grad_sigma


def _d_isometric_law(s: SourceAt, X, Y, nXY) -> np.ndarray:
    g, w, V = s.conn.g, s.rho.omega, s.V
    wX, wY = w @ X, w @ Y
    Xr, Yr = s.rho.drho @ X, s.rho.drho @ Y
    f, e2 = s.f, s.e2rho
    coef = (f * (X @ g @ Y) + Xr * wY + wX * Yr + (s.V_rho - f / e2) * wX * wY) / (1.0 + e2)
    return nXY - wX * wY * s.grad_rho + coef * V


def _omega_conformal_law(s: SourceAt, X, Y, nXY) -> np.ndarray:
    g, w, V = s.conn.g, s.rho.omega, s.V
    wX, wY = w @ X, w @ Y
    Xr, Yr = s.rho.drho @ X, s.rho.drho @ Y
    Xs, Ys = s.dsigma @ X, s.dsigma @ Y
    f, e2, Vs = s.f, s.e2rho, s.V_sigma
    gXY = X @ g @ Y
    coef = (
        (f + Vs) * gXY + Xr * wY + wX * Yr + (s.V_rho + Vs - f / e2) * wX * wY
    ) / (1.0 + e2)
    return (
        nXY
        + Xs * Y
        + Ys * X
        - gXY * s.grad_sigma
        - wX * wY * (s.grad_sigma + s.grad_rho)
        + coef * V
    )


_LAWS: dict[str, Callable] = {
    CONFORMAL: _conformal_law,
    D_ISOMETRIC: _d_isometric_law,
    OMEGA_CONFORMAL: _omega_conformal_law,
}

LAW_NAMES = {CONFORMAL: "conformal-law", D_ISOMETRIC: "d-isometric-law", OMEGA_CONFORMAL: "omega-conformal-law"}


def predicted_connection(
    d: Deformation, X: VectorField, Y: VectorField, p, tol: Tolerances = DEFAULT
) -> np.ndarray:
    """Deformed ``nabla_X Y`` from the closed-form law, using only ``g`` data."""
    s = source_at(d, p, tol, need_fit=d.kind != CONFORMAL)
    x = X.at(s.conn.point)
    y, jac = Y.jet(s.conn.point)
    nXY = (jac + np.einsum("kij,j->ki", s.conn.gamma, y)) @ x
    return _LAWS[d.kind](s, x, y, nXY)


def direct_connection(
    d: Deformation, X: VectorField, Y: VectorField, p, tol: Tolerances = DEFAULT
) -> np.ndarray:
    """Deformed ``nabla_X Y`` from Koszul applied to the deformed metric."""
    return covariant_derivative(d.deformed, Y, X, p, tol=tol)


def basis_law_residual(d: Deformation, s: SourceAt, deformed_conn: ConnectionAt) -> float:
    """Max componentwise gap over all coordinate pairs (d_i, d_j) at one point."""
    n = len(s.conn.point)
    law = _LAWS[d.kind]
    eye = np.eye(n)
    worst = 0.0
    for i in range(n):
        for j in range(n):
            pred = law(s, eye[i], eye[j], s.conn.gamma[:, i, j])
            gap = np.max(np.abs(pred - deformed_conn.gamma[:, i, j]))
            worst = max(worst, float(gap))
    return worst


def connection_law_residual(d: Deformation, points, tol: Tolerances = DEFAULT) -> float:
    worst = 0.0
    for p in points:
        s = source_at(d, p, tol, need_fit=d.kind != CONFORMAL)
        worst = max(worst, basis_law_residual(d, s, christoffel(d.deformed, p, tol)))
    return worst


# ---------------------------------------------------------------------------
# Theorem checks
# ---------------------------------------------------------------------------


@dataclass
class TheoremCheck:
    theorem: str
    deformation: str
    kind: str
    hypothesis_residual: float
    hypothesis_met: bool
    premise_met: bool
    predicted: str
    observed: str
    connection_law_residual: float
    printed_form_residual: float | None = None

    @property
    def confirmed(self) -> bool | None:
        """Observed class satisfies the prediction; None if not applicable."""
        if not (self.hypothesis_met and self.premise_met):
            return None
        return torse.satisfies(self.observed, self.predicted)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "deformation": self.deformation,
            "kind": self.kind,
            "hypothesis_residual": self.hypothesis_residual,
            "hypothesis_met": self.hypothesis_met,
            "premise_met": self.premise_met,
            "predicted": self.predicted,
            "observed": self.observed,
            "confirmed": self.confirmed,
            "connection_law_residual": self.connection_law_residual,
            "printed_form_residual": self.printed_form_residual,
        }


def _h_thm_2_1(s: SourceAt) -> float:
    # grad sigma = -f exp(-2 rho) V
    return norm(s.conn.g, s.grad_sigma + s.f / s.e2rho * s.V)


def _h_thm_2_4(s: SourceAt) -> float:
    # V(rho) V - exp(2 rho) grad rho = 0
    return norm(s.conn.g, s.V_rho * s.V - s.e2rho * s.grad_rho)


def _h_2_4_concircular(s: SourceAt) -> float:
    e2 = s.e2rho
    return abs(s.f - (1.0 + 2.0 * e2) / (1.0 + e2) * s.V_rho)


def _h_thm_2_7(s: SourceAt) -> float:
    e2 = s.e2rho
    return norm(s.conn.g, s.grad_sigma + e2 / (1.0 + e2) * s.grad_rho)


def _h_2_7_i(s: SourceAt) -> float:
    e2 = s.e2rho
    return abs(s.f - e2 / (1.0 + e2))


def _h_2_7_ii(s: SourceAt) -> float:
    e2 = s.e2rho
    rhs = (s.f / e2 - s.V_rho / (1.0 + e2)) * s.rho.omega
    return conorm(s.conn.ginv, s.rho.drho - rhs)


def _h_v_rho(s: SourceAt) -> float:
    return abs(s.V_rho)


# (theorem id, hypothesis parts, predicted class); a check's residual is the
# max over its parts, so special cases carry the main hypothesis with them
_THEOREMS: dict[str, list[tuple[str, tuple[Callable, ...], str]]] = {
    CONFORMAL: [("2.1", (_h_thm_2_1,), torse.RECURRENT)],
    D_ISOMETRIC: [
        ("2.4", (_h_thm_2_4,), torse.TORSE_FORMING),
        ("2.4-concircular", (_h_thm_2_4, _h_2_4_concircular), torse.CONCIRCULAR),
        ("parallel-corollary", (_h_thm_2_4, _h_2_4_concircular, _h_v_rho), torse.PARALLEL),
    ],
    OMEGA_CONFORMAL: [
        ("2.7", (_h_thm_2_7,), torse.TORSE_FORMING),
        ("2.7-i", (_h_thm_2_7, _h_2_7_i), torse.RECURRENT),
        ("2.7-ii", (_h_thm_2_7, _h_2_7_ii), torse.CONCIRCULAR),
        ("parallel-corollary", (_h_thm_2_7, _h_2_7_ii, _h_v_rho), torse.PARALLEL),
    ],
}


def printed_decomposition(kind: str, s: SourceAt) -> tuple[float, np.ndarray]:
    """Post-deformation ``(f, theta)`` as the closed-form conclusions state them.

    Valid only where the kind's main hypothesis holds. The omega-conformal
    scalar is the printed ``f - e^{2 rho} / (1 + e^{2 rho})``, which agrees with
    the exact ``f + V(sigma)`` only where ``V(rho) = 1``.
    """
    f, e2, w = s.f, s.e2rho, s.rho.omega
    if kind == CONFORMAL:
        return 0.0, s.fit.theta
    if kind == D_ISOMETRIC:
        return f, ((1.0 + 2.0 * e2) / (1.0 + e2) * s.V_rho - f) / e2 * w
    return f - e2 / (1.0 + e2), s.rho.drho + (s.V_rho / (1.0 + e2) - f / e2) * w


def exact_decomposition(kind: str, s: SourceAt) -> tuple[float, np.ndarray]:
    """Same as :func:`printed_decomposition` with the omega-conformal scalar
    taken as ``f + V(sigma)``."""
    f, theta = printed_decomposition(kind, s)
    if kind == OMEGA_CONFORMAL:
        f = s.f + s.V_sigma
    return f, theta


def decomposition_gap(decomp: tuple[float, np.ndarray], fit: TorseFit) -> float:
    f, theta = decomp
    return max(abs(fit.f - f), conorm(fit.conn.ginv, fit.theta - theta))


@dataclass
class DeformationResult:
    deformation: Deformation
    verdict: torse.ClassVerdict
    checks: list[TheoremCheck]
    law_residual: float
    kernel_torsion: float
    kernel_compatibility: float


def check_theorem(
    d: Deformation,
    points: Sequence,
    tol: Tolerances = DEFAULT,
    source_class: str | None = None,
) -> DeformationResult:
    """Run every theorem attached to ``d.kind`` over the sample points.

    The observed class always comes from classifying V under the deformed
    metric; hypotheses that fail are reported, never raised.
    """
    if source_class is None:
        source_class = torse.classify(d.metric, d.field, points, tol).cls
    premise = source_class == torse.PROPER
    need_fit = source_class != torse.NOT_TORSE

    sources: list[SourceAt] = []
    for p in points:
        try:
            sources.append(source_at(d, p, tol, need_fit=need_fit))
        except (ZeroVectorAtPoint, DomainError, SingularMetric):
            continue

    verdict = torse.classify(d.deformed, d.field, points, tol)
    fits_by_point = {tuple(ft.point): ft for ft in verdict.fits}

    law = 0.0
    torsion = compat = 0.0
    for s in sources:
        conn_def = christoffel(d.deformed, s.conn.point, tol)
        torsion = max(torsion, conn_def.torsion_residual())
        compat = max(compat, conn_def.compatibility_residual())
        if d.kind == CONFORMAL or need_fit:
            law = max(law, basis_law_residual(d, s, conn_def))

    checks: list[TheoremCheck] = []
    if not need_fit:
        return DeformationResult(d, verdict, checks, law, torsion, compat)
    for tid, parts, predicted in _THEOREMS[d.kind]:
        resid = max(max(h(s) for h in parts) for s in sources)
        met = resid < tol.pde
        printed = None
        if tid in ("2.1", "2.4", "2.7") and met:
            printed = max(
                decomposition_gap(printed_decomposition(d.kind, s), fits_by_point[tuple(s.conn.point)])
                for s in sources
                if tuple(s.conn.point) in fits_by_point
            )
        checks.append(
            TheoremCheck(
                theorem=tid,
                deformation=d.name,
                kind=d.kind,
                hypothesis_residual=resid,
                hypothesis_met=met,
                premise_met=premise,
                predicted=predicted,
                observed=verdict.cls,
                connection_law_residual=law,
                printed_form_residual=printed,
            )
        )
    return DeformationResult(d, verdict, checks, law, torsion, compat)
