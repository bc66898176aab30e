"""Scenario reports: run every check on a sampled chart and serialize."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from torselab import torse
from torselab.config import DEFAULT, Tolerances
from torselab.deform import (
    D_ISOMETRIC,
    LAW_NAMES,
    Deformation,
    DeformationResult,
    check_theorem,
    connection_law_residual,
)
from torselab.errors import InsufficientSamples, SchemaError
from torselab.geometry import christoffel, orthonormality_residual
from torselab.scenario import Scenario

DEFAULT_SAMPLES = 64
DEFAULT_SEED = 42


@dataclass
class Expectation:
    subject: str
    expected: str
    observed: str

    @property
    def ok(self) -> bool:
        return self.expected == self.observed


@dataclass
class Report:
    scenario: str
    samples: int
    seed: int
    tolerances: Tolerances
    verdict: torse.ClassVerdict
    prop_1_1_max: float | None
    frame_orthonormality: float | None
    deformations: list[DeformationResult]
    connection_laws: dict[str, float]
    kernel: dict[str, float]
    expectations: list[Expectation]
    warnings: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def checks(self):
        return [c for d in self.deformations for c in d.checks]

    @property
    def ok(self) -> bool:
        if not all(e.ok for e in self.expectations):
            return False
        return all(c.confirmed is not False for c in self.checks)

    def to_dict(self, include_timing: bool = False) -> dict:
        v = self.verdict
        out = {
            "scenario": self.scenario,
            "samples": self.samples,
            "seed": self.seed,
            "tolerances": {
                "identity": self.tolerances.identity,
                "pde": self.tolerances.pde,
                "fit": self.tolerances.fit,
                "classify": self.tolerances.classify,
            },
            "verdict": {
                "class": v.cls,
                "geodesic": v.geodesic,
                "torqued": v.torqued,
                "evidence": v.evidence,
            },
            "prop_1_1_max_residual": self.prop_1_1_max,
            "frame_orthonormality_residual": self.frame_orthonormality,
            "deformations": [
                {
                    "label": d.deformation.name,
                    "kind": d.deformation.kind,
                    "class": d.verdict.cls,
                    "geodesic": d.verdict.geodesic,
                    "evidence": d.verdict.evidence,
                    "checks": [c.to_dict() for c in d.checks],
                }
                for d in self.deformations
            ],
            "connection_laws": self.connection_laws,
            "kernel": self.kernel,
            "expectations": [
                {"subject": e.subject, "expected": e.expected, "observed": e.observed, "ok": e.ok}
                for e in self.expectations
            ],
            "ok": self.ok,
            "warnings": self.warnings,
            "points": [
                {
                    "point": ft.point.tolist(),
                    "f": ft.f,
                    "theta": ft.theta.tolist(),
                    "residual": ft.residual,
                }
                for ft in v.fits
            ],
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2)

    def render_text(self, include_points: bool = False) -> str:
        v = self.verdict
        ev = v.evidence
        lines = [
            f"scenario {self.scenario}  ({self.samples} samples, seed {self.seed})",
            f"  class: {v.cls}   geodesic: {'yes' if v.geodesic else 'no'}"
            f"   torqued: {'yes' if v.torqued else 'no'}",
            f"  fit residual max {ev['max_residual']:.3e}   |f| in [{ev['min_abs_f']:.4g}, {ev['max_abs_f']:.4g}]"
            f"   |theta| in [{ev['min_theta_norm']:.4g}, {ev['max_theta_norm']:.4g}]",
        ]
        if self.prop_1_1_max is not None:
            lines.append(f"  generating-form identity residual max {self.prop_1_1_max:.3e}")
        if self.frame_orthonormality is not None:
            lines.append(f"  frame orthonormality residual max {self.frame_orthonormality:.3e}")
        for d in self.deformations:
            lines.append(f"  deformation {d.deformation.name} ({d.deformation.kind}): class {d.verdict.cls}")
            for c in d.checks:
                status = {True: "confirmed", False: "CONTRADICTED", None: "n/a"}[c.confirmed]
                hyp = "met" if c.hypothesis_met else "not met"
                lines.append(
                    f"    theorem {c.theorem:<20} hypothesis {hyp} ({c.hypothesis_residual:.2e})"
                    f"  predicted {c.predicted:<20} observed {c.observed:<20} {status}"
                )
        for name, r in self.connection_laws.items():
            lines.append(f"  connection law {name}: max residual {r:.3e}")
        lines.append(
            f"  kernel: torsion {self.kernel['max_torsion']:.1e}, compatibility {self.kernel['max_compatibility']:.1e}"
        )
        for e in self.expectations:
            mark = "ok  " if e.ok else "FAIL"
            lines.append(f"  [{mark}] expect {e.subject} = {e.expected} (observed {e.observed})")
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        if include_points:
            lines.append("  points:")
            for ft in v.fits:
                pt = ", ".join(f"{x:.4f}" for x in ft.point)
                th = ", ".join(f"{x:.4g}" for x in ft.theta)
                lines.append(f"    ({pt})  f={ft.f:.6g}  theta=({th})  residual={ft.residual:.2e}")
        lines.append(f"  result: {'OK' if self.ok else 'MISMATCH'}")
        return "\n".join(lines)


def run_report(
    s: Scenario,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: Tolerances = DEFAULT,
    theorems: bool = True,
) -> Report:
    """Classify V, then check every declared deformation and its theorems."""
    if samples < torse.MIN_SAMPLES:
        raise InsufficientSamples(f"need at least {torse.MIN_SAMPLES} samples, got {samples}")
    start = time.perf_counter()
    points = s.chart.sample(samples, seed)
    warnings: list[str] = []

    ortho = None
    if s.frame is not None:
        ortho = max(orthonormality_residual(s.metric, s.frame, p) for p in points)
        if ortho > tol.pde:
            raise SchemaError(f"declared frame is not orthonormal (residual {ortho:.2e})")

    verdict = torse.classify(s.metric, s.field, points, tol)
    warnings.extend(verdict.skipped)
    if len(verdict.skipped) * 2 > samples:
        raise InsufficientSamples(f"{len(verdict.skipped)} of {samples} sample points unusable")
    usable = np.array([ft.point for ft in verdict.fits])

    torsion = max(ft.conn.torsion_residual() for ft in verdict.fits)
    compat = max(ft.conn.compatibility_residual() for ft in verdict.fits)

    prop = None
    if verdict.cls != torse.NOT_TORSE:
        prop = max(torse.prop_1_1_residual(ft, torse.rho_at(s.metric, s.field, ft.point)) for ft in verdict.fits)
        if prop >= tol.prop:
            warnings.append(f"generating-form identity residual {prop:.2e} exceeds {tol.prop:.0e}")

    results: list[DeformationResult] = []
    laws: dict[str, float] = {}
    if theorems:
        for d in s.deformation_objects():
            r = check_theorem(d, usable, tol, source_class=verdict.cls)
            results.append(r)
            torsion = max(torsion, r.kernel_torsion)
            compat = max(compat, r.kernel_compatibility)
            laws[f"{d.name}/{LAW_NAMES[d.kind]}"] = r.law_residual
            for c in r.checks:
                if c.theorem in ("2.1", "2.4", "2.7") and not c.hypothesis_met:
                    warnings.append(
                        f"hypothesis of theorem {c.theorem} not met on {d.name} "
                        f"(residual {c.hypothesis_residual:.2e})"
                    )
                if c.confirmed is False:
                    warnings.append(f"theorem {c.theorem} on {d.name}: predicted {c.predicted}, observed {c.observed}")
        declared = {d.kind for d in s.deformation_objects()}
        if verdict.cls != torse.NOT_TORSE and D_ISOMETRIC not in declared:
            probe = Deformation(D_ISOMETRIC, s.metric, s.field, label="probe")
            laws[f"probe/{LAW_NAMES[D_ISOMETRIC]}"] = connection_law_residual(probe, usable, tol)
        for name, r in laws.items():
            if r >= tol.law:
                warnings.append(f"connection law {name} residual {r:.2e} exceeds {tol.law:.0e}")

    expectations = []
    if "class" in s.expected:
        expectations.append(Expectation("class", s.expected["class"], verdict.cls))
    for r in results:
        label = r.deformation.name
        if label in s.expected:
            expectations.append(Expectation(label, s.expected[label], r.verdict.cls))

    return Report(
        scenario=s.name,
        samples=samples,
        seed=seed,
        tolerances=tol,
        verdict=verdict,
        prop_1_1_max=prop,
        frame_orthonormality=ortho,
        deformations=results,
        connection_laws=laws,
        kernel={"max_torsion": torsion, "max_compatibility": compat},
        expectations=expectations,
        warnings=warnings,
        wall_time=time.perf_counter() - start,
    )


def kernel_check(metric, points, tol: Tolerances = DEFAULT) -> tuple[float, float]:
    """Max torsion and compatibility residuals of ``metric`` over ``points``."""
    torsion = compat = 0.0
    for p in points:
        c = christoffel(metric, p, tol)
        torsion = max(torsion, c.torsion_residual())
        compat = max(compat, c.compatibility_residual())
    return torsion, compat
