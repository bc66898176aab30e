"""Central numerical tolerances."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

ENV_TOL_FIT = "TORSELAB_TOL_FIT"


@dataclass(frozen=True)
class Tolerances:
    identity: float = 1e-10  # algebraic identities: symmetry, sharp/flat round trips
    pde: float = 1e-8  # gradient conditions and metric compatibility
    fit: float = 1e-7  # normalized torse fit residual
    classify: float = 1e-6  # f ~ 0, f ~ 1, |theta| ~ 0, theta(V) ~ 0, geodesic
    prop: float = 1e-7  # generating-form identity residual
    law: float = 1e-7  # closed-form connection law vs direct Koszul
    singular: float = 1e-12  # smallest admissible metric eigenvalue

    def with_overrides(self, **kw: float | None) -> "Tolerances":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


DEFAULT = Tolerances()


def from_env(base: Tolerances = DEFAULT) -> Tolerances:
    raw = os.environ.get(ENV_TOL_FIT)
    if raw is None or not raw.strip():
        return base
    return replace(base, fit=float(raw))
