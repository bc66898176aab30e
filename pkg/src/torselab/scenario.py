"""Scenario files and the built-in catalog.

A scenario is an INI-style text file::

    [scenario]
    name = s3-torse
    description = free text

    [chart]
    coords = x1 x2 x3            # display names, one per coordinate
    x1 = 0.3 .. pi - 0.3         # sampling interval, bounds are constant exprs
    ...

    [params]                     # scalars, bound at load time
    c = 1

    [let]                        # named sub-expressions, in order
    h = 2 + sin(x3)

    [metric]                     # gIJ entries; omitted entries are 0
    g11 = 1
    g22 = sin(x1)^2

    [frame]                      # optional orthonormal frame, for reports
    e1 = 1, 0, 0

    [field]
    basis = frame                # or coordinate (default)
    V = h*sin(x1), 0, 0

    [deform.LABEL]               # kind defaults to LABEL
    kind = conformal
    sigma = ln(c/sin(x1))

    [expect]                     # optional expected classes
    class = proper-torse-forming
    LABEL = recurrent
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from torselab import exprlang as el
from torselab.deform import D_ISOMETRIC, KINDS, Deformation
from torselab.errors import (
    DimensionMismatch,
    ExprError,
    ScenarioError,
    ScenarioNotFound,
    SchemaError,
)
from torselab.exprlang import Expr
from torselab.geometry import Chart, MetricField, VectorField
from torselab.torse import CLASSES

SUFFIX = ".scn"
_SECTIONS = {"scenario", "chart", "params", "let", "metric", "frame", "field", "expect"}
_METRIC_KEY = re.compile(r"g([1-9])([1-9])\Z")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")


@dataclass(frozen=True)
class DeformSpec:
    label: str
    kind: str
    sigma: Expr | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    chart: Chart
    metric: MetricField
    field: VectorField
    frame: tuple[VectorField, ...] | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    deformations: tuple[DeformSpec, ...] = ()
    expected: Mapping[str, str] = field(default_factory=dict)
    description: str = ""
    lets: Mapping[str, Expr] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def parse_expr(self, source: str, where: str = "expression") -> Expr:
        """Parse ``source`` with this scenario's params and lets in scope."""
        allowed = set(self.params) | set(self.lets)
        try:
            e = el.parse(source, params=allowed)
        except ExprError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        e = el.bind(el.substitute(e, self.lets), self.params)
        top = el.max_var_index(e)
        if top > self.dim:
            raise DimensionMismatch(f"{where}: uses x{top} in a {self.dim}-dimensional chart")
        return e

    def deformation(self, spec: DeformSpec) -> Deformation:
        return Deformation(spec.kind, self.metric, self.field, spec.sigma, spec.label)

    def deformation_objects(self) -> list[Deformation]:
        return [self.deformation(s) for s in self.deformations]


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def builtin_names() -> list[str]:
    root = resources.files("torselab") / "scenarios"
    return sorted(p.name[: -len(SUFFIX)] for p in root.iterdir() if p.name.endswith(SUFFIX))


def builtin_source(name: str) -> str:
    path = resources.files("torselab") / "scenarios" / f"{name}{SUFFIX}"
    if not path.is_file():
        raise ScenarioNotFound(f"no built-in scenario named {name!r}")
    return path.read_text(encoding="utf-8")


def load_scenario(ref: str | Path, overrides: Mapping[str, str] | None = None) -> Scenario:
    """Load a built-in by name, or a scenario file by path."""
    ref_s = str(ref)
    path = Path(ref_s)
    if ref_s in builtin_names() and not path.exists():
        text = builtin_source(ref_s)
    elif path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        raise ScenarioNotFound(f"{ref_s!r} is neither a built-in scenario nor a file")
    return parse_scenario(text, overrides=overrides, default_name=path.stem)


def _split_components(raw: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in raw:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


class _Builder:
    def __init__(self, cp: configparser.ConfigParser, overrides: Mapping[str, str]):
        self.cp = cp
        self.overrides = dict(overrides)
        self.params: dict[str, float] = {}
        self.lets: dict[str, Expr] = {}
        self.dim = 0

    def expr(self, source: str, where: str, coords: bool = True) -> Expr:
        allowed = set(self.params) | set(self.lets)
        try:
            e = el.parse(source, params=allowed)
        except ExprError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        e = el.bind(el.substitute(e, self.lets), self.params)
        top = el.max_var_index(e)
        if not coords and top:
            raise SchemaError(f"{where}: must not depend on coordinates")
        if top > self.dim:
            raise DimensionMismatch(f"{where}: uses x{top} in a {self.dim}-dimensional chart")
        return e

    def constant(self, source: str, where: str) -> float:
        e = self.expr(source, where, coords=False)
        try:
            return el.evaluate(e, ())
        except ExprError as exc:
            raise SchemaError(f"{where}: {exc}") from exc

    def section(self, name: str, required: bool = True) -> Mapping[str, str]:
        if not self.cp.has_section(name):
            if required:
                raise SchemaError(f"missing [{name}] section")
            return {}
        return self.cp[name]


def parse_scenario(
    text: str, overrides: Mapping[str, str] | None = None, default_name: str = "scenario"
) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str  # type: ignore[assignment]
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SchemaError(f"malformed scenario file: {exc}") from exc
    for sec in cp.sections():
        if sec not in _SECTIONS and not sec.startswith("deform."):
            raise SchemaError(f"unknown section [{sec}]")

    b = _Builder(cp, overrides or {})
    meta = b.section("scenario", required=False)
    name = meta.get("name", default_name)

    # chart dimension first, so every expression can be dimension-checked
    chart_sec = b.section("chart")
    if "coords" not in chart_sec:
        raise SchemaError("[chart] needs a coords entry")
    names = tuple(chart_sec["coords"].split())
    b.dim = len(names)
    if not 1 <= b.dim <= 9:
        raise SchemaError(f"chart dimension must be in 1..9, got {b.dim}")

    unknown = set(b.overrides)
    for key, raw in b.section("params", required=False).items():
        if not _NAME.match(key):
            raise SchemaError(f"invalid parameter name {key!r}")
        raw = b.overrides.get(key, raw)
        unknown.discard(key)
        b.params[key] = b.constant(raw, f"[params] {key}")
    for key, raw in b.section("let", required=False).items():
        if not _NAME.match(key):
            raise SchemaError(f"invalid let name {key!r}")
        raw = b.overrides.get(key, raw)
        unknown.discard(key)
        b.lets[key] = b.expr(raw, f"[let] {key}")
    if unknown:
        raise SchemaError(f"override names not declared in [params] or [let]: {sorted(unknown)}")

    box = []
    for i in range(1, b.dim + 1):
        key = f"x{i}"
        if key not in chart_sec:
            raise SchemaError(f"[chart] needs an interval for {key}")
        bounds = chart_sec[key].split("..")
        if len(bounds) != 2:
            raise SchemaError(f"[chart] {key}: expected 'lo .. hi'")
        box.append(tuple(b.constant(s, f"[chart] {key}") for s in bounds))
    for key in chart_sec:
        m = re.match(r"x(\d+)\Z", key)
        if m and int(m.group(1)) > b.dim:
            raise DimensionMismatch(f"[chart] interval for {key} in a {b.dim}-dimensional chart")
    chart = Chart(b.dim, names, tuple(box))

    metric = _metric(b)
    frame = _frame(b)
    vfield = _field(b, frame)
    deforms = _deforms(b)
    expected = _expect(b, deforms)
    return Scenario(
        name=name,
        chart=chart,
        metric=metric,
        field=vfield,
        frame=frame,
        params=dict(b.params),
        deformations=deforms,
        expected=expected,
        description=meta.get("description", ""),
        lets=dict(b.lets),
    )


def _metric(b: _Builder) -> MetricField:
    n = b.dim
    entries: dict[tuple[int, int], Expr] = {}
    for key, raw in b.section("metric").items():
        m = _METRIC_KEY.match(key)
        if not m:
            raise SchemaError(f"[metric] unexpected key {key!r}")
        i, j = int(m.group(1)), int(m.group(2))
        if i > n or j > n:
            raise DimensionMismatch(f"[metric] {key} in a {n}-dimensional chart")
        e = b.expr(raw, f"[metric] {key}")
        a = (min(i, j) - 1, max(i, j) - 1)
        if a in entries and entries[a] != e:
            raise SchemaError(f"[metric] g{i}{j} and g{j}{i} differ")
        entries[a] = e
    zero = el.Num(0.0)
    rows = [[entries.get((min(i, j), max(i, j)), zero) for j in range(n)] for i in range(n)]
    return MetricField(tuple(tuple(r) for r in rows))


def _vector(b: _Builder, raw: str, where: str) -> tuple[Expr, ...]:
    parts = _split_components(raw)
    if len(parts) != b.dim:
        raise DimensionMismatch(f"{where}: expected {b.dim} components, got {len(parts)}")
    return tuple(b.expr(s, f"{where}[{k + 1}]") for k, s in enumerate(parts))


def _frame(b: _Builder) -> tuple[VectorField, ...] | None:
    sec = b.section("frame", required=False)
    if not sec:
        return None
    vecs = []
    for a in range(1, b.dim + 1):
        key = f"e{a}"
        if key not in sec:
            raise SchemaError(f"[frame] needs {key}")
        vecs.append(VectorField(_vector(b, sec[key], f"[frame] {key}")))
    extra = set(sec) - {f"e{a}" for a in range(1, b.dim + 1)}
    if extra:
        raise DimensionMismatch(f"[frame] unexpected entries {sorted(extra)}")
    return tuple(vecs)


def _field(b: _Builder, frame) -> VectorField:
    sec = b.section("field")
    if "V" not in sec:
        raise SchemaError("[field] needs V")
    comps = _vector(b, sec["V"], "[field] V")
    basis = sec.get("basis", "coordinate")
    if basis == "coordinate":
        return VectorField(comps)
    if basis != "frame":
        raise SchemaError(f"[field] basis must be 'coordinate' or 'frame', got {basis!r}")
    if frame is None:
        raise SchemaError("[field] basis = frame but no [frame] section")
    n = b.dim
    out = []
    for k in range(n):
        terms = [
            el.mul(comps[a], frame[a].components[k])
            for a in range(n)
            if not _zero(comps[a]) and not _zero(frame[a].components[k])
        ]
        out.append(el.total(terms))
    return VectorField(tuple(out))


def _zero(e: Expr) -> bool:
    return isinstance(e, el.Num) and e.value == 0.0


def _deforms(b: _Builder) -> tuple[DeformSpec, ...]:
    specs = []
    for sec in b.cp.sections():
        if not sec.startswith("deform."):
            continue
        label = sec[len("deform.") :]
        body = b.cp[sec]
        kind = body.get("kind", label)
        if kind not in KINDS:
            raise SchemaError(f"[{sec}] unknown kind {kind!r}; choose from {', '.join(KINDS)}")
        extra = set(body) - {"kind", "sigma"}
        if extra:
            raise SchemaError(f"[{sec}] unexpected keys {sorted(extra)}")
        sigma = None
        if kind == D_ISOMETRIC:
            if "sigma" in body:
                raise SchemaError(f"[{sec}] d-isometric takes no sigma")
        else:
            if "sigma" not in body:
                raise SchemaError(f"[{sec}] {kind} needs sigma")
            sigma = b.expr(body["sigma"], f"[{sec}] sigma")
        specs.append(DeformSpec(label, kind, sigma))
    return tuple(specs)


def _expect(b: _Builder, deforms) -> dict[str, str]:
    sec = b.section("expect", required=False)
    labels = {d.label for d in deforms}
    out = {}
    for key, val in sec.items():
        if key != "class" and key not in labels:
            raise SchemaError(f"[expect] {key!r} is neither 'class' nor a deformation label")
        if val not in CLASSES:
            raise SchemaError(f"[expect] {key}: unknown class {val!r}")
        out[key] = val
    return out


def check_file(path: str | Path) -> Scenario:
    """Schema validation only; raises ScenarioError subclasses on failure."""
    try:
        return load_scenario(path)
    except ScenarioError:
        raise
    except (ValueError, OSError) as exc:
        raise SchemaError(str(exc)) from exc

