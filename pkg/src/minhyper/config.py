"""Line-oriented run configuration.

Format::

    # comment
    [family]
    family = example12
    c1 = 0.1
    c2 = 1.0

    [grid.v]
    count = 11

    [checks]
    run = norm, H, K, lambda

Sections: [family], [grid.u], [grid.v], [grid.z], [checks], [tolerances],
[output].  Keys are case-sensitive; unknown or repeated keys are errors
reported with their line number.  The stdlib ``configparser`` is not used
because it does not keep line numbers for validation after parsing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import families as fam
from .errors import ConfigError, ExprError, MinHyperError
from .kernel import DiffConfig
from .phase import solve_phase, validity_interval
from .scan import CHECKS, DEFAULT_CHECKS, AxisGrid, GridSpec

__all__ = ["FAMILIES", "RunConfig", "build_immersion", "parse_config", "load_config"]

FAMILIES = ("example11", "example12", "cartan", "expr")
SECTIONS = ("family", "grid.u", "grid.v", "grid.z", "checks", "tolerances", "output")
_BASIS_KEYS = tuple(f"C{i}" for i in range(1, 6))
_EXPR_KEYS = tuple(f"x{i}" for i in range(1, 6))
_FAMILY_KEYS = {
    "example11": {"family", *_BASIS_KEYS},
    "example12": {"family", "c1", "c2", "cells", *_BASIS_KEYS},
    "cartan": {"family", "pole_tol"},
    "expr": {"family", "label", "expected_lambda", *_EXPR_KEYS},
}
_GRID_KEYS = {"min", "max", "count", "endpoint"}
_CHECK_KEYS = {"run", "jets", "base_step", "frame_step", "richardson", "degenerate_gap", "seed", "random_points", "workers"}
_OUTPUT_KEYS = {"csv", "json", "record_time"}
_TWO_PI_SQRT2 = 2 * math.pi / math.sqrt(2)


@dataclass(frozen=True)
class Entry:
    value: str
    line: int


@dataclass
class RunConfig:
    family: str
    params: dict[str, Any]
    grid: GridSpec
    checks: tuple[str, ...]
    tolerances: dict[str, float]
    output: dict[str, Any]
    diff: DiffConfig
    seed: int = 0
    random_points: int = 0
    workers: int = 1
    sections: dict[str, dict[str, Entry]] = field(default_factory=dict, repr=False)

    def echo(self) -> dict:
        """Deterministic summary of the run for report headers."""
        return {
            "family": self.family,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "grid": self.grid.as_dict(),
            "checks": list(self.checks),
            "tolerances": dict(self.tolerances),
            "diff": {
                "jets": "analytic" if self.diff.analytic else "fd",
                "base_step": self.diff.base_step,
                "frame_step": self.diff.frame_step,
                "richardson": self.diff.richardson,
                "degenerate_gap": self.diff.degenerate_gap,
            },
            "seed": self.seed,
            "random_points": self.random_points,
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [float(c) for c in v]
    if isinstance(v, (list, tuple)):
        return [_jsonable(c) for c in v]
    return v


def _split_sections(text: str) -> dict[str, dict[str, Entry]]:
    sections: dict[str, dict[str, Entry]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(lineno, f"malformed section header {line!r}")
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ConfigError(lineno, f"unknown section [{name}]")
            if name in sections:
                raise ConfigError(lineno, f"duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(lineno, f"expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(lineno, "key outside of any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(lineno, "empty key")
        if key in sections[current]:
            raise ConfigError(lineno, f"duplicate key {key!r} in [{current}] (first at line {sections[current][key].line})")
        sections[current][key] = Entry(value, lineno)
    return sections


def _float(e: Entry, what: str) -> float:
    try:
        out = float(e.value)
    except ValueError:
        raise ConfigError(e.line, f"{what} must be a number, got {e.value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(e.line, f"{what} must be finite")
    return out


def _int(e: Entry, what: str) -> int:
    try:
        return int(e.value)
    except ValueError:
        raise ConfigError(e.line, f"{what} must be an integer, got {e.value!r}") from None


def _bool(e: Entry, what: str) -> bool:
    v = e.value.lower()
    if v in ("true", "on", "yes", "1"):
        return True
    if v in ("false", "off", "no", "0"):
        return False
    raise ConfigError(e.line, f"{what} must be a boolean, got {e.value!r}")


def _vector(e: Entry, what: str) -> np.ndarray:
    parts = [p.strip() for p in e.value.split(",")]
    try:
        vec = np.array([float(p) for p in parts])
    except ValueError:
        raise ConfigError(e.line, f"{what} must be five comma-separated numbers") from None
    if vec.shape != (5,):
        raise ConfigError(e.line, f"{what} must have five components, got {len(parts)}")
    return vec


def _reject_unknown(section: str, entries: dict[str, Entry], allowed: set[str], extra_prefix: Optional[str] = None) -> None:
    for key, e in entries.items():
        if key in allowed or (extra_prefix and key.startswith(extra_prefix) and len(key) > len(extra_prefix)):
            continue
        raise ConfigError(e.line, f"unknown key {key!r} in [{section}]")


def _family_section(sections) -> tuple[str, dict[str, Any]]:
    entries = sections.get("family")
    if not entries or "family" not in entries:
        raise ConfigError(0, "missing [family] section with a 'family' key")
    name_entry = entries["family"]
    name = name_entry.value
    if name not in FAMILIES:
        raise ConfigError(name_entry.line, f"unknown family {name!r} (expected one of {', '.join(FAMILIES)})")
    _reject_unknown("family", entries, _FAMILY_KEYS[name], "const." if name == "expr" else None)
    params: dict[str, Any] = {}
    for key, e in entries.items():
        if key == "family":
            continue
        if key in _BASIS_KEYS:
            params[key] = _vector(e, key)
        elif key in ("c1", "c2", "pole_tol"):
            params[key] = _float(e, key)
        elif key == "cells":
            params[key] = _int(e, key)
        elif key.startswith("const."):
            params[key] = _float(e, key)
        else:
            params[key] = e.value
    if name == "expr":
        missing = [k for k in _EXPR_KEYS if k not in params]
        if missing:
            raise ConfigError(name_entry.line, f"expr family needs keys {', '.join(missing)}")
    if name == "example12":
        params.setdefault("c1", 0.1)
        params.setdefault("c2", 1.0)
    return name, params


def _default_axes(family: str, params: dict[str, Any]) -> dict[str, AxisGrid]:
    if family == "example11":
        return {
            "u": AxisGrid(0.0, _TWO_PI_SQRT2, 11, endpoint=False),
            "v": AxisGrid(0.0, _TWO_PI_SQRT2, 11, endpoint=False),
            "z": AxisGrid(-2.0, 2.0, 11),
        }
    if family == "example12":
        lo, hi = validity_interval(params["c1"], params["c2"])
        m = 0.01 * (hi - lo)
        return {
            "u": AxisGrid(-math.pi, math.pi, 11),
            "v": AxisGrid(lo + m, hi - m, 11),
            "z": AxisGrid(-2.0, 2.0, 11),
        }
    if family == "cartan":
        return {
            "u": AxisGrid(0.5, math.pi - 0.5, 11),
            "v": AxisGrid(0.0, 2 * math.pi, 11, endpoint=False),
            "z": AxisGrid(0.0, math.pi, 11, endpoint=False),
        }
    return {}


def _grid(sections, family: str, params: dict[str, Any]) -> GridSpec:
    defaults = _default_axes(family, params)
    axes = {}
    for name in ("u", "v", "z"):
        entries = sections.get(f"grid.{name}", {})
        _reject_unknown(f"grid.{name}", entries, _GRID_KEYS)
        base = defaults.get(name)
        if base is None:
            missing = [k for k in ("min", "max") if k not in entries]
            if missing:
                raise ConfigError(0, f"[grid.{name}] needs {' and '.join(missing)} for family {family}")
            base = AxisGrid(0.0, 1.0, 11)
        lo = _float(entries["min"], "min") if "min" in entries else base.min
        hi = _float(entries["max"], "max") if "max" in entries else base.max
        count = _int(entries["count"], "count") if "count" in entries else base.count
        endpoint = _bool(entries["endpoint"], "endpoint") if "endpoint" in entries else base.endpoint
        line = next(iter(entries.values())).line if entries else 0
        if count < 2:
            raise ConfigError(entries["count"].line, "count must be at least 2")
        if not lo < hi:
            raise ConfigError(line, f"[grid.{name}] needs min < max")
        axes[name] = AxisGrid(lo, hi, count, endpoint)
    return GridSpec(axes["u"], axes["v"], axes["z"])


def _checks(sections) -> tuple[tuple[str, ...], DiffConfig, int, int, int]:
    entries = sections.get("checks", {})
    _reject_unknown("checks", entries, _CHECK_KEYS)
    checks: tuple[str, ...] = DEFAULT_CHECKS
    if "run" in entries:
        e = entries["run"]
        names = tuple(n.strip() for n in e.value.split(",") if n.strip())
        for n in names:
            if n not in CHECKS:
                raise ConfigError(e.line, f"unknown check {n!r}")
        if len(set(names)) != len(names):
            raise ConfigError(e.line, "a check is listed twice")
        checks = names
    kw: dict[str, Any] = {}
    if "jets" in entries:
        e = entries["jets"]
        if e.value not in ("fd", "analytic"):
            raise ConfigError(e.line, "jets must be 'fd' or 'analytic'")
        kw["analytic"] = e.value == "analytic"
    for key in ("base_step", "frame_step", "degenerate_gap"):
        if key in entries:
            kw[key] = _float(entries[key], key)
            if kw[key] <= 0:
                raise ConfigError(entries[key].line, f"{key} must be positive")
    if "richardson" in entries:
        kw["richardson"] = _bool(entries["richardson"], "richardson")
    seed = _int(entries["seed"], "seed") if "seed" in entries else 0
    random_points = _int(entries["random_points"], "random_points") if "random_points" in entries else 0
    workers = _int(entries["workers"], "workers") if "workers" in entries else 1
    if random_points < 0:
        raise ConfigError(entries["random_points"].line, "random_points must be non-negative")
    if workers < 1:
        raise ConfigError(entries["workers"].line, "workers must be at least 1")
    return checks, DiffConfig(**kw), seed, random_points, workers


def _tolerances(sections) -> dict[str, float]:
    out = {}
    for key, e in sections.get("tolerances", {}).items():
        check = key.split(":", 1)[0]
        if check not in CHECKS:
            raise ConfigError(e.line, f"tolerance for unknown check {check!r}")
        out[key] = _float(e, key)
        if out[key] < 0:
            raise ConfigError(e.line, "tolerances must be non-negative")
    return out


def _output(sections) -> dict[str, Any]:
    entries = sections.get("output", {})
    _reject_unknown("output", entries, _OUTPUT_KEYS)
    out: dict[str, Any] = {"csv": None, "json": None, "record_time": False}
    for key in ("csv", "json"):
        if key in entries:
            out[key] = entries[key].value
    if "record_time" in entries:
        out["record_time"] = _bool(entries["record_time"], "record_time")
    return out


def parse_config(text: str) -> RunConfig:
    sections = _split_sections(text)
    family, params = _family_section(sections)
    try:
        grid = _grid(sections, family, params)
    except MinHyperError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(sections["family"]["family"].line, str(exc)) from exc
    checks, diff, seed, random_points, workers = _checks(sections)
    cfg = RunConfig(
        family=family,
        params=params,
        grid=grid,
        checks=checks,
        tolerances=_tolerances(sections),
        output=_output(sections),
        diff=diff,
        seed=seed,
        random_points=random_points,
        workers=workers,
        sections=sections,
    )
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_immersion(cfg: RunConfig) -> fam.Immersion:
    """Construct the configured immersion; expression errors become ConfigError."""
    p = cfg.params
    basis = [p[k] for k in _BASIS_KEYS if k in p]
    if basis and len(basis) != 5:
        line = cfg.sections["family"][next(k for k in _BASIS_KEYS if k in p)].line
        raise ConfigError(line, "basis overrides need all of C1..C5")
    if cfg.family == "example11":
        return fam.make_example11(fam.Example11Params(tuple(basis)) if basis else None)
    if cfg.family == "example12":
        kw: dict[str, Any] = {"c1": p["c1"], "c2": p["c2"]}
        if basis:
            kw["C"] = tuple(basis)
        if "cells" in p:
            kw["phase"] = solve_phase(p["c1"], p["c2"], cells=p["cells"])
        return fam.make_example12(fam.Example12Params(**kw))
    if cfg.family == "cartan":
        return fam.make_cartan_tube(p.get("pole_tol", 1e-6))
    consts = {k[len("const."):]: v for k, v in p.items() if k.startswith("const.")}
    entries = cfg.sections["family"]
    expected = None
    if "expected_lambda" in p:
        expected = _expr_scalar(p["expected_lambda"], consts, entries["expected_lambda"].line)
    try:
        return fam.make_expr_immersion(
            [p[k] for k in _EXPR_KEYS],
            consts,
            label=p.get("label", "expr"),
            expected_lambda=expected,
        )
    except ExprError as exc:
        line = _line_of_bad_component(p, consts, entries)
        raise ConfigError(line, str(exc)) from exc


def _expr_scalar(src: str, consts: dict[str, float], line: int):
    from . import expr as ex

    try:
        node = ex.compile_expr(src)
        ex.evaluate(node, ex.Env(0.0, 0.0, 0.0, consts))
    except ExprError as exc:
        raise ConfigError(line, f"expected_lambda: {exc}") from exc

    def fn(u, v, z):
        return float(ex.evaluate(node, ex.Env(u, v, z, consts)))

    return fn


def _line_of_bad_component(p, consts, entries) -> int:
    from . import expr as ex

    for k in _EXPR_KEYS:
        try:
            ex.evaluate(ex.compile_expr(p[k]), ex.Env(0.0, 0.0, 0.0, consts))
        except ExprError:
            return entries[k].line
    return entries["family"].line
