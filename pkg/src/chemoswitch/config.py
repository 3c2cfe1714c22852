"""Plain ``key = value`` run configuration with sections.

Sections: ``[params]``, ``[grid]``, ``[ic]``, ``[output]``, ``[experiment]``.
``#`` starts a comment. Unknown sections or keys, duplicates and invalid
values are errors reported with their line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Field, Grid, Params, make_grid
from .limit import SCHEMES

MODES = ("run-full", "run-limit", "gamma-sweep", "blowup-probe", "rescale-check")
IC_KINDS = ("gaussian", "constant", "from-file")


class ConfigError(ValueError):
    pass


def _positive(x):
    if not x > 0:
        raise ValueError("must be positive")
    return x


def _nonneg(x):
    if not x >= 0:
        raise ValueError("must be non-negative")
    return x


def _float(s: str) -> float:
    x = float(s)
    if math.isnan(x):
        raise ValueError("is NaN")
    return x


def _int(s: str) -> int:
    return int(s)


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    vals = tuple(_float(p) for p in s.split(",") if p.strip())
    if not vals:
        raise ValueError("empty list")
    for v in vals:
        _positive(v)
    return vals


def _choice(options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s

    return parse


def _chain(*fns):
    def parse(s):
        val = s
        for fn in fns:
            val = fn(val)
        return val

    return parse


def _in_unit(x):
    if not 0 < x <= 1:
        raise ValueError("must lie in (0, 1]")
    return x


def _at_least_two(s):
    n = _int(s)
    if n < 2:
        raise ValueError("must be >= 2")
    return n


def _pos_float(s):
    return _positive(_float(s))


def _pos_int(s):
    return _positive(_int(s))


# section -> key -> (parser, default); None default means "unset"
SCHEMA: dict[str, dict[str, tuple]] = {
    "params": {
        "d_w": (_pos_float, 1.0),
        "alpha": (_pos_float, 1.0),
        "theta": (_pos_float, 1.0),
        "gamma": (_pos_float, 1.0),
        "dt": (_pos_float, 1e-3),
        "t_end": (_pos_float, 1.0),
        "cfl_safety": (_chain(_float, _in_unit), 0.25),
        "diag_every": (_pos_int, 1),
    },
    "grid": {
        "nx": (_at_least_two, 64),
        "ny": (_at_least_two, 64),
        "lx": (_pos_float, 1.0),
        "ly": (_pos_float, 1.0),
    },
    "ic": {
        "kind": (_choice(IC_KINDS), "gaussian"),
        "center_x": (_float, None),
        "center_y": (_float, None),
        "width": (_pos_float, 0.1),
        "mass": (_pos_float, None),
        "mass_fraction": (_pos_float, 0.5),
        "value": (_chain(_float, _nonneg), None),
        "path": (str, None),
        "w_path": (str, None),
        "w_value": (_chain(_float, _nonneg), 0.0),
        "noise": (_chain(_float, _nonneg), 0.0),
    },
    "output": {
        "dir": (str, "out"),
        "snapshot_every": (_chain(_int, _nonneg), 0),
    },
    "experiment": {
        "gammas": (_floats, None),
        "blowup_threshold": (_pos_float, None),
        "limit_scheme": (_choice(SCHEMES), None),
        "saturation_factor": (_pos_float, 10.0),
        "threshold_factor": (_pos_float, 1e6),
        "t_factor": (_pos_float, 2.0),
        "max_steps": (_pos_int, 200_000),
        "workers": (_pos_int, 1),
        "self_compare": (_bool, False),
        "levels": (_at_least_two, 2),
    },
}

# defaults that differ by mode, applied before the file's own values
MODE_DEFAULTS = {
    "gamma-sweep": {
        ("grid", "nx"): 128, ("grid", "ny"): 128, ("params", "diag_every"): 10,
        ("experiment", "gammas"): (1.0, 10.0, 1e2, 1e3, 1e4), ("experiment", "limit_scheme"): "relaxed",
    },
    "blowup-probe": {
        ("grid", "nx"): 256, ("grid", "ny"): 256, ("ic", "mass_fraction"): 1.5, ("ic", "width"): 0.05,
        ("ic", "center_x"): 0.0, ("ic", "center_y"): 0.0,
        ("experiment", "gammas"): (1.0, 10.0, 1e2, 1e3),
    },
    "rescale-check": {
        ("params", "dt"): 1e-3, ("params", "t_end"): 0.2, ("ic", "width"): 0.15,
    },
}


@dataclass(frozen=True)
class ICSpec:
    kind: str = "gaussian"
    center: tuple[float, float] | None = None
    width: float = 0.1
    mass: float | None = None
    mass_fraction: float = 0.5
    value: float | None = None
    path: str | None = None
    w_path: str | None = None
    w_value: float = 0.0
    noise: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    mode: str
    params: Params
    grid: Grid
    ic: ICSpec
    out_dir: str = "out"
    snapshot_every: int = 0
    gammas: tuple[float, ...] | None = None
    blowup_threshold: float | None = None
    limit_scheme: str = "implicit"
    saturation_factor: float = 10.0
    threshold_factor: float = 1e6
    t_factor: float = 2.0
    max_steps: int = 200_000
    workers: int = 1
    self_compare: bool = False
    levels: int = 2
    values: dict = field(default_factory=dict, compare=False)

    def echo(self) -> list[str]:
        """Every setting, defaults included, as ``section.key = value`` lines."""
        out = [f"mode = {self.mode}"]
        for (section, key), val in sorted(self.values.items()):
            if isinstance(val, tuple):
                val = ",".join(repr(v) for v in val)
            out.append(f"{section}.{key} = {val}")
        return out


def parse_config(text: str, mode: str = "run-full") -> RunConfig:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    values = {(s, k): d for s, keys in SCHEMA.items() for k, (_, d) in keys.items()}
    values.update(MODE_DEFAULTS.get(mode, {}))
    seen: dict[tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of any section")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        if (section, key) in seen:
            raise ConfigError(f"line {lineno}: duplicate key {section}.{key} (first set on line {seen[(section, key)]})")
        seen[(section, key)] = lineno
        parser = SCHEMA[section][key][0]
        try:
            values[(section, key)] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {section}.{key} = {val!r}: {exc}") from None

    def where(section, key):
        return f"line {seen[(section, key)]}: " if (section, key) in seen else ""

    ic_kind = values[("ic", "kind")]
    if ic_kind == "constant" and values[("ic", "value")] is None:
        raise ConfigError("ic.value is required when ic.kind = constant")
    if ic_kind == "from-file" and values[("ic", "path")] is None:
        raise ConfigError("ic.path is required when ic.kind = from-file")
    if mode in ("gamma-sweep", "blowup-probe", "rescale-check") and ic_kind != "gaussian":
        raise ConfigError(f"{where('ic', 'kind')}mode {mode} needs ic.kind = gaussian")
    if ("ic", "mass") in seen and ("ic", "mass_fraction") in seen:
        raise ConfigError(f"{where('ic', 'mass')}set either ic.mass or ic.mass_fraction, not both")

    p = {k: values[("params", k)] for k in SCHEMA["params"]}
    try:
        params = Params(**p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = make_grid(*(values[("grid", k)] for k in ("nx", "ny", "lx", "ly")))

    cx, cy = values[("ic", "center_x")], values[("ic", "center_y")]
    if (cx is None) != (cy is None):
        raise ConfigError("set both ic.center_x and ic.center_y, or neither")
    ic = ICSpec(
        kind=ic_kind,
        center=None if cx is None else (cx, cy),
        width=values[("ic", "width")],
        mass=values[("ic", "mass")],
        mass_fraction=values[("ic", "mass_fraction")],
        value=values[("ic", "value")],
        path=values[("ic", "path")],
        w_path=values[("ic", "w_path")],
        w_value=values[("ic", "w_value")],
        noise=values[("ic", "noise")],
    )
    scheme = values[("experiment", "limit_scheme")] or "implicit"
    values[("experiment", "limit_scheme")] = scheme
    return RunConfig(
        mode=mode,
        params=params,
        grid=grid,
        ic=ic,
        out_dir=values[("output", "dir")],
        snapshot_every=values[("output", "snapshot_every")],
        gammas=values[("experiment", "gammas")],
        blowup_threshold=values[("experiment", "blowup_threshold")],
        limit_scheme=scheme,
        saturation_factor=values[("experiment", "saturation_factor")],
        threshold_factor=values[("experiment", "threshold_factor")],
        t_factor=values[("experiment", "t_factor")],
        max_steps=values[("experiment", "max_steps")],
        workers=values[("experiment", "workers")],
        self_compare=values[("experiment", "self_compare")],
        levels=values[("experiment", "levels")],
        values=values,
    )


def target_mass(ic: ICSpec, params: Params) -> float:
    if ic.mass is not None:
        return ic.mass
    return ic.mass_fraction * 4.0 * math.pi * (1.0 + params.theta) * params.d_w


def build_initial(config: RunConfig, seed: int = 0) -> tuple[Field, Field]:
    """Initial total density n0 and chemoattractant w0 described by ``config.ic``."""
    from .experiments import gaussian_density
    from .output import read_snapshot

    ic, grid = config.ic, config.grid
    if ic.kind == "gaussian":
        n0 = gaussian_density(grid, target_mass(ic, config.params), ic.width, ic.center)
    elif ic.kind == "constant":
        n0 = Field.constant(grid, ic.value)
    else:
        n0, _ = read_snapshot(ic.path, grid.lx, grid.ly)
        if n0.grid != grid:
            raise ConfigError(f"{ic.path}: snapshot grid {n0.grid.nx}x{n0.grid.ny} does not match [grid]")
    if ic.noise > 0:
        rng = np.random.default_rng(seed)
        mass = n0.values.sum()
        vals = n0.values * (1.0 + ic.noise * rng.uniform(-1.0, 1.0, n0.values.size))
        vals = np.clip(vals, 0.0, None)
        if vals.sum() > 0:
            vals *= mass / vals.sum()
        n0 = Field(grid, vals)
    if ic.w_path is not None:
        w0, _ = read_snapshot(ic.w_path, grid.lx, grid.ly)
        if w0.grid != grid:
            raise ConfigError(f"{ic.w_path}: snapshot grid does not match [grid]")
    else:
        w0 = Field.constant(grid, ic.w_value)
    return n0, w0
