"""Flat key = value run configuration and field realization.

The config format is intentionally trivial: one ``section.key = value``
pair per line, ``#`` starts a comment, blank lines ignored.  Field-valued
entries (initial data, target, control) use a small spec grammar:

    constant:<c>
    cosine:<a>,<kx>,<ky>[,<offset>]   a cos(2 pi kx x/Lx) cos(2 pi ky y/Ly) + offset
    noise:<amp>,<smooth_passes>       seeded uniform noise in [-amp, amp],
                                      then 3x3 periodic averaging passes
    file:<path>                       field snapshot file

The target additionally accepts ``twin:<control-spec>``: the target
trajectory is manufactured by a forward solve driven by the given
(time-constant) control, which makes the recovery experiment a
one-command reproduction.

Noise realization derives a per-field RNG stream from (seed, role) so two
noise fields in one config are independent but every run with the same
seed is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .control import ControlField
from .errors import FormatError, ParseError, SupportTooLarge, SupportUnresolved, ValidationError
from .fieldio import read_snapshot
from .forward import InitData, ModelParams, solve_state
from .grid import Grid
from .kernel import Kernel, build_kernel

_ROLE_STREAMS = {
    "init.m0": 1,
    "init.phi0": 2,
    "control.theta": 3,
    "target.phi_d": 4,
    "twin": 5,
}


@dataclass(frozen=True)
class RunConfig:
    nx: int
    ny: int
    Lx: float
    Ly: float
    T: float
    dt: float
    beta: float
    alpha: float
    radius: float
    theta_min: float
    theta_max: float
    delta: float
    theta_spec: str
    m0_spec: str
    phi0_spec: str
    phi_d_spec: str | None
    max_iters: int
    step0: float
    shrink: float
    c1: float
    tol: float | None
    snapshot_stride: int
    out_dir: str
    seed: int


_SCHEMA: dict[str, tuple] = {
    # key: (attr, type, required, default factory taking the raw dict)
    "grid.nx": ("nx", int, True, None),
    "grid.ny": ("ny", int, True, None),
    "grid.Lx": ("Lx", float, True, None),
    "grid.Ly": ("Ly", float, True, None),
    "time.T": ("T", float, True, None),
    "time.dt": ("dt", float, True, None),
    "model.beta": ("beta", float, True, None),
    "model.alpha": ("alpha", float, True, None),
    "kernel.radius": ("radius", float, False, None),  # default 0.1 min(Lx, Ly)
    "control.theta_min": ("theta_min", float, False, 0.0),
    "control.theta_max": ("theta_max", float, False, 1.0),
    "control.delta": ("delta", float, False, 1e-3),
    "control.theta": ("theta_spec", str, False, "constant:0"),
    "init.m0": ("m0_spec", str, True, None),
    "init.phi0": ("phi0_spec", str, True, None),
    "target.phi_d": ("phi_d_spec", str, False, None),
    "opt.max_iters": ("max_iters", int, False, 100),
    "opt.step0": ("step0", float, False, 1.0),
    "opt.shrink": ("shrink", float, False, 0.5),
    "opt.c1": ("c1", float, False, 1e-4),
    "opt.tol": ("tol", float, False, None),
    "io.snapshot_stride": ("snapshot_stride", int, False, 100),
    "io.out_dir": ("out_dir", str, False, "out"),
    "seed": ("seed", int, False, 0),
}


def parse_config_text(text: str) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}")
        key, value = body.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}")
        raw[key] = value

    for key in raw:
        if key not in _SCHEMA:
            raise ValidationError(key, "unknown key")

    kwargs = {}
    for key, (attr, typ, required, default) in _SCHEMA.items():
        if key in raw:
            try:
                kwargs[attr] = typ(raw[key])
            except ValueError:
                raise ValidationError(key, f"expected {typ.__name__}, got {raw[key]!r}")
        elif required:
            raise ValidationError(key, "required")
        else:
            kwargs[attr] = default
    if kwargs["radius"] is None:
        kwargs["radius"] = 0.1 * min(kwargs["Lx"], kwargs["Ly"])
    return RunConfig(**kwargs)


def _validate(cfg: RunConfig) -> None:
    if cfg.nx < 4 or cfg.ny < 4:
        raise ValidationError("grid.nx", "grid needs nx >= 4 and ny >= 4")
    if cfg.Lx <= 0 or cfg.Ly <= 0:
        raise ValidationError("grid.Lx", "edge lengths must be positive")
    if cfg.beta < 0:
        raise ValidationError("model.beta", "requires beta >= 0")
    if cfg.alpha < 0:
        raise ValidationError("model.alpha", "requires alpha >= 0")
    if cfg.T <= 0 or cfg.dt <= 0:
        raise ValidationError("time.dt", "T and dt must be positive")
    nt = round(cfg.T / cfg.dt)
    if nt < 1 or abs(nt * cfg.dt - cfg.T) > 1e-12 * max(1.0, cfg.T):
        raise ValidationError("time.dt", "T must be an integer multiple of dt")
    if cfg.theta_min > cfg.theta_max:
        raise ValidationError("control.theta_min", "requires theta_min <= theta_max")
    if cfg.delta < 0:
        raise ValidationError("control.delta", "requires delta >= 0")
    grid = Grid(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)
    if 2.0 * cfg.radius >= min(cfg.Lx, cfg.Ly):
        raise ValidationError("kernel.radius", "support must satisfy 2 r < min(Lx, Ly)")
    if cfg.radius < 3.0 * max(grid.hx, grid.hy):
        raise ValidationError("kernel.radius", "support must span at least 3 cells")
    if cfg.max_iters < 0 or cfg.step0 <= 0 or not (0 < cfg.shrink < 1) or cfg.c1 <= 0:
        raise ValidationError("opt.step0", "bad optimizer settings")


def load_config(path) -> RunConfig:
    """Parse, validate, and check the realized initial data for admissibility."""
    with open(path, "r", encoding="utf-8") as fh:
        cfg = parse_config_text(fh.read())
    _validate(cfg)
    grid = Grid(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)
    m0 = realize_field(grid, cfg.m0_spec, cfg.seed, "init.m0")
    phi0 = realize_field(grid, cfg.phi0_spec, cfg.seed, "init.phi0")
    try:
        InitData(m0=m0, phi0=phi0)
    except ValueError as exc:
        raise ValidationError("init.m0", str(exc))
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; load(serialize(load(p))) == load(p)."""
    attr_to_key = {attr: key for key, (attr, *_rest) in _SCHEMA.items()}
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{attr_to_key[f.name]} = {value!r}" if isinstance(value, float)
                     else f"{attr_to_key[f.name]} = {value}")
    return "\n".join(lines) + "\n"


def _rng_for(seed: int, role: str) -> np.random.Generator:
    return np.random.default_rng([seed, _ROLE_STREAMS.get(role, 9)])


def realize_field(grid: Grid, spec: str, seed: int, role: str) -> np.ndarray:
    """Build a field from a spec string."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "constant":
            return np.full(grid.shape, float(rest))
        if kind == "cosine":
            parts = [float(v) for v in rest.split(",")]
            if len(parts) == 3:
                a, kx, ky = parts
                off = 0.0
            elif len(parts) == 4:
                a, kx, ky, off = parts
            else:
                raise ValueError("cosine needs a,kx,ky[,offset]")
            X, Y = grid.cell_centers()
            return (
                a
                * np.cos(2.0 * np.pi * kx * X / grid.Lx)
                * np.cos(2.0 * np.pi * ky * Y / grid.Ly)
                + off
            )
        if kind == "noise":
            amp_s, passes_s = rest.split(",")
            amp, passes = float(amp_s), int(passes_s)
            f = _rng_for(seed, role).uniform(-amp, amp, size=grid.shape)
            for _ in range(passes):
                acc = np.zeros_like(f)
                for sy in (-1, 0, 1):
                    for sx in (-1, 0, 1):
                        acc += np.roll(f, (sy, sx), axis=(0, 1))
                f = acc / 9.0
            return f
        if kind == "file":
            nx, ny, _t, values = read_snapshot(rest)
            if (ny, nx) != grid.shape:
                raise ValueError(
                    f"snapshot is {nx}x{ny}, grid is {grid.nx}x{grid.ny}"
                )
            return values
    except (ValueError, OSError, FormatError) as exc:
        raise ValidationError(role, f"bad field spec {spec!r}: {exc}")
    raise ValidationError(role, f"unknown field spec kind {kind!r}")


@dataclass(frozen=True)
class Problem:
    """Everything realized and ready to run."""

    cfg: RunConfig
    grid: Grid
    kernel: Kernel
    params: ModelParams
    init: InitData
    theta: np.ndarray               # (nt, ny, nx) control from the config
    phi_d: np.ndarray | None        # (nt, ny, nx) target slices, or None
    theta_star: np.ndarray | None   # twin-experiment ground truth, if any

    def control(self, theta: np.ndarray | None = None) -> ControlField:
        return ControlField(
            theta=self.theta if theta is None else theta,
            theta_min=self.cfg.theta_min,
            theta_max=self.cfg.theta_max,
        )


def build_problem(cfg: RunConfig, need_target: bool = False) -> Problem:
    grid = Grid(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)
    try:
        kernel = build_kernel(grid, cfg.radius)
    except (SupportTooLarge, SupportUnresolved) as exc:
        raise ValidationError("kernel.radius", str(exc))
    params = ModelParams(
        grid=grid, kernel=kernel, beta=cfg.beta, alpha=cfg.alpha, T=cfg.T, dt=cfg.dt
    )
    m0 = realize_field(grid, cfg.m0_spec, cfg.seed, "init.m0")
    phi0 = realize_field(grid, cfg.phi0_spec, cfg.seed, "init.phi0")
    init = InitData(m0=m0, phi0=phi0)

    theta0 = realize_field(grid, cfg.theta_spec, cfg.seed, "control.theta")
    theta = np.broadcast_to(theta0, (params.nt, *grid.shape)).copy()

    phi_d = None
    theta_star = None
    if cfg.phi_d_spec is not None:
        kind, _, rest = cfg.phi_d_spec.partition(":")
        if kind == "twin":
            star0 = realize_field(grid, rest, cfg.seed, "twin")
            theta_star = np.broadcast_to(star0, (params.nt, *grid.shape)).copy()
            traj = solve_state(init, theta_star, params)
            phi_d = traj.phi[1:].copy()
        else:
            pd0 = realize_field(grid, cfg.phi_d_spec, cfg.seed, "target.phi_d")
            phi_d = np.broadcast_to(pd0, (params.nt, *grid.shape)).copy()
    elif need_target:
        raise ValidationError("target.phi_d", "required for optimization")

    return Problem(
        cfg=cfg,
        grid=grid,
        kernel=kernel,
        params=params,
        init=init,
        theta=theta,
        phi_d=phi_d,
        theta_star=theta_star,
    )


def coarsened(cfg: RunConfig, max_n: int = 32, max_nt: int = 100) -> RunConfig:
    """Shrink grid/time for budgeted verification sub-runs, preserving dt scaling."""
    nx = min(cfg.nx, max_n)
    ny = min(cfg.ny, max_n)
    nt = min(round(cfg.T / cfg.dt), max_nt)
    return replace(cfg, nx=nx, ny=ny, T=nt * cfg.dt)
