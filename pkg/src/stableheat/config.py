"""Experiment configuration: INI file parsing, validation, overrides.

Format is key/value with nested sections:

    [grid]
    L = 1.0
    nx = 48
    T = 0.1
    nt = 160

    [noise]
    alpha = 1.3
    K = 1.0
    c_plus = 0.5
    c_minus = 0.5
    eps = 0.01
    small_jump_mode = gaussian

    [coeff]
    family = power
    beta = 0.5
    n = 16

    [ic]
    family = sine
    k = 1

    [experiment]
    p_list = 1.5
    n_list = 4, 16, 64, 256
    deltas = 8dt, 4dt, 2dt, 1dt
    shifts = 1dx, 2dx, 4dx
    replicas = 100
    master_seed = 1234
    output_dir = out
    regime = theorem-2.5
    workers = 1

Every value has the default shown above; deltas/shifts accept either plain
numbers or "<int>dt"/"<int>dx" tokens so grid-multiple invariants hold
exactly.  Command-line flags override file values; the resolved config is
recorded in the run manifest.
"""

import configparser
from dataclasses import dataclass, field

from .coefficients import CoefficientSpec
from .errors import ConfigurationError
from .solver import GridSpec, InitialCondition
from .stable_noise import StableNoiseSpec

REGIMES = ("theorem-2.4", "theorem-2.5")


class ConfigError(ConfigurationError):
    """Validation failure anchored to a config section/key."""

    def __init__(self, section, key, message):
        self.section = section
        self.key = key
        super().__init__(f"[{section}] {key}: {message}")


def _parse_list(text, kind=float):
    items = [tok.strip() for tok in text.replace(";", ",").split(",") if tok.strip()]
    return [kind(tok) for tok in items]


def _parse_offsets(text, unit_name, unit_value):
    """Numbers or '<int>dt'/'<int>dx' tokens resolved against the grid."""
    out = []
    for tok in _parse_list(text, kind=str):
        if tok.endswith(unit_name):
            out.append(int(tok[: -len(unit_name)] or 1) * unit_value)
        else:
            out.append(float(tok))
    return out


@dataclass
class ExperimentConfig:
    grid: GridSpec
    noise: StableNoiseSpec
    coeff: CoefficientSpec
    ic: InitialCondition
    p_list: list
    n_list: list
    deltas: list
    shifts: list
    replicas: int
    master_seed: int
    output_dir: str
    regime: str
    workers: int = 1
    source_path: str = None
    raw: dict = field(default_factory=dict)

    def validate(self):
        if self.regime not in REGIMES:
            raise ConfigError("experiment", "regime", f"must be one of {REGIMES}")
        if self.replicas < 1:
            raise ConfigError("experiment", "replicas", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("experiment", "workers", "must be >= 1")
        for p in self.p_list:
            if p <= self.noise.alpha:
                raise ConfigError(
                    "experiment",
                    "p_list",
                    f"p={p} must exceed noise alpha={self.noise.alpha}",
                )
        if self.regime == "theorem-2.5":
            if not self.noise.alpha < 5.0 / 3.0:
                raise ConfigError(
                    "noise",
                    "alpha",
                    f"regime theorem-2.5 needs alpha < 5/3, got {self.noise.alpha}",
                )
            for p in self.p_list:
                if not p < 5.0 / 3.0:
                    raise ConfigError(
                        "experiment",
                        "p_list",
                        f"regime theorem-2.5 needs p < 5/3, got p={p}",
                    )
        else:
            for p in self.p_list:
                if p > 2.0:
                    raise ConfigError(
                        "experiment",
                        "p_list",
                        f"regime theorem-2.4 needs p <= 2, got p={p}",
                    )
        for n in self.n_list:
            if n < 0:
                raise ConfigError("experiment", "n_list", "levels must be >= 0")
        for d in self.deltas:
            if d < 0 or d > self.grid.T:
                raise ConfigError(
                    "experiment", "deltas", f"delta {d} outside [0, T={self.grid.T}]"
                )
            k = round(d / self.grid.dt)
            if abs(k * self.grid.dt - d) > 1e-9 * max(self.grid.dt, d):
                raise ConfigError(
                    "experiment",
                    "deltas",
                    f"delta {d} is not a multiple of dt={self.grid.dt}",
                )
        for s in self.shifts:
            if s < 0:
                raise ConfigError("experiment", "shifts", "shifts must be >= 0")
            k = round(s / self.grid.dx)
            if abs(k * self.grid.dx - s) > 1e-9 * max(self.grid.dx, s):
                raise ConfigError(
                    "experiment",
                    "shifts",
                    f"shift {s} is not a multiple of dx={self.grid.dx}",
                )
        return self

    def manifest_dict(self):
        g, nz, cf, ic = self.grid, self.noise, self.coeff, self.ic
        return {
            "grid": {"L": g.L, "nx": g.nx, "T": g.T, "nt": g.nt},
            "noise": {
                "alpha": nz.alpha,
                "K": nz.K,
                "c_plus": nz.c_plus,
                "c_minus": nz.c_minus,
                "eps": nz.eps,
                "small_jump_mode": nz.small_jump_mode,
            },
            "coeff": {
                "family": cf.family,
                "n": cf.n,
                "a": cf.a,
                "b": cf.b,
                "beta": cf.beta,
                "c": cf.c,
            },
            "ic": {
                "family": ic.family,
                "k": ic.k,
                "center": ic.center,
                "width": ic.width,
            },
            "experiment": {
                "p_list": list(self.p_list),
                "n_list": list(self.n_list),
                "deltas": list(self.deltas),
                "shifts": list(self.shifts),
                "replicas": self.replicas,
                "master_seed": self.master_seed,
                "output_dir": self.output_dir,
                "regime": self.regime,
                "workers": self.workers,
            },
        }


def _build_coeff(section):
    family = section.get("family", "power")
    n = section.getint("n", 0)
    kwargs = {"family": family, "n": n}
    if family == "linear":
        kwargs.update(a=section.getfloat("a", 0.0), b=section.getfloat("b", 1.0))
    elif family == "power":
        kwargs.update(beta=section.getfloat("beta", 0.5))
    elif family == "constant":
        kwargs.update(c=section.getfloat("c", 1.0))
    elif family == "tabulated":
        kwargs.update(
            table_u=tuple(_parse_list(section.get("table_u", ""))),
            table_v=tuple(_parse_list(section.get("table_v", ""))),
        )
    return CoefficientSpec(**kwargs)


def _build_ic(section):
    family = section.get("family", "sine")
    if family == "tabulated":
        return InitialCondition.tabulated(_parse_list(section.get("values", "")))
    return InitialCondition(
        family=family,
        k=section.getint("k", 1),
        center=section.getfloat("center", 0.5),
        width=section.getfloat("width", 0.1),
    )


def load_config(path=None, overrides=None):
    """Parse an INI config (all keys optional) and apply overrides.

    ``overrides`` maps {"seed": int, "out": str, "replicas": int,
    "regime": str, "workers": int}; None values are ignored.
    """
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    for name in ("grid", "noise", "coeff", "ic", "experiment"):
        if not parser.has_section(name):
            parser.add_section(name)

    overrides = overrides or {}
    sec = parser["grid"]
    try:
        grid = GridSpec(
            L=sec.getfloat("L", 1.0),
            nx=sec.getint("nx", 48),
            T=sec.getfloat("T", 0.1),
            nt=sec.getint("nt", 160),
        )
    except (ConfigurationError, ValueError) as exc:
        raise ConfigError("grid", "*", str(exc)) from exc

    sec = parser["noise"]
    try:
        noise = StableNoiseSpec(
            alpha=sec.getfloat("alpha", 1.3),
            K=sec.getfloat("K", 1.0),
            c_plus=sec.getfloat("c_plus", 0.5),
            c_minus=sec.getfloat("c_minus", 0.5),
            eps=sec.getfloat("eps", None),
            small_jump_mode=sec.get("small_jump_mode", "gaussian"),
        )
    except (ConfigurationError, ValueError) as exc:
        raise ConfigError("noise", "*", str(exc)) from exc

    try:
        coeff = _build_coeff(parser["coeff"])
    except (ConfigurationError, ValueError) as exc:
        raise ConfigError("coeff", "*", str(exc)) from exc

    try:
        ic = _build_ic(parser["ic"])
    except (ConfigurationError, ValueError) as exc:
        raise ConfigError("ic", "*", str(exc)) from exc

    sec = parser["experiment"]
    try:
        deltas = _parse_offsets(sec.get("deltas", "8dt, 4dt, 2dt, 1dt"), "dt", grid.dt)
        shifts = _parse_offsets(sec.get("shifts", "1dx, 2dx, 4dx"), "dx", grid.dx)
        cfg = ExperimentConfig(
            grid=grid,
            noise=noise,
            coeff=coeff,
            ic=ic,
            p_list=_parse_list(sec.get("p_list", "1.5")),
            n_list=_parse_list(sec.get("n_list", "4, 16, 64, 256"), kind=int),
            deltas=deltas,
            shifts=shifts,
            replicas=int(overrides.get("replicas") or sec.getint("replicas", 100)),
            master_seed=int(
                overrides["seed"]
                if overrides.get("seed") is not None
                else sec.getint("master_seed", 1234)
            ),
            output_dir=str(overrides.get("out") or sec.get("output_dir", "out")),
            regime=str(overrides.get("regime") or sec.get("regime", "theorem-2.5")),
            workers=int(overrides.get("workers") or sec.getint("workers", 1)),
            source_path=str(path) if path is not None else None,
        )
    except ConfigError:
        raise
    except (ConfigurationError, ValueError) as exc:
        raise ConfigError("experiment", "*", str(exc)) from exc
    return cfg.validate()


def locate_key(path, section, key):
    """Best-effort line number of a key inside a section, for error anchors."""
    if path is None:
        return None
    current = None
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if stripped.startswith("[") and stripped.endswith("]"):
                    current = stripped[1:-1].strip()
                elif current == section and stripped.split("=")[0].split(":")[0].strip() == key:
                    return lineno
    except OSError:
        return None
    return None
