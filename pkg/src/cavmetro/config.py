"""Experiment configuration: a flat ``key = value`` file plus overrides.

Lines starting with ``#`` and blank lines are ignored.  Every key is typed;
unknown keys and malformed values are rejected before anything is computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

from .atom import AtomParams
from .errors import CavmetroError, ConfigError
from .metrology import theta_to_atom
from .params import SystemParams


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return t

    return parse


def _initial(text: str) -> str:
    t = text.strip().lower()
    if t in ("vacuum", "steady") or (t.startswith("fock:") and t[5:].isdigit()):
        return t
    raise ValueError("expected 'vacuum', 'steady' or 'fock:<n>'")


# key -> (parser, default); None means "not set"
KEYS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "units": (_choice("si", "dimensionless"), "si"),
    "g": (float, None),
    "g_tau": (float, None),
    "tau": (float, 1e-7),
    "r": (float, None),
    "n_c": (float, None),
    "kappa": (float, None),
    "p_e": (float, None),
    "lambda": (float, None),
    "theta": (float, None),
    "kind": (_choice("effective", "full", "decay"), "effective"),
    "method": (_choice("nullspace", "longtime"), "nullspace"),
    "n_max": (int, None),
    "strictness": (float, 0.1),
    "t_final": (float, 10.0),
    "reltol": (float, 1e-9),
    "trajectories": (int, 1000),
    "seed": (int, 0),
    "sample_times": (_floats, None),
    "n_samples": (int, 11),
    "initial": (_initial, "vacuum"),
    "chunk_size": (int, 1000),
    "nc_min": (float, 1.0),
    "nc_max": (float, 1e5),
    "nc_points": (int, 51),
    "lambdas": (_floats, (0.0, 0.3, 0.5)),
    "fit_min": (float, 1e3),
    "fit_max": (float, 1e5),
    "exact": (_bool, True),
    "fit_column": (_choice("delta_g2_approx", "delta_g2_exact"), "delta_g2_approx"),
    "source": (_choice("closed_form", "density_matrix"), "closed_form"),
    "dump_density": (_bool, False),
    "out": (str, None),
    "format": (_choice("json", "csv"), "json"),
}


def parse_lines(lines: Iterable[str], origin: str = "<config>") -> dict:
    raw = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in text.split("=", 1))
        raw[key] = value
    return raw


def load_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_lines(p.read_text().splitlines(), origin=str(path))


def parse_overrides(items: Optional[Iterable[str]]) -> dict:
    raw = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        raw[key] = value
    return raw


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        v = self.values.get(key)
        return default if v is None else v

    @classmethod
    def from_raw(cls, raw: dict) -> ExperimentConfig:
        values = {k: default for k, (_, default) in KEYS.items()}
        for key, text in raw.items():
            if key not in KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            parser = KEYS[key][0]
            try:
                values[key] = parser(text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from None
        cfg = cls(values)
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        v = self.values
        if v["units"] == "dimensionless":
            if v["kappa"] not in (None, 1.0):
                raise ConfigError("dimensionless units fix kappa = 1")
        if v["kappa"] is not None and not v["kappa"] > 0:
            raise ConfigError("kappa must be positive")
        if v["g"] is not None and v["g_tau"] is not None:
            raise ConfigError("give only one of g and g_tau")
        if v["r"] is not None and v["n_c"] is not None:
            raise ConfigError("give only one of r and n_c")
        if v["lambda"] is not None and v["theta"] is not None:
            raise ConfigError("lambda and theta are mutually exclusive")
        if v["theta"] is not None and v["p_e"] is not None:
            raise ConfigError("theta fixes p_e; do not give both")
        if v["tau"] is not None and not v["tau"] > 0:
            raise ConfigError("tau must be positive")
        for key in ("trajectories", "nc_points", "n_samples", "chunk_size"):
            if v[key] < 1:
                raise ConfigError(f"{key} must be positive")
        if v["n_max"] is not None and v["n_max"] < 1:
            raise ConfigError("n_max must be >= 1")
        if not 1e-12 <= v["reltol"] <= 1e-3:
            raise ConfigError("reltol must lie in [1e-12, 1e-3]")
        if v["nc_min"] <= 0 or v["nc_max"] < v["nc_min"]:
            raise ConfigError("need 0 < nc_min <= nc_max")
        if v["t_final"] < 0:
            raise ConfigError("t_final must be non-negative")

    @property
    def kappa(self) -> float:
        return 1.0 if self.values["kappa"] is None else self.values["kappa"]

    def atom(self) -> AtomParams:
        v = self.values
        try:
            if v["theta"] is not None:
                if not 0 <= v["theta"] <= math.pi:
                    raise ConfigError("theta must lie in [0, pi]")
                return theta_to_atom(v["theta"])
            if v["p_e"] is None:
                raise ConfigError("p_e (or theta) is required")
            return AtomParams.from_excited(v["p_e"], v["lambda"] or 0.0)
        except ConfigError:
            raise
        except CavmetroError as exc:
            raise ConfigError(str(exc)) from None

    def system(self) -> SystemParams:
        v = self.values
        if v["g"] is None and v["g_tau"] is None:
            raise ConfigError("one of g or g_tau is required")
        if v["r"] is None and v["n_c"] is None:
            raise ConfigError("one of r or n_c is required")
        tau = v["tau"]
        kappa = self.kappa
        g = v["g"] if v["g"] is not None else v["g_tau"] / tau
        r = v["r"] if v["r"] is not None else v["n_c"] * kappa
        try:
            return SystemParams(g=g, tau=tau, r=r, kappa=kappa, atom=self.atom())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def sample_times(self) -> tuple:
        v = self.values
        if v["sample_times"] is not None:
            times = tuple(sorted(v["sample_times"]))
            if times and (times[0] < 0 or times[-1] > v["t_final"]):
                raise ConfigError("sample_times must lie in [0, t_final]")
            return times
        n = v["n_samples"]
        if n == 1:
            return (v["t_final"],)
        return tuple(v["t_final"] * i / (n - 1) for i in range(n))

    def resolved(self) -> dict:
        return {k: (list(x) if isinstance(x, tuple) else x) for k, x in sorted(self.values.items())}
