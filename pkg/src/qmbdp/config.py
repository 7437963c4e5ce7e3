"""INI-style run configuration with typed, validated keys.

Keys are addressed as ``section.key``; unknown sections or keys are
rejected so that a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .operators import HamiltonianParams
from .spectra import FilterSpec
from .system import DetectionConfig


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _energy(text: str):
    t = text.strip()
    return t if t in ("ground", "mid") else float(t)


# section -> key -> (parser, default text)
SCHEMA: dict[str, dict[str, tuple]] = {
    "model": {
        "n_sites": (int, "14"),
        "J": (float, "1.0"),
        "delta": (float, "1.0"),
        "eps0": (float, "0.5"),
    },
    "detector": {
        "p": (int, "3"),
        "q": (int, "5"),
        "tau": (float, "2.0"),
        "n_steps": (int, "1000"),
    },
    "filter": {
        "energy": (_energy, "ground"),
        "sigma": (float, "0.1"),
        "seed": (int, "0"),
    },
    "solver": {
        "tol": (float, "1e-12"),
        "krylov_m": (int, "30"),
        "krylov_restarts": (int, "50"),
        "krylov_tol": (float, "1e-8"),
    },
    "sweep": {
        "deltas": (_floats, "0.5 0.9 1.1 2.0"),
        "n_sites": (_ints, ""),
        "taus": (_floats, ""),
    },
    "dynamics": {
        "times": (_floats, "0 50 100 200"),
        "site": (int, "3"),
    },
    "singleshot": {
        "t": (float, "2000"),
    },
    "trajectory": {
        "n_traj": (int, "4"),
    },
    "transition": {
        "eps": (float, "1e-5"),
    },
    "run": {
        "seed": (int, "0"),
        "threads": (int, "0"),
        "plots": (_bool, "true"),
        "log_floor": (float, "1e-300"),
    },
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]]

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    def detection(self, delta: float | None = None, n_sites: int | None = None,
                  tau: float | None = None) -> DetectionConfig:
        m, d, f, s = (self.values[k] for k in ("model", "detector", "filter", "solver"))
        params = HamiltonianParams(m["J"], m["delta"] if delta is None else delta, m["eps0"])
        params = _to_units_of_j(params)
        return DetectionConfig(
            n_sites=n_sites or m["n_sites"],
            p=d["p"],
            q=d["q"],
            tau=(tau if tau is not None else d["tau"]) * m["J"],
            n_steps=d["n_steps"],
            params=params,
            filter=FilterSpec(f["energy"] if isinstance(f["energy"], str) else f["energy"] / m["J"],
                              f["sigma"] / m["J"], f["seed"]),
            tol=s["tol"],
        )

    @property
    def deltas(self) -> list[float]:
        return self.values["sweep"]["deltas"]

    @property
    def sizes(self) -> list[int]:
        return self.values["sweep"]["n_sites"] or [self.values["model"]["n_sites"]]

    @property
    def taus(self) -> list[float]:
        return self.values["sweep"]["taus"] or [self.values["detector"]["tau"]]

    def as_text_dict(self) -> dict[str, dict[str, str]]:
        """JSON-friendly copy of the resolved configuration."""
        out = {}
        for sec, kv in self.values.items():
            out[sec] = {k: (list(v) if isinstance(v, list) else v) for k, v in kv.items()}
        return out


def _to_units_of_j(params: HamiltonianParams) -> HamiltonianParams:
    # everything runs with J = 1; the config's J only fixes the unit of the other energies
    return HamiltonianParams(1.0, params.delta / params.J, params.eps0 / params.J, params.boundary_hop)


def load_config(path: str | Path | None = None, overrides=()) -> RunConfig:
    """Read ``path`` (optional) and apply ``section.key=value`` overrides."""
    raw: dict[str, dict[str, str]] = {s: {k: v[1] for k, v in keys.items()} for s, keys in SCHEMA.items()}
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in cp.sections():
            for key, value in cp.items(section):
                _set(raw, f"{section}.{key}", value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set(raw, key.strip(), value.strip())
    values: dict[str, dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (parse, _) in keys.items():
            text = raw[section][key]
            try:
                values[section][key] = parse(text)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: {exc}") from exc
    cfg = RunConfig(values)
    _validate(cfg)
    return cfg


def _set(raw, dotted: str, value: str) -> None:
    if "." not in dotted:
        raise ConfigError(f"key {dotted!r} must be written as section.key")
    section, key = dotted.split(".", 1)
    if section not in SCHEMA:
        raise ConfigError(f"unknown section {section!r}; known: {', '.join(SCHEMA)}")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {section}.{key}; known: {', '.join(SCHEMA[section])}")
    raw[section][key] = value


def _validate(cfg: RunConfig) -> None:
    if cfg["model.J"] <= 0:
        raise ConfigError("model.J must be positive")
    if not cfg.deltas:
        raise ConfigError("sweep.deltas is empty")
    try:
        for n in cfg.sizes:
            cfg.detection(n_sites=n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
