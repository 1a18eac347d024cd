"""Experiment configuration: INI-style sections, typed and validated up front.

Schema version 1.  Every section is optional; missing keys take the
defaults below.  Unknown sections or keys are errors.

::

    [model]       p, q, mu, sigma, mu_bounds, sigma_bounds, x0, T, t0, allow_degenerate
    [run]         seed, n_paths, n_steps, scheme, tol, max_iter, c_target
    [validate]    exponents, grid_lo, grid_hi, grid_n
    [feller]      t, x_grid, tol
    [simulate]    observables, export_path
    [picard]      n_steps_per_interval, n_paths
    [moments]     orders, n_checkpoints, moment_x0m, n_paths
    [asymptotic]  T_long, n_steps, quantile, n_paths
    [stability]   m, xi, eta, n_paths
    [poisson]     a, b, c, mu, sigma, p, q, f, probes, dt, n_grid, n_paths
    [output]      directory
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass

from .errors import ConfigError

SCHEMA_VERSION = 1


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _strs(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _bounds(s: str):
    if not s.strip():
        return None
    v = _floats(s)
    if len(v) != 2:
        raise ValueError("expected 'lo,hi'")
    return (v[0], v[1])


def _opt_str(s: str):
    return s.strip() or None


SCHEMA: dict[str, dict[str, tuple]] = {
    "meta": {"schema": (int, "1")},
    "model": {
        "p": (str, "remark1"), "q": (str, "remark1"),
        "mu": (str, "const:1"), "sigma": (str, "const:1"),
        "mu_bounds": (_bounds, ""), "sigma_bounds": (_bounds, ""),
        "x0": (float, "1.0"), "T": (float, "1.0"), "t0": (float, "0.0"),
        "allow_degenerate": (_bool, "false"),
    },
    "run": {
        "seed": (int, "42"), "n_paths": (int, "10000"), "n_steps": (int, "1000"),
        "scheme": (str, "euler"), "tol": (float, "1e-6"), "max_iter": (int, "100"),
        "c_target": (float, "0.5"),
    },
    "validate": {
        "exponents": (_strs, ""), "grid_lo": (float, "1e-8"), "grid_hi": (float, "1e8"),
        "grid_n": (int, "10000"),
    },
    "feller": {
        "t": (float, "0.0"), "x_grid": (_floats, "1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8"),
        "tol": (float, "1e-6"),
    },
    "simulate": {
        "observables": (_strs, "terminal,terminal_sq,sup_abs,integral_sq"),
        "export_path": (int, "0"),
    },
    "picard": {"n_steps_per_interval": (int, "50"), "n_paths": (int, "0")},
    "moments": {
        "orders": (_floats, "2,3,4"), "n_checkpoints": (int, "10"),
        "moment_x0m": (_bool, "false"), "n_paths": (int, "0"),
    },
    "asymptotic": {
        "T_long": (float, "50"), "n_steps": (int, "5000"), "quantile": (float, "0.99"),
        "n_paths": (int, "0"),
    },
    "stability": {"m": (float, "2"), "xi": (float, "1.0"), "eta": (float, "1.01"),
                  "n_paths": (int, "0")},
    "poisson": {
        "a": (float, "1.0"), "b": (float, "2.0"), "c": (float, "1.0"),
        "mu": (float, "1.0"), "sigma": (float, "1.0"),
        "p": (_opt_str, ""), "q": (_opt_str, ""), "f": (str, "const:1"),
        "probes": (_floats, "1.25,1.5,1.75"), "dt": (float, "1e-4"), "n_grid": (int, "2048"),
        "n_paths": (int, "0"),
    },
    "output": {"directory": (str, "out")},
}


@dataclass
class ExperimentConfig:
    raw: dict[str, dict[str, str]]
    values: dict[str, dict[str, object]]

    def __getitem__(self, section):
        return self.values[section]

    def n_paths(self, section: str) -> int:
        n = self.values.get(section, {}).get("n_paths", 0)
        return n or self.values["run"]["n_paths"]

    def resolved_text(self) -> str:
        """Fully-resolved config as INI text, sections and keys in schema order."""
        buf = io.StringIO()
        for section, keys in SCHEMA.items():
            buf.write(f"[{section}]\n")
            for key in keys:
                buf.write(f"{key} = {self.raw[section][key]}\n")
            buf.write("\n")
        return buf.getvalue()

    def sha256(self) -> str:
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return n
        elif current == section and key is not None:
            name = s.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return n
    return None


def _where(text, section, key=None) -> str:
    line = _line_of(text, section, key) if text else None
    loc = f"{section}.{key}" if key else f"[{section}]"
    return f"{loc} (line {line})" if line else loc


def load_config(text: str = "", overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse, merge ``section.key=value`` overrides, and type-check every key."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    raw = {s: {k: v[1] for k, v in keys.items()} for s, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {_where(text, section)}")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {_where(text, section, key)}")
            raw[section][key] = value.strip()
    for ov in overrides or []:
        name, sep, value = ov.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {ov!r} must look like section.key=value")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown override key {section}.{key}")
        raw[section][key] = value.strip()

    values: dict[str, dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (conv, _) in keys.items():
            try:
                values[section][key] = conv(raw[section][key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(
                    f"bad value {raw[section][key]!r} for {_where(text, section, key)}: {exc}"
                ) from exc
    if values["meta"]["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {values['meta']['schema']}")
    return ExperimentConfig(raw, values)
