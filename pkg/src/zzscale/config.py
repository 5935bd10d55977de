"""Flat key=value run configuration with dotted sections.

A config file is a sequence of ``key = value`` lines (``#`` comments and blank
lines allowed).  Keys live in a fixed registry; unknown keys are rejected so
stale manifests cannot silently reconfigure a run.  Command-line flags override
file values.  ``RunConfig.emit`` -> ``parse_config`` round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["CONFIG_KEYS", "ConfigError", "RunConfig", "parse_config"]


class ConfigError(ValueError):
    """Malformed configuration input."""


# key -> (help text, default)
CONFIG_KEYS: dict[str, tuple[str, str]] = {
    "model.kind": ("model family: gaussian | laplace | cauchy | logistic", "gaussian"),
    "model.x0": ("true / KL-minimizing parameter, comma separated", "0"),
    "model.truth": ("data-generating law when misspecified (location models)", ""),
    "scheme": ("rate estimator: canonical | ss | cv | mixed", "ss"),
    "scheme.m": ("mini-batch size", "1"),
    "scheme.reference": ("cv/mixed reference: mle | perturbed:<d,..> | fixed:<x,..>", "mle"),
    "scheme.mixed_radius": ("mixed-scheme switch radius M", ""),
    "run.n": ("dataset size", "1000"),
    "run.n_grid": ("dataset-size grid, e.g. 2^10..2^18 or 100,1000", ""),
    "run.t_max": ("simulation horizon", "10"),
    "run.dt": ("output / discretization step", "0.01"),
    "run.replicates": ("independent replicates", "1"),
    "run.start_offset": ("transient start offset from x0", "3"),
    "run.epsilon": ("confinement tube half-width", "0.5"),
    "run.grid": ("drift-table grid lo:hi:step", "-5:5:0.01"),
    "run.x_star": ("limiting reference point for drift tables", ""),
    "run.schemes": ("comma list of schemes for multi-scheme experiments", "can,ss,cv"),
    "seed": ("64-bit root seed; omitted = drawn fresh and recorded", ""),
    "out": ("output directory", "out"),
}


@dataclass
class RunConfig:
    """Validated flat configuration (strings, exactly as parsed)."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for k in self.values:
            if k not in CONFIG_KEYS:
                raise ConfigError(f"unknown config key {k!r}")

    def get(self, key: str) -> str:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        v = self.values.get(key, CONFIG_KEYS[key][1])
        return v

    def set(self, key: str, value) -> None:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = str(value)

    def get_float(self, key: str) -> float:
        try:
            return float(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {self.get(key)!r}") from exc

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {self.get(key)!r}") from exc

    def get_floats(self, key: str) -> tuple:
        text = self.get(key)
        if not text:
            raise ConfigError(f"{key}: empty value")
        try:
            return tuple(float(v) for v in text.split(","))
        except ValueError as exc:
            raise ConfigError(f"{key}: expected comma-separated numbers") from exc

    def emit(self) -> str:
        return "\n".join(f"{k} = {self.values[k]}" for k in sorted(self.values)) + "\n"


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return RunConfig(values)


def parse_n_grid(text: str) -> tuple:
    """``2^10..2^18`` (powers-of-two sweep) or a comma list of sizes."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = _parse_pow(lo_s), _parse_pow(hi_s)
        if lo > hi:
            raise ConfigError("n_grid range is reversed")
        lo_e, hi_e = lo.bit_length() - 1, hi.bit_length() - 1
        if 2**lo_e != lo or 2**hi_e != hi:
            raise ConfigError("range form needs powers of two, e.g. 2^10..2^18")
        return tuple(2**e for e in range(lo_e, hi_e + 1, 2))
    try:
        return tuple(int(_parse_pow(v)) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad n_grid {text!r}") from exc


def _parse_pow(text: str) -> int:
    text = text.strip()
    if "^" in text:
        base, _, exp = text.partition("^")
        return int(base) ** int(exp)
    return int(text)


def parse_x_grid(text: str) -> tuple:
    """Drift-table grid ``lo:hi:step``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"grid must be numeric, got {text!r}") from exc
    if step <= 0 or hi <= lo:
        raise ConfigError("grid needs hi > lo and step > 0")
    count = int(round((hi - lo) / step)) + 1
    return tuple(lo + k * step for k in range(count))
