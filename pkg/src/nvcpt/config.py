"""Sectioned ``key = value`` configuration files.

Format::

    # comment
    [model]
    hyperfine_a = -2.2     # trailing comments are allowed
    [fields]
    optical_rabi = 1.2

Sections are ``model``, ``fields``, ``sequence``, ``scan`` and ``fit``.
Unknown sections or keys, malformed values and out-of-range values are
rejected with the offending line number.  Frequencies are in MHz, times in
us, optical powers in uW.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import SimpleNamespace
from typing import Any, Callable, Iterable

from .model import NvParams

FORMAT_TAG = "nv-cpt-sim v1"


class ConfigError(ValueError):
    """Base class; ``line`` is 1-based, or ``None`` for command-line overrides."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}" if line is not None else "override"
        super().__init__(f"{where}: {message}")


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    pass


class MissingKeyError(ConfigError):
    pass


class NonNumericError(ConfigError):
    pass


class OutOfRangeError(ConfigError):
    pass


# ---------------------------------------------------------------------------
# value parsers

def _float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NonNumericError(f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise NonNumericError(f"expected a finite number, got {text!r}")
    return value


def _optional_float(text: str):
    return None if text.lower() in ("none", "auto") else _float(text)


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise NonNumericError(f"expected an integer, got {text!r}") from None


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise OutOfRangeError(f"expected true/false, got {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    if not text.strip():
        return ()
    return tuple(_float(t.strip()) for t in text.split(","))


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise OutOfRangeError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _spin(text: str) -> int:
    value = _int(text)
    if value not in (-1, 1):
        raise OutOfRangeError(f"expected -1 or +1, got {text!r}")
    return value


def _projection(text: str) -> int:
    value = _int(text)
    if value not in (-1, 0, 1):
        raise OutOfRangeError(f"expected -1, 0 or +1, got {text!r}")
    return value


def _centers(text: str):
    if text == "theory":
        return text
    return _float_list(text)


def _ge(lo):
    return lambda v: v is None or v >= lo, f">= {lo}"


def _gt(lo):
    return lambda v: v is None or v > lo, f"> {lo}"


def _unit():
    return lambda v: 0 <= v <= 1, "in [0, 1]"


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: tuple | None = None
    doc: str = ""

    def validate(self, value, line, name):
        if self.check is not None:
            ok, what = self.check
            if not ok(value):
                raise OutOfRangeError(f"{name} = {value!r} must be {what}", line, name)
        return value


DEFAULT_PARAMS = NvParams()
# 1 uW total incident power (split over the two fields) gives a ~16 MHz CPT dip
# in the common-mode averaged Fig 2a configuration.
RABI_PER_SQRT_UW = 22.9

SCHEMA: dict[str, dict[str, Key]] = {
    "model": {
        "zeeman_split": Key(_float, DEFAULT_PARAMS.zeeman_split, doc="m_s=+1 minus m_s=-1 splitting"),
        "hyperfine_a": Key(_float, DEFAULT_PARAMS.hyperfine_a, doc="axial hyperfine constant A"),
        "quadrupole_q": Key(_float, DEFAULT_PARAMS.quadrupole_q, doc="nuclear quadrupole Q"),
        "zfs": Key(_float, DEFAULT_PARAMS.zfs, doc="zero-field splitting"),
        "gamma_rad": Key(_float, DEFAULT_PARAMS.gamma_rad, _ge(0), "A2 radiative decay rate"),
        "leak_branch": Key(_float, DEFAULT_PARAMS.leak_branch,
                           (lambda v: 0 <= v < 1, "in [0, 1)"), "A2 -> m_s=0 branching"),
        "ground_dephase": Key(_float, DEFAULT_PARAMS.ground_dephase, _ge(0)),
        "green_polarization_p": Key(_float, DEFAULT_PARAMS.green_polarization_p, _unit()),
        "collection_eff": Key(_float, DEFAULT_PARAMS.collection_eff, _unit()),
        "singlet_rate": Key(_float, DEFAULT_PARAMS.singlet_rate, _ge(0)),
        "include_ey": Key(_bool, False),
        "include_singlet": Key(_bool, False),
        "rabi_per_sqrt_uw": Key(_float, RABI_PER_SQRT_UW, _gt(0)),
    },
    "fields": {
        "optical_rabi": Key(_float, 1.0, _ge(0), "Rabi frequency of each Lambda field"),
        "optical_power_uw": Key(_optional_float, None, _ge(0),
                                "total power of the two fields; overrides optical_rabi"),
        "optical_detuning": Key(_float, 0.0, doc="one-photon detuning of the fixed field"),
        "mw_rabi": Key(_float, 0.0, _ge(0), "dressing / Rabi-scan microwave"),
        "mw_detuning": Key(_float, 0.0, doc="offset from the bare m_n=0 line"),
        "mw_transition": Key(_spin, 1),
        "repump_rabi": Key(_float, 0.2, _ge(0), "weak CW microwave"),
        "repump_transition": Key(_spin, -1),
        "repump_detuning": Key(_float, 0.0),
        "prep_rabi": Key(_float, 5.0, _ge(0), "preparation pi pulse; 0 disables"),
        "prep_transition": Key(_spin, 1),
        "prep_mn": Key(_projection, 0, doc="hyperfine line the preparation pulse targets"),
        "prep_duration": Key(_optional_float, None, _gt(0), "default: pi time"),
        "probe_rabi": Key(_float, 2.0, _ge(0), "readout / PLE laser"),
        "readout": Key(_choice("A2", "Ey"), "A2"),
        "ple_mw_rabi": Key(_float, 1.0, _ge(0), "CW microwave populating the probed spin"),
    },
    "sequence": {
        "initial_state": Key(_choice("thermal", "mixed"), "thermal"),
        "green_duration": Key(_float, 1.0, _ge(0)),
        "probe_duration": Key(_float, 10.0, _gt(0)),
        "readout_duration": Key(_float, 1.0, _gt(0)),
    },
    "scan": {
        "start": Key(_optional_float, None),
        "stop": Key(_optional_float, None),
        "step": Key(_optional_float, None, _gt(0)),
        "mode": Key(_choice("steady", "time"), "steady"),
        "normalization": Key(_choice("raw", "maxone"), "raw"),
        "common_mode_fwhm": Key(_float, 0.0, _ge(0), "spread of the shared one-photon detuning"),
        "diffusion_fwhm": Key(_float, 700.0, _ge(0), "PLE spectral diffusion"),
        "ple_spin": Key(_choice("-1", "+1", "both"), "both"),
        "stark_rabis": Key(_float_list, ()),
        "stark_offsets": Key(_float_list, ()),
        "workers": Key(_int, 1, _ge(1)),
    },
    "fit": {
        "centers": Key(_centers, "theory"),
        "linear_baseline": Key(_bool, False),
        "profile": Key(_bool, False, doc="broad Lorentzian excitation-profile background"),
        "init_fwhm": Key(_float, 1.0, _gt(0)),
        "max_iter": Key(_int, 500, _ge(0)),
        "min_weight": Key(_float, 0.0, _ge(0)),
    },
}

# keys that must be given together
PAIRED = {("scan", "start"): ("scan", "stop"), ("scan", "stop"): ("scan", "start")}


def _defaults() -> dict[str, dict[str, Any]]:
    return {sec: {k: spec.default for k, spec in keys.items()} for sec, keys in SCHEMA.items()}


@dataclass(frozen=True)
class Config:
    values: dict[str, dict[str, Any]] = field(default_factory=_defaults)

    def __getattr__(self, name):
        values = object.__getattribute__(self, "values")
        if name in values:
            return SimpleNamespace(**values[name])
        raise AttributeError(name)

    @property
    def params(self) -> NvParams:
        m = self.values["model"]
        return NvParams(**{k: m[k] for k in NvParams.__dataclass_fields__})

    def get(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    def replace(self, **dotted) -> "Config":
        """Copy with ``section__key=value`` replacements (already typed)."""
        values = {s: dict(v) for s, v in self.values.items()}
        for name, value in dotted.items():
            section, key = name.split("__", 1)
            if key not in SCHEMA.get(section, {}):
                raise UnknownKeyError(f"unknown key {section}.{key}", None, key)
            values[section][key] = value
        return Config(values)

    def with_params(self, params: NvParams) -> "Config":
        values = {s: dict(v) for s, v in self.values.items()}
        for k in NvParams.__dataclass_fields__:
            values["model"][k] = getattr(params, k)
        return Config(values)

    def echo(self) -> list[str]:
        """``section.key = value`` lines in schema order."""
        out = []
        for section, keys in SCHEMA.items():
            for key in keys:
                out.append(f"{section}.{key} = {format_value(self.values[section][key])}")
        return out

    def snapshot(self) -> dict[str, Any]:
        return {f"{s}.{k}": v for s, keys in self.values.items() for k, v in keys.items()}


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    return str(value)


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_value(section: str, key: str, raw: str, line: int | None):
    spec = SCHEMA[section].get(key)
    if spec is None:
        raise UnknownKeyError(f"unknown key {key!r} in [{section}]", line, key)
    if raw == "":
        raise MissingKeyError(f"{section}.{key} has no value", line, key)
    try:
        value = spec.parse(raw)
    except ConfigError as exc:
        raise type(exc)(f"{section}.{key}: {exc.args[0].split(': ', 1)[-1]}", line, key) from None
    return spec.validate(value, line, f"{section}.{key}")


def parse_config(text: str) -> Config:
    """Parse and validate configuration text; missing keys take their defaults."""
    values = _defaults()
    seen: dict[tuple[str, str], int] = {}
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigSyntaxError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise UnknownKeyError(f"unknown section [{section}]", lineno, section)
            continue
        if "=" not in line:
            raise ConfigSyntaxError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigSyntaxError("key outside of any [section]", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if (section, key) in seen:
            raise ConfigSyntaxError(f"{section}.{key} already set on line {seen[section, key]}",
                                    lineno, key)
        values[section][key] = _parse_value(section, key, raw, lineno)
        seen[section, key] = lineno
    for (section, key), lineno in seen.items():
        partner = PAIRED.get((section, key))
        if partner and partner not in seen:
            raise MissingKeyError(f"{section}.{key} requires {partner[0]}.{partner[1]}",
                                  lineno, partner[1])
    cfg = Config(values)
    _check_consistency(cfg)
    return cfg


def apply_overrides(cfg: Config, overrides: Iterable[str]) -> Config:
    """Apply ``section.key=value`` strings on top of a parsed config."""
    values = {s: dict(v) for s, v in cfg.values.items()}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigSyntaxError(f"override must look like section.key=value, got {item!r}")
        name, raw = item.split("=", 1)
        section, key = (p.strip() for p in name.split(".", 1))
        if section not in SCHEMA:
            raise UnknownKeyError(f"unknown section {section!r}", None, section)
        values[section][key] = _parse_value(section, key, raw.strip(), None)
    out = Config(values)
    _check_consistency(out)
    return out


def _check_consistency(cfg: Config) -> None:
    scan = cfg.values["scan"]
    if scan["start"] is not None and scan["stop"] is not None and scan["stop"] <= scan["start"]:
        raise OutOfRangeError("scan.stop must exceed scan.start", None, "stop")
    try:
        cfg.params
    except ValueError as exc:
        raise OutOfRangeError(str(exc)) from None


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
