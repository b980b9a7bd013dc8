"""Flat INI configuration files.

Numbers accept the token ``pi`` in products and quotients (``pi``, ``2*pi``,
``pi/2``).  Mode lists are written ``j:value`` separated by commas, with
1-based mode indices; an empty list means the zero field.
"""

import configparser
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigParseError, ConfigurationError
from .memory import DEFAULT_TAIL_TOL, ExponentialKernel
from .model import EpsilonSpec, NonlinearitySpec, Numerics, make_config

DEFAULT_CONFIG = """\
[domain]
length = pi
n_modes = 32
n_quad = 128

[epsilon]
kind = logistic
eps0 = 1.0
kappa = 1.0

[kernel]
kind = exponential
amplitude = 1.0
rate = 1.0
delta = 1.0
s_step = 0.01
tail_tol = 1e-10

[nonlinearity]
kind = cubic
l = 1.0

[forcing]
modes = 1:1.0

[numerics]
dt = 0.01
t_start = 0.0
t_end = 50.0
sample_every = 0.1
radius = 10.0
ensemble = 8
pullback_spacing = 10.0
pullback_levels = 5

[initial]
modes = 1:1.0, 2:-0.5, 3:0.25
history_rate = 0.5
varrho = 1.0
admissibility_bound = 1000.0
"""

SCHEMA = {
    "domain": {"length", "n_modes", "n_quad"},
    "epsilon": {"kind", "eps0", "kappa"},
    "kernel": {"kind", "amplitude", "rate", "delta", "s_step", "tail_tol"},
    "nonlinearity": {"kind", "l", "p"},
    "forcing": {"modes"},
    "numerics": set(Numerics.__dataclass_fields__),
    "initial": {"modes", "history_rate", "varrho", "admissibility_bound"},
}
INT_KEYS = {"n_modes", "n_quad", "ensemble", "pullback_levels"}

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class InitialSpec:
    """Initial state requested by a configuration file."""

    u: np.ndarray
    history_rate: float = 0.5


def _locate(text, section, key=None):
    """1-based line of ``[section]`` or of ``key`` inside it, else 0."""
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None:
            name = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            if name == key:
                return i
    return 0


def parse_number(token):
    """Float from a product/quotient of literals and ``pi``."""
    s = token.strip().replace(" ", "")
    if not s:
        raise ValueError("empty number")
    parts = re.split(r"([*/])", s)
    value = None
    op = "*"
    for part in parts:
        if part in ("*", "/"):
            op = part
            continue
        if part.lower() == "pi":
            x = math.pi
        elif _NUMBER.match(part):
            x = float(part)
        else:
            raise ValueError(f"not a number: {token!r}")
        value = x if value is None else (value * x if op == "*" else value / x)
    return value


def parse_modes(text, n_modes):
    """``"1:1.0, 3:-2"`` -> coefficient vector; empty text gives zeros."""
    c = np.zeros(n_modes)
    for item in filter(None, (p.strip() for p in text.split(","))):
        j, _, v = item.partition(":")
        if not v:
            raise ValueError(f"mode entry {item!r} is not of the form j:value")
        j = int(j)
        if not 1 <= j <= n_modes:
            raise ValueError(f"mode index {j} outside 1..{n_modes}")
        c[j - 1] += parse_number(v)
    return c


def _read(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigParseError("key outside any section", lineno=e.lineno) from e
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigParseError(str(e).split(": ", 1)[-1], lineno=e.lineno) from e
    except configparser.ParsingError as e:
        lineno = e.errors[0][0] if e.errors else 0
        raise ConfigParseError("malformed line", lineno=lineno) from e
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigParseError(f"unknown section [{section}]", lineno=_locate(text, section))
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigParseError(f"unknown key {key!r} in [{section}]", lineno=_locate(text, section, key))
    return parser


def _values(parser, text):
    """Section -> {key: parsed value}; mode lists and kinds stay strings."""
    out = {s: {} for s in SCHEMA}
    for section in parser.sections():
        for key, raw in parser[section].items():
            if key in ("kind", "modes"):
                out[section][key] = raw.strip()
                continue
            try:
                v = parse_number(raw)
                if key in INT_KEYS:
                    if v != int(v):
                        raise ValueError(f"{key} must be an integer")
                    v = int(v)
            except ValueError as e:
                raise ConfigParseError(f"[{section}] {key}: {e}", lineno=_locate(text, section, key)) from e
            out[section][key] = v
    return out


def _build(values, overrides=None):
    for dotted, v in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown parameter {dotted!r}")
        values[section][key] = v
    dom, eps_v, ker, nl, forc, num, ini = (values[s] for s in
                                           ("domain", "epsilon", "kernel", "nonlinearity",
                                            "forcing", "numerics", "initial"))
    n_modes = dom.get("n_modes", 32)
    eps = EpsilonSpec(eps_v.get("kind", "logistic"), eps_v.get("eps0", 1.0), eps_v.get("kappa", 1.0))
    if ker.get("kind", "exponential") != "exponential":
        raise ConfigurationError(f"unknown kernel kind {ker['kind']!r}")
    kernel = ExponentialKernel(ker.get("amplitude", 1.0), ker.get("rate", 1.0), ker.get("delta"))
    nonlinearity = NonlinearitySpec(nl.get("kind", "cubic"), nl.get("l"), nl.get("p", 4.0))
    try:
        g = parse_modes(forc.get("modes", ""), n_modes)
        u0 = parse_modes(ini.get("modes", ""), n_modes)
    except ValueError as e:
        raise ConfigurationError(str(e)) from e
    config = make_config(domain_length=dom.get("length", math.pi), n_modes=n_modes,
                         n_quad=dom.get("n_quad", 128), eps=eps, kernel=kernel,
                         nonlinearity=nonlinearity, g=g, s_step=ker.get("s_step", 0.01),
                         tail_tol=ker.get("tail_tol", DEFAULT_TAIL_TOL), varrho=ini.get("varrho", 1.0),
                         admissibility_bound=ini.get("admissibility_bound", 1e3), numerics=Numerics(**num))
    return config, InitialSpec(u0, ini.get("history_rate", 0.5))


def parse_config_full(text, overrides=None):
    """Parse and validate; returns ``(ModelConfig, InitialSpec)``.

    ``overrides`` maps ``"section.key"`` to an already parsed value.
    """
    parser = _read(text)
    return _build(_values(parser, text), overrides)


def parse_config(text):
    """Parse and validate a configuration text into a :class:`ModelConfig`."""
    return parse_config_full(text)[0]
