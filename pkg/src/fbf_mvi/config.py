"""INI run configuration.

Sections ``[problem]``, ``[flow]``, ``[iter]``, ``[analysis]`` and
``[output]`` hold flat ``key = value`` pairs. Vectors are comma separated;
matrix rows are separated by ``;``. Every error carries the file position of
the offending text.
"""

import configparser
import re

import numpy as np

from .errors import ConfigError


def _vector(text):
    return np.array([float(v) for v in text.replace(" ", "").split(",") if v != ""])


def _matrix(text):
    rows = [r for r in text.split(";") if r.strip()]
    out = np.array([_vector(r) for r in rows])
    if out.ndim != 2:
        raise ValueError("matrix rows differ in length")
    return out


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_COMMON_STEP = {"lambda": float, "lambda_frac": float, "tol": float, "x0": _vector}

SCHEMA = {
    "problem": {
        "example": str,
        "seed": int,
        "eta": float,
        "operator": str,
        "dim": int,
        "matrix": _matrix,
        "offset": _vector,
        "shift": float,
        "prox": str,
        "lo": float,
        "hi": float,
        "target_sum": float,
        "known_solution": _vector,
        "beta": float,
        "mu": float,
    },
    "flow": {
        **_COMMON_STEP,
        "dt": float,
        "t_end": float,
        "scheme": str,
        "system": str,
        "delta": float,
        "stride": int,
        "allow_invalid_lambda": _bool,
    },
    "iter": {**_COMMON_STEP, "method": str, "relaxation": float, "max_iters": int},
    "analysis": {"samples": int, "lipschitz_samples": int, "lambda": float, "lambda_frac": float},
    "output": {"dir": str},
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]*)\]")
_KEY_RE = re.compile(r"^(\s*)([^=:\s][^=:]*?)\s*[=:]\s*")


def _locate(lines):
    """Map ``(section, key)`` to the 1-based line and value column."""
    where = {}
    section = None
    for i, line in enumerate(lines, 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = (i, m.start(1) + 1)
            continue
        if line.strip().startswith(("#", ";")) or not line.strip():
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where[(section, m.group(2).strip().lower())] = (i, m.end() + 1)
    return where


def load_config(path):
    """Parse ``path`` into ``{section: {key: typed value}}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", path, exc.lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", path, exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse line {line.strip()!r}", path, lineno, 1) from None

    where = _locate(text.splitlines())
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            line, col = where.get((section, None), (None, None))
            raise ConfigError(f"unknown section [{section}]", path, line, col)
        out[section] = {}
        for key, raw in parser.items(section):
            line, col = where.get((section, key), (None, None))
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"unknown key {key!r} in [{section}]", path, line, 1)
            try:
                out[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", path, line, col) from None
    return out
