"""Experiment configuration: TOML parsing and schema validation with line diagnostics."""

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

COMMANDS = ("inspect", "conjugate", "sobolev", "norm", "ccp", "solve", "sweep", "verify")

NUM = "number"
INT = "int"
STR = "str"
BOOL = "bool"
NUMS = "number list"
POINTS = "point list"

# key -> (type, check or None); the check returns an error message or None
_positive = (lambda v: None if v > 0 else "must be positive")
_gt1 = (lambda v: None if v > 1 else "must exceed 1")
_nonneg = (lambda v: None if v >= 0 else "must be nonnegative")
_unit = (lambda v: None if 0 < v <= 1 else "must lie in (0, 1]")

SECTIONS = {
    "young": {
        "family": (STR, lambda v: None if v in ("power", "power_log", "piecewise_power", "table")
                   else "must be one of power, power_log, piecewise_power, table"),
        "p": (NUM, _gt1),
        "q": (NUM, _positive),
        "coef": (NUM, _positive),
        "exponents": (NUMS, lambda v: None if v and all(x > 1 for x in v) else "exponents must exceed 1"),
        "breakpoints": (NUMS, lambda v: None if all(x > 0 for x in v) else "breakpoints must be positive"),
        "path": (STR, None),
        "interpolation": (STR, lambda v: None if v in ("linear", "step") else "must be linear or step"),
    },
    "sobolev": {
        "n": (INT, lambda v: None if v >= 2 else "must be at least 2"),
        "per_decade": (INT, lambda v: None if 4 <= v <= 256 else "must lie in [4, 256]"),
    },
    "domain": {
        "dim": (INT, lambda v: None if v in (1, 2) else "must be 1 or 2"),
        "cells": (INT, lambda v: None if 8 <= v <= 2048 else "must lie in [8, 2048]"),
        "lower": (NUMS, None),
        "upper": (NUMS, None),
    },
    "inspect": {
        "t_lo": (NUM, _positive),
        "t_hi": (NUM, _positive),
        "n_samples": (INT, lambda v: None if 16 <= v <= 10**6 else "must lie in [16, 1e6]"),
    },
    "conjugate": {
        "s_lo": (NUM, _positive),
        "s_hi": (NUM, _positive),
        "n_points": (INT, lambda v: None if 2 <= v <= 10**6 else "must lie in [2, 1e6]"),
        "n_pairs": (INT, lambda v: None if 1 <= v <= 10**7 else "must lie in [1, 1e7]"),
        "seed": (INT, _nonneg),
    },
    "function": {
        "kind": (STR, lambda v: None if v in ("sine", "bump", "constant", "csv")
                 else "must be one of sine, bump, constant, csv"),
        "amplitude": (NUM, None),
        "center": (NUMS, None),
        "width": (NUM, _positive),
        "power": (NUM, _positive),
        "path": (STR, None),
    },
    "bubbles": {
        "centers": (POINTS, None),
        "scales": (NUMS, lambda v: None if v and all(x > 0 for x in v) else "scales must be positive"),
        "k_max": (INT, lambda v: None if 1 <= v <= 12 else "must lie in [1, 12]"),
        "normalization": (STR, lambda v: None if v in ("gradient-A-bounded", "An-mass-one")
                          else "must be gradient-A-bounded or An-mass-one"),
        "bound": (NUM, _positive),
        "profile_power": (NUM, _positive),
        "delta_fraction": (NUM, _unit),
        "safety": (NUM, _unit),
        "rh_from": (INT, lambda v: None if v >= 1 else "must be at least 1"),
    },
    "problem": {
        "r": (NUM, _gt1),
        "gamma": (NUM, _gt1),
        "lam": (NUM, _nonneg),
        "lambdas": (NUMS, lambda v: None if v and all(x >= 0 for x in v) else "lambdas must be nonnegative"),
        "include_critical": (BOOL, None),
        "path_nodes": (INT, lambda v: None if 4 <= v <= 200 else "must lie in [4, 200]"),
        "max_iters": (INT, lambda v: None if 1 <= v <= 100000 else "must lie in [1, 1e5]"),
    },
    "verify": {
        "seed": (INT, _nonneg),
        "eta": (NUM, _positive),
    },
    "tolerances": {},  # keys validated against the command's tolerance table
}

# sections each command accepts (required ones first)
COMMAND_SECTIONS = {
    "inspect": (("young",), ("inspect", "tolerances")),
    "conjugate": (("young",), ("conjugate", "tolerances")),
    "sobolev": (("young", "sobolev"), ("tolerances",)),
    "norm": (("young", "domain"), ("function", "tolerances")),
    "ccp": (("young", "sobolev", "domain", "bubbles"), ("tolerances",)),
    "solve": (("young", "sobolev", "domain", "problem"), ("tolerances",)),
    "sweep": (("young", "sobolev", "domain", "problem"), ("tolerances",)),
    "verify": (("young",), ("sobolev", "verify", "tolerances")),
}


@dataclass
class ExperimentConfig:
    command: str
    sections: dict
    path: Path
    sha256: str
    lines: dict = field(default_factory=dict, repr=False)

    @property
    def base_dir(self):
        return self.path.parent

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def section(self, name):
        return dict(self.sections.get(name, {}))

    def error(self, section, key, message):
        return ConfigError(_diag(self.path, self.lines, section, key, message))


def _key_lines(text):
    """Map ``(section, key) -> line`` by scanning the raw text."""
    out = {}
    section = ""
    header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    keyre = re.compile(r"^\s*([A-Za-z0-9_\-]+|\"[^\"]*\")\s*=")
    for no, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            section = m.group(1)
            out.setdefault((section, None), no)
            continue
        m = keyre.match(line)
        if m:
            out.setdefault((section, m.group(1).strip('"')), no)
    return out


def _diag(path, lines, section, key, message):
    no = lines.get((section, key)) or lines.get((section, None))
    where = f"{path}:{no}" if no else str(path)
    what = ".".join(x for x in (section, key) if x)
    return f"{where}: [{what}] {message}" if what else f"{where}: {message}"


def _typed(value, kind):
    if kind == NUM:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == STR:
        return isinstance(value, str)
    if kind == BOOL:
        return isinstance(value, bool)
    if kind == NUMS:
        return isinstance(value, list) and all(_typed(v, NUM) for v in value)
    if kind == POINTS:
        return isinstance(value, list) and bool(value) and all(
            _typed(v, NUMS) and len(v) > 0 for v in value)
    return False


def load_config(path, command, tolerance_keys=()):
    """Parse and validate ``path`` for ``command``; raises ConfigError with line/key context."""
    path = Path(path)
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        text = raw.decode("utf-8")
        data = tomllib.loads(text)
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: config is not UTF-8") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed TOML: {exc}") from None
    lines = _key_lines(text)
    cfg = ExperimentConfig(command, {}, path, hashlib.sha256(raw).hexdigest(), lines)

    declared = data.pop("command", None)
    if declared is not None and declared != command:
        raise cfg.error("", "command", f"config declares command {declared!r} but {command!r} was run")
    required, optional = COMMAND_SECTIONS[command]
    for name, body in data.items():
        if name not in SECTIONS:
            raise cfg.error(name, None, "unknown section or key")
        if name not in required and name not in optional:
            raise cfg.error(name, None, f"section not used by command {command!r}")
        if not isinstance(body, dict):
            raise cfg.error("", name, "expected a table")
    for name in required:
        if name not in data:
            raise ConfigError(f"{path}: missing required section [{name}] for command {command!r}")

    for name, body in data.items():
        schema = SECTIONS[name]
        for key, value in body.items():
            if name == "tolerances":
                if key not in tolerance_keys:
                    raise cfg.error(name, key, f"unknown tolerance; known: {', '.join(sorted(tolerance_keys))}")
                if not _typed(value, NUM) or not value > 0:
                    raise cfg.error(name, key, "tolerance must be a positive number")
                continue
            if key not in schema:
                raise cfg.error(name, key, "unknown key")
            kind, check = schema[key]
            if not _typed(value, kind):
                raise cfg.error(name, key, f"expected {kind}, got {type(value).__name__}")
            msg = check(value) if check else None
            if msg:
                raise cfg.error(name, key, msg)
        cfg.sections[name] = body
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg):
    y = cfg.sections.get("young")
    if y is not None:
        fam = y.get("family")
        if fam is None:
            raise cfg.error("young", None, "missing key 'family'")
        need = {"power": ("p",), "power_log": ("p",), "piecewise_power": ("exponents",), "table": ("path",)}[fam]
        for k in need:
            if k not in y:
                raise cfg.error("young", "family", f"family {fam!r} needs key {k!r}")
        allowed = {"power": {"family", "p", "coef"}, "power_log": {"family", "p", "q"},
                   "piecewise_power": {"family", "exponents", "breakpoints"},
                   "table": {"family", "path", "interpolation"}}[fam]
        for k in y:
            if k not in allowed:
                raise cfg.error("young", k, f"key not used by family {fam!r}")
        if fam == "piecewise_power" and len(y.get("breakpoints", ())) != len(y["exponents"]) - 1:
            raise cfg.error("young", "breakpoints", "need one breakpoint fewer than exponents")
        if fam == "table":
            p = Path(y["path"])
            p = p if p.is_absolute() else cfg.base_dir / p
            if not p.is_file():
                raise cfg.error("young", "path", f"file not found: {p}")
    d = cfg.sections.get("domain")
    if d is not None:
        dim = d.get("dim", 2)
        for k in ("lower", "upper"):
            if k in d and len(d[k]) != dim:
                raise cfg.error("domain", k, f"expected {dim} coordinates")
        lo = d.get("lower", [0.0] * dim)
        hi = d.get("upper", [1.0] * dim)
        if any(b <= a for a, b in zip(lo, hi)):
            raise cfg.error("domain", "upper", "upper must exceed lower in every coordinate")
    b = cfg.sections.get("bubbles")
    if b is not None:
        if ("scales" in b) == ("k_max" in b):
            raise cfg.error("bubbles", None, "give exactly one of 'scales' or 'k_max'")
        if "centers" not in b:
            raise cfg.error("bubbles", None, "missing key 'centers'")
        dim = (d or {}).get("dim", 2)
        if any(len(c) != dim for c in b["centers"]):
            raise cfg.error("bubbles", "centers", f"every center needs {dim} coordinates")
    p = cfg.sections.get("problem")
    if p is not None:
        for k in ("r", "gamma"):
            if k not in p:
                raise cfg.error("problem", None, f"missing key {k!r}")
        if cfg.command == "solve" and "lam" not in p:
            raise cfg.error("problem", None, "missing key 'lam'")
        if cfg.command == "sweep" and "lambdas" not in p:
            raise cfg.error("problem", None, "missing key 'lambdas'")
        if "lambdas" in p and any(b <= a for a, b in zip(p["lambdas"], p["lambdas"][1:])):
            raise cfg.error("problem", "lambdas", "lambdas must be strictly increasing")
    f = cfg.sections.get("function")
    if f is not None and f.get("kind") == "csv" and "path" not in f:
        raise cfg.error("function", "kind", "kind 'csv' needs key 'path'")
    s = cfg.sections.get("sobolev")
    if s is not None and "n" not in s:
        raise cfg.error("sobolev", None, "missing key 'n'")
    for sec, lo, hi in (("inspect", "t_lo", "t_hi"), ("conjugate", "s_lo", "s_hi")):
        blk = cfg.sections.get(sec, {})
        if lo in blk and hi in blk and not blk[lo] < blk[hi]:
            raise cfg.error(sec, hi, f"{hi} must exceed {lo}")
