"""Flat run configuration for the experiment runner.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment. Every key is listed in :data:`KEYS` with its type, default and the
dotted field name used in diagnostics. Command-line values override the
file, which overrides the per-experiment defaults.

Example::

    experiment = sff
    ensemble = csyk
    n = 8
    realizations = 200
    t = 0.1:100:log:64
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .ensembles import KINDS, EnsembleSpec

OUTPUT_ENV = "CHARGECHAOS_OUTPUT"

EXPERIMENTS = ("dos", "sff", "sff-sectors", "r2-check", "r4-check", "fp", "fp-analytic", "kinv",
               "otoc", "page", "hp", "hp-scan", "kl", "ek-scan", "moment")

# experiments that read a spectral ensemble
SPECTRAL = ("dos", "sff", "sff-sectors", "r2-check", "r4-check", "fp", "fp-analytic", "kinv",
            "otoc")
# experiments on a time grid
TIMED = ("sff", "sff-sectors", "r2-check", "r4-check", "fp", "fp-analytic", "kinv", "otoc")


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key -> (type, default, field name in diagnostics)
KEYS = {
    "experiment": (str, None, "experiment"),
    "ensemble": (str, "csyk", "ensemble.kind"),
    "n": (int, 8, "ensemble.n"),
    "seed": (int, 0, "ensemble.seed"),
    "realizations": (int, 200, "ensemble.realizations"),
    "J": (float, 1.0, "ensemble.J"),
    "scale": (float, 1.0, "ensemble.scale"),
    "t_min": (float, 0.1, "time_grid.t_min"),
    "t_max": (float, 100.0, "time_grid.t_max"),
    "points": (int, 64, "time_grid.points"),
    "spacing": (str, "log", "time_grid.spacing"),
    "output": (str, "", "output"),
    "plot": (_bool, False, "plot"),
    # experiment parameters
    "statistic": (str, "R2", "params.statistic"),
    "k": (int, 1, "params.k"),
    "bins": (int, 64, "params.bins"),
    "fraction": (float, 0.1, "params.fraction"),
    "operators": (str, "auto", "params.operators"),
    "conjugations": (int, 1, "params.conjugations"),
    "n_a": (int, 2, "params.n_a"),
    "n_b": (int, 4, "params.n_b"),
    "n_c": (int, 2, "params.n_c"),
    "n_d": (int, 4, "params.n_d"),
    "m_a": (int, 1, "params.m_a"),
    "m_b": (int, 2, "params.m_b"),
    "charge": (str, "none", "params.charge"),
    "codeword_a": (int, 0, "params.codeword_a"),
    "codeword_b": (int, 0, "params.codeword_b"),
    "pauli": (str, "X", "params.pauli"),
    "sizes": (str, "3,4,5,6", "params.sizes"),
    "samples": (int, 1000, "params.samples"),
    "wiring": (str, "p=2 wiring {1,2,1,2}", "params.wiring"),
}

# --large: figure-parity sizes and realization counts
LARGE = {
    "dos": {"n": 12, "realizations": 2000},
    "sff": {"n": 12, "realizations": 2000},
    "sff-sectors": {"n": 12, "realizations": 2000},
    "r2-check": {"n": 12, "realizations": 2000},
    "r4-check": {"n": 12, "realizations": 2000},
    "fp": {"n": 10, "realizations": 1500},
    "fp-analytic": {"n": 10, "realizations": 1500},
    "kinv": {"n": 10, "realizations": 1500},
    "otoc": {"n": 10, "realizations": 1500},
    "page": {"samples": 10000},
    "hp": {"samples": 10000},
    "hp-scan": {"samples": 10000},
    "kl": {"samples": 100000},
}


def parse_time_spec(text: str) -> dict:
    """``t_min:t_max:spacing:points`` -> the four time-grid keys."""
    parts = text.split(":")
    if len(parts) != 4:
        raise ValueError("time grid must look like t_min:t_max:log|linear:points")
    return {"t_min": parts[0], "t_max": parts[1], "spacing": parts[2], "points": parts[3]}


def read_flat(path) -> dict:
    """Raw string values from a key = value file, or from a run manifest."""
    with open(path) as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        return {k: v for k, v in json.loads(text)["config"].items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "t":
            out.update(parse_time_spec(value))
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class TimeGrid:
    t_min: float
    t_max: float
    points: int
    spacing: str


@dataclass
class RunConfig:
    """Resolved configuration of one experiment."""

    experiment: str
    ensemble: EnsembleSpec
    time_grid: TimeGrid
    output: str
    plot: bool
    params: dict = field(default_factory=dict)

    def flat(self) -> dict:
        """Flat key -> value mapping, the form stored in the manifest."""
        e, g = self.ensemble, self.time_grid
        out = {"experiment": self.experiment, "ensemble": e.kind, "n": e.size, "seed": e.seed,
               "realizations": e.realizations, "J": e.J, "scale": e.scale,
               "t_min": g.t_min, "t_max": g.t_max, "points": g.points, "spacing": g.spacing,
               "output": self.output, "plot": self.plot}
        out.update(self.params)
        return out


class ConfigError(ValueError):
    """Raised with the list of (field, message) diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.diagnostics))


def resolve(raw: dict) -> tuple:
    """Turn raw string values into a :class:`RunConfig`.

    Returns (config or None, diagnostics). Unknown keys and values that do not
    parse are reported with their field name.
    """
    diags = []
    experiment = raw.get("experiment")
    values = {k: spec[1] for k, spec in KEYS.items()}
    for key, value in raw.items():
        if key not in KEYS:
            diags.append((key, "unknown configuration key"))
            continue
        typ, _, name = KEYS[key]
        try:
            values[key] = typ(value) if value is not None else None
        except (TypeError, ValueError):
            diags.append((name, f"cannot parse {value!r} as {typ.__name__.strip('_')}"))
    if not values["output"]:
        base = os.environ.get(OUTPUT_ENV, "chargechaos-out")
        values["output"] = os.path.join(base, str(experiment))
    if diags:
        return None, diags
    try:
        spec = EnsembleSpec(values["ensemble"], values["n"], values["seed"], values["realizations"],
                            values["J"], values["scale"])
    except TypeError as exc:                    # pragma: no cover - dataclass guards
        return None, [("ensemble", str(exc))]
    grid = TimeGrid(values["t_min"], values["t_max"], values["points"], values["spacing"])
    params = {k: values[k] for k in _PARAM_KEYS}
    cfg = RunConfig(experiment, spec, grid, values["output"], values["plot"], params)
    return cfg, validate(cfg)


_PARAM_KEYS = [k for k, v in KEYS.items() if v[2].startswith("params.")]


def validate(cfg: RunConfig) -> list:
    """All (field, message) problems with ``cfg``; empty when it would run."""
    diags = []
    if cfg.experiment not in EXPERIMENTS:
        diags.append(("experiment", f"unknown experiment {cfg.experiment!r}"))
        return diags
    p = cfg.params
    if cfg.experiment in SPECTRAL:
        diags += cfg.ensemble.validate()
        if cfg.ensemble.kind not in KINDS:
            return diags
        if cfg.experiment in ("fp", "fp-analytic", "kinv") and cfg.ensemble.realizations < 2:
            diags.append(("ensemble.realizations", "frame potentials need at least 2"))
        if cfg.experiment == "otoc" and cfg.ensemble.kind == "haar":
            diags.append(("ensemble.kind", "otoc needs a charge-resolved ensemble"))
    if cfg.experiment in TIMED:
        g = cfg.time_grid
        if g.spacing not in ("log", "linear"):
            diags.append(("time_grid.spacing", "must be log or linear"))
        if g.points < 2:
            diags.append(("time_grid.points", "must be >= 2"))
        if g.spacing == "log" and not g.t_min > 0:
            diags.append(("time_grid.t_min", "must be > 0 for log spacing"))
        if g.spacing == "linear" and g.t_min < 0:
            diags.append(("time_grid.t_min", "must be >= 0"))
        if not g.t_max > g.t_min:
            diags.append(("time_grid.t_max", "must exceed t_min"))
    if cfg.experiment == "dos":
        if p["bins"] < 10:
            diags.append(("params.bins", "must be >= 10"))
        if not 0 < p["fraction"] <= 1:
            diags.append(("params.fraction", "must lie in (0, 1]"))
    if cfg.experiment in ("sff", "sff-sectors"):
        from .chaos.form_factors import parse_kind
        try:
            parse_kind(p["statistic"])
        except ValueError as exc:
            diags.append(("params.statistic", str(exc)))
    if cfg.experiment in ("fp", "kinv") and p["k"] < 1:
        diags.append(("params.k", "must be >= 1"))
    if cfg.experiment == "kinv" and p["conjugations"] < 1:
        diags.append(("params.conjugations", "must be >= 1"))
    if cfg.experiment == "otoc":
        ops = operator_strings(p["operators"], cfg.ensemble.size)
        if len(ops) not in (2, 4):
            diags.append(("params.operators", "give 2 or 4 comma separated Pauli strings"))
        width = cfg.ensemble.size
        for s in ops:
            if len(s) != width or set(s.upper()) - set("IXYZ"):
                diags.append(("params.operators", f"{s!r} is not a Pauli string on {width} qubits"))
                break
    if cfg.experiment in ("page", "hp", "hp-scan", "kl") and p["samples"] < 2:
        diags.append(("params.samples", "must be >= 2"))
    if cfg.experiment == "page":
        if p["n_a"] < 1 or p["n_b"] < 0 or p["n_a"] + p["n_b"] > 12:
            diags.append(("params.n_a", "need n_a >= 1, n_b >= 0 and n_a + n_b <= 12"))
    if cfg.experiment in ("hp", "hp-scan"):
        from .decoupling import HpConfig
        hp = HpConfig(p["n_a"], p["n_b"], p["n_c"], p["n_d"], p["m_a"], p["m_b"])
        diags += [(f"params.{f}", m) for f, m in hp.validate()]
        if hp.n > 12:
            diags.append(("params.n_b", "sampled HP runs are limited to 12 qubits"))
    if cfg.experiment == "kl":
        try:
            sizes = [int(s) for s in p["sizes"].split(",")]
        except ValueError:
            sizes = []
        if not sizes or min(sizes) < 1 or max(sizes) > 12:
            diags.append(("params.sizes", "comma separated qubit counts in [1, 12]"))
        elif len(p["pauli"]) > min(sizes) or set(p["pauli"].upper()) - set("IXYZ"):
            diags.append(("params.pauli", "Pauli prefix must fit the smallest size"))
        if p["charge"] != "none":
            try:
                int(p["charge"])
            except ValueError:
                diags.append(("params.charge", "must be an integer or none"))
    if cfg.experiment == "moment":
        from .cli import parse_wiring
        try:
            parse_wiring(p["wiring"])
        except ValueError as exc:
            diags.append(("params.wiring", str(exc)))
    return diags


def operator_strings(text: str, width: int) -> list:
    """Comma separated Pauli strings; ``auto`` is Z on the first and on the last qubit."""
    if text.strip() == "auto":
        return ["Z" + "I" * (width - 1), "I" * (width - 1) + "Z"]
    return [s.strip().upper() for s in text.split(",") if s.strip()]
