"""Experiment configuration and its flat INI-style file format.

Example file::

    [scenario]
    filter_length = 7
    input_variance = 1
    ar_coefficient = 0
    noise_variance = 1e-2
    process_noise_schedule = 0:0
    true_system_init = seeded-unit-norm
    horizon = 5000
    seed = 1

    [combination]
    topology = cyclic_feedback
    mu1 = 0.05
    mu2 = 0.005
    cycle_period = 50

    [supervisor]
    kind = convex
    step_size = 200

    [baselines]
    lms_step_sizes = 0.05, 0.005

    [harness]
    ensemble_size = 300
    steady_state_window = 1000
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .combinations import CYCLIC_FEEDBACK, Topology
from .scenario import SEEDED_UNIT_NORM, ConfigError, ScenarioConfig
from .supervisors import AFFINE, SIGMOID, Activation, Normalization, SupervisorState

__all__ = [
    "BaselineSpec", "CombinationSpec", "ConfigError", "ExperimentConfig",
    "SupervisorSpec", "load_config", "save_config",
]

SUPERVISOR_KINDS = {"convex": SIGMOID, "sigmoid": SIGMOID, "affine": AFFINE}


@dataclass
class CombinationSpec:
    topology: str = CYCLIC_FEEDBACK
    mu1: float = 0.05
    mu2: float = 0.005
    cycle_period: float = math.inf
    leak_amount: float = 0.0
    eta_threshold: float = 0.98

    def __post_init__(self):
        self.cycle_period = float(self.cycle_period)

    def build(self) -> Topology:
        return Topology(self.topology, self.cycle_period, self.leak_amount, self.eta_threshold)


@dataclass
class SupervisorSpec:
    """Supervisor settings.

    ``step_size`` is ``mu_a`` for plain supervisors and the normalized step
    when ``normalized`` is set. Omitted bounds fall back to [-4, 4] for the
    convex and [-0.25, 1.25] for the affine supervisor.
    """

    kind: str = "convex"
    step_size: float = 100.0
    a_min: float | None = None
    a_max: float | None = None
    eta_init: float = 0.5
    normalized: bool = False
    beta: float = 0.9
    epsilon: float = 1e-2

    @property
    def activation_kind(self):
        try:
            return SUPERVISOR_KINDS[self.kind]
        except KeyError:
            raise ConfigError(f"unknown supervisor kind {self.kind!r}") from None

    @property
    def a_bounds(self):
        if self.a_min is None and self.a_max is None:
            return None
        lo, hi = Activation(self.activation_kind).default_bounds()
        return (lo if self.a_min is None else self.a_min, hi if self.a_max is None else self.a_max)

    def build(self, shape=()) -> SupervisorState:
        norm = Normalization(self.beta, self.epsilon) if self.normalized else None
        return SupervisorState.create(self.activation_kind, self.step_size, self.a_bounds,
                                      self.eta_init, norm, shape)


@dataclass
class BaselineSpec:
    lms_step_sizes: list[float] = field(default_factory=list)
    vss_lms: bool = False
    vss_decay: float = 0.95
    vss_gain: float = 0.1
    vss_mu_min: float = 0.005
    vss_mu_max: float = 0.08
    vss_mu_init: float | None = None


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig
    combination: CombinationSpec = field(default_factory=CombinationSpec)
    supervisor: SupervisorSpec = field(default_factory=SupervisorSpec)
    baselines: BaselineSpec = field(default_factory=BaselineSpec)
    ensemble_size: int = 300
    steady_state_window: int = 1000
    output: str | None = None
    chunk_size: int = 100
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.scenario.validate()
        problems = []
        if self.ensemble_size < 1:
            problems.append("ensemble_size must be >= 1")
        if not 1 <= self.steady_state_window < self.scenario.horizon:
            problems.append("steady_state_window must be >= 1 and < horizon")
        if self.chunk_size < 1:
            problems.append("chunk_size must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if problems:
            raise ConfigError("invalid ExperimentConfig: " + "; ".join(problems))
        try:
            self.combination.build()
            self.supervisor.build()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# file format

_HARNESS_KEYS = ("ensemble_size", "steady_state_window", "output", "chunk_size", "workers")


def _parse_schedule(text):
    pairs = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        start, _, var = item.partition(":")
        if not _:
            raise ConfigError(f"schedule entry {item!r} is not start:variance")
        pairs.append((int(start), float(var)))
    return pairs


def _format_schedule(pairs):
    return ", ".join(f"{s}:{q!r}" for s, q in pairs)


def _parse_float_list(text):
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _parse_value(kind, raw):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    if raw.lower() in ("none", ""):
        return None
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


# resolved annotation types for the simple dataclasses
_TYPES = {
    CombinationSpec: dict(topology=str, mu1=float, mu2=float, cycle_period=float,
                          leak_amount=float, eta_threshold=float),
    SupervisorSpec: dict(kind=str, step_size=float, a_min=float, a_max=float, eta_init=float,
                         normalized=bool, beta=float, epsilon=float),
    BaselineSpec: dict(vss_lms=bool, vss_decay=float, vss_gain=float, vss_mu_min=float,
                       vss_mu_max=float, vss_mu_init=float),
}


def _section(parser, name, cls):
    out = {}
    if not parser.has_section(name):
        return out
    types = _TYPES[cls]
    for key, raw in parser.items(name):
        if key == "lms_step_sizes" and cls is BaselineSpec:
            out[key] = _parse_float_list(raw)
        elif key in types:
            out[key] = _parse_value(types[key], raw)
        else:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
    return out


def _scenario_from(parser):
    if not parser.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    kw = {}
    for key, raw in parser.items("scenario"):
        if key == "filter_length" or key in ("horizon", "seed"):
            kw[key] = int(raw)
        elif key in ("input_variance", "ar_coefficient", "noise_variance"):
            kw[key] = float(raw)
        elif key == "process_noise_schedule":
            kw[key] = _parse_schedule(raw)
        elif key == "true_system_init":
            raw = raw.strip()
            kw[key] = raw if raw == SEEDED_UNIT_NORM else _parse_float_list(raw)
        else:
            raise ConfigError(f"unknown key {key!r} in [scenario]")
    if "filter_length" not in kw:
        raise ConfigError("[scenario] needs filter_length")
    return ScenarioConfig(**kw)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    unknown = set(parser.sections()) - {"scenario", "combination", "supervisor", "baselines", "harness"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    harness = {}
    if parser.has_section("harness"):
        for key, raw in parser.items("harness"):
            if key not in _HARNESS_KEYS:
                raise ConfigError(f"unknown key {key!r} in [harness]")
            harness[key] = raw.strip() if key == "output" else int(raw)
    try:
        return ExperimentConfig(
            scenario=_scenario_from(parser),
            combination=CombinationSpec(**_section(parser, "combination", CombinationSpec)),
            supervisor=SupervisorSpec(**_section(parser, "supervisor", SupervisorSpec)),
            baselines=BaselineSpec(**_section(parser, "baselines", BaselineSpec)),
            **harness,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return "inf" if v == math.inf else repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    sc = cfg.scenario
    parser["scenario"] = {
        "filter_length": str(sc.filter_length),
        "input_variance": _fmt(float(sc.input_variance)),
        "ar_coefficient": _fmt(float(sc.ar_coefficient)),
        "noise_variance": _fmt(float(sc.noise_variance)),
        "process_noise_schedule": _format_schedule(sc.process_noise_schedule),
        "true_system_init": (sc.true_system_init if isinstance(sc.true_system_init, str)
                             else ", ".join(repr(x) for x in sc.true_system_init)),
        "horizon": str(sc.horizon),
        "seed": str(sc.seed),
    }
    parser["combination"] = {k: _fmt(v) for k, v in asdict(cfg.combination).items()}
    parser["supervisor"] = {k: _fmt(v) for k, v in asdict(cfg.supervisor).items()}
    base = asdict(cfg.baselines)
    base["lms_step_sizes"] = ", ".join(repr(float(x)) for x in cfg.baselines.lms_step_sizes)
    parser["baselines"] = {k: (v if k == "lms_step_sizes" else _fmt(v)) for k, v in base.items()}
    parser["harness"] = {k: _fmt(getattr(cfg, k)) for k in _HARNESS_KEYS if getattr(cfg, k) is not None}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def save_config(cfg: ExperimentConfig, path):
    Path(path).write_text(dump_config(cfg))
