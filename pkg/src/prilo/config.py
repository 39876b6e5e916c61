"""Experiment configuration files.

Configs are INI files with dotted sections; values are Python literals
(numbers, booleans, tuples, ``None``) or bare strings::

    [experiment]
    dataset = data/mnist/t10k-images-idx3-ubyte.gz
    measurement = fourier
    method = prilo
    init = mii
    restarts = 4

    [prilo]
    init_steps = 150

    [prilo.phase.1]
    target_layer = 1
    repetitions = 3

Relative paths are resolved against the directory of the config file.  A run
manifest is a config with every value spelled out plus ``[run]`` and
``[images]`` sections, so a manifest can be fed back in to replay the run.
"""
import ast
import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .core_math import Shape2D
from .errors import ConfigError
from .projection import NoiseSchedule
from .solvers import PriloConfig, PriloPhase
from .vae import VaeSpec

MEASUREMENTS = ("fourier", "gaussian-real", "gaussian-complex")
METHODS = ("er", "hio", "dpr", "prilo")
INITS = ("random", "mii")
FORMATS = ("idx", "pgm")
ABLATIONS = ("full", "ab", "a", "init")


def _literal(text):
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text
    return value


def _render(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, str):
        return value
    return repr(value)


def _as_float(value, key):
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


@dataclass
class DprParams:
    steps: int = 1000
    step_size: float = 0.1
    radius: float = math.inf
    noise: bool = False


@dataclass
class FienupParams:
    iters: int = 1000
    beta: float = 0.9
    feedback: str = "projection"


@dataclass
class ExperimentConfig:
    dataset: str = ""
    dataset_format: str = "idx"
    shape: str = "28x28"
    measurement: str = "fourier"
    m: int = None
    dump_matrix: bool = False
    method: str = "prilo"
    weights: str = ""
    init: str = "mii"
    mii_candidates: int = 5000
    init_sigma: float = 0.0
    restarts: int = 4
    seed: int = 0
    out: str = "runs/default"
    limit: int = None
    offset: int = 0
    trace: bool = False
    register: bool = None
    workers: int = 1
    dpr: DprParams = field(default_factory=DprParams)
    fienup: FienupParams = field(default_factory=FienupParams)
    prilo: PriloConfig = field(default_factory=PriloConfig)
    ablation: str = "full"
    train: VaeSpec = field(default_factory=VaeSpec)

    @property
    def registration(self):
        """Registration defaults to on for Fourier and off for Gaussian operators."""
        if self.register is None:
            return self.measurement == "fourier"
        return bool(self.register)

    @property
    def init_label(self):
        return f"mii({self.mii_candidates})" if self.init == "mii" else "random"

    def solver_prilo(self):
        return self.prilo.ablation(self.ablation)

    def validate(self, need_weights=None):
        """Check value ranges and that referenced files exist."""
        if self.measurement not in MEASUREMENTS:
            raise ConfigError(f"measurement must be one of {MEASUREMENTS}, got {self.measurement!r}")
        if self.measurement != "fourier" and self.m is None:
            raise ConfigError(f"measurement {self.measurement} needs m")
        if self.m is not None and self.m < 1:
            raise ConfigError(f"m must be positive, got {self.m}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.init not in INITS:
            raise ConfigError(f"init must be one of {INITS}, got {self.init!r}")
        if self.dataset_format not in FORMATS:
            raise ConfigError(f"dataset_format must be one of {FORMATS}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.restarts < 1 or self.workers < 1 or self.mii_candidates < 1:
            raise ConfigError("restarts, workers and mii_candidates must be at least 1")
        if self.limit is not None and self.limit < 0 or self.offset < 0:
            raise ConfigError("limit and offset must be non-negative")
        if self.method in ("er", "hio") and self.measurement != "fourier":
            raise ConfigError(f"{self.method} works with Fourier measurements only")
        Shape2D.parse(self.shape)
        if not self.dataset or not Path(self.dataset).exists():
            raise ConfigError(f"dataset not found: {self.dataset!r}")
        if need_weights is None:
            need_weights = self.method in ("dpr", "prilo")
        if need_weights and (not self.weights or not Path(self.weights).exists()):
            raise ConfigError(f"generator weights not found: {self.weights!r}")
        return self


_SCALARS = [f.name for f in fields(ExperimentConfig)
            if f.name not in ("dpr", "fienup", "prilo", "train")]
_PRILO_SCALARS = [f.name for f in fields(PriloConfig) if f.name not in ("phases", "noise")]
_TRAIN_KEYS = [f.name for f in fields(VaeSpec) if f.name != "seed"]  # experiment seed is used
_PATH_KEYS = ("dataset", "weights", "out")


def _pick(section, names, where):
    out = {}
    for key, raw in section.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in [{where}]")
        out[key] = _literal(raw)
    return out


def _build(parser, base_dir):
    sections = set(parser.sections())
    known = {"experiment", "dpr", "fienup", "prilo", "noise", "train", "run", "images"}
    phase_names = sorted((s for s in sections if s.startswith("prilo.phase.")),
                         key=lambda s: int(s.rsplit(".", 1)[1]))
    for s in sections - known - set(phase_names):
        raise ConfigError(f"unknown section [{s}]")

    exp = _pick(parser["experiment"], _SCALARS, "experiment") if "experiment" in sections else {}
    exp.setdefault("out", ExperimentConfig.out)
    for key in _PATH_KEYS:
        if exp.get(key):
            p = Path(str(exp[key]))
            exp[key] = str(p if p.is_absolute() else (base_dir / p).resolve())
    for key in ("dataset", "weights", "out", "shape"):
        if key in exp and exp[key] is not None:
            exp[key] = str(exp[key])

    dpr = _pick(parser["dpr"], [f.name for f in fields(DprParams)], "dpr") if "dpr" in sections else {}
    if "radius" in dpr:
        dpr["radius"] = _as_float(dpr["radius"], "dpr.radius")
    fien = (_pick(parser["fienup"], [f.name for f in fields(FienupParams)], "fienup")
            if "fienup" in sections else {})
    noise = (_pick(parser["noise"], [f.name for f in fields(NoiseSchedule)], "noise")
             if "noise" in sections else {})
    prilo = _pick(parser["prilo"], _PRILO_SCALARS, "prilo") if "prilo" in sections else {}
    if "init_radius" in prilo:
        prilo["init_radius"] = _as_float(prilo["init_radius"], "prilo.init_radius")
    phases = []
    for name in phase_names:
        ph = _pick(parser[name], [f.name for f in fields(PriloPhase)], name)
        for key in ("stepA_radius", "stepB_radius", "stepC_radius"):
            if key in ph:
                ph[key] = _as_float(ph[key], f"{name}.{key}")
        phases.append(PriloPhase(**ph))
    train = _pick(parser["train"], _TRAIN_KEYS, "train") if "train" in sections else {}

    try:
        return ExperimentConfig(
            **exp,
            dpr=DprParams(**dpr),
            fienup=FienupParams(**fien),
            prilo=PriloConfig(phases=phases, noise=NoiseSchedule(**noise), **prilo),
            train=VaeSpec(**train),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parser():
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case (stepA_steps)
    return parser


def load_config(path):
    """Parse a config (or manifest) file into an :class:`ExperimentConfig`."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = _parser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return _build(parser, path.resolve().parent)


def parse_config(text, base_dir="."):
    parser = _parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return _build(parser, Path(base_dir).resolve())


def apply_overrides(config, seed=None, out=None, limit=None, trace=None, register=None,
                    assignments=()):
    """Command-line overrides; ``assignments`` holds ``section.key=value`` strings."""
    changes = {k: v for k, v in dict(seed=seed, out=out, limit=limit, trace=trace,
                                     register=register).items() if v is not None}
    if changes.get("out"):
        changes["out"] = str(Path(changes["out"]).resolve())
    config = replace(config, **changes)
    if not assignments:
        return config
    parser = _parser()
    parser.read_dict(to_sections(config))
    for item in assignments:
        key, sep, value = item.partition("=")
        section, _, name = key.strip().rpartition(".")
        if not sep or not section:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][name] = value.strip()
    return _build(parser, Path("/"))


def to_sections(config):
    """Nested ``{section: {key: text}}`` with every value spelled out."""
    exp = {name: _render(getattr(config, name)) for name in _SCALARS}
    prilo = config.prilo
    out = {
        "experiment": exp,
        "dpr": {k: _render(v) for k, v in asdict(config.dpr).items()},
        "fienup": {k: _render(v) for k, v in asdict(config.fienup).items()},
        "prilo": {k: _render(getattr(prilo, k)) for k in _PRILO_SCALARS},
        "noise": {k: _render(v) for k, v in asdict(prilo.noise).items()},
        "train": {k: _render(getattr(config.train, k)) for k in _TRAIN_KEYS},
    }
    for n, phase in enumerate(prilo.phases, start=1):
        out[f"prilo.phase.{n}"] = {k: _render(v) for k, v in asdict(phase).items()}
    return out


def write_manifest(path, config, run_info, images=None):
    """Write the fully resolved config plus run metadata and per-image seeds."""
    parser = _parser()
    parser.read_dict(to_sections(config))
    parser["run"] = {k: _render(v) for k, v in run_info.items()}
    if images is not None:
        parser["images"] = {str(idx): str(seed) for idx, seed in images}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def read_manifest_images(path):
    """``[(image index, seed), ...]`` recorded in a manifest."""
    parser = _parser()
    parser.read(path, encoding="utf-8")
    if "images" not in parser:
        return []
    return [(int(k), int(v)) for k, v in parser["images"].items()]
