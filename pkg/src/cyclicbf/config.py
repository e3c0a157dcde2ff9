"""Experiment configuration: defaults, TOML loading and dumping.

Every tunable in the package appears here with its default, grouped into the
same sections the TOML files use, so ``--dump-config`` prints a complete,
round-trippable description of a run.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field, fields, replace

from .cyclospec import PeakParams
from .dsp import StftConfig
from .pipeline import PipelineConfig
from .synth import HarmonicNoiseParams, SceneConfig

SWEEP_VARIABLES = ("beta", "C_max", "M", "iSNR_db", "rt60_s", "inharmonicity_pct")
METHODS = ("MVDR", "MVDR+", "cMVDR", "cMVDR+")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo sweep: a variable, its values, trials and methods."""

    sweep_variable: str = "beta"
    sweep_values: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    n_trials: int = 50
    methods: tuple = ("MVDR", "cMVDR")
    master_seed: int = 0
    oracle_frequencies: bool = False
    jobs: int = 1
    scene: SceneConfig = field(default_factory=SceneConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(
                f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.sweep_variable!r}"
            )
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}, expected a subset of {METHODS}")
        if self.n_trials < 1 or self.jobs < 1:
            raise ValueError("n_trials and jobs must be positive")
        if len(self.sweep_values) < 1:
            raise ValueError("sweep_values must not be empty")


def apply_sweep_value(cfg: ExperimentConfig, value) -> ExperimentConfig:
    """Return a config with the swept variable set to ``value``."""
    v = cfg.sweep_variable
    if v == "beta":
        noise = replace(cfg.scene.noise, beta=float(value))
        return replace(cfg, scene=replace(cfg.scene, noise=noise))
    if v == "inharmonicity_pct":
        noise = replace(cfg.scene.noise, inharmonicity_pct=float(value))
        return replace(cfg, scene=replace(cfg.scene, noise=noise))
    if v == "C_max":
        return replace(cfg, pipeline=replace(cfg.pipeline, c_max=int(value)))
    if v == "M":
        return replace(cfg, scene=replace(cfg.scene, n_mics=int(value)))
    if v == "iSNR_db":
        return replace(cfg, scene=replace(cfg.scene, isnr_db=float(value)))
    if v == "rt60_s":
        return replace(cfg, scene=replace(cfg.scene, rt60_s=float(value)))
    raise ValueError(f"unhandled sweep variable {v!r}")


# ---------------------------------------------------------------------------
# TOML (de)serialization
# ---------------------------------------------------------------------------

_SECTION_BUILDERS = {
    "stft": StftConfig,
    "detection": PeakParams,
    "noise": HarmonicNoiseParams,
}
_PIPELINE_SCALARS = (
    "gamma_min",
    "c_max",
    "psd_floor_ratio",
    "kappa0",
    "smoothing",
    "covariance",
    "strategy",
    "freq_source",
)
_SCENE_SCALARS = (
    "sample_rate_hz",
    "duration_s",
    "n_mics",
    "isnr_db",
    "self_noise_snr_db",
    "rt60_s",
    "drr_db",
    "delay_low_samples",
    "delay_high_samples",
    "max_mic_offset_samples",
)
_EXPERIMENT_SCALARS = (
    "sweep_variable",
    "sweep_values",
    "n_trials",
    "methods",
    "master_seed",
    "oracle_frequencies",
    "jobs",
)


def config_from_dict(data: dict) -> ExperimentConfig:
    stft = StftConfig(**data.get("stft", {}))
    detection = PeakParams(**data.get("detection", {}))
    noise = HarmonicNoiseParams(**data.get("noise", {}))
    scene_kw = dict(data.get("scene", {}))
    scene = SceneConfig(noise=noise, **scene_kw)
    pipe_kw = dict(data.get("beamformer", {}))
    pipeline = PipelineConfig(stft=stft, detection=detection, **pipe_kw)
    exp_kw = dict(data.get("experiment", {}))
    for key in ("sweep_values", "methods"):
        if key in exp_kw:
            exp_kw[key] = tuple(exp_kw[key])
    return ExperimentConfig(scene=scene, pipeline=pipeline, **exp_kw)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def _emit_section(name: str, obj, keys) -> list:
    lines = [f"[{name}]"]
    for key in keys:
        lines.append(f"{key} = {_toml_value(getattr(obj, key))}")
    lines.append("")
    return lines


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize a full experiment configuration to TOML text."""
    lines = []
    lines += _emit_section("experiment", cfg, _EXPERIMENT_SCALARS)
    lines += _emit_section("scene", cfg.scene, _SCENE_SCALARS)
    lines += _emit_section(
        "noise", cfg.scene.noise, [f.name for f in fields(HarmonicNoiseParams)]
    )
    lines += _emit_section("stft", cfg.pipeline.stft, [f.name for f in fields(StftConfig)])
    lines += _emit_section(
        "detection", cfg.pipeline.detection, [f.name for f in fields(PeakParams)]
    )
    lines += _emit_section("beamformer", cfg.pipeline, _PIPELINE_SCALARS)
    return "\n".join(lines)
