"""Cyclic MVDR beamforming for cyclostationary noise suppression.

The package enhances a multichannel recording corrupted by harmonic or
quasi-harmonic noise (engines, alarms, electrical hum) by stacking
frequency-shifted copies of the input next to each STFT bin and solving a
minimum-variance distortionless-response problem on the stacked covariance.
Which shifts to stack is decided per bin from the measured cyclic spectral
coherence of the data.
"""

from .audio_io import read_wav, write_wav
from .beamform import (
    MultibandStack,
    NumericalError,
    SingleChannelScenario,
    SpatialSpectralCov,
    apply_beamformer,
    build_multiband_stack,
    closed_form_weights,
    cmvdr_weights,
    diagonal_load,
    estimate_cov_batch,
    estimate_cov_recursive,
    estimate_rtf_cw,
    mvdr_weights,
    pad_rtf,
    residual_noise_factor,
    residual_noise_power,
    trivial_mod_sets,
)
from .config import ExperimentConfig, dump_config, load_config
from .cyclospec import (
    CyclicSpectrumEstimate,
    ModulationSet,
    PeakParams,
    ResonantFrequencySet,
    acp_estimate,
    candidate_shifts_difference,
    candidate_shifts_integer,
    coherence_estimate,
    coherence_filter,
    cyclic_coherence,
    find_resonant_frequencies,
    periodogram,
)
from .dsp import (
    SignalBuffer,
    StftConfig,
    StftTensor,
    istft,
    make_window,
    modulate,
    num_frames,
    stft,
)
from .experiments import run_sweep, run_trial
from .metrics import improvement, si_sdr
from .pipeline import EnhanceResult, OracleFrequencies, PipelineConfig, enhance
from .synth import (
    HarmonicNoiseParams,
    RirParams,
    Scene,
    SceneConfig,
    gen_cs_noise,
    gen_rir,
    gen_speech_like,
    lowpass_butter4,
    mix_scene,
)

__version__ = "0.1.0"
