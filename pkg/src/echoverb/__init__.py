"""Joint multichannel reduction of acoustic echo, reverberation and noise."""

from .adaptive import AecConfig, aec_init
from .errors import InvalidInput, NumericalFailure, SingularSystem
from .gaussian import (
    SOURCES,
    SourceStats,
    estimate_source,
    log_likelihood,
    mixture_covariance,
    posterior_moment,
    unconstrained_psd,
    update_scm,
    wiener_filter,
)
from .linear import (
    DereverbFilter,
    EchoFilter,
    apply_dereverb,
    apply_echo_canceller,
    dereverb_estimate,
    dereverberated_farend_taps,
    dereverberated_mixture,
    update_dereverb_filter,
    update_echo_filter,
    wpe_dereverb_filter,
)
from .metrics import ComponentDecomposition, MetricsReport, compute_metrics, decompose, evaluate
from .nnjt import load_archive, save_archive
from .pipelines import (
    PipelineConfig,
    PipelineOutput,
    run_cascade,
    run_nn_cascade,
    run_nn_joint,
    run_nn_parallel,
    run_pipeline,
)
from .scenes import (
    Rir,
    RoomConfig,
    Scene,
    SceneConfig,
    apply_loudspeaker_nonlinearity,
    load_scene,
    render_scene,
    save_scene,
    split_rir,
    synth_diffuse_noise,
    synth_rir,
)
from .spectral import (
    LstmWeights,
    ground_truth_target_pipeline,
    kl_divergence,
    lstm_forward,
    oracle_psds,
    type_i_features,
    type_ii_features,
)
from .stft import Spectrogram, WindowSpec, istft, stft
from .wavio import read_wav, write_wav

__version__ = "0.1.0"
