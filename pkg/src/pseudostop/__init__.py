"""Pseudo-reference early stopping for iterative image reconstruction.

Iterative reconstructors (untrained-network priors chief among them) fit
signal before noise, so there is a best iteration to stop at -- but the
clean image needed to find it is exactly what is being reconstructed. This
package builds *pseudo references* out of the observation itself (a
structurally similar channel, held-out pixels, or re-corrupted auxiliary
copies), turns them into per-checkpoint validation curves, and selects the
checkpoint the curves favor. A fast spectral surrogate with the same
overfitting behavior makes every claim cheap to verify empirically.
"""

from .core import (
    FrequencyGrid,
    ImageTensor,
    Trajectory,
    dft2,
    frequency_weights,
    idft2,
    mean_square,
    mse,
    psnr,
    spectral_mean_frequency,
)
from .criteria import (
    StopReport,
    ValidationCurve,
    acr_curve,
    acr_mse_curve,
    closest_channel_pair,
    csr_curve,
    mr_curve,
    oracle_report,
    primary_view,
    select,
    select_index,
    sure_curve,
    wmv_curve,
)
from .errors import (
    ChannelError,
    ConfigError,
    CorruptBundleError,
    DomainError,
    MetadataError,
    ProvenanceError,
    PseudostopError,
    SeedCollisionError,
    ShapeError,
    UnsupportedOperatorError,
    VersionError,
    ZeroResidualError,
)
from .noise import (
    HoldoutMask,
    NoiseSpec,
    SharedNoiseScene,
    build_shared_scene,
    corrupt,
    make_aux_pair,
    sample_mask,
)
from .operators import (
    LinearOperator,
    TransferReport,
    downsample,
    identity,
    measurement_selection_check,
    operator_curve,
    pixel_mask,
    transfer_bound_check,
)
from .regparam import (
    LambdaCurve,
    LambdaGrid,
    oracle_lambda,
    select_lambda,
    tikhonov_denoise,
)
from .surrogate import (
    SurrogateConfig,
    checkpoint_iterations,
    lowpass_gain,
    plain_divergence_at,
    plain_frame_at,
    plain_gains,
    run_augmented,
    run_masked,
    run_plain,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
