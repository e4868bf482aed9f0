"""Stopping criteria: validation curves, selection, and oracle gaps.

Every criterion reduces to the same shape: walk a trajectory, score each
frame against some reference that is NOT the clean image, and pick the
extremal checkpoint. The producers here differ only in how the reference
is built:

* csr_curve  -- score one channel's reconstruction against the closest
  other observed channel (cross-channel consistency).
* mr_curve   -- score reconstructions on pixels held out of training.
* acr_curve  -- track the mean squared frequency of the auxiliary-channel
  residual; coarse structure is absorbed first, so the score rises while
  genuine signal is being fitted and falls once noise takes over, making
  the maximizer the stopping point.
* acr_mse_curve -- same references, plain squared-error variant.
* wmv_curve  -- reference-free baseline: variance of the reconstruction
  inside a sliding window of checkpoints.
* sure_curve -- unbiased risk estimate from the training residual, the
  noise level, and the recorded divergence.

oracle_report compares any selection against the best-PSNR frame, which is
the quantity all of this machinery tries to approximate without seeing the
clean image.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ImageTensor, Trajectory, mean_square, mse, psnr, spectral_mean_frequency
from .errors import (
    ChannelError,
    ConfigError,
    DomainError,
    MetadataError,
    ProvenanceError,
    ShapeError,
)
from .noise import HoldoutMask

ORIENTATIONS = ("minimize", "maximize")


@dataclass
class ValidationCurve:
    """A per-checkpoint score with its selection policy.

    burn_in counts leading checkpoints excluded from selection. When
    patience is set, selection uses the early-stopping rule (first best
    value not improved within `patience` subsequent checkpoints, global
    best as fallback) instead of the plain extremum. carried lists indices
    whose value was copied from the previous checkpoint because the score
    was undefined there.
    """

    iterations: list[int]
    values: list[float]
    orientation: str = "minimize"
    burn_in: int = 0
    patience: int | None = None
    carried: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise DomainError(f"unknown orientation {self.orientation!r}")
        if len(self.iterations) != len(self.values):
            raise ShapeError("iterations and values differ in length")
        if not self.values:
            raise ShapeError("curve needs at least one checkpoint")
        if not (0 <= self.burn_in < len(self.values)):
            raise DomainError(
                f"burn_in {self.burn_in} out of range for {len(self.values)} checkpoints"
            )
        if self.patience is not None and self.patience < 1:
            raise DomainError("patience must be >= 1")

    def __len__(self) -> int:
        return len(self.values)


def select_index(curve: ValidationCurve) -> int:
    """Index of the selected checkpoint (ties break to the earliest)."""
    vals = np.asarray(curve.values, dtype=np.float64)
    lo = curve.burn_in
    better = (lambda a, b: a > b) if curve.orientation == "maximize" else (lambda a, b: a < b)
    if curve.patience is None:
        window = vals[lo:]
        pick = int(np.argmax(window)) if curve.orientation == "maximize" else int(np.argmin(window))
        return lo + pick
    best = lo
    for i in range(lo + 1, len(vals)):
        if better(vals[i], vals[best]):
            best = i
        elif i - best >= curve.patience:
            return best
    return best


def select(curve: ValidationCurve) -> int:
    """Iteration label of the selected checkpoint."""
    return curve.iterations[select_index(curve)]


@dataclass
class StopReport:
    """Selected checkpoint versus the best-PSNR checkpoint of the same run."""

    criterion: str
    selected_iteration: int
    selected_psnr: float
    oracle_iteration: int
    oracle_psnr: float
    gap_db: float

    def __post_init__(self):
        if self.gap_db < -1e-9:
            raise DomainError(f"negative oracle gap {self.gap_db}")


def closest_channel_pair(y: ImageTensor) -> tuple[int, int]:
    """Unordered pair of distinct channels minimizing mean squared distance.

    Ties break lexicographically. Needs at least two channels.
    """
    if y.channels < 2:
        raise ChannelError("channel pairing needs at least two channels")
    best: tuple[int, int] | None = None
    best_d = None
    for i in range(y.channels):
        for j in range(i + 1, y.channels):
            d = mean_square(y.data[i] - y.data[j])
            if best_d is None or d < best_d:
                best, best_d = (i, j), d
    assert best is not None
    return best


def csr_curve(traj: Trajectory, y: ImageTensor) -> tuple[tuple[int, int], ValidationCurve]:
    """Cross-channel consistency curve.

    Picks the closest pair of observed channels, then scores both
    orientations (reconstruct i against observed j, and the reverse) and
    keeps the orientation whose curve minimum is lower. Returns
    ((reconstructed_channel, reference_channel), curve).
    """
    if traj.channels != y.channels:
        raise ShapeError(
            f"trajectory has {traj.channels} channels but observation has {y.channels}"
        )
    if traj.frames[0].data.shape[1:] != y.data.shape[1:]:
        raise ShapeError("trajectory and observation disagree in spatial extent")
    i, j = closest_channel_pair(y)
    forward = [mean_square(f.data[i] - y.data[j]) for f in traj.frames]
    reverse = [mean_square(f.data[j] - y.data[i]) for f in traj.frames]
    if min(reverse) < min(forward):
        pair, values = (j, i), reverse
    else:
        pair, values = (i, j), forward
    return pair, ValidationCurve(list(traj.iterations), values, "minimize")


def mr_curve(traj: Trajectory, y: ImageTensor, mask: HoldoutMask) -> ValidationCurve:
    """Held-out validation curve: mean squared error on pixels the run
    never trained on.

    The trajectory must have been produced by a masked run with this very
    mask; anything else is a provenance violation, because scores on pixels
    the run *did* see are not validation.
    """
    if traj.mode != "masked" or traj.mask is None:
        raise ProvenanceError("held-out validation needs a trajectory from a masked run")
    if traj.mask.plane.shape != mask.plane.shape or not np.array_equal(
        traj.mask.plane, mask.plane
    ):
        raise ProvenanceError("mask does not match the one the trajectory was trained with")
    if traj.frames[0].data.shape != y.data.shape:
        raise ShapeError("trajectory and observation disagree in shape")
    held = mask.held_out_bool
    values = [mean_square(f.data[:, held] - y.data[:, held]) for f in traj.frames]
    return ValidationCurve(list(traj.iterations), values, "minimize")


def split_augmented(frame: ImageTensor) -> tuple[ImageTensor, ImageTensor]:
    """Split a 2C-channel frame into (primary, auxiliary) halves."""
    if frame.channels % 2 != 0:
        raise ChannelError(f"augmented frames need an even channel count, got {frame.channels}")
    half = frame.channels // 2
    return frame.like(frame.data[:half]), frame.like(frame.data[half:])


def primary_view(traj: Trajectory) -> Trajectory:
    """Trajectory restricted to the primary channel half of an augmented run."""
    if traj.channels % 2 != 0:
        raise ChannelError(
            f"augmented trajectories need an even channel count, got {traj.channels}"
        )
    half = traj.channels // 2
    frames = [f.like(f.data[:half]) for f in traj.frames]
    return Trajectory(frames, list(traj.iterations), divergence=traj.divergence, mode="plain")


def acr_curve(traj: Trajectory, y2: ImageTensor, burn_in: int = 0) -> ValidationCurve:
    """Spectral score of the auxiliary residual, maximized after burn-in.

    The trajectory carries 2C channels (primary stacked with a first
    auxiliary corruption); y2 is the second auxiliary corruption. The score
    is the power-weighted mean squared frequency of (auxiliary frame - y2):
    low while coarse structure dominates the residual, peaking when the
    remaining residual is mostly unfitted noise. A frame with an exactly
    zero residual carries the previous value and is flagged.
    """
    if traj.channels % 2 != 0:
        raise ChannelError(f"expected an even channel count, got {traj.channels}")
    half = traj.channels // 2
    if y2.channels != half:
        raise ShapeError(f"reference has {y2.channels} channels, expected {half}")
    if traj.frames[0].data.shape[1:] != y2.data.shape[1:]:
        raise ShapeError("trajectory and reference disagree in spatial extent")
    values: list[float] = []
    carried: list[int] = []
    for idx, f in enumerate(traj.frames):
        residual = f.data[half:] - y2.data
        if not np.any(residual):
            carried.append(idx)
            values.append(values[-1] if values else 0.0)
            warnings.warn(f"zero auxiliary residual at checkpoint {idx}; value carried")
            continue
        values.append(spectral_mean_frequency(y2.like(residual)))
    return ValidationCurve(
        list(traj.iterations), values, "maximize", burn_in=burn_in, carried=carried
    )


def acr_mse_curve(traj: Trajectory, y2: ImageTensor) -> ValidationCurve:
    """Squared-error variant of the auxiliary-residual curve (minimized)."""
    if traj.channels % 2 != 0:
        raise ChannelError(f"expected an even channel count, got {traj.channels}")
    half = traj.channels // 2
    if y2.channels != half:
        raise ShapeError(f"reference has {y2.channels} channels, expected {half}")
    values = [mean_square(f.data[half:] - y2.data) for f in traj.frames]
    return ValidationCurve(list(traj.iterations), values, "minimize")


def wmv_curve(traj: Trajectory, window: int) -> ValidationCurve:
    """Windowed moving variance of the reconstruction (reference-free).

    At checkpoint t (counting from the window-th one) the value is the mean
    over the trailing `window` frames of their per-entry squared distance
    to the window mean frame. Selection uses the patience rule with
    patience equal to the window length.
    """
    if window < 1:
        raise ConfigError("window must be >= 1")
    if window > len(traj.frames):
        raise ConfigError(
            f"window of {window} checkpoints exceeds trajectory length {len(traj.frames)}"
        )
    stack = traj.stacked().astype(np.float64, copy=False)
    t = stack.shape[0]
    flat = stack.reshape(t, -1)
    # Rolling moments: mean of per-frame second moments minus the second
    # moment of the window mean frame.
    frame_m2 = np.mean(flat * flat, axis=1)
    cum_m2 = np.concatenate([[0.0], np.cumsum(frame_m2)])
    cum_frames = np.concatenate([np.zeros((1, flat.shape[1])), np.cumsum(flat, axis=0)])
    values: list[float] = []
    for end in range(window, t + 1):
        m2 = (cum_m2[end] - cum_m2[end - window]) / window
        mean_frame = (cum_frames[end] - cum_frames[end - window]) / window
        values.append(float(m2 - np.mean(mean_frame * mean_frame)))
    return ValidationCurve(
        list(traj.iterations[window - 1 :]), values, "minimize", patience=window
    )


def sure_curve(traj: Trajectory, y: ImageTensor, sigma: float) -> ValidationCurve:
    """Unbiased risk estimate per checkpoint for additive Gaussian noise.

    value_t = ||xhat_t - y||**2 / n + 2 * sigma**2 * divergence_t - sigma**2.
    Requires the trajectory's recorded divergence and the true noise level.
    """
    if not (sigma > 0):
        raise DomainError(f"sigma must be positive, got {sigma}")
    if traj.divergence is None:
        raise MetadataError("risk estimation needs the trajectory's divergence record")
    if traj.frames[0].data.shape != y.data.shape:
        raise ShapeError("trajectory and observation disagree in shape")
    s2 = sigma * sigma
    values = [
        mean_square(f.data - y.data) + 2.0 * s2 * d - s2
        for f, d in zip(traj.frames, traj.divergence)
    ]
    return ValidationCurve(list(traj.iterations), values, "minimize")


def oracle_report(
    traj: Trajectory, clean: ImageTensor, curve: ValidationCurve, criterion: str
) -> StopReport:
    """Score a curve's selection against the best-PSNR checkpoint.

    The curve's iteration labels must refer to checkpoints of the given
    trajectory (a subset is fine: windowed curves start late).
    """
    psnrs = [psnr(mse(f, clean), clean.peak) for f in traj.frames]
    best = int(np.argmax(psnrs))
    chosen_iter = select(curve)
    try:
        chosen = traj.iterations.index(chosen_iter)
    except ValueError:
        raise ProvenanceError(
            f"curve selected iteration {chosen_iter} absent from the trajectory"
        ) from None
    oracle_psnr = psnrs[best]
    selected_psnr = psnrs[chosen]
    if np.isinf(oracle_psnr) and np.isinf(selected_psnr):
        gap = 0.0
    else:
        gap = oracle_psnr - selected_psnr
    return StopReport(
        criterion=criterion,
        selected_iteration=chosen_iter,
        selected_psnr=selected_psnr,
        oracle_iteration=traj.iterations[best],
        oracle_psnr=oracle_psnr,
        gap_db=gap,
    )
