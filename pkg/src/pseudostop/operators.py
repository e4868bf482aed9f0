"""Linear measurement operators and measurement-domain validation.

The validation idea transfers beyond denoising: score reconstructions in
the measurement domain against a second noisy measurement, then transfer
the guarantee back to image space through the operator's conditioning.
Three operator kinds cover the reductions of interest:

* identity     -- measurement-domain validation degenerates to denoising;
* pixel_mask   -- extracting held-out coordinates recovers held-out
                  validation exactly;
* downsample   -- box averaging over f x f blocks, a genuinely lossy
                  operator with null space (block-zero-mean images).

Operators apply per channel. Every kind exposes its smallest nonzero
singular value, which controls how measurement-domain risk bounds image-
domain risk on the operator's row space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .core import ImageTensor, Trajectory, mean_square
from .criteria import ValidationCurve, select
from .errors import DomainError, ShapeError, UnsupportedOperatorError

KINDS = ("identity", "pixel_mask", "downsample")


@dataclass(frozen=True)
class LinearOperator:
    """One supported measurement operator.

    kind selects the behavior; plane (binary, H x W) parameterizes
    pixel_mask and factor parameterizes downsample.
    """

    kind: str
    plane: np.ndarray | None = None
    factor: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedOperatorError(f"unknown operator kind {self.kind!r}")
        if self.kind == "pixel_mask":
            if self.plane is None:
                raise DomainError("pixel_mask needs a binary plane")
            plane = np.asarray(self.plane)
            if plane.ndim != 2 or not np.all(np.isin(np.unique(plane), (0, 1))):
                raise DomainError("pixel_mask plane must be a binary 2-D array")
            if plane.sum() < 1:
                raise DomainError("pixel_mask plane selects no coordinates")
            object.__setattr__(self, "plane", plane.astype(bool))
        if self.kind == "downsample":
            if self.factor is None or self.factor < 1:
                raise DomainError("downsample needs a factor >= 1")

    @property
    def sigma_min(self) -> float:
        """Smallest nonzero singular value.

        identity and coordinate extraction are partial isometries (1);
        box averaging has all nonzero singular values equal to 1/factor,
        which is also its operator norm.
        """
        if self.kind == "downsample":
            return 1.0 / float(self.factor)
        return 1.0

    def apply(self, x: ImageTensor) -> ImageTensor:
        """Apply the operator per channel."""
        if self.kind == "identity":
            return x
        if self.kind == "pixel_mask":
            if self.plane.shape != (x.height, x.width):
                raise ShapeError(
                    f"plane {self.plane.shape} does not match image ({x.height}, {x.width})"
                )
            return x.like(x.data[:, self.plane][:, None, :])
        f = int(self.factor)
        if x.height % f or x.width % f:
            raise ShapeError(f"image {x.height}x{x.width} not divisible by factor {f}")
        blocks = x.data.reshape(x.channels, x.height // f, f, x.width // f, f)
        return x.like(blocks.mean(axis=(2, 4)))

    def row_space_projection(self, x: ImageTensor) -> ImageTensor:
        """Orthogonal projection of an image onto the operator's row space.

        identity: everything; pixel_mask: the selected coordinates;
        downsample: the block-constant component (block means broadcast
        back to full resolution).
        """
        if self.kind == "identity":
            return x
        if self.kind == "pixel_mask":
            return x.like(x.data * self.plane)
        f = int(self.factor)
        if x.height % f or x.width % f:
            raise ShapeError(f"image {x.height}x{x.width} not divisible by factor {f}")
        blocks = x.data.reshape(x.channels, x.height // f, f, x.width // f, f)
        means = blocks.mean(axis=(2, 4), keepdims=True)
        return x.like(np.broadcast_to(means, blocks.shape).reshape(x.data.shape))


def identity() -> LinearOperator:
    return LinearOperator("identity")


def pixel_mask(plane: np.ndarray) -> LinearOperator:
    return LinearOperator("pixel_mask", plane=plane)


def downsample(factor: int) -> LinearOperator:
    return LinearOperator("downsample", factor=factor)


def operator_curve(
    traj: Trajectory,
    op: LinearOperator,
    y_ref: ImageTensor,
    channel: int | None = None,
) -> ValidationCurve:
    """Measurement-domain validation curve (1/m) * ||A(xhat_t) - y_ref||**2.

    y_ref is a measurement-domain reference with independent noise; m is
    its entry count. channel restricts scoring to a single reconstruction
    channel (used when the reference is another observed channel).
    """
    values: list[float] = []
    for f in traj.frames:
        view = f if channel is None else f.like(f.data[channel : channel + 1])
        out = op.apply(view)
        if out.data.shape != y_ref.data.shape:
            raise ShapeError(
                f"operator output {out.data.shape} does not match reference {y_ref.data.shape}"
            )
        values.append(mean_square(out.data - y_ref.data))
    return ValidationCurve(list(traj.iterations), values, "minimize")


@dataclass
class TransferReport:
    """Image-domain versus measurement-domain risk along one trajectory.

    For every frame: image_risk = ||xhat - x||**2 / n, measurement_risk =
    ||A xhat - A x||**2 / m, null_energy = energy of the error component
    invisible to A. one_sided_ok records, per frame, the bound

        image_risk <= (m / (n * sigma_min**2)) * measurement_risk + null_energy

    (within a small relative rounding slack). two_sided_ok checks the
    caller-supplied linear fit |image_risk - c * measurement_risk| <= kappa
    at every frame; fitted_c/fitted_kappa report the minimax-optimal fit.
    """

    iterations: list[int]
    image_risk: list[float]
    measurement_risk: list[float]
    null_energy: list[float]
    one_sided_ok: list[bool]
    bound_c: float
    given_c: float
    given_kappa: float
    two_sided_ok: bool
    fitted_c: float
    fitted_kappa: float

    @property
    def all_one_sided_ok(self) -> bool:
        return all(self.one_sided_ok)


def transfer_bound_check(
    traj: Trajectory,
    clean: ImageTensor,
    op: LinearOperator,
    c: float,
    kappa: float,
) -> TransferReport:
    """Measure how measurement-domain risk controls image-domain risk."""
    if traj.frames[0].data.shape != clean.data.shape:
        raise ShapeError("trajectory and clean image disagree in shape")
    n = clean.n
    m = op.apply(clean).n
    bound_c = m / (n * op.sigma_min**2)
    image_risk: list[float] = []
    measurement_risk: list[float] = []
    null_energy: list[float] = []
    one_sided: list[bool] = []
    for f in traj.frames:
        err = clean.like(f.data - clean.data)
        r = mean_square(err.data)
        r_meas = mean_square(op.apply(f).data - op.apply(clean).data)
        row = op.row_space_projection(err)
        null = mean_square(err.data - row.data)
        image_risk.append(r)
        measurement_risk.append(r_meas)
        null_energy.append(null)
        rhs = bound_c * r_meas + null
        one_sided.append(r <= rhs + 1e-9 * max(1.0, abs(rhs)))
    ri = np.asarray(image_risk)
    rm = np.asarray(measurement_risk)
    two_sided = bool(np.max(np.abs(ri - c * rm)) <= kappa)
    hi = 2.0 * bound_c if np.max(rm) == 0 else 2.0 * float(np.max(ri) / np.max(rm)) + bound_c
    fit = minimize_scalar(
        lambda cc: float(np.max(np.abs(ri - cc * rm))), bounds=(0.0, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return TransferReport(
        iterations=list(traj.iterations),
        image_risk=image_risk,
        measurement_risk=measurement_risk,
        null_energy=null_energy,
        one_sided_ok=one_sided,
        bound_c=bound_c,
        given_c=c,
        given_kappa=kappa,
        two_sided_ok=two_sided,
        fitted_c=float(fit.x),
        fitted_kappa=float(fit.fun),
    )


def measurement_selection_check(
    traj: Trajectory,
    clean: ImageTensor,
    op: LinearOperator,
    y_ref: ImageTensor,
    noise_var: float,
) -> dict:
    """Near-oracle consistency of measurement-domain selection.

    Computes the validation curve against y_ref, measures the empirical
    concentration radius eps = max_t |V_t - R_A(t) - noise_var| with
    R_A(t) the true measurement-domain risk, and reports whether the
    selected frame satisfies R_A(that) <= min R_A + 2 * eps.
    """
    curve = operator_curve(traj, op, y_ref)
    clean_meas = op.apply(clean)
    r_meas = [mean_square(op.apply(f).data - clean_meas.data) for f in traj.frames]
    v = np.asarray(curve.values)
    r = np.asarray(r_meas)
    eps = float(np.max(np.abs(v - r - noise_var)))
    chosen = traj.iterations.index(select(curve))
    best = int(np.argmin(r))
    holds = bool(r[chosen] <= r[best] + 2.0 * eps + 1e-12)
    return {
        "eps": eps,
        "selected_iteration": traj.iterations[chosen],
        "oracle_iteration": traj.iterations[best],
        "selected_risk": float(r[chosen]),
        "oracle_risk": float(r[best]),
        "near_oracle_ok": holds,
    }
