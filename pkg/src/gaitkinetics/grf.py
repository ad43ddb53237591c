"""Ground reaction force estimation and per-limb decomposition.

Total GRF follows from whole-body CoM acceleration: horizontal components
are mass times horizontal acceleration, the vertical component adds weight
(F_z = m * (a_z + g) with z up).

During double stance the total is split between the trailing limb (R1, must
reach zero at the toe-off ending the phase) and the leading limb (R2, zero
at the heel strike opening it) by minimizing the integrated squared rate of
change of both limb forces.  The minimizer has a closed form, per axis:

    R1(t) = (F(t) + F(t0))/2 - (F(t1) + F(t0))/2 * (t - t0)/(t1 - t0)
    R2(t) = (F(t) - F(t0))/2 + (F(t1) + F(t0))/2 * (t - t0)/(t1 - t0)

(the subject mass cancels between the acceleration and force forms).  Both
limb curves share the curvature of the total: the second derivative of each
equals half that of the total force.  ``decompose_ds_oracle`` solves the
discretized minimization directly (eliminate R2 = F - R1, solve the
resulting tridiagonal system with pinned endpoints) and is kept as an
independent cross-check.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .anthro import SegmentId, SubjectProfile
from .errors import InputError, InternalInvariantError
from .events import DOUBLE_STANCE, NO_STANCE, SS_LEFT, SS_RIGHT, GaitTimeline
from .kinematics import ComTrajectory
from .signal import UniformSeries, differentiate

__all__ = [
    "DEFAULT_GRAVITY_MPS2",
    "NEGATIVE_VERTICAL_FRACTION",
    "GrfSeries",
    "DsBoundary",
    "GrfDiagnostics",
    "BilateralGrf",
    "ButterflyDiagram",
    "total_grf",
    "decompose_ds",
    "decompose_ds_oracle",
    "decompose_gait",
    "butterfly",
    "write_bilateral_csv",
    "write_diagnostics_csv",
    "write_butterfly_csv",
    "write_butterfly_svg",
]

DEFAULT_GRAVITY_MPS2 = 9.81
# per-limb vertical force below -2% of body weight is flagged as implausible
NEGATIVE_VERTICAL_FRACTION = 0.02

_AXES = ("x", "y", "z")


@dataclass
class GrfSeries:
    """Force series in newtons, rows (F_x AP, F_y ML, F_z vertical)."""

    sample_rate_hz: float
    force: np.ndarray  # (3, n_frames)

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        self.force = np.asarray(self.force, dtype=float)
        if self.force.ndim != 2 or self.force.shape[0] != 3:
            raise InputError("force must be (3, n_frames)")
        if self.force.shape[1] < 1:
            raise InputError("force series is empty")
        if not np.all(np.isfinite(self.force)):
            raise InputError("force series contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.force.shape[1]

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.sample_rate_hz


@dataclass(frozen=True)
class DsBoundary:
    """One double-stance window: frames start..end inclusive.

    The leading foot struck at ``start_frame`` (its force departs from
    zero); the trailing foot toes off at ``end_frame`` (its force must
    vanish there).  ``duration_s`` is the window length in seconds,
    (end - start) / sample_rate.
    """

    start_frame: int
    end_frame: int
    duration_s: float
    leading_foot: str
    trailing_foot: str

    def __post_init__(self):
        if self.end_frame <= self.start_frame:
            raise InputError(
                f"double stance needs end > start, got [{self.start_frame}, {self.end_frame}]"
            )
        if not self.duration_s > 0:
            raise InputError(f"double stance duration must be positive, got {self.duration_s}")
        if {self.leading_foot, self.trailing_foot} != {"left", "right"}:
            raise InputError("leading and trailing feet must be left and right")


@dataclass
class GrfDiagnostics:
    """Per-frame quality flags and excluded intervals."""

    excluded_intervals: list[tuple[int, int, str]] = field(default_factory=list)
    negative_vertical_left: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    negative_vertical_right: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))


@dataclass
class BilateralGrf:
    """Total plus per-limb ground reaction forces over one trial.

    On analyzed frames left + right equals the total componentwise; frames
    belonging to excluded intervals (see diagnostics) hold zeros and are
    masked out of ``analyzed``.
    """

    total: GrfSeries
    left: GrfSeries
    right: GrfSeries
    timeline: GaitTimeline
    mass_kg: float
    gravity_mps2: float
    analyzed: np.ndarray
    diagnostics: GrfDiagnostics

    def __post_init__(self):
        n = self.total.n_frames
        if self.left.n_frames != n or self.right.n_frames != n:
            raise InternalInvariantError("total/left/right frame counts differ")
        if self.timeline.n_frames != n:
            raise InternalInvariantError("timeline span differs from force series")
        self.analyzed = np.asarray(self.analyzed, dtype=bool)
        if self.analyzed.shape != (n,):
            raise InternalInvariantError("analyzed mask must be (n_frames,)")
        if not self.mass_kg > 0:
            raise InputError(f"mass must be positive, got {self.mass_kg}")
        resid = self.left.force + self.right.force - self.total.force
        scale = max(1.0, float(np.max(np.abs(self.total.force))))
        if self.analyzed.any() and not (
            np.max(np.abs(resid[:, self.analyzed])) <= 1e-9 * scale
        ):
            raise InternalInvariantError(
                "left + right does not reproduce the total force on analyzed frames"
            )
        for phase in self.timeline.phases:
            swing = None
            if phase.label == SS_LEFT:
                swing = self.right.force
            elif phase.label == SS_RIGHT:
                swing = self.left.force
            if swing is not None and np.any(swing[:, phase.start : phase.end + 1] != 0.0):
                raise InternalInvariantError(
                    "swing limb carries force during single stance"
                )

    @property
    def n_frames(self) -> int:
        return self.total.n_frames

    def limb(self, foot: str) -> GrfSeries:
        if foot == "left":
            return self.left
        if foot == "right":
            return self.right
        raise InputError(f"foot must be 'left' or 'right', got {foot!r}")

    def body_weight_n(self) -> float:
        return self.mass_kg * self.gravity_mps2


@dataclass
class ButterflyDiagram:
    """Per-frame force vectors anchored at the stance foot's ground point."""

    sample_rate_hz: float
    feet: tuple[str, ...]
    frames: np.ndarray  # (k,) int
    bases: np.ndarray  # (k, 3), z = 0 (ground projection of the foot CoM)
    forces: np.ndarray  # (k, 3) newtons

    def __post_init__(self):
        k = len(self.feet)
        self.frames = np.asarray(self.frames, dtype=int)
        self.bases = np.asarray(self.bases, dtype=float)
        self.forces = np.asarray(self.forces, dtype=float)
        if self.frames.shape != (k,) or self.bases.shape != (k, 3) or self.forces.shape != (k, 3):
            raise InternalInvariantError("butterfly arrays disagree on entry count")
        if k and np.any(self.bases[:, 2] != 0.0):
            raise InternalInvariantError("butterfly bases must lie on the ground plane")

    @property
    def n_entries(self) -> int:
        return len(self.feet)


def total_grf(
    com: ComTrajectory,
    subject: SubjectProfile,
    gravity_mps2: float = DEFAULT_GRAVITY_MPS2,
) -> GrfSeries:
    """Whole-body GRF from the (already smoothed) CoM trajectory.

    F = m * a, with gravity added back on the vertical axis.  The caller is
    expected to low-pass the CoM first.  When the trajectory carries the
    acceleration channel attached by the filtering stage, that channel is
    used directly (it is computed in extended precision, so it does not
    inherit the storage rounding of the positions); otherwise the positions
    are double-differentiated here.
    """
    if not gravity_mps2 > 0:
        raise InputError(f"gravity must be positive, got {gravity_mps2}")
    if com.whole_body_acceleration is not None:
        acc = com.whole_body_acceleration
    else:
        acc = differentiate(UniformSeries(com.sample_rate_hz, com.whole_body), 2).values
    if not np.all(np.isfinite(acc)):
        raise InputError(
            "CoM acceleration contains non-finite values; fill or trim marker gaps first"
        )
    force = subject.mass_kg * acc
    force[2] += subject.mass_kg * gravity_mps2
    return GrfSeries(sample_rate_hz=com.sample_rate_hz, force=force)


def _window(total: GrfSeries, boundary: DsBoundary) -> np.ndarray:
    if not (0 <= boundary.start_frame and boundary.end_frame < total.n_frames):
        raise InputError(
            f"double stance [{boundary.start_frame}, {boundary.end_frame}] outside trial"
        )
    return total.force[:, boundary.start_frame : boundary.end_frame + 1]


def decompose_ds(
    total: GrfSeries, boundary: DsBoundary, mass_kg: float
) -> tuple[GrfSeries, GrfSeries]:
    """Closed-form minimum rate-of-change split of one double stance.

    Returns (r1, r2) over the window, r1 the trailing limb (exactly zero at
    the last sample), r2 the leading limb (exactly zero at the first).  The
    split is applied per axis; formulated directly in force units the
    subject mass cancels, so the argument is validated only for interface
    symmetry with the acceleration form of the equations.
    """
    if not mass_kg > 0:
        raise InputError(f"mass must be positive, got {mass_kg}")
    f = _window(total, boundary)
    span = boundary.end_frame - boundary.start_frame
    tau = np.arange(span + 1) / span  # endpoints are exactly 0.0 and 1.0
    f0 = f[:, :1]
    f1 = f[:, -1:]
    ramp = (0.5 * (f1 + f0)) * tau
    r1 = 0.5 * (f + f0) - ramp
    r2 = 0.5 * (f - f0) + ramp
    return (
        GrfSeries(total.sample_rate_hz, r1),
        GrfSeries(total.sample_rate_hz, r2),
    )


def decompose_ds_oracle(
    total: GrfSeries, boundary: DsBoundary
) -> tuple[GrfSeries, GrfSeries]:
    """Reference split: exact minimizer of the discretized objective.

    Minimizes the sum of squared sample-to-sample increments of both limb
    forces subject to r1 + r2 = f, r2 = 0 at the first sample and r1 = 0 at
    the last.  Eliminating r2 leaves a tridiagonal normal system for the
    interior r1 samples, solved per axis.  Kept as an independent check on
    ``decompose_ds``; needs at least 3 samples in the window.
    """
    f = _window(total, boundary)
    n = f.shape[1]
    if n < 3:
        raise InputError(f"oracle needs at least 3 samples in the window, got {n}")
    r1 = np.empty_like(f)
    r1[:, 0] = f[:, 0]  # r2 pinned to zero at the heel strike
    r1[:, -1] = 0.0  # trailing limb pinned to zero at toe-off
    # stationarity: r1[j-1] - 2 r1[j] + r1[j+1] = (f[j-1] - 2 f[j] + f[j+1]) / 2
    rhs = 0.5 * (f[:, :-2] - 2.0 * f[:, 1:-1] + f[:, 2:])
    rhs[:, 0] -= r1[:, 0]
    rhs[:, -1] -= r1[:, -1]
    m = n - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = 1.0  # superdiagonal
    ab[1, :] = -2.0  # diagonal
    ab[2, :-1] = 1.0  # subdiagonal
    r1_interior = scipy.linalg.solve_banded((1, 1), ab, rhs.T)
    r1[:, 1:-1] = r1_interior.T
    r2 = f - r1
    return (
        GrfSeries(total.sample_rate_hz, r1),
        GrfSeries(total.sample_rate_hz, r2),
    )


def decompose_gait(
    total: GrfSeries,
    timeline: GaitTimeline,
    mass_kg: float,
    gravity_mps2: float = DEFAULT_GRAVITY_MPS2,
    flagged_frames: np.ndarray | None = None,
) -> BilateralGrf:
    """Assign the total GRF to limbs across a whole timeline.

    Single stance gives the stance limb the entire total and the swing limb
    exactly zero.  Complete double stances are split with ``decompose_ds``.
    Incomplete double stances (missing a detected boundary event) and
    no-stance intervals are excluded: their limb forces stay zero and the
    frames are masked out of ``analyzed`` with a reason recorded.

    ``flagged_frames`` optionally marks frames whose force values are
    untrustworthy (for example derived from gap-filled markers); a double
    stance whose boundary force falls on a flagged frame is refused and
    excluded with a diagnostic, since the split leans on those two samples.
    """
    if timeline.n_frames != total.n_frames:
        raise InputError(
            f"timeline spans {timeline.n_frames} frames, force series {total.n_frames}"
        )
    if timeline.sample_rate_hz != total.sample_rate_hz:
        raise InputError("timeline and force series sample rates differ")
    if not mass_kg > 0:
        raise InputError(f"mass must be positive, got {mass_kg}")
    n = total.n_frames
    if flagged_frames is not None:
        flagged_frames = np.asarray(flagged_frames, dtype=bool)
        if flagged_frames.shape != (n,):
            raise InputError("flagged_frames mask must be (n_frames,)")

    left = np.zeros((3, n))
    right = np.zeros((3, n))
    analyzed = np.zeros(n, dtype=bool)
    excluded: list[tuple[int, int, str]] = []

    for phase in timeline.phases:
        s, e = phase.start, phase.end
        if phase.label == SS_LEFT:
            left[:, s : e + 1] = total.force[:, s : e + 1]
            analyzed[s : e + 1] = True
        elif phase.label == SS_RIGHT:
            right[:, s : e + 1] = total.force[:, s : e + 1]
            analyzed[s : e + 1] = True
        elif phase.label == DOUBLE_STANCE:
            if phase.incomplete:
                excluded.append((s, e, "double stance without detected boundary events"))
                continue
            if e == s:
                excluded.append((s, e, "zero-length double stance"))
                continue
            if flagged_frames is not None and (flagged_frames[s] or flagged_frames[e]):
                excluded.append(
                    (s, e, "double stance boundary force derived from flagged frames")
                )
                continue
            boundary = DsBoundary(
                start_frame=s,
                end_frame=e,
                duration_s=(e - s) / total.sample_rate_hz,
                leading_foot=phase.leading_foot,
                trailing_foot=phase.trailing_foot,
            )
            r1, r2 = decompose_ds(total, boundary, mass_kg)
            trailing = left if phase.trailing_foot == "left" else right
            leading = left if phase.leading_foot == "left" else right
            trailing[:, s : e + 1] = r1.force
            leading[:, s : e + 1] = r2.force
            analyzed[s : e + 1] = True
        else:  # NO_STANCE
            excluded.append((s, e, "no foot in stance"))

    floor = -NEGATIVE_VERTICAL_FRACTION * mass_kg * gravity_mps2
    diagnostics = GrfDiagnostics(
        excluded_intervals=excluded,
        negative_vertical_left=analyzed & (left[2] < floor),
        negative_vertical_right=analyzed & (right[2] < floor),
    )
    return BilateralGrf(
        total=total,
        left=GrfSeries(total.sample_rate_hz, left),
        right=GrfSeries(total.sample_rate_hz, right),
        timeline=timeline,
        mass_kg=mass_kg,
        gravity_mps2=gravity_mps2,
        analyzed=analyzed,
        diagnostics=diagnostics,
    )


def butterfly(bilateral: BilateralGrf, com: ComTrajectory) -> ButterflyDiagram:
    """Force vectors anchored at the stance foot's ground projection.

    One entry per analyzed stance frame per foot in stance; swing and
    excluded frames produce no entries.  The anchor is the foot segment CoM
    projected onto the ground plane (a centre-of-pressure stand-in).
    """
    if com.n_frames != bilateral.n_frames:
        raise InputError("CoM trajectory and force series frame counts differ")
    feet: list[str] = []
    frames: list[int] = []
    bases: list[np.ndarray] = []
    forces: list[np.ndarray] = []
    for foot in ("left", "right"):
        idx = com.segment_index(SegmentId("foot", foot))
        foot_com = com.segment_coms[:, idx, :]
        stance = bilateral.timeline.stance_mask(foot) & bilateral.analyzed
        limb = bilateral.limb(foot).force
        for k in np.nonzero(stance)[0]:
            feet.append(foot)
            frames.append(int(k))
            bases.append(np.array([foot_com[0, k], foot_com[1, k], 0.0]))
            forces.append(limb[:, k].copy())
    k = len(feet)
    return ButterflyDiagram(
        sample_rate_hz=bilateral.total.sample_rate_hz,
        feet=tuple(feet),
        frames=np.array(frames, dtype=int) if k else np.zeros(0, dtype=int),
        bases=np.array(bases) if k else np.zeros((0, 3)),
        forces=np.array(forces) if k else np.zeros((0, 3)),
    )


def write_bilateral_csv(path, bilateral: BilateralGrf) -> None:
    """Write total and per-limb forces with the phase label per frame."""
    lines = [
        "time_s,Fx_total,Fy_total,Fz_total,Fx_L,Fy_L,Fz_L,Fx_R,Fy_R,Fz_R,phase_label"
    ]
    labels = np.empty(bilateral.n_frames, dtype=object)
    for phase in bilateral.timeline.phases:
        labels[phase.start : phase.end + 1] = phase.label
    times = bilateral.total.times()
    t, l, r = bilateral.total.force, bilateral.left.force, bilateral.right.force
    for k in range(bilateral.n_frames):
        fields = [repr(float(times[k]))]
        fields += [repr(float(v)) for v in t[:, k]]
        fields += [repr(float(v)) for v in l[:, k]]
        fields += [repr(float(v)) for v in r[:, k]]
        fields.append(str(labels[k]))
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_diagnostics_csv(path, bilateral: BilateralGrf) -> None:
    """Write excluded intervals and implausible-force flags."""
    lines = ["record,start_frame,end_frame,detail"]
    for s, e, reason in bilateral.diagnostics.excluded_intervals:
        lines.append(f"excluded,{s},{e},{reason}")
    for foot, mask in (
        ("left", bilateral.diagnostics.negative_vertical_left),
        ("right", bilateral.diagnostics.negative_vertical_right),
    ):
        k = 0
        n = mask.size
        while k < n:
            if not mask[k]:
                k += 1
                continue
            start = k
            while k < n and mask[k]:
                k += 1
            lines.append(
                f"negative_vertical,{start},{k - 1},{foot} limb below "
                f"-{NEGATIVE_VERTICAL_FRACTION:g} body weight"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_butterfly_csv(path, diagram: ButterflyDiagram, scale_m_per_n: float = 0.001) -> None:
    """Write anchors and scaled vector tips: base_x,base_y,tip_x,tip_y,tip_z,foot."""
    if not scale_m_per_n > 0:
        raise InputError(f"display scale must be positive, got {scale_m_per_n}")
    lines = ["base_x,base_y,tip_x,tip_y,tip_z,foot"]
    tips = diagram.bases + scale_m_per_n * diagram.forces
    for i in range(diagram.n_entries):
        fields = [repr(float(diagram.bases[i, 0])), repr(float(diagram.bases[i, 1]))]
        fields += [repr(float(v)) for v in tips[i]]
        fields.append(diagram.feet[i])
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


_SVG_COLORS = {"left": "#1f77b4", "right": "#d62728"}


def write_butterfly_svg(path, diagram: ButterflyDiagram, scale_m_per_n: float = 0.001) -> None:
    """Render the sagittal-plane butterfly picture as a standalone SVG.

    X maps the antero-posterior anchor/tip positions, Y the scaled vertical
    force; the file embeds everything it needs (no external references).
    """
    if not scale_m_per_n > 0:
        raise InputError(f"display scale must be positive, got {scale_m_per_n}")
    tips = diagram.bases + scale_m_per_n * diagram.forces
    if diagram.n_entries:
        x_min = float(min(diagram.bases[:, 0].min(), tips[:, 0].min()))
        x_max = float(max(diagram.bases[:, 0].max(), tips[:, 0].max()))
        y_max = float(max(tips[:, 2].max(), 0.1))
    else:
        x_min, x_max, y_max = 0.0, 1.0, 1.0
    pad = 0.05 * max(x_max - x_min, y_max, 1e-6)
    width, height = 900.0, 300.0
    sx = (width - 40.0) / (x_max - x_min + 2 * pad) if x_max > x_min else 1.0
    sy = (height - 40.0) / (y_max + 2 * pad)

    def px(x: float) -> str:
        return f"{20.0 + (x - x_min + pad) * sx:.3f}"

    def py(y: float) -> str:
        return f"{height - 20.0 - (y + pad) * sy:.3f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<rect width="{width:g}" height="{height:g}" fill="white"/>',
        f'<line x1="{px(x_min)}" y1="{py(0.0)}" x2="{px(x_max)}" y2="{py(0.0)}" '
        'stroke="#444444" stroke-width="1"/>',
    ]
    for i in range(diagram.n_entries):
        color = _SVG_COLORS[diagram.feet[i]]
        parts.append(
            f'<line x1="{px(float(diagram.bases[i, 0]))}" y1="{py(0.0)}" '
            f'x2="{px(float(tips[i, 0]))}" y2="{py(float(tips[i, 2]))}" '
            f'stroke="{color}" stroke-width="0.6"/>'
        )
    parts.append(
        '<text x="20" y="16" font-family="sans-serif" font-size="12" fill="#222222">'
        "per-limb ground reaction force, sagittal view "
        f"(display scale {scale_m_per_n:g} m/N; left {_SVG_COLORS['left']}, "
        f"right {_SVG_COLORS['right']})</text>"
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
