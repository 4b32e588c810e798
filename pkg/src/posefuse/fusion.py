"""Streaming fusion of an absolute-pose stream with relative odometry.

The absolute stream (apr) is drift-free but individual estimates can be
wildly wrong.  The odometry stream (vio) is locally precise but drifts
and lives in its own coordinate frame.  The fuser walks the sequence
through two alternating stages:

* Alignment.  Hunt for n_pairs consecutive frame pairs whose apr and vio
  motion magnitudes agree within (d_th, o_th).  Agreement between the
  two independent streams vouches for the absolute estimates, so the
  n_pairs + 1 frames involved are emitted as keyframes and their
  averaged apr / vio poses become the reference pair bridging the vio
  frame into world coordinates.
* Optimization.  For the next t_opt frames, motion relative to the
  reference is checked the same way.  Frames that agree keep their apr
  pose (reliable); the rest are replaced by the vio pose pushed through
  the reference transform (optimized).  Then alignment starts over,
  which caps how much vio drift the reference transform can accumulate.

While alignment is searching, every frame still emits a provisional
output so the stream stays gap-free: tracked (vio through the previous
reference) once a reference exists, pending (raw apr) before the first
one.  When a window completes, its frames are re-emitted as keyframes;
run_sequence keeps the last label per frame.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    Odometry,
    Pose,
    RigidTransform,
    UnitQuaternion,
    Vec3,
    compose,
    inverse,
    odometry,
    to_rotation_matrix,
)
from .io import PoseSample


@dataclass(frozen=True)
class FusionConfig:
    """Thresholds and stage lengths.  The defaults are the operating
    point used throughout: 0.4 m / 4 deg gates, windows of 2 pairs,
    8-frame optimization periods."""

    d_th: float = 0.4
    o_th: float = 4.0
    n_pairs: int = 2
    t_opt: int = 8
    weiszfeld_tol: float = 1e-9
    weiszfeld_max_iter: int = 100

    def __post_init__(self) -> None:
        if not self.d_th > 0.0:
            raise ValueError("d_th must be positive")
        if not self.o_th > 0.0:
            raise ValueError("o_th must be positive")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.t_opt < 1:
            raise ValueError("t_opt must be >= 1")
        if not self.weiszfeld_tol > 0.0:
            raise ValueError("weiszfeld_tol must be positive")
        if self.weiszfeld_max_iter < 1:
            raise ValueError("weiszfeld_max_iter must be >= 1")


class Stage(enum.Enum):
    ALIGNING = "aligning"
    OPTIMIZING = "optimizing"


class Label(enum.Enum):
    """Provenance of an output pose.

    KEYFRAME  apr pose that anchored a reference (alignment window member)
    RELIABLE  apr pose that agreed with the reference during optimization
    OPTIMIZED vio pose mapped through the reference transform
    TRACKED   provisional vio-through-previous-reference during alignment
    PENDING   provisional raw apr before any reference exists
    """

    KEYFRAME = "keyframe"
    RELIABLE = "reliable"
    OPTIMIZED = "optimized"
    TRACKED = "tracked"
    PENDING = "pending"


@dataclass(frozen=True)
class ReferencePair:
    """Averaged anchor poses of one alignment window, index-aligned
    between the two streams."""

    apr_ref: Pose
    vio_ref: Pose


@dataclass(frozen=True)
class FusionOutput:
    frame_index: int
    pose: Pose
    label: Label


@dataclass
class FusionState:
    """Mutable per-sequence state.  Single-owner: feed frames strictly in
    order and never share a state across sequences."""

    stage: Stage = Stage.ALIGNING
    window: list[tuple[int, Pose, Pose]] = field(default_factory=list)
    reference: Optional[ReferencePair] = None
    opt_count: int = 0
    frame_index: int = 0

    @classmethod
    def initial(cls) -> "FusionState":
        return cls()


def relative_pose_check(u_apr: Odometry, u_vio: Odometry, cfg: FusionConfig) -> bool:
    """True when the two motion magnitudes agree within the thresholds.
    Boundary values pass.  Agreement of independent streams is evidence
    the absolute estimates are good, with one known blind spot: a shared
    offset on both apr poses cancels in the comparison."""
    return (
        abs(u_apr.dist - u_vio.dist) <= cfg.d_th
        and abs(u_apr.angle - u_vio.angle) <= cfg.o_th
    )


def weiszfeld_median(
    points: Sequence[Vec3], tol: float = 1e-9, max_iter: int = 100
) -> Vec3:
    """Geometric median, the minimizer of the summed Euclidean distance.

    Iteratively reweighted averaging from the centroid, with a Newton
    candidate each round that is kept only when it lowers the objective.
    The reweighted step alone crawls when one cluster dominates the
    weights; the polish restores fast convergence without giving up its
    monotone descent.  Stops when the iterate moves less than tol or
    after max_iter rounds.  An iterate landing within tol of an input
    point returns that point, which both guards the 1/distance weights
    and handles the common case of the median sitting on an input.
    """
    if len(points) == 0:
        raise ValueError("weiszfeld_median needs at least one point")
    pts = np.array([[p.x, p.y, p.z] for p in points], dtype=float)
    if len(pts) == 1:
        return points[0]

    def objective(at: np.ndarray) -> float:
        return float(np.linalg.norm(pts - at, axis=1).sum())

    y = pts.mean(axis=0)
    for _ in range(max_iter):
        diff = pts - y
        d = np.linalg.norm(diff, axis=1)
        hits = np.nonzero(d < tol)[0]
        if hits.size:
            return Vec3.from_array(pts[hits[0]])
        w = 1.0 / d
        y_next = (pts * w[:, None]).sum(axis=0) / w.sum()
        f_next = objective(y_next)
        units = diff * w[:, None]
        grad = -units.sum(axis=0)
        hess = np.eye(3) * w.sum() - (units * w[:, None]).T @ units
        try:
            newton = y - np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            newton = None
        # Collinear inputs make the Hessian singular along the line and
        # the solve either fails or shoots far out; the objective test
        # rejects those candidates.
        if newton is not None and np.isfinite(newton).all():
            f_newton = objective(newton)
            if f_newton < f_next:
                y_next, f_next = newton, f_newton
        # Over-relax: double the displacement while that still improves
        # the objective.  The reweighted step alone contracts painfully
        # slowly when a tight cluster dominates the weights.
        delta = y_next - y
        scale = 2.0
        while True:
            cand = y + scale * delta
            f_cand = objective(cand)
            if not f_cand < f_next:
                break
            y_next, f_next = cand, f_cand
            scale *= 2.0
        step = np.linalg.norm(y_next - y)
        y = y_next
        if step < tol:
            break
    # Degenerate clusters leave a near-flat valley whose minimum hugs an
    # input point; the input points are always candidates.
    best = objective(y)
    for i in range(len(pts)):
        if objective(pts[i]) < best:
            best = objective(pts[i])
            y = pts[i]
    return Vec3.from_array(y)


def average_quaternions(quats: Sequence[UnitQuaternion]) -> UnitQuaternion:
    """Rotation average via the largest eigenvector of the accumulated
    outer-product matrix.  Inputs are sign-aligned to the first element
    beforehand, so either cover of each rotation gives the same answer.
    """
    if len(quats) == 0:
        raise ValueError("average_quaternions needs at least one quaternion")
    ref = quats[0].as_array()
    acc = np.zeros((4, 4))
    for q in quats:
        v = q.as_array()
        if float(v @ ref) < 0.0:
            v = -v
        acc += np.outer(v, v)
    _, vecs = np.linalg.eigh(acc)
    top = vecs[:, -1]  # eigh sorts eigenvalues ascending
    return UnitQuaternion(top[0], top[1], top[2], top[3])


def compute_reference(
    aprs: Sequence[Pose],
    vios: Sequence[Pose],
    tol: float = 1e-9,
    max_iter: int = 100,
) -> ReferencePair:
    """Collapse an alignment window into its reference pair: geometric
    median of positions, eigenvector average of orientations, per stream."""
    if len(aprs) != len(vios):
        raise ValueError(
            f"window streams differ in length: {len(aprs)} apr vs {len(vios)} vio"
        )
    if len(aprs) == 0:
        raise ValueError("compute_reference needs a non-empty window")

    def _avg(poses: Sequence[Pose]) -> Pose:
        return Pose(
            weiszfeld_median([p.position for p in poses], tol=tol, max_iter=max_iter),
            average_quaternions([p.orientation for p in poses]),
        )

    return ReferencePair(apr_ref=_avg(aprs), vio_ref=_avg(vios))


def reference_transform(ref: ReferencePair) -> RigidTransform:
    """Rigid map from vio coordinates to world, pinned at the reference:
    it sends vio_ref's position exactly onto apr_ref's."""
    q_rel = compose(inverse(ref.apr_ref.orientation), ref.vio_ref.orientation)
    r_rel = to_rotation_matrix(q_rel)
    t_rel = ref.apr_ref.position - r_rel.apply(ref.vio_ref.position)
    return RigidTransform(r_rel, t_rel)


def optimize_pose(p_vio: Pose, ref: ReferencePair) -> Pose:
    """Re-express a vio pose in world coordinates through the reference
    pair.  At the reference itself this returns apr_ref, and being rigid
    it preserves relative distances and angles of the vio stream."""
    q_rel = compose(inverse(ref.apr_ref.orientation), ref.vio_ref.orientation)
    r_rel = to_rotation_matrix(q_rel)
    t_rel = ref.apr_ref.position - r_rel.apply(ref.vio_ref.position)
    x_opt = r_rel.apply(p_vio.position) + t_rel
    q_opt = compose(p_vio.orientation, inverse(q_rel))
    return Pose(x_opt, q_opt)


def step(
    state: FusionState, apr: Pose, vio: Pose, cfg: FusionConfig
) -> tuple[FusionState, list[FusionOutput]]:
    """Advance the state machine by one frame.

    Mutates and returns the state.  The output list holds the provisional
    output for this frame and, when an alignment window just completed,
    keyframe re-emissions for the window frames (those supersede earlier
    provisional labels of the same frames).
    """
    outputs: list[FusionOutput] = []
    idx = state.frame_index
    state.frame_index = idx + 1

    if state.stage is Stage.OPTIMIZING:
        assert state.reference is not None
        u_apr = odometry(apr, state.reference.apr_ref)
        u_vio = odometry(vio, state.reference.vio_ref)
        if relative_pose_check(u_apr, u_vio, cfg):
            outputs.append(FusionOutput(idx, apr, Label.RELIABLE))
        else:
            outputs.append(
                FusionOutput(idx, optimize_pose(vio, state.reference), Label.OPTIMIZED)
            )
        state.opt_count += 1
        if state.opt_count >= cfg.t_opt:
            state.stage = Stage.ALIGNING
            state.window.clear()
            state.opt_count = 0
        return state, outputs

    # Alignment: provisional output first, so every frame emits something.
    if state.reference is not None:
        outputs.append(
            FusionOutput(idx, optimize_pose(vio, state.reference), Label.TRACKED)
        )
    else:
        outputs.append(FusionOutput(idx, apr, Label.PENDING))

    state.window.append((idx, apr, vio))
    if len(state.window) >= 2:
        _, apr_prev, vio_prev = state.window[-2]
        pair_ok = relative_pose_check(
            odometry(apr_prev, apr), odometry(vio_prev, vio), cfg
        )
        if not pair_ok:
            # Restart the window at the newest frame, it may open the
            # next consistent run.
            del state.window[:-1]
        elif len(state.window) == cfg.n_pairs + 1:
            for kf_idx, kf_apr, _ in state.window:
                outputs.append(FusionOutput(kf_idx, kf_apr, Label.KEYFRAME))
            state.reference = compute_reference(
                [w[1] for w in state.window],
                [w[2] for w in state.window],
                tol=cfg.weiszfeld_tol,
                max_iter=cfg.weiszfeld_max_iter,
            )
            state.window.clear()
            state.stage = Stage.OPTIMIZING
            state.opt_count = 0
    return state, outputs


def run_sequence(
    samples: Sequence[PoseSample], cfg: FusionConfig
) -> list[FusionOutput]:
    """Run the full pipeline over an in-order sequence.

    Returns exactly one output per input frame, in input order, with the
    final label per frame (keyframe re-emissions supersede provisional
    tracked/pending outputs).  Requires vio and apr on every sample and
    strictly increasing timestamps.
    """
    prev_ts: float | None = None
    for s in samples:
        if s.vio is None:
            raise ValueError(f"frame {s.frame_index}: vio pose missing, fusion needs it")
        if s.apr is None:
            raise ValueError(f"frame {s.frame_index}: apr pose missing, fusion needs it")
        if prev_ts is not None and s.timestamp <= prev_ts:
            raise ValueError(
                f"frame {s.frame_index}: timestamps must be strictly increasing"
            )
        prev_ts = s.timestamp

    state = FusionState.initial()
    latest: dict[int, FusionOutput] = {}
    for s in samples:
        state, outs = step(state, s.apr, s.vio, cfg)
        for out in outs:
            latest[out.frame_index] = out
    # step() numbers frames 0..n-1 in feed order; surface the caller's
    # frame indices instead.
    return [
        replace(latest[i], frame_index=samples[i].frame_index)
        for i in range(len(samples))
    ]
