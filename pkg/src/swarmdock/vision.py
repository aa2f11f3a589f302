"""Synthetic monocular marker observations and camera-frame pose recovery.

Each chaser carries a pinhole camera whose optical axis is the body +x axis
(camera frame: z forward, x right, y down). The target carries one square
fiducial marker per cube face; :func:`observe` renders the corners of every
marker that faces the camera into noisy pixel coordinates, and
:func:`solve_pnp` inverts the projection: a direct linear transform (or a
planar homography decomposition when all corners are coplanar) provides the
initial pose, which Gauss-Newton refinement polishes to sub-pixel
reprojection accuracy.

Frames: "world" is the shared inertial frame, "camera" has the target pose
expressed relative to the observing camera. A returned pose maps target body
points into the tagged frame.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import RigidState
from .quat import (
    PoseSE3,
    quat_exp,
    quat_from_matrix,
    quat_multiply,
    quat_to_matrix,
    rotate_vector,
)

# body -> camera mounting: body +x is the optical axis
ROT_BODY_TO_CAMERA = np.array(
    [
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model: pixel = (fx X/Z + cx, fy Y/Z + cy)."""

    fx: float = 600.0
    fy: float = 600.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("intrinsics must be positive")


@dataclass(frozen=True)
class MarkerLayout:
    """Marker corner positions in the target body frame.

    corners has shape (markers, 4, 3) with corners ordered counterclockwise
    seen from outside, so (c1-c0) x (c3-c0) points along the outward normal.
    """

    ids: np.ndarray
    corners: np.ndarray

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=int).copy()
        corners = np.asarray(self.corners, dtype=float).copy()
        if corners.ndim != 3 or corners.shape[1:] != (4, 3) or corners.shape[0] != ids.shape[0]:
            raise ValueError("corners must have shape (n_markers, 4, 3) matching ids")
        if len(set(ids.tolist())) != len(ids):
            raise ValueError("marker ids must be unique")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "corners", corners)

    def center(self, index: int) -> np.ndarray:
        return self.corners[index].mean(axis=0)

    def normal(self, index: int) -> np.ndarray:
        c = self.corners[index]
        n = np.cross(c[1] - c[0], c[3] - c[0])
        return n / np.linalg.norm(n)

    @classmethod
    def cube(cls, half_size: float = 0.15, marker_half: float = 0.10) -> "MarkerLayout":
        """One centered square marker per face of an origin-centered cube."""
        if marker_half >= half_size * np.sqrt(2):
            raise ValueError("marker does not fit on the face")
        faces = [
            ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
            ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
            ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
            ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
            ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
            ((0, 0, -1), (0, 1, 0), (1, 0, 0)),
        ]
        corners = np.zeros((6, 4, 3))
        for i, (n, e1, e2) in enumerate(faces):
            n = np.array(n, dtype=float)
            e1 = np.array(e1, dtype=float)
            e2 = np.array(e2, dtype=float)
            c = half_size * n
            a = marker_half
            corners[i, 0] = c - a * e1 - a * e2
            corners[i, 1] = c + a * e1 - a * e2
            corners[i, 2] = c + a * e1 + a * e2
            corners[i, 3] = c - a * e1 + a * e2
        return cls(np.arange(6), corners)

    def save(self, path: str | Path) -> None:
        """Plain-text table: marker_id corner_index x y z."""
        lines = ["# marker_id corner_index x y z"]
        for i, mid in enumerate(self.ids):
            for k in range(4):
                x, y, z = self.corners[i, k]
                lines.append(f"{int(mid)} {k} {x:.12g} {y:.12g} {z:.12g}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MarkerLayout":
        rows: dict[int, dict[int, np.ndarray]] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"bad marker table row: {raw!r}")
            mid, k = int(parts[0]), int(parts[1])
            rows.setdefault(mid, {})[k] = np.array([float(v) for v in parts[2:5]])
        ids = sorted(rows)
        corners = np.zeros((len(ids), 4, 3))
        for i, mid in enumerate(ids):
            if sorted(rows[mid]) != [0, 1, 2, 3]:
                raise ValueError(f"marker {mid} does not have exactly corners 0..3")
            for k in range(4):
                corners[i, k] = rows[mid][k]
        return cls(np.array(ids), corners)


@dataclass(frozen=True)
class ObservationSet:
    """Noisy pixel observations of marker corners from one camera at one time."""

    timestamp: float
    chaser_id: int
    camera_pose: PoseSE3  # camera -> world
    marker_ids: np.ndarray
    corner_indices: np.ndarray
    pixels: np.ndarray

    def __post_init__(self) -> None:
        mids = np.asarray(self.marker_ids, dtype=int).copy()
        cors = np.asarray(self.corner_indices, dtype=int).copy()
        pix = np.asarray(self.pixels, dtype=float).copy().reshape(-1, 2)
        if not (mids.shape[0] == cors.shape[0] == pix.shape[0]):
            raise ValueError("observation arrays must have matching lengths")
        object.__setattr__(self, "marker_ids", mids)
        object.__setattr__(self, "corner_indices", cors)
        object.__setattr__(self, "pixels", pix)

    def __len__(self) -> int:
        return self.pixels.shape[0]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["timestamp", "chaser_id", "marker_id", "corner_index", "u", "v"])
            for i in range(len(self)):
                writer.writerow(
                    [
                        f"{self.timestamp:.10g}",
                        self.chaser_id,
                        int(self.marker_ids[i]),
                        int(self.corner_indices[i]),
                        f"{self.pixels[i, 0]:.10g}",
                        f"{self.pixels[i, 1]:.10g}",
                    ]
                )


@dataclass(frozen=True)
class PoseEstimate:
    """Recovered target pose with fit diagnostics."""

    pose: PoseSE3
    timestamp: float
    frame: str  # "camera" or "world"
    reprojection_rms: float
    corner_count: int
    converged: bool


def camera_pose(chaser_state: RigidState) -> PoseSE3:
    """Camera-to-world pose for the camera rigidly mounted on a chaser body."""
    q_cam = quat_multiply(chaser_state.quaternion, quat_from_matrix(ROT_BODY_TO_CAMERA.T))
    return PoseSE3(q_cam, chaser_state.position)


def project_point(intrinsics: CameraIntrinsics, point_cam: np.ndarray) -> np.ndarray:
    """Pixel coordinates of a camera-frame point; Z must be positive."""
    x, y, z = point_cam
    if z <= 1e-12:
        raise ValueError(f"point is not in front of the camera (Z={z})")
    return np.array([intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy])


def observe(
    intrinsics: CameraIntrinsics,
    cam_pose: PoseSE3,
    target_state: RigidState,
    layout: MarkerLayout,
    noise_sigma: float,
    rng: np.random.Generator,
    timestamp: float = 0.0,
    chaser_id: int = 0,
) -> ObservationSet:
    """Render every camera-facing marker corner to noisy pixels.

    A marker is kept when its center is in front of the camera and its
    outward normal faces the camera; individual corners are then kept when
    they land inside the image bounds. Noise is i.i.d. Gaussian per pixel
    coordinate, drawn in a fixed marker/corner order so a given generator
    state always yields the same observation set.
    """
    world_to_cam = cam_pose.inverse()
    mids: list[int] = []
    cors: list[int] = []
    pix: list[np.ndarray] = []
    for i in range(layout.ids.shape[0]):
        center_body = layout.center(i)
        normal_body = layout.normal(i)
        center_cam = world_to_cam.apply(
            rotate_vector(target_state.quaternion, center_body) + target_state.position
        )
        if center_cam[2] <= 1e-9:
            continue
        normal_cam = rotate_vector(
            world_to_cam.quaternion, rotate_vector(target_state.quaternion, normal_body)
        )
        if float(normal_cam @ center_cam) >= -1e-12:
            continue  # back face or edge-on
        for k in range(4):
            corner_cam = world_to_cam.apply(
                rotate_vector(target_state.quaternion, layout.corners[i, k])
                + target_state.position
            )
            if corner_cam[2] <= 1e-9:
                continue
            uv = project_point(intrinsics, corner_cam)
            if not (0.0 <= uv[0] <= intrinsics.width and 0.0 <= uv[1] <= intrinsics.height):
                continue
            if noise_sigma > 0.0:
                uv = uv + rng.normal(0.0, noise_sigma, size=2)
            mids.append(int(layout.ids[i]))
            cors.append(k)
            pix.append(uv)
    return ObservationSet(
        timestamp=timestamp,
        chaser_id=chaser_id,
        camera_pose=cam_pose,
        marker_ids=np.array(mids, dtype=int),
        corner_indices=np.array(cors, dtype=int),
        pixels=np.array(pix, dtype=float).reshape(-1, 2),
    )


def _normalized_coords(intrinsics: CameraIntrinsics, pixels: np.ndarray) -> np.ndarray:
    return np.column_stack(
        [(pixels[:, 0] - intrinsics.cx) / intrinsics.fx, (pixels[:, 1] - intrinsics.cy) / intrinsics.fy]
    )


def _hartley_2d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity transform sending the centroid to 0 with mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    spread = np.mean(np.linalg.norm(points - centroid, axis=1))
    scale = np.sqrt(2.0) / max(spread, 1e-12)
    transform = np.array(
        [[scale, 0.0, -scale * centroid[0]], [0.0, scale, -scale * centroid[1]], [0.0, 0.0, 1.0]]
    )
    normalized = (points - centroid) * scale
    return normalized, transform


def _nearest_rotation(mat: np.ndarray) -> tuple[np.ndarray, float]:
    u, sing, vt = np.linalg.svd(mat)
    det = np.linalg.det(u @ vt)
    rot = u @ np.diag([1.0, 1.0, det]) @ vt
    return rot, float(np.mean(sing))


def _init_dlt(norm_xy: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Projective DLT for >= 6 corners in general position."""
    count = points.shape[0]
    img, t2 = _hartley_2d(norm_xy)
    centroid = points.mean(axis=0)
    spread = np.mean(np.linalg.norm(points - centroid, axis=1))
    k3 = np.sqrt(3.0) / max(spread, 1e-12)
    obj = (points - centroid) * k3
    t3 = np.eye(4)
    t3[:3, :3] *= k3
    t3[:3, 3] = -k3 * centroid

    a = np.zeros((2 * count, 12))
    for i in range(count):
        x, y, z = obj[i]
        u, v = img[i]
        a[2 * i, 0:4] = [x, y, z, 1.0]
        a[2 * i, 8:12] = [-u * x, -u * y, -u * z, -u]
        a[2 * i + 1, 4:8] = [x, y, z, 1.0]
        a[2 * i + 1, 8:12] = [-v * x, -v * y, -v * z, -v]
    _, _, vt = np.linalg.svd(a)
    proj = vt[-1].reshape(3, 4)
    proj = np.linalg.inv(t2) @ proj @ t3

    hom = np.column_stack([points, np.ones(count)])
    if float(np.mean(hom @ proj[2])) < 0.0:
        proj = -proj
    rot, scale = _nearest_rotation(proj[:, :3])
    return rot, proj[:, 3] / scale


def _plane_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, _, vt = np.linalg.svd(centered)
    e1, e2 = vt[0], vt[1]
    return centroid, e1, e2, centered


def _init_homography(norm_xy: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pose from a plane-to-image homography for coplanar corner sets."""
    centroid, e1, e2, centered = _plane_basis(points)
    plane_xy = np.column_stack([centered @ e1, centered @ e2])
    src, t_src = _hartley_2d(plane_xy)
    dst, t_dst = _hartley_2d(norm_xy)
    count = points.shape[0]
    a = np.zeros((2 * count, 9))
    for i in range(count):
        sx, sy = src[i]
        dx, dy = dst[i]
        a[2 * i, 0:3] = [sx, sy, 1.0]
        a[2 * i, 6:9] = [-dx * sx, -dx * sy, -dx]
        a[2 * i + 1, 3:6] = [sx, sy, 1.0]
        a[2 * i + 1, 6:9] = [-dy * sx, -dy * sy, -dy]
    _, _, vt = np.linalg.svd(a)
    hom = np.linalg.inv(t_dst) @ vt[-1].reshape(3, 3) @ t_src
    # plane origin (centroid) must be in front of the camera
    if hom[2, 2] < 0.0:
        hom = -hom
    h1, h2, h3 = hom[:, 0], hom[:, 1], hom[:, 2]
    inv_scale = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    r1 = h1 * inv_scale
    r2 = h2 * inv_scale
    r3 = np.cross(r1, r2)
    rot_plane, _ = _nearest_rotation(np.column_stack([r1, r2, r3]))
    t_plane = h3 * inv_scale
    # compose with the world-of-the-plane frame (rows e1, e2, e1 x e2)
    basis = np.vstack([e1, e2, np.cross(e1, e2)])
    rot = rot_plane @ basis
    return rot, t_plane - rot @ centroid


def _refine(
    intrinsics: CameraIntrinsics,
    points: np.ndarray,
    pixels: np.ndarray,
    rot: np.ndarray,
    trans: np.ndarray,
    max_iterations: int = 50,
    step_tolerance: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray, bool, float]:
    """Levenberg-Marquardt on the pixel reprojection error over (rotation, translation).

    The rotation increment is applied on the left: R <- exp([delta]x) R.
    Damping adapts per iteration and a step is kept only if it lowers the
    cost; undamped Gauss-Newton zigzags on near-degenerate single-face views
    and never settles.
    """
    count = points.shape[0]

    def project(r_mat, t_vec):
        cam = points @ r_mat.T + t_vec
        if np.any(cam[:, 2] <= 1e-9):
            return None, None
        inv_z = 1.0 / cam[:, 2]
        proj = np.column_stack(
            [intrinsics.fx * cam[:, 0] * inv_z + intrinsics.cx,
             intrinsics.fy * cam[:, 1] * inv_z + intrinsics.cy]
        )
        return cam, (pixels - proj).reshape(-1)

    cam, residual = project(rot, trans)
    if cam is None:
        return rot, trans, False, float("inf")
    cost = float(residual @ residual)
    lam = 1e-6
    converged = False
    for _ in range(max_iterations):
        jac = np.zeros((2 * count, 6))
        for i in range(count):
            x, y, z = cam[i]
            jp = np.array(
                [[intrinsics.fx / z, 0.0, -intrinsics.fx * x / (z * z)],
                 [0.0, intrinsics.fy / z, -intrinsics.fy * y / (z * z)]]
            )
            rotated = cam[i] - trans
            skew = np.array(
                [[0.0, -rotated[2], rotated[1]],
                 [rotated[2], 0.0, -rotated[0]],
                 [-rotated[1], rotated[0], 0.0]]
            )
            jac[2 * i : 2 * i + 2, 0:3] = jp @ (-skew)
            jac[2 * i : 2 * i + 2, 3:6] = jp
        grad = jac.T @ residual
        normal = jac.T @ jac
        scale = np.diag(normal).clip(min=1e-12)
        accepted = False
        while lam <= 1e10:
            try:
                delta = np.linalg.solve(normal + lam * np.diag(scale), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand_rot, _ = _nearest_rotation(
                quat_to_matrix(quat_exp(0.5 * delta[0:3])) @ rot
            )
            cand_trans = trans + delta[3:6]
            cand_cam, cand_residual = project(cand_rot, cand_trans)
            if cand_cam is not None:
                cand_cost = float(cand_residual @ cand_residual)
                if cand_cost <= cost:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            # no descent under heavy damping: stationary unless the gradient says otherwise
            converged = float(np.linalg.norm(grad)) <= 1e-6 * max(1.0, cost)
            break
        improvement = cost - cand_cost
        rot, trans, cam, residual, cost = cand_rot, cand_trans, cand_cam, cand_residual, cand_cost
        lam = max(lam * 0.3, 1e-12)
        if float(np.linalg.norm(delta)) < step_tolerance or improvement <= 1e-12 * max(cost, 1e-30):
            converged = True
            break
    rms = float(np.sqrt(cost / count))
    return rot, trans, converged, rms


def solve_pnp(
    intrinsics: CameraIntrinsics, observations: ObservationSet, layout: MarkerLayout
) -> PoseEstimate | None:
    """Target pose in the camera frame from matched corner observations.

    Returns None when the corner set is too small or degenerate (fewer than
    four corners, or all corners collinear). A non-converged refinement is
    still returned, flagged, so callers can decide what to trust.
    """
    id_to_index = {int(mid): i for i, mid in enumerate(layout.ids)}
    points = []
    pixels = []
    for i in range(len(observations)):
        mid = int(observations.marker_ids[i])
        if mid not in id_to_index:
            continue
        points.append(layout.corners[id_to_index[mid], int(observations.corner_indices[i])])
        pixels.append(observations.pixels[i])
    if len(points) < 4:
        return None
    points = np.asarray(points)
    pixels = np.asarray(pixels)

    centered = points - points.mean(axis=0)
    sing = np.linalg.svd(centered, compute_uv=False)
    if sing[1] <= 1e-9 * max(sing[0], 1e-12):
        return None  # collinear corners carry no orientation information
    coplanar = sing[2] <= 1e-9 * sing[0]

    norm_xy = _normalized_coords(intrinsics, pixels)
    if coplanar:
        rot, trans = _init_homography(norm_xy, points)
    elif points.shape[0] >= 6:
        rot, trans = _init_dlt(norm_xy, points)
    else:
        # 4-5 corners in a non-coplanar set: initialize from one full marker
        rot = None
        for i, mid in enumerate(layout.ids):
            mask = observations.marker_ids == int(mid)
            if int(mask.sum()) == 4:
                sub_points = np.asarray(
                    [layout.corners[i, int(k)] for k in observations.corner_indices[mask]]
                )
                rot, trans = _init_homography(
                    _normalized_coords(intrinsics, observations.pixels[mask]), sub_points
                )
                break
        if rot is None:
            return None
    rot, trans, converged, rms = _refine(intrinsics, points, pixels, rot, trans)
    return PoseEstimate(
        pose=PoseSE3(quat_from_matrix(rot), trans),
        timestamp=observations.timestamp,
        frame="camera",
        reprojection_rms=rms,
        corner_count=int(points.shape[0]),
        converged=converged,
    )


def estimate_to_world(estimate: PoseEstimate, cam_pose: PoseSE3) -> PoseEstimate:
    """Re-express a camera-frame target pose in the world frame."""
    if estimate.frame != "camera":
        raise ValueError(f"expected a camera-frame estimate, got {estimate.frame!r}")
    return PoseEstimate(
        pose=cam_pose.compose(estimate.pose),
        timestamp=estimate.timestamp,
        frame="world",
        reprojection_rms=estimate.reprojection_rms,
        corner_count=estimate.corner_count,
        converged=estimate.converged,
    )
