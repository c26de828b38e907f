"""Geometry foundation: parametric primitives, the articulated hand+arm model,
camera projection and the supporting transform math.

Conventions:
  * World units are meters; angles in degrees.
  * The camera looks along +z of its own frame, x right, y down (image rows
    grow downward), so the default world frame is camera-aligned.
  * Euler angles are applied intrinsically in x -> y -> z order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError, JointLimitError


class PartLabel(enum.IntEnum):
    BACKGROUND = 0
    HAND = 1
    ARM = 2
    DISTRACTOR = 3


def normalize_angle(a: float) -> float:
    """Fold an angle in degrees into (-180, 180]."""
    n = a % 360.0
    if n > 180.0:
        n -= 360.0
    return n


def euler_matrix(angles_deg) -> np.ndarray:
    """Rotation matrix for intrinsic x->y->z Euler angles in degrees."""
    ax, ay, az = (math.radians(a) for a in angles_deg)
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]], dtype=float)
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]], dtype=float)
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]], dtype=float)
    return rx @ ry @ rz


@dataclass(frozen=True)
class Pose:
    """Rigid placement: position plus intrinsic x->y->z Euler orientation."""

    position: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (0.0, 0.0, 0.0)  # degrees, normalized to (-180, 180]

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        rot = tuple(normalize_angle(float(a)) for a in self.rotation)
        if not all(math.isfinite(v) for v in pos + rot):
            raise InvalidSpecError("pose has non-finite components")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)

    def matrix(self) -> np.ndarray:
        return euler_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (N,3) local points to the parent frame."""
        return points @ self.matrix().T + np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class JointLimits:
    lower: tuple = (-90.0, -30.0, -45.0)
    upper: tuple = (90.0, 30.0, 45.0)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != 3 or len(hi) != 3:
            raise InvalidSpecError("joint limits need exactly 3 axes")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if a > b:
                raise InvalidSpecError(f"joint limit lower > upper on axis {i + 1}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def check(self, gamma) -> None:
        for i, (g, lo, hi) in enumerate(zip(gamma, self.lower, self.upper)):
            if not (lo <= g <= hi):
                raise JointLimitError(i + 1, g, lo, hi)


@dataclass(frozen=True)
class HandPose:
    """Wrist joint angles (pronation, abduction, flexion) plus the arm pose.

    gamma = [0, 0, 0] leaves the hand aligned with the wrist frame.
    """

    gamma: tuple = (0.0, 0.0, 0.0)
    arm_pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        g = tuple(float(v) for v in self.gamma)
        if len(g) != 3:
            raise InvalidSpecError("gamma needs exactly 3 angles")
        object.__setattr__(self, "gamma", g)

    def validate(self, limits: JointLimits) -> "HandPose":
        limits.check(self.gamma)
        return self


class ShapeKind(enum.Enum):
    ELLIPSOID = "ellipsoid"
    PARALLELEPIPED = "parallelepiped"
    ELLIPTIC_CYLINDER = "elliptic_cylinder"
    SPHEROCYLINDER = "spherocylinder"


@dataclass(frozen=True)
class ShapeSpec:
    """Parametric distractor shape.

    dimensions by kind:
      ellipsoid          (a, b, c) semi-axes
      parallelepiped     (lx, ly, lz) full edge lengths
      elliptic_cylinder  (a, b, height) rim semi-axes + full height along z
      spherocylinder     (radius, cylinder_length) capsule along z
    """

    kind: ShapeKind
    dimensions: tuple
    color: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        dims = tuple(float(v) for v in self.dimensions)
        expected = {
            ShapeKind.ELLIPSOID: 3,
            ShapeKind.PARALLELEPIPED: 3,
            ShapeKind.ELLIPTIC_CYLINDER: 3,
            ShapeKind.SPHEROCYLINDER: 2,
        }[self.kind]
        if len(dims) != expected:
            raise InvalidSpecError(
                f"{self.kind.value} takes {expected} dimensions, got {len(dims)}"
            )
        strict_positive = dims if self.kind != ShapeKind.SPHEROCYLINDER else dims[:1]
        if any(d <= 0 for d in strict_positive):
            raise InvalidSpecError(f"{self.kind.value} dimensions must be positive")
        if self.kind == ShapeKind.SPHEROCYLINDER and dims[1] < 0:
            raise InvalidSpecError("spherocylinder length must be >= 0")
        col = tuple(float(c) for c in self.color)
        if len(col) != 3 or any(not (0.0 <= c <= 1.0) for c in col):
            raise InvalidSpecError("color must be RGB in [0,1]^3")
        object.__setattr__(self, "dimensions", dims)
        object.__setattr__(self, "color", col)


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with per-vertex unit normals and a part label."""

    vertices: np.ndarray  # (N, 3) float64
    normals: np.ndarray  # (N, 3) float64, unit length
    triangles: np.ndarray  # (M, 3) int32 vertex indices
    part_label: PartLabel = PartLabel.DISTRACTOR
    base_color: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if len(self.triangles) < 1:
            raise InvalidSpecError("mesh needs at least one triangle")
        if self.normals.shape != self.vertices.shape:
            raise InvalidSpecError("one normal per vertex required")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise InvalidSpecError("triangle index out of range")

    def transformed(self, rotation: np.ndarray, translation) -> "TriangleMesh":
        t = np.asarray(translation, dtype=float)
        return TriangleMesh(
            vertices=self.vertices @ rotation.T + t,
            normals=self.normals @ rotation.T,
            triangles=self.triangles.copy(),
            part_label=self.part_label,
            base_color=self.base_color,
        )

    def face_normals(self) -> np.ndarray:
        """Unit normals per triangle (zero-area faces get an arbitrary axis)."""
        v = self.vertices
        t = self.triangles
        n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        length = np.linalg.norm(n, axis=1, keepdims=True)
        n = n / np.where(length > 0, length, 1.0)
        n[length[:, 0] == 0] = (0.0, 0.0, 1.0)
        return n


def merge_meshes(meshes) -> TriangleMesh:
    """Concatenate meshes sharing a part label and color into one."""
    offset = 0
    verts, norms, tris = [], [], []
    for m in meshes:
        verts.append(m.vertices)
        norms.append(m.normals)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    first = meshes[0]
    return TriangleMesh(
        vertices=np.vstack(verts),
        normals=np.vstack(norms),
        triangles=np.vstack(tris),
        part_label=first.part_label,
        base_color=first.base_color,
    )


# ---------------------------------------------------------------------------
# Primitive builders
# ---------------------------------------------------------------------------

MIN_SEGMENTS = 3
DEFAULT_SEGMENTS = 16


def _lat_long_sphere(segments: int, stacks: int):
    """Unit sphere vertex directions + triangle indices (poles shared)."""
    dirs = [(0.0, 0.0, 1.0)]
    for i in range(1, stacks):
        theta = math.pi * i / stacks
        st, ct = math.sin(theta), math.cos(theta)
        for j in range(segments):
            phi = 2.0 * math.pi * j / segments
            dirs.append((st * math.cos(phi), st * math.sin(phi), ct))
    dirs.append((0.0, 0.0, -1.0))
    tris = []
    def ring(i, j):
        return 1 + (i - 1) * segments + (j % segments)
    for j in range(segments):
        tris.append((0, ring(1, j), ring(1, j + 1)))
    for i in range(1, stacks - 1):
        for j in range(segments):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append((a, c, b))
            tris.append((b, c, d))
    south = len(dirs) - 1
    for j in range(segments):
        tris.append((south, ring(stacks - 1, j + 1), ring(stacks - 1, j)))
    return np.array(dirs, dtype=float), np.array(tris, dtype=np.int32)


def _ellipsoid(a: float, b: float, c: float, segments: int, color) -> TriangleMesh:
    stacks = max(2, segments // 2)
    dirs, tris = _lat_long_sphere(segments, stacks)
    verts = dirs * np.array([a, b, c])
    # gradient of the implicit surface, normalized
    normals = dirs / np.array([a, b, c])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return TriangleMesh(verts, normals, tris, PartLabel.DISTRACTOR, color)


def _box(lx: float, ly: float, lz: float, color) -> TriangleMesh:
    hx, hy, hz = lx / 2.0, ly / 2.0, lz / 2.0
    verts = np.array(
        [
            (-hx, -hy, -hz), (hx, -hy, -hz), (hx, hy, -hz), (-hx, hy, -hz),
            (-hx, -hy, hz), (hx, -hy, hz), (hx, hy, hz), (-hx, hy, hz),
        ],
        dtype=float,
    )
    tris = np.array(
        [
            (0, 2, 1), (0, 3, 2),  # z-
            (4, 5, 6), (4, 6, 7),  # z+
            (0, 1, 5), (0, 5, 4),  # y-
            (3, 7, 6), (3, 6, 2),  # y+
            (0, 4, 7), (0, 7, 3),  # x-
            (1, 2, 6), (1, 6, 5),  # x+
        ],
        dtype=np.int32,
    )
    normals = verts / np.linalg.norm(verts, axis=1, keepdims=True)
    return TriangleMesh(verts, normals, tris, PartLabel.DISTRACTOR, color)


def _elliptic_cylinder(a: float, b: float, height: float, segments: int, color) -> TriangleMesh:
    hz = height / 2.0
    ring = [
        (math.cos(2 * math.pi * j / segments), math.sin(2 * math.pi * j / segments))
        for j in range(segments)
    ]
    verts = [(0.0, 0.0, hz)]
    verts += [(a * cx, b * sy, hz) for cx, sy in ring]
    verts += [(a * cx, b * sy, -hz) for cx, sy in ring]
    verts.append((0.0, 0.0, -hz))
    top = lambda j: 1 + (j % segments)
    bot = lambda j: 1 + segments + (j % segments)
    tris = []
    for j in range(segments):
        tris.append((0, top(j), top(j + 1)))
        tris.append((top(j), bot(j), top(j + 1)))
        tris.append((top(j + 1), bot(j), bot(j + 1)))
        tris.append((1 + 2 * segments, bot(j + 1), bot(j)))
    verts = np.array(verts, dtype=float)
    # side normals from the rim direction, caps along z
    normals = np.zeros_like(verts)
    normals[0] = (0, 0, 1)
    normals[-1] = (0, 0, -1)
    for j, (cx, sy) in enumerate(ring):
        n = np.array([cx / a, sy / b, 0.0])
        n /= np.linalg.norm(n)
        normals[top(j)] = n
        normals[bot(j)] = n
    return TriangleMesh(verts, normals, np.array(tris, dtype=np.int32),
                        PartLabel.DISTRACTOR, color)


def _spherocylinder(radius: float, length: float, segments: int, color) -> TriangleMesh:
    """Capsule along z: cylinder of the given length with hemisphere caps."""
    rings_per_cap = max(2, segments // 4)
    half = length / 2.0
    phis = [2.0 * math.pi * j / segments for j in range(segments)]
    verts = [(0.0, 0.0, radius + half)]
    norms = [(0.0, 0.0, 1.0)]
    # upper cap rings down to the equator, then the mirrored lower set;
    # the equator ring appears twice so the wall between them is a cylinder
    thetas = [(math.pi / 2.0) * i / rings_per_cap for i in range(1, rings_per_cap + 1)]
    for sign in (1.0, -1.0):
        for theta in (thetas if sign > 0 else reversed(thetas)):
            st, ct = math.sin(theta), math.cos(theta)
            for phi in phis:
                d = (st * math.cos(phi), st * math.sin(phi), sign * ct)
                verts.append((radius * d[0], radius * d[1], radius * d[2] + sign * half))
                norms.append(d)
    verts.append((0.0, 0.0, -radius - half))
    norms.append((0.0, 0.0, -1.0))

    n_rings = 2 * rings_per_cap
    ring = lambda i, j: 1 + i * segments + (j % segments)
    tris = []
    for j in range(segments):
        tris.append((0, ring(0, j), ring(0, j + 1)))
    for i in range(n_rings - 1):
        for j in range(segments):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append((a, c, b))
            tris.append((b, c, d))
    south = len(verts) - 1
    for j in range(segments):
        tris.append((south, ring(n_rings - 1, j + 1), ring(n_rings - 1, j)))
    return TriangleMesh(np.array(verts), np.array(norms),
                        np.array(tris, dtype=np.int32), PartLabel.DISTRACTOR, color)


def build_primitive(spec: ShapeSpec, segments: int = DEFAULT_SEGMENTS) -> TriangleMesh:
    """Tessellate a parametric shape spec into a watertight mesh."""
    if segments < MIN_SEGMENTS:
        raise InvalidSpecError(f"need at least {MIN_SEGMENTS} segments, got {segments}")
    d = spec.dimensions
    if spec.kind == ShapeKind.ELLIPSOID:
        return _ellipsoid(d[0], d[1], d[2], segments, spec.color)
    if spec.kind == ShapeKind.PARALLELEPIPED:
        return _box(d[0], d[1], d[2], spec.color)
    if spec.kind == ShapeKind.ELLIPTIC_CYLINDER:
        return _elliptic_cylinder(d[0], d[1], d[2], segments, spec.color)
    if spec.kind == ShapeKind.SPHEROCYLINDER:
        return _spherocylinder(d[0], d[1], segments, spec.color)
    raise InvalidSpecError(f"unknown shape kind {spec.kind}")


# ---------------------------------------------------------------------------
# Articulated hand + arm
# ---------------------------------------------------------------------------

HAND_COLOR = (0.78, 0.78, 0.80)  # light-gray plastic
ARM_COLOR = (0.72, 0.72, 0.75)

# local hand frame: forearm axis = +x (fingers point +x), palm normal = +y
_PALM_SIZE = (0.080, 0.030, 0.080)
_PALM_CENTER = (0.060, 0.0, 0.0)
_FINGER_RADIUS = 0.008
_FINGER_Z = (-0.033, -0.011, 0.011, 0.033)
_FINGER_SEGMENTS = (0.035, 0.030)
_THUMB_RADIUS = 0.009
_THUMB_BASE = (0.045, 0.0, 0.044)
_THUMB_DIR = (math.cos(math.radians(55)), 0.0, math.sin(math.radians(55)))
_THUMB_SEGMENTS = (0.030, 0.025)
_ARM_LENGTH = 0.25
_ARM_RADIUS = 0.025
_HAND_TESSELLATION = 12


def _axis_rotation(direction) -> np.ndarray:
    """Rotation taking +z onto the given unit direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(z, d)
    c = float(np.dot(z, d))
    if np.linalg.norm(v) < 1e-12:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx * (1.0 / (1.0 + c))


def _capsule_between(start, end, radius: float, color) -> TriangleMesh:
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    axis = end - start
    length = float(np.linalg.norm(axis))
    spec = ShapeSpec(ShapeKind.SPHEROCYLINDER, (radius, length), color)
    mesh = build_primitive(spec, segments=_HAND_TESSELLATION)
    rot = _axis_rotation(axis / length)
    return mesh.transformed(rot, (start + end) / 2.0)


def _hand_local_meshes():
    parts = [_box(*_PALM_SIZE, HAND_COLOR).transformed(np.eye(3), _PALM_CENTER)]
    x0 = _PALM_CENTER[0] + _PALM_SIZE[0] / 2.0
    for z in _FINGER_Z:
        x = x0
        for seg in _FINGER_SEGMENTS:
            parts.append(_capsule_between((x, 0, z), (x + seg, 0, z),
                                          _FINGER_RADIUS, HAND_COLOR))
            x += seg
    base = np.asarray(_THUMB_BASE)
    d = np.asarray(_THUMB_DIR)
    for seg in _THUMB_SEGMENTS:
        parts.append(_capsule_between(base, base + d * seg, _THUMB_RADIUS, HAND_COLOR))
        base = base + d * seg
    return parts


def _forearm_mesh() -> TriangleMesh:
    spec = ShapeSpec(ShapeKind.ELLIPTIC_CYLINDER, (_ARM_RADIUS, _ARM_RADIUS, _ARM_LENGTH),
                     ARM_COLOR)
    mesh = build_primitive(spec, segments=_HAND_TESSELLATION)
    rot = _axis_rotation((1.0, 0.0, 0.0))  # cylinder axis z -> forearm axis x
    return mesh.transformed(rot, (-_ARM_LENGTH / 2.0, 0.0, 0.0))


def build_hand_arm(pose: HandPose, attach_arm: bool,
                   limits: JointLimits | None = None) -> list[TriangleMesh]:
    """Articulated hand (+optional forearm) transformed into the world frame.

    The hand rotates by gamma about the wrist origin; the forearm follows the
    arm pose only. Mesh count and topology do not depend on gamma.
    """
    limits = limits if limits is not None else JointLimits()
    limits.check(pose.gamma)

    r_gamma = euler_matrix(pose.gamma)
    r_arm = pose.arm_pose.matrix()
    t_arm = np.asarray(pose.arm_pose.position, dtype=float)

    hand = merge_meshes(_hand_local_meshes())
    hand.part_label = PartLabel.HAND
    hand = hand.transformed(r_arm @ r_gamma, t_arm)
    hand.part_label = PartLabel.HAND

    out = [hand]
    if attach_arm:
        arm = _forearm_mesh()
        arm.part_label = PartLabel.ARM
        arm = arm.transformed(r_arm, t_arm)
        arm.part_label = PartLabel.ARM
        out.append(arm)
    return out


# ---------------------------------------------------------------------------
# Camera
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Camera:
    pose: Pose = field(default_factory=Pose)
    width: int = 640
    height: int = 480
    fov_deg: float = 60.0  # vertical field of view
    near: float = 0.05
    far: float = 50.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidSpecError("image dimensions must be positive")
        if not (0.0 < self.near < self.far):
            raise InvalidSpecError("need 0 < near < far")
        if not (0.0 < self.fov_deg < 180.0):
            raise InvalidSpecError("vertical fov must be in (0, 180)")

    @property
    def focal_px(self) -> float:
        return (self.height / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        r = self.pose.matrix()
        t = np.asarray(self.pose.position, dtype=float)
        return (np.atleast_2d(points) - t) @ r  # r.T applied from the left


def project(point, camera: Camera):
    """Pinhole projection to continuous pixel coordinates.

    Returns (x, y) or None when the point sits at/behind the near plane.
    """
    p = camera.world_to_camera(np.asarray(point, dtype=float))[0]
    if p[2] <= camera.near:
        return None
    f = camera.focal_px
    x = camera.width / 2.0 + f * p[0] / p[2]
    y = camera.height / 2.0 + f * p[1] / p[2]
    return (x, y)


@dataclass(frozen=True)
class Spotlight:
    position: tuple
    direction: tuple  # unit vector
    cone_deg: float
    intensity: float = 1.0
    color: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise InvalidSpecError("spotlight direction must be non-zero")
        object.__setattr__(self, "direction", tuple(d / n))
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if not (0.0 < self.cone_deg <= 90.0):
            raise InvalidSpecError("cone angle must be in (0, 90]")
        if self.intensity < 0:
            raise InvalidSpecError("intensity must be >= 0")


def default_lights() -> list[Spotlight]:
    """Fixed wide headlight used by presets without lighting randomization."""
    return [Spotlight(position=(0.0, 0.0, -5.0), direction=(0.0, 0.0, 1.0),
                      cone_deg=89.0, intensity=1.0, color=(1.0, 1.0, 1.0))]
