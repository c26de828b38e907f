"""Seeded sampling of complete scene descriptions for the six incremental
dataset presets (A: solid background + hand only ... F: real backgrounds).

Every scene is fully determined by (config, preset, dataset seed, image
index); index substreams are independent, so generation order never matters.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import (
    Camera,
    HandPose,
    JointLimits,
    Pose,
    ShapeKind,
    ShapeSpec,
    Spotlight,
    default_lights,
)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".ppm")


class DatasetPreset:
    """Cumulative feature presets; each level includes all previous features."""

    _ORDER = "ABCDEF"
    _NAMES = {
        "A": "A_SolidBgHand",
        "B": "B_SolidBgArm",
        "C": "C_PerlinNoise",
        "D": "D_DistractorObjects",
        "E": "E_LightingEffects",
        "F": "F_RealBackgrounds",
    }

    def __init__(self, letter: str):
        letter = letter.strip().upper()[:1]
        if letter not in self._ORDER:
            raise ConfigError(f"unknown preset {letter!r}; expected one of A..F")
        self.letter = letter

    @classmethod
    def parse(cls, text: str) -> "DatasetPreset":
        return cls(str(text))

    @classmethod
    def all(cls) -> list["DatasetPreset"]:
        return [cls(c) for c in cls._ORDER]

    @property
    def level(self) -> int:
        return self._ORDER.index(self.letter)

    @property
    def name(self) -> str:
        return self._NAMES[self.letter]

    # feature gates (strictly cumulative by construction)
    @property
    def with_arm(self) -> bool:
        return self.level >= 1

    @property
    def with_perlin(self) -> bool:
        return self.level >= 2

    @property
    def with_distractors(self) -> bool:
        return self.level >= 3

    @property
    def with_random_lights(self) -> bool:
        return self.level >= 4

    @property
    def with_real_backgrounds(self) -> bool:
        return self.level >= 5

    def __eq__(self, other):
        return isinstance(other, DatasetPreset) and other.letter == self.letter

    def __hash__(self):
        return hash(self.letter)

    def __repr__(self):
        return f"DatasetPreset({self.letter!r})"


# --- background variants ----------------------------------------------------

@dataclass(frozen=True)
class SolidColor:
    rgb: tuple


@dataclass(frozen=True)
class PerlinTexture:
    seed: int
    octaves: int
    base_frequency: float
    amplitude: float
    color_a: tuple
    color_b: tuple


@dataclass(frozen=True)
class RealImage:
    path: str


BackgroundSpec = SolidColor | PerlinTexture | RealImage


@dataclass(frozen=True)
class RandomizationConfig:
    joint_limits: JointLimits = field(default_factory=JointLimits)
    arm_position_min: tuple = (-0.12, -0.08, 0.50)
    arm_position_max: tuple = (0.12, 0.08, 0.80)
    arm_rotation_min: tuple = (-180.0, -180.0, -180.0)
    arm_rotation_max: tuple = (180.0, 180.0, 180.0)
    distractor_count: tuple = (1, 6)
    distractor_dim: tuple = (0.02, 0.10)
    distractor_depth: tuple = (0.30, 1.20)
    perlin_octaves: int = 4
    perlin_base_frequency: float = 4.0
    perlin_amplitude: float = 0.5
    light_intensity: tuple = (0.6, 1.3)
    light_cone_deg: tuple = (25.0, 70.0)
    backgrounds_dir: str | None = None
    perlin_fraction: float = 0.5
    real_fraction: float = 0.5
    camera: Camera = field(default_factory=Camera)

    def __post_init__(self):
        for name in ("distractor_count", "distractor_dim", "distractor_depth",
                     "light_intensity", "light_cone_deg"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name}: empty range [{lo}, {hi}]")
        for frac_name in ("perlin_fraction", "real_fraction"):
            f = getattr(self, frac_name)
            if not (0.0 <= f <= 1.0):
                raise ConfigError(f"{frac_name} must be in [0, 1]")
        for axis in range(3):
            if self.arm_position_min[axis] > self.arm_position_max[axis]:
                raise ConfigError("empty arm position range")
            if self.arm_rotation_min[axis] > self.arm_rotation_max[axis]:
                raise ConfigError("empty arm rotation range")


@dataclass(frozen=True)
class SceneDescription:
    hand_pose: HandPose
    attach_arm: bool
    distractors: tuple  # of (ShapeSpec, Pose)
    background: BackgroundSpec
    lights: tuple  # of Spotlight
    camera: Camera
    seed: int
    index: int


# --- config file ------------------------------------------------------------

def config_from_dict(doc: dict) -> RandomizationConfig:
    """Build a config from the YAML document structure (all keys optional)."""
    doc = doc or {}
    kwargs = {}
    jl = doc.get("joint_limits")
    if jl:
        kwargs["joint_limits"] = JointLimits(tuple(jl["lower"]), tuple(jl["upper"]))
    arm = doc.get("arm", {})
    for src, dst in (("position_min", "arm_position_min"),
                     ("position_max", "arm_position_max"),
                     ("rotation_min", "arm_rotation_min"),
                     ("rotation_max", "arm_rotation_max")):
        if src in arm:
            kwargs[dst] = tuple(arm[src])
    dis = doc.get("distractors", {})
    if "count_min" in dis or "count_max" in dis:
        kwargs["distractor_count"] = (int(dis.get("count_min", 1)),
                                      int(dis.get("count_max", 6)))
    if "dim_min" in dis or "dim_max" in dis:
        kwargs["distractor_dim"] = (float(dis.get("dim_min", 0.02)),
                                    float(dis.get("dim_max", 0.10)))
    if "depth_min" in dis or "depth_max" in dis:
        kwargs["distractor_depth"] = (float(dis.get("depth_min", 0.3)),
                                      float(dis.get("depth_max", 1.2)))
    per = doc.get("perlin", {})
    if "octaves" in per:
        kwargs["perlin_octaves"] = int(per["octaves"])
    if "base_frequency" in per:
        kwargs["perlin_base_frequency"] = float(per["base_frequency"])
    if "amplitude" in per:
        kwargs["perlin_amplitude"] = float(per["amplitude"])
    lights = doc.get("lights", {})
    if "intensity_min" in lights or "intensity_max" in lights:
        kwargs["light_intensity"] = (float(lights.get("intensity_min", 0.6)),
                                     float(lights.get("intensity_max", 1.3)))
    if "cone_min_deg" in lights or "cone_max_deg" in lights:
        kwargs["light_cone_deg"] = (float(lights.get("cone_min_deg", 25.0)),
                                    float(lights.get("cone_max_deg", 70.0)))
    if doc.get("backgrounds_dir"):
        kwargs["backgrounds_dir"] = str(doc["backgrounds_dir"])
    mix = doc.get("mix", {})
    if "perlin_fraction" in mix:
        kwargs["perlin_fraction"] = float(mix["perlin_fraction"])
    if "real_fraction" in mix:
        kwargs["real_fraction"] = float(mix["real_fraction"])
    img = doc.get("image", {})
    if img:
        kwargs["camera"] = Camera(width=int(img.get("width", 640)),
                                  height=int(img.get("height", 480)),
                                  fov_deg=float(img.get("fov_deg", 60.0)))
    return RandomizationConfig(**kwargs)


def load_config(path: str) -> RandomizationConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return config_from_dict(doc)


def list_background_images(directory: str) -> list[str]:
    if not directory or not os.path.isdir(directory):
        raise ConfigError(f"background image directory not found: {directory!r}")
    files = sorted(
        f for f in os.listdir(directory)
        if f.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not files:
        raise ConfigError(f"no background images in {directory!r}")
    return [os.path.join(directory, f) for f in files]


# --- sampling ---------------------------------------------------------------

def scene_rng(seed: int, index: int) -> np.random.Generator:
    """Independent substream for one image index (order-independent)."""
    return np.random.default_rng([int(seed), int(index)])


def sample_hand_pose(limits: JointLimits, rng: np.random.Generator,
                     position_range=None, rotation_range=None) -> HandPose:
    """Uniform joint angles within limits; arm base inside the view volume."""
    cfg = RandomizationConfig()
    pos_min, pos_max = position_range or (cfg.arm_position_min, cfg.arm_position_max)
    rot_min, rot_max = rotation_range or (cfg.arm_rotation_min, cfg.arm_rotation_max)
    gamma = tuple(rng.uniform(lo, hi) if hi > lo else float(lo)
                  for lo, hi in zip(limits.lower, limits.upper))
    position = tuple(rng.uniform(lo, hi) if hi > lo else float(lo)
                     for lo, hi in zip(pos_min, pos_max))
    rotation = tuple(rng.uniform(lo, hi) if hi > lo else float(lo)
                     for lo, hi in zip(rot_min, rot_max))
    return HandPose(gamma=gamma, arm_pose=Pose(position, rotation))


_SHAPE_KINDS = (ShapeKind.ELLIPSOID, ShapeKind.PARALLELEPIPED,
                ShapeKind.ELLIPTIC_CYLINDER, ShapeKind.SPHEROCYLINDER)


def sample_distractors(config: RandomizationConfig, rng: np.random.Generator):
    """Random parametric shapes placed in the camera frustum (they may occlude
    the hand: depths cover the space in front of it)."""
    lo, hi = config.distractor_count
    count = int(rng.integers(lo, hi + 1))
    dmin, dmax = config.distractor_dim
    cam = config.camera
    tan_half = math.tan(math.radians(cam.fov_deg) / 2.0)
    aspect = cam.width / cam.height
    out = []
    for _ in range(count):
        kind = _SHAPE_KINDS[int(rng.integers(len(_SHAPE_KINDS)))]
        if kind == ShapeKind.SPHEROCYLINDER:
            dims = (float(rng.uniform(dmin, dmax) / 2.0),
                    float(rng.uniform(0.0, dmax)))
        else:
            dims = tuple(float(rng.uniform(dmin, dmax)) for _ in range(3))
        color = tuple(float(c) for c in rng.uniform(0.0, 1.0, 3))
        z = float(rng.uniform(*config.distractor_depth))
        half_h = z * tan_half * 0.9
        half_w = half_h * aspect
        position = (float(rng.uniform(-half_w, half_w)),
                    float(rng.uniform(-half_h, half_h)), z)
        rotation = tuple(float(a) for a in rng.uniform(-180.0, 180.0, 3))
        out.append((ShapeSpec(kind, dims, color), Pose(position, rotation)))
    return out


def _sample_background(config: RandomizationConfig, preset: DatasetPreset,
                       rng: np.random.Generator) -> BackgroundSpec:
    if preset.with_real_backgrounds:
        use_real = rng.uniform() < config.real_fraction
        files = list_background_images(config.backgrounds_dir)  # errors even when unused this draw
        if use_real:
            return RealImage(files[int(rng.integers(len(files)))])
    if preset.with_perlin and rng.uniform() < config.perlin_fraction:
        seed = int(rng.integers(0, 2**31 - 1))
        color_a = tuple(float(c) for c in rng.uniform(0.0, 1.0, 3))
        color_b = tuple(float(c) for c in rng.uniform(0.0, 1.0, 3))
        return PerlinTexture(seed, config.perlin_octaves,
                             config.perlin_base_frequency,
                             config.perlin_amplitude, color_a, color_b)
    return SolidColor(tuple(float(c) for c in rng.uniform(0.0, 1.0, 3)))


def _sample_lights(config: RandomizationConfig, hand_position,
                   rng: np.random.Generator) -> tuple:
    """3 spotlights in the hemisphere above the scene, aimed near the hand."""
    center = np.array([0.0, 0.0, 0.65])
    lights = []
    for _ in range(3):
        azimuth = rng.uniform(0.0, 2.0 * math.pi)
        elevation = rng.uniform(math.radians(20), math.radians(75))
        radius = rng.uniform(0.8, 1.6)
        offset = np.array([
            math.cos(elevation) * math.cos(azimuth),
            -math.sin(elevation),  # -y is up in the camera-aligned frame
            math.cos(elevation) * math.sin(azimuth),
        ]) * radius
        position = center + offset
        target = np.asarray(hand_position) + rng.uniform(-0.10, 0.10, 3)
        direction = target - position
        lights.append(Spotlight(
            position=tuple(position),
            direction=tuple(direction),
            cone_deg=float(rng.uniform(*config.light_cone_deg)),
            intensity=float(rng.uniform(*config.light_intensity)),
            color=tuple(1.0 - float(c) for c in rng.uniform(0.0, 0.25, 3)),
        ))
    return tuple(lights)


def sample_scene(config: RandomizationConfig, preset: DatasetPreset,
                 seed: int, index: int) -> SceneDescription:
    """Draw one fully-specified scene for (config, preset, seed, index)."""
    if index < 0:
        raise ConfigError("image index must be >= 0")
    rng = scene_rng(seed, index)

    hand_pose = sample_hand_pose(
        config.joint_limits, rng,
        position_range=(config.arm_position_min, config.arm_position_max),
        rotation_range=(config.arm_rotation_min, config.arm_rotation_max),
    )
    background = _sample_background(config, preset, rng)
    distractors = tuple(sample_distractors(config, rng)) if preset.with_distractors else ()
    if preset.with_random_lights:
        lights = _sample_lights(config, hand_pose.arm_pose.position, rng)
    else:
        lights = tuple(default_lights())

    return SceneDescription(
        hand_pose=hand_pose,
        attach_arm=preset.with_arm,
        distractors=distractors,
        background=background,
        lights=lights,
        camera=config.camera,
        seed=int(seed),
        index=int(index),
    )
