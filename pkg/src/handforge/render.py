"""Deterministic software rasterizer.

Z-buffered triangle rasterization sampled at pixel centers, flat Lambertian
shading evaluated per face, spotlight cones with cosine falloff and a fixed
ambient floor. Output is byte-exact for equal inputs: no anti-aliasing, no
threading inside a frame, double precision throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ConfigError
from .geometry import Camera, PartLabel, Spotlight, TriangleMesh, build_hand_arm, build_primitive
from .masks import BBox, bbox_from_mask, mask_from_instance  # re-exported
from .noise import PerlinParams, perlin
from .randomize import PerlinTexture, RealImage, SceneDescription, SolidColor

AMBIENT = 0.15


@dataclass
class RenderOutput:
    color: np.ndarray  # (h, w, 3) uint8
    depth: np.ndarray  # (h, w) float64, +inf where empty
    labels: np.ndarray  # (h, w) uint8 PartLabel values


# ---------------------------------------------------------------------------
# Scene assembly
# ---------------------------------------------------------------------------

def scene_meshes(scene: SceneDescription) -> list[TriangleMesh]:
    meshes = build_hand_arm(scene.hand_pose, scene.attach_arm)
    for spec, pose in scene.distractors:
        mesh = build_primitive(spec)
        meshes.append(mesh.transformed(pose.matrix(), pose.position))
    return meshes


def background_pixels(background, width: int, height: int) -> np.ndarray:
    """Float RGB background plane in [0, 1], shaped (height, width, 3)."""
    if isinstance(background, SolidColor):
        return np.broadcast_to(np.asarray(background.rgb, dtype=np.float64),
                               (height, width, 3)).copy()
    if isinstance(background, PerlinTexture):
        xs = (np.arange(width) + 0.5) / height  # square texels
        ys = (np.arange(height) + 0.5) / height
        vals = perlin(xs[None, :], ys[:, None],
                      PerlinParams(background.seed, background.octaves,
                                   background.base_frequency, background.amplitude))
        t = ((vals + 1.0) / 2.0)[..., None]
        a = np.asarray(background.color_a, dtype=np.float64)
        b = np.asarray(background.color_b, dtype=np.float64)
        return (1.0 - t) * a + t * b
    if isinstance(background, RealImage):
        return load_background(background.path, width, height)
    raise ConfigError(f"unknown background spec {background!r}")


def load_background(path: str, width: int, height: int) -> np.ndarray:
    """Load an 8-bit RGB image stretched to the frame, as float in [0, 1]."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if im.size != (width, height):
            im = im.resize((width, height), Image.BILINEAR)
        return np.asarray(im, dtype=np.float64) / 255.0


# ---------------------------------------------------------------------------
# Shading
# ---------------------------------------------------------------------------

def _face_colors(mesh: TriangleMesh, lights, eye) -> np.ndarray:
    """Per-face RGB from flat Lambertian shading in world space."""
    v = mesh.vertices
    t = mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = n / np.where(norm > 0, norm, 1.0)
    centroids = (a + b + c) / 3.0

    # orient normals toward the viewer so winding mistakes never go black
    view = centroids - np.asarray(eye, dtype=np.float64)
    flip = (n * view).sum(axis=1) > 0
    n = np.where(flip[:, None], -n, n)

    light_sum = np.full((len(t), 3), AMBIENT, dtype=np.float64)
    for light in lights:
        to_light = np.asarray(light.position, dtype=np.float64) - centroids
        dist = np.linalg.norm(to_light, axis=1, keepdims=True)
        ldir = to_light / np.where(dist > 0, dist, 1.0)
        lambert = np.clip((n * ldir).sum(axis=1), 0.0, None)
        cos_to_point = (-ldir * np.asarray(light.direction)).sum(axis=1)
        cos_cone = math.cos(math.radians(light.cone_deg))
        falloff = np.clip((cos_to_point - cos_cone) / (1.0 - cos_cone), 0.0, 1.0)
        light_sum += (light.intensity * lambert * falloff)[:, None] \
            * np.asarray(light.color, dtype=np.float64)

    base = np.asarray(mesh.base_color, dtype=np.float64)
    return np.clip(light_sum * base, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Clipping + rasterization
# ---------------------------------------------------------------------------

def clip_triangle_near(tri_cam: np.ndarray, near: float) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of one camera-space triangle against z >= near.

    Returns 0, 1 or 2 triangles (a clipped quad is fan-split).
    """
    poly = [tri_cam[i] for i in range(3)]
    out = []
    for i in range(len(poly)):
        cur, nxt = poly[i], poly[(i + 1) % len(poly)]
        cur_in = cur[2] >= near
        nxt_in = nxt[2] >= near
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (near - cur[2]) / (nxt[2] - cur[2])
            out.append(cur + t * (nxt - cur))
    if len(out) < 3:
        return []
    return [np.stack([out[0], out[k], out[k + 1]]) for k in range(1, len(out) - 1)]


def rasterize(meshes, camera: Camera, lights, background: np.ndarray) -> RenderOutput:
    """Rasterize meshes over a prepared float background plane."""
    w, h = camera.width, camera.height
    if background.shape != (h, w, 3):
        raise ConfigError(
            f"background shape {background.shape} does not match frame {(h, w, 3)}")
    color = np.array(background, dtype=np.float64)
    labels = np.zeros((h, w), dtype=np.uint8)
    invz = np.zeros((h, w), dtype=np.float64)  # 1/z; 0 == infinitely far

    f = camera.focal_px
    cx, cy = w / 2.0, h / 2.0
    px_centers = np.arange(w, dtype=np.float64) + 0.5
    py_centers = np.arange(h, dtype=np.float64) + 0.5

    for mesh in meshes:
        face_rgb = _face_colors(mesh, lights, camera.pose.position)
        vc = camera.world_to_camera(mesh.vertices)
        zs = vc[:, 2]
        safe_z = np.where(zs > camera.near, zs, 1.0)
        proj_x = cx + f * vc[:, 0] / safe_z
        proj_y = cy + f * vc[:, 1] / safe_z
        iz = 1.0 / safe_z
        label = int(mesh.part_label)

        tris = mesh.triangles
        tri_front = (zs[tris] > camera.near).all(axis=1)
        tri_any = (zs[tris] > camera.near).any(axis=1)
        for ti in range(len(tris)):
            rgb = face_rgb[ti]
            if tri_front[ti]:
                i0, i1, i2 = tris[ti]
                _raster_one(color, labels, invz, label, rgb,
                            proj_x[i0], proj_y[i0], iz[i0],
                            proj_x[i1], proj_y[i1], iz[i1],
                            proj_x[i2], proj_y[i2], iz[i2],
                            px_centers, py_centers, w, h)
            elif tri_any[ti]:
                for sub in clip_triangle_near(vc[tris[ti]], camera.near):
                    sx = cx + f * sub[:, 0] / sub[:, 2]
                    sy = cy + f * sub[:, 1] / sub[:, 2]
                    siz = 1.0 / sub[:, 2]
                    _raster_one(color, labels, invz, label, rgb,
                                sx[0], sy[0], siz[0], sx[1], sy[1], siz[1],
                                sx[2], sy[2], siz[2],
                                px_centers, py_centers, w, h)

    depth = np.where(invz > 0.0, 1.0 / np.where(invz > 0.0, invz, 1.0), np.inf)
    out_color = np.clip(np.rint(color * 255.0), 0, 255).astype(np.uint8)
    return RenderOutput(color=out_color, depth=depth, labels=labels)


def _raster_one(color, labels, invz, label, rgb,
                x0, y0, iz0, x1, y1, iz1, x2, y2, iz2,
                px_centers, py_centers, w, h):
    """Rasterize one screen-space triangle into the shared buffers."""
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area == 0.0:
        return
    orient = 1.0 if area > 0.0 else -1.0
    ea = area * orient

    ix_min = max(0, math.ceil(min(x0, x1, x2) - 0.5))
    ix_max = min(w - 1, math.floor(max(x0, x1, x2) - 0.5))
    iy_min = max(0, math.ceil(min(y0, y1, y2) - 0.5))
    iy_max = min(h - 1, math.floor(max(y0, y1, y2) - 0.5))
    if ix_min > ix_max or iy_min > iy_max:
        return

    px = px_centers[ix_min:ix_max + 1][None, :]
    py = py_centers[iy_min:iy_max + 1][:, None]

    e0 = ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)) * orient
    e1 = ((x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)) * orient
    e2 = ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)) * orient
    inside = (e0 >= 0.0) & (e1 >= 0.0) & (e2 >= 0.0)
    if not inside.any():
        return

    w0 = e0 / ea
    w1 = e1 / ea
    w2 = e2 / ea
    iz_p = w0 * iz0 + w1 * iz1 + w2 * iz2

    zwin = invz[iy_min:iy_max + 1, ix_min:ix_max + 1]
    sel = inside & (iz_p > zwin)
    if not sel.any():
        return
    zwin[sel] = iz_p[sel]
    labels[iy_min:iy_max + 1, ix_min:ix_max + 1][sel] = label
    color[iy_min:iy_max + 1, ix_min:ix_max + 1][sel] = rgb


def render(scene: SceneDescription) -> RenderOutput:
    """Render a sampled scene to color, depth, and part-label buffers."""
    cam = scene.camera
    bg = background_pixels(scene.background, cam.width, cam.height)
    return rasterize(scene_meshes(scene), cam, scene.lights, bg)


def composite_over(foreground: np.ndarray, labels: np.ndarray,
                   background: np.ndarray) -> np.ndarray:
    """Replace background-labeled pixels with the given 8-bit backdrop."""
    if background.shape != foreground.shape:
        raise ConfigError(
            f"background shape {background.shape} != frame {foreground.shape}")
    out = foreground.copy()
    out[np.asarray(labels) == int(PartLabel.BACKGROUND)] = \
        background[np.asarray(labels) == int(PartLabel.BACKGROUND)]
    return out


# ---------------------------------------------------------------------------
# Image files
# ---------------------------------------------------------------------------

def save_image(path, rgb_u8: np.ndarray) -> None:
    """Write 8-bit RGB pixels as PNG, or PPM when the suffix asks for it."""
    path = str(path)
    if path.lower().endswith(".ppm"):
        write_ppm(path, rgb_u8)
    else:
        Image.fromarray(rgb_u8, mode="RGB").save(path, format="PNG")


def write_ppm(path, rgb_u8: np.ndarray) -> None:
    h, w = rgb_u8.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb_u8.astype(np.uint8).tobytes())


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
