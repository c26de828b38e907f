"""Minimal Wavefront OBJ subset: v / vn / f records, ASCII, '#' comments.

Faces accept the v, v//vn and v/vt/vn reference forms; quads and larger
polygons are fan-triangulated as (1,2,3), (1,3,4), ...
"""

from __future__ import annotations

import io

import numpy as np

from .errors import MeshIndexError, MeshParseError
from .geometry import PartLabel, TriangleMesh


def parse_mesh_file(source, part_label: PartLabel = PartLabel.HAND,
                    base_color=(0.78, 0.78, 0.80)) -> TriangleMesh:
    """Parse an OBJ-subset character stream (str, file object, or path str).

    Missing normals are computed per face and averaged onto vertices.
    """
    if isinstance(source, str) and "\n" not in source and source.endswith(".obj"):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()

    vertices: list[tuple] = []
    file_normals: list[tuple] = []
    faces: list[list[tuple]] = []  # list of [(v_idx, vn_idx or None), ...]

    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        tag = fields[0]
        if tag == "v":
            if len(fields) < 4:
                raise MeshParseError(lineno, f"vertex needs 3 coordinates: {line!r}")
            try:
                vertices.append(tuple(float(x) for x in fields[1:4]))
            except ValueError:
                raise MeshParseError(lineno, f"bad vertex coordinate: {line!r}")
        elif tag == "vn":
            if len(fields) < 4:
                raise MeshParseError(lineno, f"normal needs 3 components: {line!r}")
            try:
                file_normals.append(tuple(float(x) for x in fields[1:4]))
            except ValueError:
                raise MeshParseError(lineno, f"bad normal component: {line!r}")
        elif tag == "f":
            if len(fields) < 4:
                raise MeshParseError(lineno, f"face needs at least 3 vertices: {line!r}")
            refs = []
            for ref in fields[1:]:
                parts = ref.split("/")
                try:
                    vi = int(parts[0])
                    ni = None
                    if len(parts) == 3 and parts[2]:
                        ni = int(parts[2])
                    elif len(parts) == 2 and parts[1]:
                        ni = None  # v/vt form carries no normal
                except ValueError:
                    raise MeshParseError(lineno, f"bad face reference {ref!r}")
                if not (1 <= vi <= len(vertices)):
                    raise MeshIndexError(lineno, f"vertex index {vi} out of range")
                if ni is not None and not (1 <= ni <= len(file_normals)):
                    raise MeshIndexError(lineno, f"normal index {ni} out of range")
                refs.append((vi - 1, None if ni is None else ni - 1))
            faces.append(refs)
        else:
            # unsupported records (vt, o, g, s, usemtl...) are ignored
            continue

    if not vertices:
        raise MeshParseError(0, "no vertices in file")
    if not faces:
        raise MeshParseError(0, "no faces in file")

    tris = []
    tri_normal_refs = []
    for refs in faces:
        for k in range(1, len(refs) - 1):
            tris.append((refs[0][0], refs[k][0], refs[k + 1][0]))
            tri_normal_refs.append((refs[0][1], refs[k][1], refs[k + 1][1]))

    verts = np.asarray(vertices, dtype=np.float64)
    tri_arr = np.asarray(tris, dtype=np.int32)

    normals = np.zeros_like(verts)
    have_normal = np.zeros(len(verts), dtype=bool)
    for tri, nrefs in zip(tri_arr, tri_normal_refs):
        for v_idx, n_idx in zip(tri, nrefs):
            if n_idx is not None:
                normals[v_idx] = file_normals[n_idx]
                have_normal[v_idx] = True
    # vertices without a referenced normal: accumulate face normals
    if not have_normal.all():
        fn = np.cross(verts[tri_arr[:, 1]] - verts[tri_arr[:, 0]],
                      verts[tri_arr[:, 2]] - verts[tri_arr[:, 0]])
        for tri, n in zip(tri_arr, fn):
            for v_idx in tri:
                if not have_normal[v_idx]:
                    normals[v_idx] += n
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.where(length > 0, normals / np.where(length > 0, length, 1.0),
                       np.array([0.0, 0.0, 1.0]))

    return TriangleMesh(verts, normals, tri_arr, part_label, base_color)


def serialize_mesh(mesh: TriangleMesh) -> str:
    """Write a mesh back to OBJ text (v, vn, f v//vn records)."""
    out = ["# handforge mesh"]
    for v in mesh.vertices:
        # repr of a Python float round-trips float64 exactly
        out.append("v " + " ".join(repr(float(x)) for x in v))
    for n in mesh.normals:
        out.append("vn " + " ".join(repr(float(x)) for x in n))
    for t in mesh.triangles:
        out.append("f " + " ".join(f"{i + 1}//{i + 1}" for i in t))
    return "\n".join(out) + "\n"
