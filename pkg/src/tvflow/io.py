"""Field serialization: CSV with index coordinates, and raw float64 arrays.

The raw format is little-endian float64 preceded by a 16-byte header:
magic "TVF0", then uint32 dimension and the stored array shape (second
entry zero in 1D).  Scalar fields store the full block (collar
included); index coordinates in CSV are relative to the interior block,
so collar cells carry negative or past-the-end indices.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import FaceVectorField, Grid, ScalarField, field_from_interior

MAGIC = b"TVF0"
_HEADER = struct.Struct("<4sIII")


def _index_offsets(grid: Grid):
    return tuple(-grid.collar_width for _ in grid.shape)


def write_scalar_csv(field: ScalarField, path: str | Path) -> None:
    grid = field.grid
    c = grid.collar_width
    lines = []
    if grid.dimension == 1:
        lines.append("i,value")
        for i, v in enumerate(field.values):
            lines.append(f"{i - c},{v!r}")
    else:
        lines.append("i,j,value")
        for (i, j), v in np.ndenumerate(field.values):
            lines.append(f"{i - c},{j - c},{v!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_scalar_csv(grid: Grid, path: str | Path, domain: str = "full") -> ScalarField:
    """Strict reader: the rows must cover exactly the requested cell set."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValueError(f"{path}: empty CSV")
    header = text[0].strip().split(",")
    expected = ["i", "value"] if grid.dimension == 1 else ["i", "j", "value"]
    if header != expected:
        raise ValueError(f"{path}: expected header {','.join(expected)}, got {text[0]!r}")
    shape = grid.full_shape if domain == "full" else grid.shape
    offset = grid.collar_width if domain == "full" else 0
    values = np.full(shape, np.nan)
    for lineno, line in enumerate(text[1:], start=2):
        parts = line.strip().split(",")
        if len(parts) != len(expected):
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}")
        idx = tuple(int(p) + offset for p in parts[:-1])
        try:
            values[idx] = float(parts[-1])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad row {line!r}: {exc}") from exc
    if np.any(np.isnan(values)):
        raise ValueError(f"{path}: rows do not cover the {domain} cell set of the grid")
    if domain == "full":
        return ScalarField(grid, values)
    return field_from_interior(grid, values)


def write_scalar_raw(field: ScalarField, path: str | Path) -> None:
    arr = np.ascontiguousarray(field.values, dtype="<f8")
    shape = arr.shape + (0,) * (2 - arr.ndim)
    Path(path).write_bytes(_HEADER.pack(MAGIC, arr.ndim, shape[0], shape[1]) + arr.tobytes())


def read_raw_array(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated raw file")
    magic, dim, s0, s1 = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    shape = (s0,) if dim == 1 else (s0, s1)
    count = int(np.prod(shape))
    payload = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    if payload.size != count:
        raise ValueError(f"{path}: payload holds {payload.size} values, header promises {count}")
    return payload.reshape(shape).copy()


def read_scalar_raw(grid: Grid, path: str | Path, domain: str = "full") -> ScalarField:
    arr = read_raw_array(path)
    if domain == "full":
        if arr.shape != grid.full_shape:
            raise ValueError(f"{path}: raw shape {arr.shape} does not match grid block {grid.full_shape}")
        return ScalarField(grid, arr)
    if arr.shape != grid.shape:
        raise ValueError(f"{path}: raw shape {arr.shape} does not match interior {grid.shape}")
    return field_from_interior(grid, arr)


def write_face_csv(field: FaceVectorField, path: str | Path) -> None:
    grid = field.grid
    lines = ["axis," + ("i,value" if grid.dimension == 1 else "i,j,value")]
    for axis, comp in enumerate(field.components):
        for idx, v in np.ndenumerate(comp):
            coords = ",".join(str(i) for i in idx)
            lines.append(f"{axis},{coords},{v!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_face_raw(field: FaceVectorField, path_prefix: str | Path) -> list[Path]:
    paths = []
    for axis, comp in enumerate(field.components):
        arr = np.ascontiguousarray(comp, dtype="<f8")
        shape = arr.shape + (0,) * (2 - arr.ndim)
        p = Path(f"{path_prefix}.axis{axis}.raw")
        p.write_bytes(_HEADER.pack(MAGIC, arr.ndim, shape[0], shape[1]) + arr.tobytes())
        paths.append(p)
    return paths
