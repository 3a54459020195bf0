"""Solution output: binary frame archives, PGM heatmaps, history tables.

Frame archive layout (version 1, all integers and floats little
endian, no padding):

    offset  type      content
    0       8 bytes   magic "CMOTFRM1"
    8       u32       version (1)
    12      u32       nt
    16      u32       nx
    20      u32       ny
    24      f64       dt
    32      f64       dx
    40      f64       dy
    48      u32       boundary mode (0 periodic, 1 neumann)
    52      u32       field count F
    --      repeated F times: u32 name length, then ASCII name
    --      u64       iteration count
    --      f64       final energy
    --      payload: for each field, nt*nx*ny f64 values in C order
            (time slowest, then x, then y)

Field values are stored as raw IEEE doubles, so write followed by
read reproduces every array bit for bit.  Reads validate the magic,
version, and total length; a short file is a reported error, never a
crash or a partial result.

Heatmaps are portable graymaps, binary P5 by default or ASCII P2.
Density snapshots share one normalization, the global maximum over
all time slices, so brightness is comparable across an interpolation
sequence.  Auxiliary spatial fields attached to constraints (a bound
profile, a penalty weight) are each normalized by their own maximum.
Pixel (i, j) of an image is row i = x index, column j = y index,
value round(255 * value / max).

The history table is CSV, one row per outer iteration, full repr
precision.  Raw residual columns are followed by versions scaled by
their first-iteration values.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constraints import DensityUpperBound, FixedDensityRegion, MomentumQuadraticPenalty
from .diagnostics import IterationRecord
from .grid import GridSpec, SpaceBC

__all__ = [
    "FrameArchiveError",
    "FrameArchive",
    "write_frames",
    "read_frames",
    "write_heatmaps",
    "write_history",
    "history_columns",
]

_MAGIC = b"CMOTFRM1"
_VERSION = 1
_BC_CODES = {SpaceBC.PERIODIC: 0, SpaceBC.NEUMANN: 1}
_BC_FROM_CODE = {v: k for k, v in _BC_CODES.items()}

# Residual columns that get a first-iteration-relative companion.
_REL_COLUMNS = [
    "res_Bphi_p",
    "res_b_q",
    "res_mu_nu",
    "res_mu_eta",
    "res_Bphi_q",
    "continuity_residual",
]


class FrameArchiveError(ValueError):
    """A frame archive failed to read or validate."""


@dataclass
class FrameArchive:
    """In-memory image of one archive file."""

    grid: GridSpec
    fields: dict
    iterations: int
    final_energy: float


def write_frames(solution, path) -> None:
    """Write a solution's density and momentum to a frame archive."""
    grid = solution.problem.grid
    mu = solution.mu
    fields = {"rho": mu.a, "mom_x": mu.b[0], "mom_y": mu.b[1]}
    payload = bytearray()
    payload += _MAGIC
    payload += struct.pack("<IIII", _VERSION, grid.nt, grid.nx, grid.ny)
    payload += struct.pack("<ddd", grid.dt, grid.dx, grid.dy)
    payload += struct.pack("<II", _BC_CODES[grid.space_bc], len(fields))
    for name in fields:
        encoded = name.encode("ascii")
        payload += struct.pack("<I", len(encoded)) + encoded
    payload += struct.pack("<Qd", solution.iterations, solution.final_energy)
    for name, values in fields.items():
        arr = np.ascontiguousarray(values, dtype="<f8")
        if arr.shape != grid.shape:
            raise ValueError(f"field {name} has shape {arr.shape}, expected {grid.shape}")
        payload += arr.tobytes()
    try:
        Path(path).write_bytes(bytes(payload))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from None


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameArchiveError(
                f"{self.path}: truncated archive, needed {self.pos + n} bytes, "
                f"have {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_frames(path) -> FrameArchive:
    """Read a frame archive back; inverse of write_frames, bit for bit."""
    path = str(path)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FrameArchiveError(f"{path}: {exc.strerror or exc}") from None
    rd = _Reader(data, path)
    if rd.take(len(_MAGIC)) != _MAGIC:
        raise FrameArchiveError(f"{path}: not a frame archive (bad magic)")
    (version,) = rd.unpack("<I")
    if version != _VERSION:
        raise FrameArchiveError(f"{path}: unsupported archive version {version}")
    nt, nx, ny = rd.unpack("<III")
    dt, dx, dy = rd.unpack("<ddd")
    bc_code, n_fields = rd.unpack("<II")
    if bc_code not in _BC_FROM_CODE:
        raise FrameArchiveError(f"{path}: unknown boundary code {bc_code}")
    try:
        grid = GridSpec(nt, nx, ny, _BC_FROM_CODE[bc_code])
    except ValueError as exc:
        raise FrameArchiveError(f"{path}: {exc}") from None
    for val, name in ((dt, "dt"), (dx, "dx"), (dy, "dy")):
        expected = getattr(grid, name)
        if not np.isclose(val, expected, rtol=1e-12, atol=0):
            raise FrameArchiveError(
                f"{path}: header {name}={val!r} does not match grid ({expected!r})"
            )
    names = []
    for _ in range(n_fields):
        (name_len,) = rd.unpack("<I")
        try:
            names.append(rd.take(name_len).decode("ascii"))
        except UnicodeDecodeError:
            raise FrameArchiveError(f"{path}: field name is not ASCII") from None
    iterations, final_energy = rd.unpack("<Qd")
    count = nt * nx * ny
    fields = {}
    for name in names:
        raw = rd.take(count * 8)
        fields[name] = np.frombuffer(raw, dtype="<f8").reshape(nt, nx, ny).copy()
    if rd.pos != len(data):
        raise FrameArchiveError(f"{path}: {len(data) - rd.pos} trailing bytes after payload")
    return FrameArchive(grid, fields, iterations, final_energy)


def _pgm_bytes(image: np.ndarray, fmt: str) -> bytes:
    nxp, nyp = image.shape
    # PGM dimensions are width then height; rows are x, columns are y.
    header = f"{fmt}\n{nyp} {nxp}\n255\n".encode("ascii")
    if fmt == "P5":
        return header + image.astype(np.uint8).tobytes()
    if fmt == "P2":
        body = "\n".join(" ".join(str(int(v)) for v in row) for row in image)
        return header + body.encode("ascii") + b"\n"
    raise ValueError(f"unknown graymap format {fmt!r}; expected P5 or P2")


def _quantize(values: np.ndarray, vmax: float) -> np.ndarray:
    if vmax <= 0:
        return np.zeros_like(values, dtype=np.uint8)
    scaled = np.round(255.0 * values / vmax)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def write_heatmaps(solution, out_dir, n_snapshots: int, fmt: str = "P5") -> list:
    """Write evenly spaced density snapshots plus constraint profiles.

    Snapshot k covers time index round(k*(nt-1)/(n_snapshots-1)), so
    two snapshots are exactly the endpoints.  Returns the paths
    written.
    """
    if n_snapshots < 2:
        raise ValueError(f"n_snapshots must be at least 2, got {n_snapshots}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = solution.problem.grid
    rho = solution.mu.a
    vmax = float(rho.max())
    indices = np.round(np.linspace(0, grid.nt - 1, n_snapshots)).astype(int)
    paths = []
    for idx in indices:
        target = out_dir / f"density_{idx:04d}.pgm"
        target.write_bytes(_pgm_bytes(_quantize(rho[idx], vmax), fmt))
        paths.append(target)
    for name, values in _aux_fields(solution.problem.constraint):
        # Bound profiles may hold +inf where no cap applies; scale by the
        # finite maximum and render unbounded entries at full brightness.
        finite = np.isfinite(values)
        aux_max = float(values[finite].max()) if finite.any() else 0.0
        clean = np.where(finite, values, aux_max)
        target = out_dir / f"{name}.pgm"
        target.write_bytes(_pgm_bytes(_quantize(clean, aux_max), fmt))
        paths.append(target)
    return paths


def _aux_fields(constraint):
    for term in constraint.terms:
        if isinstance(term, DensityUpperBound):
            yield "rho_bar", term.rho_bar
        elif isinstance(term, MomentumQuadraticPenalty):
            yield "psi", term.psi
        elif isinstance(term, FixedDensityRegion):
            yield "rho_fixed", np.where(term.mask, term.rho_fixed, 0.0)


def history_columns() -> list[str]:
    """CSV column order: raw record fields, then scaled residuals."""
    return IterationRecord.field_names() + [f"rel_{c}" for c in _REL_COLUMNS]


def write_history(history, path) -> None:
    """Write one CSV row per outer iteration, full repr precision."""
    names = IterationRecord.field_names()
    first = history[0] if history else None
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(history_columns())
            for rec in history:
                row = [getattr(rec, n) for n in names]
                for col in _REL_COLUMNS:
                    base = getattr(first, col)
                    value = getattr(rec, col)
                    row.append(value / base if base > 0 else 0.0)
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from None
