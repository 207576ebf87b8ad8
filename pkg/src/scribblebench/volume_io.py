"""Reading and writing 3D label volumes as single-file NIfTI-1.

The codec is deliberately small: it understands the 348-byte header, the
``n+1`` single-file magic, optional gzip compression and byte-swapped files.
Orientation fields (qform/sform) are carried through verbatim so that a
scribble volume written next to its reference overlays it voxel-for-voxel.
"""
from __future__ import annotations

import gzip
import io
import re
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

HEADER_SIZE = 348
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"
VOX_OFFSET = 352

# NIfTI-1 header layout, little-endian variant; the byte order prefix is
# swapped for big-endian files.
_HEADER_FIELDS = [
    ("sizeof_hdr", "i"),
    ("data_type", "10s"),
    ("db_name", "18s"),
    ("extents", "i"),
    ("session_error", "h"),
    ("regular", "c"),
    ("dim_info", "B"),
    ("dim", "8h"),
    ("intent_p1", "f"),
    ("intent_p2", "f"),
    ("intent_p3", "f"),
    ("intent_code", "h"),
    ("datatype", "h"),
    ("bitpix", "h"),
    ("slice_start", "h"),
    ("pixdim", "8f"),
    ("vox_offset", "f"),
    ("scl_slope", "f"),
    ("scl_inter", "f"),
    ("slice_end", "h"),
    ("slice_code", "B"),
    ("xyzt_units", "B"),
    ("cal_max", "f"),
    ("cal_min", "f"),
    ("slice_duration", "f"),
    ("toffset", "f"),
    ("glmax", "i"),
    ("glmin", "i"),
    ("descrip", "80s"),
    ("aux_file", "24s"),
    ("qform_code", "h"),
    ("sform_code", "h"),
    ("quatern_b", "f"),
    ("quatern_c", "f"),
    ("quatern_d", "f"),
    ("qoffset_x", "f"),
    ("qoffset_y", "f"),
    ("qoffset_z", "f"),
    ("srow_x", "4f"),
    ("srow_y", "4f"),
    ("srow_z", "4f"),
    ("intent_name", "16s"),
    ("magic", "4s"),
]
_HEADER_FORMAT = "".join(fmt for _, fmt in _HEADER_FIELDS)
assert struct.calcsize("<" + _HEADER_FORMAT) == HEADER_SIZE

# datatype code -> numpy dtype (without byte order)
DATATYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    256: np.dtype(np.int8),
    512: np.dtype(np.uint16),
    768: np.dtype(np.uint32),
    1024: np.dtype(np.int64),
    1280: np.dtype(np.uint64),
}
_UNSIGNED_CODES = [(2, 0xFF), (512, 0xFFFF), (768, 0xFFFFFFFF)]

FLOAT_LABEL_TOLERANCE = 1e-3
_IGNORE_TAG = re.compile(rb"ignore_label=(\d+)")


class NiftiError(ValueError):
    """Raised for malformed or unsupported NIfTI files."""


def default_ignore_label(n_classes: int) -> int:
    """255 while the classes fit below it, 65535 otherwise."""
    return 255 if n_classes <= 255 else 65535


@dataclass(frozen=True)
class Orientation:
    """qform/sform fields kept verbatim from (or destined for) a header."""

    qform_code: int = 0
    sform_code: int = 1
    quatern: tuple[float, float, float] = (0.0, 0.0, 0.0)
    qoffset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    qfac: float = 1.0
    xyzt_units: int = 2  # millimetres


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Dense or sparse 3D label grid with its voxel geometry.

    ``data`` is indexed ``[i, j, k]`` along the three NIfTI axes and is made
    read-only on construction.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray | None = None
    ignore_label: int | None = None
    orientation: Orientation = field(default_factory=Orientation)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"label data must be a non-empty 3D grid, got shape {data.shape}")
        if not np.issubdtype(data.dtype, np.integer):
            raise ValueError(f"label data must be integer typed, got {data.dtype}")
        if data.size and data.min() < 0:
            raise ValueError("labels must be non-negative")
        data = np.array(data, copy=True)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or min(spacing) <= 0:
            raise ValueError(f"spacing must be three positive values, got {self.spacing}")
        object.__setattr__(self, "spacing", spacing)

        if self.affine is None:
            affine = np.diag([*spacing, 1.0])
        else:
            affine = np.array(self.affine, dtype=np.float64)
            if affine.shape != (4, 4):
                raise ValueError("affine must be 4x4")
        affine.setflags(write=False)
        object.__setattr__(self, "affine", affine)

        if self.ignore_label is None:
            top = int(data.max()) if data.size else 0
            object.__setattr__(self, "ignore_label", default_ignore_label(top + 1))
        else:
            object.__setattr__(self, "ignore_label", int(self.ignore_label))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape)

    def class_ids(self) -> list[int]:
        """Sorted class ids present in the grid, excluding the ignore label."""
        present = np.unique(self.data)
        return [int(c) for c in present if c != self.ignore_label]

    def with_data(self, data: np.ndarray) -> "LabelVolume":
        """A volume on the same grid carrying different labels."""
        return replace(self, data=data)

    def same_grid(self, other: "LabelVolume", atol: float = 1e-6) -> bool:
        return (
            self.dims == other.dims
            and np.allclose(self.spacing, other.spacing, atol=atol)
            and np.allclose(self.affine, other.affine, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class LabelSlice:
    """One plane of a volume with the axis/index it was cut from."""

    data: np.ndarray
    axis: int
    index: int

    @property
    def extents(self) -> tuple[int, int]:
        return tuple(int(d) for d in self.data.shape)


def slice_extract(volume: LabelVolume, axis: int, index: int) -> LabelSlice:
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    if not 0 <= index < volume.dims[axis]:
        raise IndexError(f"slice index {index} out of range for axis {axis} with extent {volume.dims[axis]}")
    plane = np.take(volume.data, index, axis=axis).copy()
    return LabelSlice(plane, axis, index)


def slice_insert(data: np.ndarray, sl: LabelSlice) -> None:
    """Write a slice back into a mutable 3D array (inverse of slice_extract)."""
    index = [slice(None)] * 3
    index[sl.axis] = sl.index
    data[tuple(index)] = sl.data


def _quaternion_affine(hdr: dict, pixdim) -> np.ndarray:
    b, c, d = hdr["quatern_b"], hdr["quatern_c"], hdr["quatern_d"]
    a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ]
    )
    qfac = -1.0 if pixdim[0] < 0 else 1.0
    zooms = np.array([pixdim[1], pixdim[2], pixdim[3] * qfac])
    affine = np.eye(4)
    affine[:3, :3] = rot * zooms
    affine[:3, 3] = [hdr["qoffset_x"], hdr["qoffset_y"], hdr["qoffset_z"]]
    return affine


def _unpack_header(raw: bytes) -> tuple[dict, str]:
    if len(raw) < HEADER_SIZE:
        raise NiftiError(f"truncated header: {len(raw)} bytes")
    for order in "<>":
        (sizeof_hdr,) = struct.unpack(order + "i", raw[:4])
        if sizeof_hdr == HEADER_SIZE:
            break
    else:
        raise NiftiError("sizeof_hdr is not 348 in either byte order")
    values = struct.unpack(order + _HEADER_FORMAT, raw[:HEADER_SIZE])
    hdr: dict = {}
    pos = 0
    for name, fmt in _HEADER_FIELDS:
        count = int(fmt[:-1]) if fmt[:-1].isdigit() and not fmt.endswith("s") else 1
        if count > 1:
            hdr[name] = values[pos : pos + count]
        else:
            hdr[name] = values[pos]
        pos += count
    # dim[0] is the documented byte-order probe
    if not 1 <= hdr["dim"][0] <= 7:
        raise NiftiError(f"invalid dim[0]={hdr['dim'][0]}")
    return hdr, order


def _open_bytes(path: Path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise NiftiError(f"corrupt gzip stream in {path}: {exc}") from exc
    return raw


def read_nifti(path, ignore_label: int | None = None) -> LabelVolume:
    """Read a single-file NIfTI-1 label volume.

    Float-typed files are accepted when every value lies within 1e-3 of a
    whole number; anything else looks like a probability map and is refused.
    """
    path = Path(path)
    raw = _open_bytes(path)
    hdr, order = _unpack_header(raw)
    magic = hdr["magic"]
    if magic == MAGIC_PAIR:
        raise NiftiError("two-file (.hdr/.img) NIfTI is not supported")
    if magic != MAGIC_SINGLE:
        raise NiftiError(f"bad magic {magic!r}")
    code = hdr["datatype"]
    if code not in DATATYPES:
        raise NiftiError(f"unsupported datatype code {code}")
    dtype = DATATYPES[code].newbyteorder(order)

    ndim = hdr["dim"][0]
    shape = [max(1, int(d)) for d in hdr["dim"][1 : ndim + 1]]
    if len(shape) > 3:
        if any(d != 1 for d in shape[3:]):
            raise NiftiError(f"expected a 3D label volume, got dims {shape}")
        shape = shape[:3]
    shape += [1] * (3 - len(shape))

    offset = int(hdr["vox_offset"])
    nbytes = int(np.prod(shape)) * dtype.itemsize
    payload = raw[offset : offset + nbytes]
    if offset < HEADER_SIZE or len(payload) < nbytes:
        raise NiftiError(f"truncated payload: expected {nbytes} bytes at offset {offset}, found {len(payload)}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape, order="F")

    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    # slope 0 means "no scaling" per the standard
    if np.isfinite(slope) and slope != 0.0 and (slope != 1.0 or (np.isfinite(inter) and inter != 0.0)):
        arr = arr.astype(np.float64) * slope + inter

    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)):
            raise NiftiError("non-finite values in label volume")
        rounded = np.rint(arr)
        if np.any(np.abs(arr - rounded) > FLOAT_LABEL_TOLERANCE):
            raise NiftiError("float values are not whole-number labels (probability map?)")
        arr = rounded
    if arr.size and arr.min() < 0:
        raise NiftiError("negative label values")
    top = int(arr.max()) if arr.size else 0
    out_dtype = np.uint8 if top <= 0xFF else np.uint16 if top <= 0xFFFF else np.uint32 if top <= 0xFFFFFFFF else np.uint64
    data = np.ascontiguousarray(arr.astype(out_dtype))

    pixdim = hdr["pixdim"]
    spacing = tuple(abs(float(p)) if p != 0 else 1.0 for p in pixdim[1:4])
    if hdr["sform_code"] > 0:
        affine = np.eye(4)
        affine[0], affine[1], affine[2] = hdr["srow_x"], hdr["srow_y"], hdr["srow_z"]
    elif hdr["qform_code"] > 0:
        affine = _quaternion_affine(hdr, pixdim)
    else:
        affine = np.diag([*spacing, 1.0])

    if ignore_label is None:
        match = _IGNORE_TAG.search(hdr["descrip"])
        if match:
            ignore_label = int(match.group(1))

    orientation = Orientation(
        qform_code=int(hdr["qform_code"]),
        sform_code=int(hdr["sform_code"]),
        quatern=(hdr["quatern_b"], hdr["quatern_c"], hdr["quatern_d"]),
        qoffset=(hdr["qoffset_x"], hdr["qoffset_y"], hdr["qoffset_z"]),
        qfac=-1.0 if pixdim[0] < 0 else 1.0,
        xyzt_units=int(hdr["xyzt_units"]),
    )
    return LabelVolume(data, spacing, affine, ignore_label, orientation)


def storage_datatype(volume: LabelVolume) -> int:
    """Smallest unsigned NIfTI datatype code holding every label and the ignore label."""
    top = max(int(volume.data.max()) if volume.data.size else 0, volume.ignore_label)
    for code, limit in _UNSIGNED_CODES:
        if top <= limit:
            return code
    raise NiftiError(f"label {top} exceeds the 32-bit unsigned range")


def encode_nifti(volume: LabelVolume) -> bytes:
    """Serialize to the uncompressed single-file byte stream."""
    code = storage_datatype(volume)
    dtype = DATATYPES[code].newbyteorder("<")
    orient = volume.orientation
    dims = volume.dims
    affine = np.asarray(volume.affine, dtype=np.float64)
    descrip = f"scribblebench ignore_label={volume.ignore_label}".encode()
    hdr = {
        "sizeof_hdr": HEADER_SIZE,
        "data_type": b"",
        "db_name": b"",
        "extents": 0,
        "session_error": 0,
        "regular": b"r",
        "dim_info": 0,
        "dim": (3, *dims, 1, 1, 1, 1),
        "intent_p1": 0.0,
        "intent_p2": 0.0,
        "intent_p3": 0.0,
        "intent_code": 0,
        "datatype": code,
        "bitpix": dtype.itemsize * 8,
        "slice_start": 0,
        "pixdim": (orient.qfac, *volume.spacing, 1.0, 1.0, 1.0, 1.0),
        "vox_offset": float(VOX_OFFSET),
        "scl_slope": 1.0,
        "scl_inter": 0.0,
        "slice_end": 0,
        "slice_code": 0,
        "xyzt_units": orient.xyzt_units,
        "cal_max": 0.0,
        "cal_min": 0.0,
        "slice_duration": 0.0,
        "toffset": 0.0,
        "glmax": 0,
        "glmin": 0,
        "descrip": descrip,
        "aux_file": b"",
        "qform_code": orient.qform_code,
        "sform_code": orient.sform_code,
        "quatern_b": orient.quatern[0],
        "quatern_c": orient.quatern[1],
        "quatern_d": orient.quatern[2],
        "qoffset_x": orient.qoffset[0],
        "qoffset_y": orient.qoffset[1],
        "qoffset_z": orient.qoffset[2],
        "srow_x": tuple(affine[0]),
        "srow_y": tuple(affine[1]),
        "srow_z": tuple(affine[2]),
        "intent_name": b"",
        "magic": MAGIC_SINGLE,
    }
    values = []
    for name, _ in _HEADER_FIELDS:
        value = hdr[name]
        values.extend(value if isinstance(value, tuple) else (value,))
    buf = io.BytesIO()
    buf.write(struct.pack("<" + _HEADER_FORMAT, *values))
    buf.write(b"\x00\x00\x00\x00")  # no extensions
    buf.write(np.asarray(volume.data).astype(dtype).tobytes(order="F"))
    return buf.getvalue()


def write_nifti(volume: LabelVolume, path) -> None:
    """Write ``volume`` to ``path``; a ``.gz`` suffix selects gzip.

    The gzip stream carries no timestamp or name so output is byte-stable.
    """
    path = Path(path)
    payload = encode_nifti(volume)
    if path.name.endswith(".gz"):
        with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            gz.write(payload)
    else:
        with open(path, "wb") as fh:
            fh.write(payload)
