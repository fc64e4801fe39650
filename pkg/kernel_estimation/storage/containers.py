"""
Binary containers for tensors (MANT) and named tensor collections (MANC).

MANT: magic "MANT", version u32, dtype u8 (0 = f32, 1 = f64), ndim u8,
ndim extents as u32, then the row-major little-endian payload.
MANC: magic "MANC", version u32, count u32, then per record a u16 name
length, the UTF-8 name and an embedded MANT container.
"""

import io
import struct
from pathlib import Path
from typing import BinaryIO, Dict, Union

import numpy as np

from kernel_estimation.utils.errors import FormatError, InvalidArgumentError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

TENSOR_MAGIC = b"MANT"
CHECKPOINT_MAGIC = b"MANC"
FORMAT_VERSION = 1

_ITEMSIZE_CODES = {4: 0, 8: 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}

PathLike = Union[str, Path]


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise FormatError(f"truncated container while reading {what}",
                          details={"expected": size, "got": len(data)})
    return data


def encode_tensor(array: np.ndarray) -> bytes:
    """Serialize one array into MANT bytes."""
    values = np.asarray(array)
    if values.dtype.kind != "f" or values.dtype.itemsize not in _ITEMSIZE_CODES:
        raise InvalidArgumentError("only float32 and float64 tensors can be stored", argument="array",
                                   details={"dtype": str(values.dtype)})
    if values.ndim > 255:
        raise InvalidArgumentError("too many dimensions", argument="array")
    code = _ITEMSIZE_CODES[values.dtype.itemsize]
    dtype = _CODE_DTYPES[code]
    header = TENSOR_MAGIC + struct.pack("<IBB", FORMAT_VERSION, code, values.ndim)
    header += struct.pack(f"<{values.ndim}I", *values.shape)
    payload = np.ascontiguousarray(values, dtype=dtype).tobytes(order="C")
    return header + payload


def decode_tensor(stream: BinaryIO) -> np.ndarray:
    """Read one MANT container from ``stream``."""
    magic = _read_exact(stream, 4, "magic")
    if magic != TENSOR_MAGIC:
        raise FormatError("bad tensor magic", details={"magic": magic.hex()})
    version, code, ndim = struct.unpack("<IBB", _read_exact(stream, 6, "header"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported tensor version {version}")
    if code not in _CODE_DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    shape = struct.unpack(f"<{ndim}I", _read_exact(stream, 4 * ndim, "extents")) if ndim else ()
    dtype = _CODE_DTYPES[code]
    count = int(np.prod(shape)) if shape else 1
    payload = _read_exact(stream, count * dtype.itemsize, "payload")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))


def write_tensor(path: PathLike, array: np.ndarray) -> Path:
    """Write ``array`` as a MANT file."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(encode_tensor(array))
    logger.debug("tensor written", path=str(target), shape=list(np.shape(array)))
    return target


def read_tensor(path: PathLike) -> np.ndarray:
    """Read a MANT file; trailing bytes are a format error."""
    source = Path(path)
    if not source.is_file():
        raise FormatError("tensor file not found", path=str(source))
    stream = io.BytesIO(source.read_bytes())
    try:
        array = decode_tensor(stream)
    except FormatError as exc:
        exc.details.setdefault("path", str(source))
        raise
    if stream.read(1):
        raise FormatError("trailing bytes after tensor payload", path=str(source))
    return array


def write_checkpoint(path: PathLike, entries: Dict[str, np.ndarray]) -> Path:
    """
    Write an ordered name → array mapping as a MANC file.

    Args:
        path: Output file
        entries: Arrays keyed by name (insertion order is preserved)

    Returns:
        The written path
    """
    buffer = io.BytesIO()
    buffer.write(CHECKPOINT_MAGIC)
    buffer.write(struct.pack("<II", FORMAT_VERSION, len(entries)))
    for name, array in entries.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise InvalidArgumentError("entry name too long", argument="name")
        buffer.write(struct.pack("<H", len(encoded)))
        buffer.write(encoded)
        buffer.write(encode_tensor(array))

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(target.suffix + ".tmp")
    tmp.write_bytes(buffer.getvalue())
    tmp.replace(target)
    return target


def read_checkpoint(path: PathLike) -> Dict[str, np.ndarray]:
    """Read a MANC file into an ordered dict."""
    source = Path(path)
    if not source.is_file():
        raise FormatError("checkpoint not found", path=str(source))
    stream = io.BytesIO(source.read_bytes())
    try:
        if _read_exact(stream, 4, "magic") != CHECKPOINT_MAGIC:
            raise FormatError("bad checkpoint magic")
        version, count = struct.unpack("<II", _read_exact(stream, 8, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        entries: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (length,) = struct.unpack("<H", _read_exact(stream, 2, "name length"))
            name = _read_exact(stream, length, "name").decode("utf-8")
            entries[name] = decode_tensor(stream)
    except FormatError as exc:
        exc.details.setdefault("path", str(source))
        raise
    except UnicodeDecodeError as exc:
        raise FormatError("entry name is not UTF-8", path=str(source)) from exc
    if stream.read(1):
        raise FormatError("trailing bytes after checkpoint", path=str(source))
    return entries
