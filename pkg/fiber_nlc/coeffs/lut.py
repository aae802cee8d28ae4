"""Binary LUT files for coefficient tables.

Layout (little-endian):

    magic      8 bytes   b"FNLCLUT\\0"
    version    uint16
    params     uint32 length + UTF-8 JSON
    count      uint32
    records    count x (m int16, n int16, k int16, re float64, im float64)
    crc32      uint32 over every preceding byte
"""

import json
import struct
import zlib
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from fiber_nlc.coeffs.tables import CoeffTable, GroupKey
from fiber_nlc.coeffs.types import CoeffIndex, CoeffOrder
from fiber_nlc.core.errors import ChecksumError, TableFormatError

MAGIC = b"FNLCLUT\0"
VERSION = 1
RECORD_DTYPE = np.dtype([("m", "<i2"), ("n", "<i2"), ("k", "<i2"), ("re", "<f8"), ("im", "<f8")])
INDEX_LIMIT = np.iinfo(np.int16).max

_HEADER = struct.Struct("<8sH")
_U32 = struct.Struct("<I")


def _params(table: CoeffTable) -> Dict[str, Any]:
    params = dict(table.metadata)
    params.update(
        {
            "order": table.order.value,
            "window": table.window,
            "mu_db": table.mu_db,
            "reference": [table.reference.real, table.reference.imag],
            "quantized": table.quantized,
            "quant_scale": table.quant_scale,
            "dropped_zero": table.dropped_zero,
        }
    )
    return params


def encode_table(table: CoeffTable) -> bytes:
    """Serialize a table to the LUT byte layout."""
    indices, values = table.arrays()
    if indices.size and np.abs(indices).max() > INDEX_LIMIT:
        raise TableFormatError(f"Index magnitude exceeds {INDEX_LIMIT}")
    records = np.zeros(len(values), dtype=RECORD_DTYPE)
    records["m"], records["n"], records["k"] = indices.T
    records["re"] = values.real
    records["im"] = values.imag

    params = json.dumps(_params(table), sort_keys=True).encode("utf-8")
    body = b"".join(
        [
            _HEADER.pack(MAGIC, VERSION),
            _U32.pack(len(params)),
            params,
            _U32.pack(len(records)),
            records.tobytes(),
        ]
    )
    return body + _U32.pack(zlib.crc32(body) & 0xFFFFFFFF)


def decode_table(data: bytes) -> CoeffTable:
    """Parse the LUT byte layout.

    Raises:
        TableFormatError: On a bad magic, unknown version or malformed content
        ChecksumError: On a CRC mismatch or truncated content
    """
    if len(data) >= len(MAGIC) and data[: len(MAGIC)] != MAGIC:
        raise TableFormatError("Not a coefficient LUT file (bad magic)")
    if len(data) < _HEADER.size + 3 * _U32.size:
        raise ChecksumError(f"LUT file truncated at {len(data)} bytes")
    body, stored = data[:-4], _U32.unpack(data[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise ChecksumError("LUT checksum mismatch", details={"stored": stored})

    _, version = _HEADER.unpack_from(body, 0)
    if version != VERSION:
        raise TableFormatError(f"Unsupported LUT version {version}, expected {VERSION}")
    offset = _HEADER.size
    try:
        (params_len,) = _U32.unpack_from(body, offset)
        offset += _U32.size
        params = json.loads(body[offset : offset + params_len].decode("utf-8"))
        offset += params_len
        (count,) = _U32.unpack_from(body, offset)
        offset += _U32.size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise TableFormatError(f"Malformed LUT parameter block: {e}") from e
    if len(body) - offset != count * RECORD_DTYPE.itemsize:
        raise TableFormatError(
            f"LUT holds {len(body) - offset} record bytes, expected {count * RECORD_DTYPE.itemsize}"
        )
    records = np.frombuffer(body, dtype=RECORD_DTYPE, count=count, offset=offset)

    try:
        order = CoeffOrder(params.pop("order"))
        window = int(params.pop("window"))
        mu_db = float(params.pop("mu_db"))
        reference = complex(*params.pop("reference"))
        quantized = bool(params.pop("quantized"))
        quant_scale = float(params.pop("quant_scale"))
        dropped_zero = int(params.pop("dropped_zero"))
    except (KeyError, TypeError, ValueError) as e:
        raise TableFormatError(f"Incomplete LUT parameter block: {e}") from e

    entries: Dict[CoeffIndex, complex] = {}
    groups: Dict[GroupKey, List[CoeffIndex]] = {}
    for m, n, k, re, im in records.tolist():
        idx = CoeffIndex(m, n, k)
        entries[idx] = complex(re, im)
        if quantized:
            key = (int(round(re / quant_scale)), int(round(im / quant_scale)))
            groups.setdefault(key, []).append(idx)

    return CoeffTable(
        order=order,
        entries=entries,
        window=window,
        mu_db=mu_db,
        reference=reference,
        quantized=quantized,
        quant_scale=quant_scale,
        groups=groups if quantized else None,
        dropped_zero=dropped_zero,
        metadata=params,
    )


def save_table(table: CoeffTable, path: Union[str, Path]) -> Path:
    """Write a table to ``path`` and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_table(table))
    return path


def load_table(path: Union[str, Path]) -> CoeffTable:
    """Read a table written by :func:`save_table`."""
    return decode_table(Path(path).read_bytes())


def table_filename(order: CoeffOrder, n_spans: int) -> str:
    """File name of a table in a tables directory, e.g. ``so-term1-35spans.lut``."""
    return f"{CoeffOrder(order).value}-{int(n_spans)}spans.lut"
