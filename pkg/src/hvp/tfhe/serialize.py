"""Binary container format shared by every artifact.

Layout (all integers little-endian)::

    magic      4 bytes   b"HVP1"
    tag        u8        object type (see TAGS)
    name_len   u16
    name       UTF-8     parameter-set name
    count      u16       number of sections
    section*   dtype u8 | ndim u8 | dims u32[ndim] | raw little-endian data

Higher layers store geometry and scalars as small integer sections, so one
reader handles every file type.
"""

from __future__ import annotations

import io
import os
import struct
import tempfile

import numpy as np

from .ciphertext import BootstrappingKey, SecretKey, TlweCiphertext, TrgswCiphertext, TrlweCiphertext
from .params import get_params

MAGIC = b"HVP1"

TAGS = {
    "secret_key": 1,
    "bootstrapping_key": 2,
    "tlwe": 3,
    "trlwe": 4,
    "trgsw": 5,
    "ram": 16,
    "rom": 17,
    "request": 32,
    "result": 33,
    "rom_image": 48,
}
TAG_NAMES = {v: k for k, v in TAGS.items()}

_DTYPES = {1: np.uint8, 2: np.uint16, 3: np.uint32, 4: np.uint64, 5: np.int64, 6: np.float64}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


class FormatError(ValueError):
    pass


def encode(tag: str, params_name: str, sections: list[np.ndarray]) -> bytes:
    buf = io.BytesIO()
    name = params_name.encode()
    buf.write(MAGIC + struct.pack("<BH", TAGS[tag], len(name)) + name)
    buf.write(struct.pack("<H", len(sections)))
    for arr in sections:
        arr = np.asarray(arr)
        code = _CODES.get(arr.dtype)
        if code is None:
            raise TypeError(f"unsupported dtype {arr.dtype}")
        buf.write(struct.pack("<BB", code, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())
    return buf.getvalue()


def decode(blob: bytes, expect: str | None = None) -> tuple[str, str, list[np.ndarray]]:
    """Return (tag, params_name, sections); raises FormatError on any damage."""
    mv = memoryview(blob)
    if len(mv) < 7 or bytes(mv[:4]) != MAGIC:
        raise FormatError("not an HVP1 file (bad magic)")
    tag_code, nlen = struct.unpack_from("<BH", mv, 4)
    tag = TAG_NAMES.get(tag_code)
    if tag is None:
        raise FormatError(f"unknown object tag {tag_code}")
    if expect is not None and tag != expect:
        raise FormatError(f"expected a {expect} file, got {tag}")
    pos = 7
    try:
        name = bytes(mv[pos : pos + nlen]).decode()
        pos += nlen
        (count,) = struct.unpack_from("<H", mv, pos)
        pos += 2
        sections = []
        for _ in range(count):
            code, ndim = struct.unpack_from("<BB", mv, pos)
            pos += 2
            dims = struct.unpack_from(f"<{ndim}I", mv, pos)
            pos += 4 * ndim
            dt = np.dtype(_DTYPES[code]).newbyteorder("<")
            size = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
            if pos + size > len(mv):
                raise FormatError("truncated file")
            arr = np.frombuffer(mv[pos : pos + size], dtype=dt).reshape(dims)
            sections.append(arr.astype(dt.newbyteorder("="), copy=False))
            pos += size
    except (struct.error, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"corrupt {tag} file: {exc}") from None
    if pos != len(mv):
        raise FormatError("trailing bytes after last section")
    return tag, name, sections


def atomic_write(path, data: bytes) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_file(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


# -- typed wrappers ---------------------------------------------------------


def dumps(obj) -> bytes:
    if isinstance(obj, SecretKey):
        return encode("secret_key", obj.params.name, [obj.lv0, obj.lv1, obj.lv2])
    if isinstance(obj, BootstrappingKey):
        return encode("bootstrapping_key", obj.params.name, [obj.bk, obj.ksk, obj.bk2, obj.privksk])
    if isinstance(obj, TlweCiphertext):
        return encode("tlwe", obj.params_name, [np.array([obj.level], np.uint8), obj.data])
    if isinstance(obj, TrlweCiphertext):
        return encode("trlwe", obj.params_name, [np.array([obj.level], np.uint8), obj.data])
    if isinstance(obj, TrgswCiphertext):
        meta = np.array([obj.level, obj.basebit], np.uint8)
        return encode("trgsw", obj.params_name, [meta, obj.data])
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _params(name: str):
    try:
        return get_params(name)
    except KeyError as exc:
        raise FormatError(str(exc)) from None


def loads(blob: bytes, expect: str | None = None):
    tag, name, s = decode(blob, expect)
    try:
        if tag == "secret_key":
            return SecretKey(_params(name), *s)
        if tag == "bootstrapping_key":
            return BootstrappingKey(_params(name), *s)
        if tag == "tlwe":
            _params(name)
            return TlweCiphertext(s[1], int(s[0][0]), name)
        if tag == "trlwe":
            _params(name)
            return TrlweCiphertext(s[1], int(s[0][0]), name)
        if tag == "trgsw":
            _params(name)
            return TrgswCiphertext(s[1], int(s[0][0]), name, int(s[0][1]))
    except (TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed {tag} payload: {exc}") from None
    raise FormatError(f"{tag} is not a core TFHE object")


def save(obj, path) -> None:
    atomic_write(path, dumps(obj))


def load(path, expect: str | None = None):
    return loads(read_file(path), expect)
