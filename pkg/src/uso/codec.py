"""Canonical binary encoding and its JSON mirror.

Wire rules:

* every object starts with a 1-byte type tag, followed by its fields in
  declaration order;
* variable-length octet strings and text carry a 4-byte big-endian length;
* integers are unsigned 64-bit big-endian, enums and booleans one byte;
* digests are raw 32 bytes (fixed width, no prefix);
* optional fields carry a 1-byte presence flag, sequences a 4-byte count.

Decoding is strict (no trailing bytes, flags must be 0/1, text must be valid
UTF-8), so each value has exactly one accepted encoding.

Classes opt in with the :func:`canonical` decorator; field types are read
from the dataclass annotations.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import struct
import types
import typing

from .errors import MalformedEncoding

FILE_MAGIC = b"USO"
FILE_VERSION = 1

_BY_TAG: dict[int, type] = {}
_TAG_OF: dict[type, int] = {}
_BY_NAME: dict[str, type] = {}


def canonical(tag: int):
    """Register a frozen dataclass under a 1-byte type tag."""

    def deco(cls):
        if tag in _BY_TAG:
            raise ValueError(f"tag 0x{tag:02x} already used by {_BY_TAG[tag].__name__}")
        _BY_TAG[tag] = cls
        _TAG_OF[cls] = tag
        _BY_NAME[cls.__name__] = cls
        return cls

    return deco


def tag_of(cls) -> int:
    return _TAG_OF[cls]


def registered_types() -> dict[int, type]:
    return dict(_BY_TAG)


class Writer:
    __slots__ = ("buf",)

    def __init__(self):
        self.buf = bytearray()

    def u8(self, v: int):
        self.buf.append(v)

    def u32(self, v: int):
        self.buf += struct.pack(">I", v)

    def u64(self, v: int):
        if v < 0 or v >= 1 << 64:
            raise ValueError(f"integer out of range: {v}")
        self.buf += struct.pack(">Q", v)

    def raw(self, b: bytes):
        self.buf += b

    def var(self, b: bytes):
        self.u32(len(b))
        self.buf += b

    def getvalue(self) -> bytes:
        return bytes(self.buf)


class Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedEncoding("truncated input")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def var(self) -> bytes:
        return self._take(self.u32())

    def flag(self) -> bool:
        b = self.u8()
        if b > 1:
            raise MalformedEncoding(f"non-canonical flag byte {b}")
        return bool(b)

    def done(self):
        if self.pos != len(self.data):
            raise MalformedEncoding(f"{len(self.data) - self.pos} trailing bytes")


def _digest_type():
    from .crypto import Digest

    return Digest


def _is_union(tp) -> bool:
    return typing.get_origin(tp) in (typing.Union, types.UnionType)


@functools.lru_cache(maxsize=None)
def _plan(cls) -> tuple:
    hints = typing.get_type_hints(cls)
    return tuple((f.name, hints[f.name]) for f in dataclasses.fields(cls) if f.init)


@functools.lru_cache(maxsize=None)
def _writer_for(tp):
    Digest = _digest_type()
    if tp is bytes:
        return lambda w, v: w.var(bytes(v))
    if tp is str:
        return lambda w, v: w.var(v.encode("utf-8"))
    if tp is bool:
        return lambda w, v: w.u8(1 if v else 0)
    if isinstance(tp, type) and issubclass(tp, enum.IntEnum):
        return lambda w, v: w.u8(int(v))
    if tp is int:
        return lambda w, v: w.u64(v)
    if tp is Digest:
        def write_digest(w, v):
            if len(v) != 32:
                raise ValueError("digest must be 32 bytes")
            w.raw(v)
        return write_digest
    if _is_union(tp):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        inner = args[0] if len(args) == 1 else object
        if len(args) < len(typing.get_args(tp)):
            inner_w = _writer_for(inner)

            def write_opt(w, v):
                if v is None:
                    w.u8(0)
                else:
                    w.u8(1)
                    inner_w(w, v)
            return write_opt
        return _writer_for(object)
    if typing.get_origin(tp) is tuple:
        item_w = _writer_for(typing.get_args(tp)[0])

        def write_seq(w, v):
            w.u32(len(v))
            for item in v:
                item_w(w, item)
        return write_seq
    if tp is object or tp in _TAG_OF:
        return _write_obj
    raise TypeError(f"no canonical encoding for {tp!r}")


@functools.lru_cache(maxsize=None)
def _reader_for(tp):
    Digest = _digest_type()
    if tp is bytes:
        return lambda r: r.var()
    if tp is str:
        def read_str(r):
            try:
                return r.var().decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedEncoding("invalid utf-8") from exc
        return read_str
    if tp is bool:
        return lambda r: r.flag()
    if isinstance(tp, type) and issubclass(tp, enum.IntEnum):
        def read_enum(r):
            try:
                return tp(r.u8())
            except ValueError as exc:
                raise MalformedEncoding(f"bad {tp.__name__} value") from exc
        return read_enum
    if tp is int:
        return lambda r: r.u64()
    if tp is Digest:
        return lambda r: Digest(r.raw(32))
    if _is_union(tp):
        all_args = typing.get_args(tp)
        args = tuple(a for a in all_args if a is not type(None))
        if len(args) == 1:
            inner_r = _reader_for(args[0])
        else:
            inner_r = functools.partial(_read_obj, allowed=args)
        if len(args) < len(all_args):
            return lambda r: inner_r(r) if r.flag() else None
        return inner_r
    if typing.get_origin(tp) is tuple:
        item_r = _reader_for(typing.get_args(tp)[0])

        def read_seq(r):
            n = r.u32()
            if n > len(r.data) - r.pos:
                raise MalformedEncoding("sequence count exceeds input")
            return tuple(item_r(r) for _ in range(n))
        return read_seq
    if tp is object:
        return _read_obj
    if tp in _TAG_OF:
        return functools.partial(_read_obj, allowed=(tp,))
    raise TypeError(f"no canonical decoding for {tp!r}")


def _write_obj(w: Writer, obj):
    cls = type(obj)
    tag = _TAG_OF.get(cls)
    if tag is None:
        raise TypeError(f"{cls.__name__} is not a canonical type")
    w.u8(tag)
    if cls is _digest_type():
        w.raw(obj)
        return
    for name, tp in _plan(cls):
        _writer_for(tp)(w, getattr(obj, name))


def _read_obj(r: Reader, allowed=None):
    tag = r.u8()
    cls = _BY_TAG.get(tag)
    if cls is None:
        raise MalformedEncoding(f"unknown type tag 0x{tag:02x}")
    if allowed is not None and cls not in allowed:
        raise MalformedEncoding(f"unexpected {cls.__name__}")
    if cls is _digest_type():
        return cls(r.raw(32))
    values = {name: _reader_for(tp)(r) for name, tp in _plan(cls)}
    try:
        return cls(**values)
    except (ValueError, TypeError) as exc:
        raise MalformedEncoding(f"invalid {cls.__name__}: {exc}") from exc


def encode(obj) -> bytes:
    w = Writer()
    _write_obj(w, obj)
    return w.getvalue()


def decode(data: bytes, expected: type | tuple | None = None):
    """Decode one canonical object, rejecting trailing bytes."""
    if isinstance(expected, type):
        expected = (expected,)
    r = Reader(data)
    obj = _read_obj(r, allowed=expected)
    r.done()
    return obj


def dump_file(obj) -> bytes:
    """Canonical encoding behind a versioned file header."""
    return FILE_MAGIC + bytes([FILE_VERSION]) + encode(obj)


def load_file(data: bytes, expected=None):
    if data[:3] != FILE_MAGIC:
        # headerless artifacts are accepted too
        return decode(data, expected)
    if len(data) < 4 or data[3] != FILE_VERSION:
        raise MalformedEncoding("unsupported file version")
    return decode(data[4:], expected)


# -- JSON mirror -------------------------------------------------------------

def to_json(obj):
    """Render any canonical value as JSON-compatible data (bytes as hex)."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, enum.Enum):
        return obj.name
    if isinstance(obj, int):
        return obj
    if isinstance(obj, (bytes, bytearray)):
        return bytes(obj).hex()
    if isinstance(obj, (tuple, list)):
        return [to_json(x) for x in obj]
    if type(obj) in _TAG_OF:
        out = {"type": type(obj).__name__}
        for name, _ in _plan(type(obj)):
            out[name] = to_json(getattr(obj, name))
        return out
    raise TypeError(f"cannot render {type(obj).__name__}")


def from_json(data, tp=object):
    Digest = _digest_type()
    if _is_union(tp):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if data is None:
            return None
        return from_json(data, args[0] if len(args) == 1 else object)
    if tp is bytes:
        return bytes.fromhex(data)
    if tp is Digest:
        return Digest(bytes.fromhex(data))
    if isinstance(tp, type) and issubclass(tp, enum.IntEnum):
        return tp[data]
    if tp in (str, int, bool):
        if not isinstance(data, tp):
            raise MalformedEncoding(f"expected {tp.__name__}")
        return data
    if typing.get_origin(tp) is tuple:
        return tuple(from_json(x, typing.get_args(tp)[0]) for x in data)
    if not isinstance(data, dict) or data.get("type") not in _BY_NAME:
        raise MalformedEncoding("expected a typed JSON object")
    cls = _BY_NAME[data["type"]]
    if cls is Digest:
        raise MalformedEncoding("digests are rendered as plain hex")
    missing = [name for name, _ in _plan(cls) if name not in data]
    if missing:
        raise MalformedEncoding(f"{cls.__name__} is missing {', '.join(missing)}")
    try:
        return cls(**{name: from_json(data[name], ftp) for name, ftp in _plan(cls)})
    except (ValueError, TypeError, KeyError) as exc:
        raise MalformedEncoding(f"invalid {cls.__name__}: {exc}") from exc
