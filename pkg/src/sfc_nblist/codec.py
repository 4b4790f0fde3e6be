"""Nibble-based delta compression for sorted index lists.

A sorted list is turned into differences (the first element is stored as
``indices[0] + 1`` so every difference is >= 1) and cut into blocks of
``w`` differences.  Each block holds

* a ``w``-bit mask, bit ``k`` set iff difference ``k`` is not 1;
* one info nibble per set bit: ``v + 6`` for ``v`` in [2, 9], otherwise
  ``n_nibbles - 1``;
* the data nibbles of every value >= 10, most significant nibble first.

Byte layout of one serialized block::

    mask      w/8 bytes, little endian, bit k <-> difference k
    nibbles   info nibbles then data nibbles, two per byte, low nibble
              first; the last byte of the block is zero padded

Blocks are self-delimiting given the element count and ``w``; a partial
final block still carries a full ``w/8``-byte mask with the unused high
bits clear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MAX_DIFF = (1 << 32) - 1


class CodecError(ValueError):
    """Malformed input to the encoder or a corrupt/truncated stream."""


def delta_encode(indices) -> np.ndarray:
    """Adjacent differences; ``out[0] = indices[0] + 1``."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return np.zeros(0, dtype=np.int64)
    if idx[0] < 0:
        raise CodecError("indices must be non-negative")
    out = np.empty_like(idx)
    out[0] = idx[0] + 1
    out[1:] = np.diff(idx)
    if np.any(out[1:] < 1):
        raise CodecError("indices must be strictly increasing")
    if np.any(out > MAX_DIFF):
        raise CodecError("difference exceeds 2^32 - 1")
    return out


def delta_decode(diffs) -> np.ndarray:
    d = np.asarray(diffs, dtype=np.int64)
    return np.cumsum(d) - 1


def _num_nibbles(v: int) -> int:
    return max(1, (int(v).bit_length() + 3) // 4)


@dataclass(frozen=True)
class EncodedBlock:
    """Logical content of one block: ``bitmask`` bit k <-> element k."""

    length: int
    bitmask: int
    info: tuple[int, ...]
    data: tuple[int, ...]

    def mask_string(self) -> str:
        """Mask written element 0 first, e.g. ``'011100'``."""
        return "".join("1" if (self.bitmask >> k) & 1 else "0" for k in range(self.length))


def encode_block(diffs) -> EncodedBlock:
    mask, info, data = 0, [], []
    diffs = [int(v) for v in diffs]
    for k, v in enumerate(diffs):
        if v < 1 or v > MAX_DIFF:
            raise CodecError(f"difference {v} outside [1, 2^32)")
        if v == 1:
            continue
        mask |= 1 << k
        if v <= 9:
            info.append(v + 6)
        else:
            nn = _num_nibbles(v)
            info.append(nn - 1)
            data.extend((v >> (4 * s)) & 0xF for s in range(nn - 1, -1, -1))
    return EncodedBlock(len(diffs), mask, tuple(info), tuple(data))


def decode_block(block: EncodedBlock) -> list[int]:
    out, info, data = [], iter(block.info), iter(block.data)
    for k in range(block.length):
        if not (block.bitmask >> k) & 1:
            out.append(1)
            continue
        eta = next(info)
        if eta >= 8:
            out.append(eta - 6)
        else:
            v = 0
            for _ in range(eta + 1):
                v = (v << 4) | next(data)
            out.append(v)
    return out


def encoded_size_bits(v: int) -> int:
    """Payload bits one difference costs (mask bit + nibbles)."""
    v = int(v)
    if v < 1 or v > MAX_DIFF:
        raise CodecError(f"difference {v} outside [1, 2^32)")
    if v == 1:
        return 1
    if v <= 9:
        return 5
    return 5 + 4 * _num_nibbles(v)


def size_stream_vbyte(v: int) -> int:
    """Bits per value of Stream VByte: 2 control bits plus 1-4 data bytes."""
    v = int(v)
    if v < 0 or v > MAX_DIFF:
        raise CodecError("value outside [0, 2^32)")
    nbytes = max(1, (v.bit_length() + 7) // 8)
    return 2 + 8 * nbytes


def size_band(v: int) -> int:
    """Bits per value of the Band et al. neighbor-list scheme."""
    v = int(v)
    if v < 1 or v > 1 << 32:
        raise CodecError("value outside [1, 2^32]")
    if v <= 2:
        return 2
    if v <= 1 << 8:
        return 10
    return 34


# --- serialized form -------------------------------------------------------

_ERR_ORDER = -1
_ERR_RANGE = -2


@njit(cache=True)
def _nibble_count(v):
    n = 1
    v >>= 4
    while v:
        n += 1
        v >>= 4
    return n


@njit(cache=True)
def encoded_nbytes(indices, w):
    """Serialized byte length, or a negative error code."""
    count = indices.shape[0]
    total = 0
    prev = -1
    pos = 0
    while pos < count:
        m = min(w, count - pos)
        nib = 0
        for k in range(pos, pos + m):
            v = indices[k] - prev
            prev = indices[k]
            if v < 1:
                return _ERR_ORDER
            if v > 4294967295:
                return _ERR_RANGE
            if v == 1:
                continue
            nib += 1
            if v > 9:
                nib += _nibble_count(v)
        total += w // 8 + (nib + 1) // 2
        pos += m
    return total


@njit(cache=True)
def _put_nibble(buf, base, k, value):
    b = base + (k >> 1)
    if k & 1:
        buf[b] |= np.uint8(value << 4)
    else:
        buf[b] = np.uint8(value)


@njit(cache=True)
def encode_into(indices, w, buf, offset):
    """Encode ``indices`` into ``buf[offset:]``; return the end offset.

    The caller sizes ``buf`` with :func:`encoded_nbytes`.
    """
    count = indices.shape[0]
    prev = -1
    pos = 0
    out = offset
    mbytes = w // 8
    info = np.empty(w, np.int64)
    data = np.empty(8 * w, np.int64)
    while pos < count:
        m = min(w, count - pos)
        mask = np.uint64(0)
        ni = 0
        nd = 0
        for k in range(m):
            v = indices[pos + k] - prev
            prev = indices[pos + k]
            if v == 1:
                continue
            mask |= np.uint64(1) << np.uint64(k)
            if v <= 9:
                info[ni] = v + 6
            else:
                nn = _nibble_count(v)
                info[ni] = nn - 1
                for s in range(nn - 1, -1, -1):
                    data[nd] = (v >> (4 * s)) & 0xF
                    nd += 1
            ni += 1
        for b in range(mbytes):
            buf[out + b] = np.uint8((mask >> np.uint64(8 * b)) & np.uint64(0xFF))
        out += mbytes
        for k in range(ni):
            _put_nibble(buf, out, k, info[k])
        for k in range(nd):
            _put_nibble(buf, out, ni + k, data[k])
        out += (ni + nd + 1) >> 1
        pos += m
    return out


@njit(cache=True)
def decode_from(buf, offset, count, w, out):
    """Decode ``count`` indices starting at ``buf[offset]`` into ``out``.

    Returns the end offset, or ``-(byte_offset + 1)`` at the first
    truncated or corrupt byte.
    """
    size = buf.shape[0]
    mbytes = w // 8
    p = offset
    running = -1
    pos = 0
    while pos < count:
        m = min(w, count - pos)
        if p + mbytes > size:
            return -(p + 1)
        mask = np.uint64(0)
        for b in range(mbytes):
            mask |= np.uint64(buf[p + b]) << np.uint64(8 * b)
        if m < 64 and (mask >> np.uint64(m)) != np.uint64(0):
            return -(p + 1)
        p += mbytes
        nset = 0
        for k in range(m):
            if (mask >> np.uint64(k)) & np.uint64(1):
                nset += 1
        info_k = 0
        data_k = nset
        limit = 2 * (size - p)
        for k in range(m):
            if (mask >> np.uint64(k)) & np.uint64(1):
                if info_k >= limit:
                    return -(p + (info_k >> 1) + 1)
                eta = (buf[p + (info_k >> 1)] >> (4 * (info_k & 1))) & 0xF
                info_k += 1
                if eta >= 8:
                    v = np.int64(eta) - 6
                else:
                    v = np.int64(0)
                    for _ in range(eta + 1):
                        if data_k >= limit:
                            return -(p + (data_k >> 1) + 1)
                        v = (v << 4) | ((buf[p + (data_k >> 1)] >> (4 * (data_k & 1))) & 0xF)
                        data_k += 1
                    if v < 1:
                        return -(p + (data_k >> 1))
            else:
                v = np.int64(1)
            running += v
            out[pos + k] = running
        p += (data_k + 1) >> 1
        pos += m
    return p


@dataclass(frozen=True)
class EncodedList:
    count: int
    w: int
    data: bytes

    @property
    def byte_len(self) -> int:
        return len(self.data)


def _check_w(w):
    if w < 8 or w > 64 or w % 8:
        raise CodecError("block width must be a multiple of 8 in [8, 64]")


def encode(indices, w: int = 32) -> EncodedList:
    """Compress a strictly increasing list of non-negative 32-bit indices."""
    _check_w(w)
    idx = np.ascontiguousarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise CodecError("indices must be one-dimensional")
    if idx.size and (idx[0] < 0 or idx[-1] > MAX_DIFF):
        raise CodecError("indices must lie in [0, 2^32)")
    nbytes = encoded_nbytes(idx, w)
    if nbytes == _ERR_ORDER:
        raise CodecError("indices must be strictly increasing")
    if nbytes == _ERR_RANGE:
        raise CodecError("leading index 2^32 - 1 is not encodable (first difference would be 2^32)")
    buf = np.zeros(nbytes, dtype=np.uint8)
    encode_into(idx, w, buf, 0)
    return EncodedList(count=int(idx.size), w=w, data=buf.tobytes())


def decode(enc: EncodedList, w: int | None = None) -> np.ndarray:
    w = enc.w if w is None else w
    _check_w(w)
    buf = np.frombuffer(enc.data, dtype=np.uint8)
    out = np.empty(enc.count, dtype=np.int64)
    end = decode_from(buf, 0, enc.count, w, out)
    if end < 0:
        raise CodecError(f"truncated or corrupt stream at byte offset {-end - 1}")
    if end != len(buf):
        raise CodecError(f"{len(buf) - end} trailing bytes after {enc.count} elements")
    return out
