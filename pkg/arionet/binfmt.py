# arionet - self-supervised birdsong representation toolkit
# binfmt Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" Little-endian binary framing shared by the feature store and the
    checkpoint formats, plus atomic file replacement.
"""

import os
import struct
import tempfile
from contextlib import contextmanager

import numpy as np

from arionet.errors import BadMagicError, TruncatedFileError


class BinaryWriter:
    """ Accumulates little-endian fields into a bytes buffer
    """

    def __init__(self):
        self._parts = []

    def magic(self, tag: bytes):
        self._parts.append(tag)

    def u8(self, value: int):
        self._parts.append(struct.pack('<B', value))

    def u16(self, value: int):
        self._parts.append(struct.pack('<H', value))

    def u32(self, value: int):
        self._parts.append(struct.pack('<I', value))

    def u64(self, value: int):
        self._parts.append(struct.pack('<Q', value))

    def text(self, value: str):
        """ u16 length prefix followed by UTF-8 bytes """
        raw = value.encode('utf-8')
        self.u16(len(raw))
        self._parts.append(raw)

    def f32_array(self, values):
        """ Raw f32 data in row-major order, no length prefix """
        arr = np.ascontiguousarray(values, dtype='<f4')
        self._parts.append(arr.tobytes())

    def getvalue(self) -> bytes:
        return b''.join(self._parts)


class BinaryReader:
    """ Reads little-endian fields from a bytes buffer. Running past the
        end raises TruncatedFileError naming what was being read.
    """

    def __init__(self, data: bytes, source='file'):
        self._data = data
        self._pos = 0
        self.source = source

    def _take(self, size: int, what: str) -> bytes:
        end = self._pos + size
        if end > len(self._data):
            raise TruncatedFileError(
                f'{self.source}: truncated while reading {what} '
                f'(need {size} bytes at offset {self._pos}, '
                f'file has {len(self._data)})')
        chunk = self._data[self._pos:end]
        self._pos = end
        return chunk

    def expect_magic(self, tag: bytes):
        found = self._take(len(tag), 'magic')
        if found != tag:
            raise BadMagicError(
                f'{self.source}: bad magic {found!r}, expected {tag!r}')

    def u8(self, what='u8') -> int:
        return struct.unpack('<B', self._take(1, what))[0]

    def u16(self, what='u16') -> int:
        return struct.unpack('<H', self._take(2, what))[0]

    def u32(self, what='u32') -> int:
        return struct.unpack('<I', self._take(4, what))[0]

    def u64(self, what='u64') -> int:
        return struct.unpack('<Q', self._take(8, what))[0]

    def text(self, what='text') -> str:
        size = self.u16(f'{what} length')
        return self._take(size, what).decode('utf-8')

    def f32_array(self, count: int, what='f32 data') -> np.ndarray:
        raw = self._take(4 * count, what)
        return np.frombuffer(raw, dtype='<f4').astype(np.float32)

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos


@contextmanager
def atomic_write(path, mode='wb', **open_kwargs):
    """ Open a temporary file next to path and rename it over path only
        when the with-block finishes without an exception.

        Usage
        -----
        >>> with atomic_write('model.ck') as fh:
        >>>     fh.write(payload)
    """
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=folder)
    try:
        with os.fdopen(fd, mode, **open_kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
