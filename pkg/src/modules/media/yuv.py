# src/modules/media/yuv.py

import logging
import os
from pathlib import Path
from typing import BinaryIO, Iterator, Optional

import numpy as np

from src.core.errors import ArgumentError, DecodeError
from .models import Frame

logger = logging.getLogger(__name__)


def frame_byte_size(width: int, height: int) -> int:
    if width <= 0 or height <= 0 or width % 2 or height % 2:
        raise ArgumentError(f"I420 dimensions must be even and positive, got {width}x{height}")
    return width * height * 3 // 2


def read_yuv_frame(source: BinaryIO, width: int, height: int, index: int) -> Frame:
    """Reads the index-th I420 frame (Y, then U, then V) from a seekable stream."""
    size = frame_byte_size(width, height)
    if index < 0:
        raise ArgumentError(f"Frame index must be nonnegative, got {index}")

    source.seek(index * size)
    data = source.read(size)
    if len(data) < size:
        raise DecodeError(index, f"truncated stream, expected {size} bytes, got {len(data)}")

    buf = np.frombuffer(data, dtype=np.uint8)
    luma_len = width * height
    chroma_len = luma_len // 4
    return Frame(
        width=width,
        height=height,
        luma=buf[:luma_len].reshape(height, width),
        chroma_u=buf[luma_len : luma_len + chroma_len].reshape(height // 2, width // 2),
        chroma_v=buf[luma_len + chroma_len :].reshape(height // 2, width // 2),
    )


def write_yuv_frame(sink: BinaryIO, frame: Frame) -> None:
    sink.write(frame.luma.tobytes())
    sink.write(frame.chroma_u.tobytes())
    sink.write(frame.chroma_v.tobytes())


def count_frames(path: Path, width: int, height: int) -> int:
    size = frame_byte_size(width, height)
    total = os.path.getsize(path)
    count, remainder = divmod(total, size)
    if remainder:
        raise DecodeError(count, f"{path} ends with a partial frame ({remainder} trailing bytes)")
    return count


class YuvReader:
    """Random-access reader over a raw I420 file. One reader per thread."""

    def __init__(self, path: Path, width: int, height: int, frame_count: Optional[int] = None):
        self.path = Path(path)
        self.width = width
        self.height = height
        available = count_frames(self.path, width, height)
        if frame_count is not None and frame_count > available:
            raise DecodeError(available, f"{self.path} holds {available} frames, manifest says {frame_count}")
        self.frame_count = frame_count if frame_count is not None else available
        self._handle: Optional[BinaryIO] = None

    def __enter__(self) -> "YuvReader":
        self.open()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def open(self) -> None:
        if self._handle is None:
            self._handle = open(self.path, "rb")

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __len__(self) -> int:
        return self.frame_count

    def __getitem__(self, index: int) -> Frame:
        if not 0 <= index < self.frame_count:
            raise IndexError(index)
        self.open()
        return read_yuv_frame(self._handle, self.width, self.height, index)

    def __iter__(self) -> Iterator[Frame]:
        for i in range(self.frame_count):
            yield self[i]
