"""PGM (P2 ASCII / P5 binary) reading and canonical writing, 8-bit only."""

from __future__ import annotations

from .errors import Diagnostic, RiplError
from .image import Image


class PgmError(RiplError):
    pass


def _fail(code: str, message: str) -> PgmError:
    return PgmError(Diagnostic(code, 0, 0, message))


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header fields, skipping comments.

    Returns the fields and the offset just past the last one.
    """
    fields: list[bytes] = []
    i, n = 0, len(data)
    while len(fields) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise _fail("E_HEADER", "header ends early")
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        fields.append(data[i:j])
        i = j
    return fields, i


def read_pgm(data: bytes) -> Image:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise _fail("E_MAGIC", f"not a P2/P5 PGM file (magic {magic!r})")
    fields, end = _header_tokens(data[2:], 3)
    end += 2
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise _fail("E_HEADER", f"malformed header fields {[f.decode('latin-1') for f in fields]}") from None
    if width < 1 or height < 1:
        raise _fail("E_HEADER", f"bad dimensions {width}x{height}")
    if maxval > 255:
        raise _fail("E_MAXVAL", f"maxval {maxval} exceeds 255 (only 8-bit images are supported)")
    if maxval < 1:
        raise _fail("E_HEADER", f"bad maxval {maxval}")
    count = width * height
    if magic == b"P5":
        body = data[end + 1:end + 1 + count]  # one whitespace byte ends the header
        if end >= len(data) or len(body) < count:
            raise _fail("E_TRUNCATED", f"expected {count} pixel bytes, found {max(len(body), 0)}")
        pixels = tuple(body)
    else:
        words = data[end:].split()
        if len(words) < count:
            raise _fail("E_TRUNCATED", f"expected {count} pixel values, found {len(words)}")
        try:
            pixels = tuple(int(w) for w in words[:count])
        except ValueError:
            raise _fail("E_HEADER", "non-numeric pixel value in P2 data") from None
    if any(p > maxval or p < 0 for p in pixels):
        raise _fail("E_MAXVAL", f"pixel value exceeds maxval {maxval}")
    return Image(width, height, pixels)


def write_pgm(im: Image, fmt: str = "P5") -> bytes:
    header = f"{fmt}\n{im.width} {im.height}\n255\n".encode("ascii")
    if fmt == "P5":
        return header + bytes(im.pixels)
    if fmt == "P2":
        rows = (" ".join(map(str, r)) for r in im.rows())
        return header + ("\n".join(rows) + "\n").encode("ascii")
    raise ValueError(f"unknown PGM format {fmt!r}")


def load_pgm(path) -> Image:
    with open(path, "rb") as f:
        return read_pgm(f.read())


def save_pgm(path, im: Image, fmt: str = "P5") -> None:
    with open(path, "wb") as f:
        f.write(write_pgm(im, fmt))
