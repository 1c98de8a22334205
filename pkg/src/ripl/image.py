"""8-bit grayscale images, row-major."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    pixels: tuple[int, ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image must be at least 1x1, got {self.width}x{self.height}")
        if len(self.pixels) != self.width * self.height:
            raise ValueError(f"{self.width}x{self.height} image needs {self.width * self.height} pixels, got {len(self.pixels)}")
        if any(not 0 <= p <= 255 for p in self.pixels):
            raise ValueError("pixel values must lie in [0, 255]")

    @classmethod
    def from_rows(cls, rows) -> "Image":
        rows = [list(r) for r in rows]
        return cls(len(rows[0]), len(rows), tuple(p for r in rows for p in r))

    @classmethod
    def constant(cls, width: int, height: int, value: int) -> "Image":
        return cls(width, height, (value,) * (width * height))

    def __getitem__(self, xy: tuple[int, int]) -> int:
        x, y = xy
        return self.pixels[y * self.width + x]

    def rows(self) -> list[tuple[int, ...]]:
        w = self.width
        return [self.pixels[y * w:(y + 1) * w] for y in range(self.height)]

    def columns(self) -> list[tuple[int, ...]]:
        return [self.pixels[x::self.width] for x in range(self.width)]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)
