"""Dataset loading, the synthetic desk benchmark, and PPM image I/O.

Images live as float64 [C,H,W] arrays in [0,1], stacked per dataset. The
on-disk interchange format is binary PPM (P6, maxval 255); grayscale PGM
(P5) is accepted and expanded to three channels on load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InputError


@dataclass
class Dataset:
    images: np.ndarray  # [n, C, H, W] float64 in [0,1]
    labels: np.ndarray  # [n] int64
    class_names: list
    sources: list  # per-record file path or synthetic id

    def __len__(self):
        return len(self.labels)

    @property
    def num_classes(self):
        return len(self.class_names)

    def per_class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.images[indices].copy(),
            self.labels[indices].copy(),
            list(self.class_names),
            [self.sources[i] for i in indices],
        )


# ---------------------------------------------------------------- PPM I/O


def _read_header_token(buf, pos):
    # skip whitespace and '#' comments, then read one token
    while pos < len(buf):
        ch = buf[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(buf) and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated header")
    return buf[start:pos], pos


def read_ppm(path):
    """Decode a binary PPM (P6) or PGM (P5) file to a uint8 [H,W,3] array."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    try:
        magic, pos = _read_header_token(buf, 0)
        if magic not in (b"P6", b"P5"):
            raise ValueError(f"unsupported magic {magic!r}")
        width, pos = _read_header_token(buf, pos)
        height, pos = _read_header_token(buf, pos)
        maxval, pos = _read_header_token(buf, pos)
        width, height, maxval = int(width), int(height), int(maxval)
        if maxval != 255:
            raise ValueError(f"unsupported maxval {maxval} (need 255)")
        pos += 1  # single whitespace byte after maxval
        channels = 3 if magic == b"P6" else 1
        need = width * height * channels
        pixels = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos)
        if pixels.size < need:
            raise ValueError("truncated pixel data")
    except ValueError as exc:
        raise InputError(f"undecodable image {path}: {exc}") from exc
    pixels = pixels.reshape(height, width, channels)
    if channels == 1:
        pixels = np.repeat(pixels, 3, axis=2)
    return pixels


def write_ppm(path, pixels):
    """Write a uint8 [H,W,3] array as binary PPM (P6, maxval 255)."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise InputError(f"write_ppm expects [H,W,3] pixels, got {pixels.shape}")
    h, w, _ = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(pixels).tobytes())


def image_to_unit(pixels):
    """uint8 [H,W,3] -> float64 [3,H,W] scaled into [0,1]."""
    return pixels.astype(np.float64).transpose(2, 0, 1) / 255.0


def unit_to_image(image):
    """float64 [3,H,W] in [0,1] -> uint8 [H,W,3], round-half-even."""
    quantized = np.rint(np.clip(image, 0.0, 1.0) * 255.0)
    return quantized.astype(np.uint8).transpose(1, 2, 0)


# ---------------------------------------------------------------- loading


def load_dataset_dir(root):
    """Load a class-per-folder tree of PPM images.

    Classes are the subdirectory names in lexicographic order; records are
    ordered by (class, filename). All images must share one shape.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) < 2:
        raise InputError(
            f"dataset root {root} has {len(class_dirs)} class directories (need >= 2)"
        )
    images, labels, sources = [], [], []
    shape = None
    for label, cdir in enumerate(class_dirs):
        files = sorted(p for p in cdir.iterdir() if p.is_file())
        if not files:
            raise InputError(f"class directory {cdir} contains no files")
        for f in files:
            arr = image_to_unit(read_ppm(f))
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise InputError(
                    f"inconsistent image shapes: {f} is {arr.shape}, expected {shape}"
                )
            images.append(arr)
            labels.append(label)
            sources.append(str(f))
    return Dataset(
        np.stack(images),
        np.asarray(labels, dtype=np.int64),
        [d.name for d in class_dirs],
        sources,
    )


# ------------------------------------------------------- synthetic benchmark


@dataclass(frozen=True)
class ClassTexture:
    orientation: float  # radians
    frequency: float  # cycles across the image
    base_color: tuple  # RGB in [0,1]
    phase: float
    contrast: float = 0.05  # grating amplitude


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 10
    images_per_class: int = 100
    image_size: int = 32
    noise_amplitude: float = 0.12
    seed: int = 0
    contrast: float = 0.05  # grating amplitude, used when textures are derived
    color_spread: float = 0.02  # base-color ring radius, ditto
    textures: tuple = ()

    def __post_init__(self):
        if not self.textures:
            object.__setattr__(
                self,
                "textures",
                default_textures(self.num_classes, self.contrast, self.color_spread),
            )
        else:
            object.__setattr__(self, "textures", tuple(self.textures))

    def validate(self):
        if self.num_classes < 2:
            raise ConfigurationError(f"synth.classes: must be >= 2, got {self.num_classes}")
        if self.images_per_class < 1:
            raise ConfigurationError(
                f"synth.images_per_class: must be >= 1, got {self.images_per_class}"
            )
        if self.image_size < 16:
            raise ConfigurationError(f"synth.image_size: must be >= 16, got {self.image_size}")
        if self.noise_amplitude < 0:
            raise ConfigurationError(
                f"synth.noise: must be >= 0, got {self.noise_amplitude}"
            )
        if not 0 <= self.contrast <= 0.5:
            raise ConfigurationError(
                f"synth.contrast: must lie in [0, 0.5], got {self.contrast}"
            )
        if not 0 <= self.color_spread <= 0.5:
            raise ConfigurationError(
                f"synth.color_spread: must lie in [0, 0.5], got {self.color_spread}"
            )
        if len(self.textures) != self.num_classes:
            raise ConfigurationError(
                f"synth.textures: need one texture per class "
                f"({self.num_classes}), got {len(self.textures)}"
            )


def default_textures(num_classes, contrast=0.05, color_spread=0.02):
    """One grating per class on a similarity ring.

    Orientation and base color both walk a cycle in class index, so
    neighbouring classes look alike. The default grating contrast
    (0.05 ~ 13/255) is deliberately close to the usual L-inf attack budgets
    so bounded perturbations can reach a neighbouring class, while
    aggregating the pattern over the whole image keeps clean classification
    easy. Larger contrast/color spread makes the task trivially separable.
    """
    textures = []
    for c in range(num_classes):
        ring = 2 * math.pi * c / num_classes
        textures.append(
            ClassTexture(
                orientation=math.pi * c / num_classes,
                frequency=4.0,
                base_color=(
                    0.5 + color_spread * math.sin(ring),
                    0.5 + color_spread * math.cos(ring),
                    0.5 + color_spread * math.sin(2 * ring),
                ),
                phase=2 * math.pi * ((c * 7) % num_classes) / num_classes,
                contrast=contrast,
            )
        )
    return tuple(textures)


def generate_synthetic(spec):
    """Seeded texture-classification benchmark.

    Each class is an oriented sinusoidal grating over a base color; the only
    per-image variation is seeded pixel noise, so noise amplitude 0 makes
    every image in a class identical. Pixels are quantized to the 8-bit grid
    so a PPM round trip is lossless.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    size = spec.image_size
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    u = xx / size
    v = yy / size
    images, labels, sources = [], [], []
    for c, tex in enumerate(spec.textures):
        coord = u * math.cos(tex.orientation) + v * math.sin(tex.orientation)
        grating = tex.contrast * np.sin(2 * math.pi * tex.frequency * coord + tex.phase)
        base = np.asarray(tex.base_color)[:, None, None] + grating[None]
        for i in range(spec.images_per_class):
            noise = rng.standard_normal((3, size, size)) * spec.noise_amplitude
            img = np.clip(base + noise, 0.0, 1.0)
            img = np.rint(img * 255.0) / 255.0  # snap to the 8-bit grid
            images.append(img)
            labels.append(c)
            sources.append(f"synth/class{c:02d}/{i:04d}")
    return Dataset(
        np.stack(images),
        np.asarray(labels, dtype=np.int64),
        [f"class{c:02d}" for c in range(spec.num_classes)],
        sources,
    )


def write_dataset_tree(dataset, root):
    """Materialize a dataset as a class-per-folder PPM tree."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for name in dataset.class_names:
        (root / name).mkdir(exist_ok=True)
    counters = {}
    for img, label in zip(dataset.images, dataset.labels):
        cname = dataset.class_names[label]
        i = counters.get(cname, 0)
        counters[cname] = i + 1
        write_ppm(root / cname / f"{i:04d}.ppm", unit_to_image(img))
    return root
