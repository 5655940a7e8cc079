"""Dataset ingestion and derived image planes.

Every fundus image is reduced to a fixed stack of 500x500 planes: the green
plane ``I``, red/hue/saturation/intensity planes, six Gaussian derivative
images of ``I`` and first/second order gradient-magnitude images for the
green, red, hue and saturation planes.
"""

from __future__ import annotations

import gzip
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage as ndi
from skimage.transform import resize

from .errors import DataError

logger = logging.getLogger(__name__)

PLANE_SIZE = 500
DEFAULT_SIGMA_SQ = 8.0
IMAGE_SUFFIXES = {".png", ".ppm", ".pgm", ".pbm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".gif"}

#: Order of the six Gaussian coefficient images.
GAUSS_NAMES = ("G", "Gx", "Gy", "Gxy", "Gxx", "Gyy")
#: Planes that get gradient-magnitude images, in feature order.
GRADIENT_PLANES = ("I", "Ir", "Ih", "Is")


@dataclass(frozen=True)
class RawSample:
    image_id: str
    rgb: np.ndarray
    gt_masks: dict[str, np.ndarray] = field(default_factory=dict)
    split_hint: str | None = None


@dataclass(frozen=True)
class ImagePlanes:
    """All derived planes of one image, each ``PLANE_SIZE`` square."""

    I: np.ndarray
    Ir: np.ndarray
    Ih: np.ndarray
    Is: np.ndarray
    Ii: np.ndarray
    gauss: tuple[np.ndarray, ...]
    grad1: dict[str, np.ndarray]
    grad2: dict[str, np.ndarray]

    def plane(self, name: str) -> np.ndarray:
        return getattr(self, name)

    @property
    def shape(self) -> tuple[int, int]:
        return self.I.shape


@dataclass
class DatasetConfig:
    path: Path
    images_dir: Path
    classes: list[str]
    mask_dirs: dict[str, Path]
    mask_patterns: dict[str, str]
    mask_threshold: float = 0.75
    images: list[str] | None = None
    profile: str | None = None
    tag: str | None = None
    options: dict[str, str] = field(default_factory=dict)

    def class_id(self, name: str) -> int:
        return self.classes.index(name)


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def read_dataset_config(path) -> DatasetConfig:
    """Parse a ``key = value`` dataset description.

    Recognised keys: ``images_dir``, ``classes``, ``mask_dir.<class>``,
    ``mask_pattern.<class>`` (default ``{stem}.*``), ``mask_threshold``,
    ``images`` (explicit file list), ``profile`` and ``tag``. Any other key
    is kept verbatim in ``options``. Relative paths are resolved against the
    config file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset config not found: {path}")
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value

    base = path.parent
    for required in ("images_dir", "classes"):
        if required not in entries:
            raise DataError(f"{path}: missing required key '{required}'")
    classes = _split_list(entries["classes"])
    mask_dirs, mask_patterns = {}, {}
    for key, value in entries.items():
        if key.startswith("mask_dir."):
            name = key.split(".", 1)[1]
            if name not in classes:
                raise DataError(f"{path}: mask_dir for undeclared class '{name}'")
            mask_dirs[name] = (base / value).resolve()
        elif key.startswith("mask_pattern."):
            mask_patterns[key.split(".", 1)[1]] = value
    images = _split_list(entries["images"]) if "images" in entries else None
    known = {"images_dir", "classes", "mask_threshold", "images", "profile", "tag"}
    options = {k: v for k, v in entries.items()
               if k not in known and not k.startswith(("mask_dir.", "mask_pattern."))}
    return DatasetConfig(
        path=path,
        images_dir=(base / entries["images_dir"]).resolve(),
        classes=classes,
        mask_dirs=mask_dirs,
        mask_patterns=mask_patterns,
        mask_threshold=float(entries.get("mask_threshold", 0.75)),
        images=images,
        profile=entries.get("profile"),
        tag=entries.get("tag"),
        options=options,
    )


def _stem(path: Path) -> str:
    return path.name.split(".", 1)[0]


def _is_image(path: Path) -> bool:
    suffixes = [s.lower() for s in path.suffixes]
    if suffixes and suffixes[-1] == ".gz":
        suffixes = suffixes[:-1]
    return bool(suffixes) and suffixes[-1] in IMAGE_SUFFIXES


def read_image(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".gz":
        with gzip.open(path, "rb") as fh:
            img = Image.open(io.BytesIO(fh.read()))
            img.load()
    else:
        img = Image.open(path)
        img.load()
    return np.asarray(img)


def _binarize(mask: np.ndarray, threshold: float) -> np.ndarray:
    if mask.ndim == 3:
        mask = mask[..., :3].max(axis=2)
    if mask.dtype == bool:
        return mask.copy()
    full_scale = np.iinfo(mask.dtype).max if np.issubdtype(mask.dtype, np.integer) else 1.0
    return mask >= threshold * full_scale


def load_dataset(config_path) -> list[RawSample]:
    cfg = read_dataset_config(config_path)
    if cfg.images is not None:
        image_paths = [cfg.images_dir / name for name in cfg.images]
        for p in image_paths:
            if not p.is_file():
                raise DataError(f"missing image file: {p}")
    else:
        if not cfg.images_dir.is_dir():
            raise DataError(f"images_dir does not exist: {cfg.images_dir}")
        image_paths = sorted(p for p in cfg.images_dir.iterdir() if p.is_file() and _is_image(p))
    if not image_paths:
        warnings.warn(f"no images found in {cfg.images_dir}", stacklevel=2)
        return []

    samples = []
    for img_path in image_paths:
        rgb = read_image(img_path)
        if rgb.ndim == 2:
            rgb = np.stack([rgb] * 3, axis=-1)
        rgb = rgb[..., :3]
        image_id = _stem(img_path)
        masks = {}
        for name, mdir in cfg.mask_dirs.items():
            pattern = cfg.mask_patterns.get(name, "{stem}.*").format(stem=image_id)
            hits = sorted(p for p in mdir.glob(pattern) if _is_image(p))
            if not hits:
                raise DataError(f"missing mask for image '{image_id}', class '{name}' in {mdir}")
            mask = _binarize(read_image(hits[0]), cfg.mask_threshold)
            if mask.shape != rgb.shape[:2]:
                raise DataError(
                    f"mask/image size mismatch for image '{image_id}' (class '{name}'): "
                    f"{mask.shape} vs {rgb.shape[:2]}"
                )
            masks[name] = mask
        samples.append(RawSample(image_id=image_id, rgb=rgb, gt_masks=masks))
    logger.info("loaded %d images from %s", len(samples), cfg.images_dir)
    return samples


def rgb_to_hsi(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Classical arccos HSI conversion of an RGB array with channels in [0, 1].

    Hue is the angle divided by 2*pi. Black pixels get saturation 0 and
    achromatic pixels hue 0.
    """
    rgb = np.asarray(rgb, dtype=float)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    total = r + g + b
    intensity = total / 3.0
    with np.errstate(invalid="ignore", divide="ignore"):
        sat = np.where(total > 0, 1.0 - 3.0 * np.minimum(np.minimum(r, g), b) / total, 0.0)
        num = 0.5 * ((r - g) + (r - b))
        den = np.sqrt((r - g) ** 2 + (r - b) * (g - b))
        cos = np.where(den > 0, num / den, 1.0)
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    hue = np.where(b > g, 2.0 * np.pi - theta, theta) / (2.0 * np.pi)
    hue = np.where(den > 0, hue, 0.0)
    return hue, np.clip(sat, 0.0, 1.0), intensity


def resize_plane(plane: np.ndarray, size: int = PLANE_SIZE) -> np.ndarray:
    plane = np.asarray(plane, dtype=float)
    if plane.shape == (size, size):
        return plane.copy()
    return resize(plane, (size, size), order=1, mode="edge", anti_aliasing=False, preserve_range=True)


def resize_mask(mask: np.ndarray, size: int = PLANE_SIZE) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == (size, size):
        return mask.copy()
    out = resize(mask.astype(np.uint8), (size, size), order=0, mode="edge",
                 anti_aliasing=False, preserve_range=True)
    return out > 0


def rescale(plane: np.ndarray, name: str = "plane") -> np.ndarray:
    lo, hi = float(plane.min()), float(plane.max())
    if hi == lo:
        warnings.warn(f"{name} has constant intensity; rescaled to zeros", stacklevel=2)
        return np.zeros_like(plane, dtype=float)
    return (plane - lo) / (hi - lo)


def gaussian_kernels(sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sampled 1-D Gaussian and its first/second derivative kernels.

    Half-width is ``ceil(3 * sigma)``. The smoothing kernel sums to one; the
    derivative kernels are corrected to zero sum and scaled so that they are
    exact on linear (first order) and quadratic (second order) signals.
    """
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    d1 = -x / sigma**2 * g
    d1 -= d1.mean()
    d1 /= -np.sum(x * d1)
    d2 = (x**2 - sigma**2) / sigma**4 * g
    d2 -= d2.mean()
    d2 *= 2.0 / np.sum(x**2 * d2)
    return g, d1, d2


def _sep(image: np.ndarray, ky: np.ndarray, kx: np.ndarray) -> np.ndarray:
    out = ndi.convolve1d(image, ky, axis=0, mode="reflect")
    return ndi.convolve1d(out, kx, axis=1, mode="reflect")


def gaussian_derivatives(I: np.ndarray, sigma_sq: float = DEFAULT_SIGMA_SQ) -> tuple[np.ndarray, ...]:
    """Return ``(G, Gx, Gy, Gxy, Gxx, Gyy)`` filtered versions of ``I``.

    ``x`` runs along columns and ``y`` along rows; borders are mirrored
    about the pixel edge.
    """
    if not sigma_sq > 0:
        raise ValueError(f"sigma_sq must be positive, got {sigma_sq}")
    g, d1, d2 = gaussian_kernels(math.sqrt(sigma_sq))
    I = np.asarray(I, dtype=float)
    return (
        _sep(I, g, g),
        _sep(I, g, d1),
        _sep(I, d1, g),
        _sep(I, d1, d1),
        _sep(I, g, d2),
        _sep(I, d2, g),
    )


def gradient_magnitudes(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.pad(np.asarray(plane, dtype=float), 1, mode="edge")
    c = p[1:-1, 1:-1]
    dx = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    dy = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    dxx = p[1:-1, 2:] - 2.0 * c + p[1:-1, :-2]
    dyy = p[2:, 1:-1] - 2.0 * c + p[:-2, 1:-1]
    return np.hypot(dx, dy), np.hypot(dxx, dyy)


def preprocess(raw: RawSample, sigma_sq: float = DEFAULT_SIGMA_SQ, size: int = PLANE_SIZE) -> ImagePlanes:
    rgb = np.asarray(raw.rgb)
    if rgb.ndim != 3 or rgb.shape[0] < 2 or rgb.shape[1] < 2:
        raise DataError(f"degenerate image '{raw.image_id}' with shape {rgb.shape}")
    rgb = rgb[..., :3].astype(float) / 255.0
    hue, sat, inten = rgb_to_hsi(rgb)

    def plane(arr, name):
        return rescale(resize_plane(arr, size), f"{raw.image_id}:{name}")

    planes = {
        "I": plane(rgb[..., 1], "green"),
        "Ir": plane(rgb[..., 0], "red"),
        "Ih": plane(hue, "hue"),
        "Is": plane(sat, "saturation"),
        "Ii": plane(inten, "intensity"),
    }
    grad1, grad2 = {}, {}
    for name in GRADIENT_PLANES:
        grad1[name], grad2[name] = gradient_magnitudes(planes[name])
    return ImagePlanes(
        gauss=gaussian_derivatives(planes["I"], sigma_sq),
        grad1=grad1,
        grad2=grad2,
        **planes,
    )
