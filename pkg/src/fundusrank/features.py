"""Per-region feature catalog.

Column layout (fixed, see ``feature_names``):

===========================  =====  ===============================================
category                     count  content
===========================  =====  ===============================================
structural                   14     shape descriptors of the pixel set
gaussian                     12     mean/variance in the 6 Gaussian derivative images
regional                     16     mean/min/max/std in I, Ir, Ih, Ii
gradient                     24     max/min/mean of 1st/2nd gradient magnitude of I, Ir, Ih, Is
gradient_in_intensity        24     same statistics of plane * gradient magnitude
pixel_window                 4      3x3 max, 5x5 mean/std, 5x5 candidate count (region mean)
pixel_intensity              4      region mean of Gx, Gy, Gxx, Gyy
===========================  =====  ===============================================

``REGION66`` uses the first four categories, ``FULL98`` all seven.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage as ndi
from scipy.spatial import ConvexHull

from .prep import GAUSS_NAMES, GRADIENT_PLANES, ImagePlanes
from .regions import Region, candidate_mask
from .table import FeatureTable

STRUCTURAL_NAMES = (
    "area", "bbox_width", "bbox_height", "convex_area", "filled_area", "euler_number",
    "extent", "major_axis_length", "minor_axis_length", "orientation", "eccentricity",
    "perimeter", "solidity", "compactness",
)
REGIONAL_PLANES = ("I", "Ir", "Ih", "Ii")
PIXEL_DERIVATIVES = (1, 2, 4, 5)  # Gx, Gy, Gxx, Gyy


def _names():
    cats = {
        "structural": [f"struct_{n}" for n in STRUCTURAL_NAMES],
        "gaussian": [f"gauss_{g}_{s}" for g in GAUSS_NAMES for s in ("mean", "var")],
        "regional": [f"region_{p}_{s}" for p in REGIONAL_PLANES for s in ("mean", "min", "max", "std")],
        "gradient": [f"grad{o}_{p}_{s}" for p in GRADIENT_PLANES for o in (1, 2)
                     for s in ("max", "min", "mean")],
        "gradient_in_intensity": [f"gradint{o}_{p}_{s}" for p in GRADIENT_PLANES for o in (1, 2)
                                  for s in ("max", "min", "mean")],
        "pixel_window": ["win_max3", "win_mean5", "win_std5", "win_neighbors5"],
        "pixel_intensity": [f"pix_{GAUSS_NAMES[i]}" for i in PIXEL_DERIVATIVES],
    }
    return cats


CATEGORY_NAMES: dict[str, list[str]] = _names()
CATEGORY_SIZES = {k: len(v) for k, v in CATEGORY_NAMES.items()}
PROFILES = {
    "REGION66": ("structural", "gaussian", "regional", "gradient"),
    "FULL98": ("structural", "gaussian", "regional", "gradient",
               "gradient_in_intensity", "pixel_window", "pixel_intensity"),
}


def feature_names(profile: str) -> list[str]:
    return [name for cat in _profile(profile) for name in CATEGORY_NAMES[cat]]


def feature_categories(profile: str) -> list[str]:
    """Category of each column, aligned with :func:`feature_names`."""
    return [cat for cat in _profile(profile) for _ in CATEGORY_NAMES[cat]]


def _profile(profile: str):
    try:
        return PROFILES[profile.upper()]
    except KeyError:
        raise ValueError(f"unknown feature profile {profile!r}; expected one of {sorted(PROFILES)}") from None


def _pixels(region: Region) -> np.ndarray:
    # canonical order keeps every reduction independent of pixel-list order
    px = np.asarray(region.pixels, dtype=int).reshape(-1, 2)
    if len(px) == 0:
        raise ValueError(f"region {region.region_id!r} has no pixels")
    return px[np.lexsort((px[:, 1], px[:, 0]))]


_CROSS = ndi.generate_binary_structure(2, 1)


def structural_features(region: Region) -> np.ndarray:
    px = _pixels(region)
    area = len(px)
    r0, c0 = px.min(axis=0)
    height, width = px.max(axis=0) - (r0, c0) + 1
    local = np.zeros((height + 2, width + 2), dtype=bool)
    local[px[:, 0] - r0 + 1, px[:, 1] - c0 + 1] = True

    corners = (px[:, None, :] - (r0, c0) + np.array([[0, 0], [0, 1], [1, 0], [1, 1]])).reshape(-1, 2)
    corners = np.unique(corners, axis=0)
    hull = corners[ConvexHull(corners.astype(float)).vertices]
    # shoelace on integer vertices: exact and translation invariant
    x, y = hull[:, 1], hull[:, 0]
    convex_area = abs(int(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) / 2.0

    filled = ndi.binary_fill_holes(local, structure=_CROSS)
    _, n_objects = ndi.label(local, structure=np.ones((3, 3)))
    _, n_holes = ndi.label(filled & ~local, structure=_CROSS)
    euler = n_objects - n_holes

    rows = (px[:, 0] - r0).astype(float)
    cols = (px[:, 1] - c0).astype(float)
    dr, dc = rows - rows.mean(), cols - cols.mean()
    mu_rr, mu_cc, mu_rc = np.mean(dr * dr), np.mean(dc * dc), np.mean(dr * dc)
    half_trace = 0.5 * (mu_rr + mu_cc)
    root = math.sqrt(max(0.25 * (mu_cc - mu_rr) ** 2 + mu_rc**2, 0.0))
    lam1, lam2 = half_trace + root, max(half_trace - root, 0.0)
    major, minor = 4.0 * math.sqrt(lam1), 4.0 * math.sqrt(lam2)
    orientation = 0.5 * math.atan2(2.0 * mu_rc, mu_cc - mu_rr)
    eccentricity = math.sqrt(max(1.0 - lam2 / lam1, 0.0)) if lam1 > 0 else 0.0

    perimeter = int(np.count_nonzero(local & ~ndi.binary_erosion(local, structure=_CROSS)))
    compactness = perimeter**2 / (4.0 * math.pi * area) if area > 1 else 0.0
    return np.array([
        area, width, height, convex_area, filled.sum(), euler,
        area / float(width * height), major, minor, orientation, eccentricity,
        perimeter, area / convex_area, compactness,
    ], dtype=float)


def gaussian_coeff_features(region: Region, planes: ImagePlanes) -> np.ndarray:
    px = _pixels(region)
    out = []
    for img in planes.gauss:
        v = img[px[:, 0], px[:, 1]]
        out += [v.mean(), v.var()]
    return np.array(out)


def regional_intensity_features(region: Region, planes: ImagePlanes) -> np.ndarray:
    px = _pixels(region)
    out = []
    for name in REGIONAL_PLANES:
        v = planes.plane(name)[px[:, 0], px[:, 1]]
        out += [v.mean(), v.min(), v.max(), v.std()]
    return np.array(out)


def _max_min_mean(v):
    return [v.max(), v.min(), v.mean()]


def gradient_intensity_features(region: Region, planes: ImagePlanes) -> np.ndarray:
    px = _pixels(region)
    out = []
    for name in GRADIENT_PLANES:
        for grad in (planes.grad1, planes.grad2):
            out += _max_min_mean(grad[name][px[:, 0], px[:, 1]])
    return np.array(out)


def gradient_in_intensity_features(region: Region, planes: ImagePlanes) -> np.ndarray:
    px = _pixels(region)
    out = []
    for name in GRADIENT_PLANES:
        base = planes.plane(name)[px[:, 0], px[:, 1]]
        for grad in (planes.grad1, planes.grad2):
            out += _max_min_mean(base * grad[name][px[:, 0], px[:, 1]])
    return np.array(out)


def _window(px, radius, shape):
    d = np.arange(-radius, radius + 1)
    offsets = np.stack(np.meshgrid(d, d, indexing="ij"), axis=-1).reshape(-1, 2)
    coords = px[:, None, :] + offsets[None, :, :]
    valid = ((coords >= 0) & (coords < np.array(shape))).all(axis=2)
    coords = np.clip(coords, 0, np.array(shape) - 1)
    return coords[..., 0], coords[..., 1], valid


def pixel_window_features(region: Region, planes: ImagePlanes, cand_mask: np.ndarray) -> np.ndarray:
    """Window statistics of ``I`` around each region pixel, averaged over the region.

    Windows are clipped at the image border.
    """
    px = _pixels(region)
    I = planes.I
    r3, c3, v3 = _window(px, 1, I.shape)
    win_max = np.where(v3, I[r3, c3], -np.inf).max(axis=1)
    r5, c5, v5 = _window(px, 2, I.shape)
    vals = np.where(v5, I[r5, c5], 0.0)
    count = v5.sum(axis=1)
    mean = vals.sum(axis=1) / count
    var = np.where(v5, (I[r5, c5] - mean[:, None]) ** 2, 0.0).sum(axis=1) / count
    neighbors = (np.asarray(cand_mask, dtype=bool)[r5, c5] & v5).sum(axis=1)
    return np.array([win_max.mean(), mean.mean(), np.sqrt(var).mean(), neighbors.mean()])


def pixel_intensity_features(region: Region, planes: ImagePlanes) -> np.ndarray:
    px = _pixels(region)
    return np.array([planes.gauss[i][px[:, 0], px[:, 1]].mean() for i in PIXEL_DERIVATIVES])


def region_features(region: Region, planes: ImagePlanes, profile: str,
                    cand_mask: np.ndarray | None = None) -> np.ndarray:
    parts = [
        structural_features(region),
        gaussian_coeff_features(region, planes),
        regional_intensity_features(region, planes),
        gradient_intensity_features(region, planes),
    ]
    if _profile(profile) == PROFILES["FULL98"]:
        if cand_mask is None:
            cand_mask = candidate_mask([region], planes.shape)
        parts += [
            gradient_in_intensity_features(region, planes),
            pixel_window_features(region, planes, cand_mask),
            pixel_intensity_features(region, planes),
        ]
    return np.concatenate(parts)


def build_feature_table(samples: Iterable[tuple[ImagePlanes, Sequence[Region]]], profile: str,
                        dataset_tag: str = "") -> FeatureTable:
    """Assemble one row per labeled region, in the order given.

    For ``FULL98`` the neighbor-count feature counts pixels of any candidate
    region of the same image.
    """
    names = feature_names(profile)
    rows, labels, sids, iids = [], [], [], []
    for planes, regions in samples:
        cmask = candidate_mask(regions, planes.shape)
        for region in regions:
            if region.label < 0:
                raise ValueError(f"region {region.region_id!r} is unlabeled")
            rows.append(region_features(region, planes, profile, cmask))
            labels.append(region.label)
            sids.append(region.region_id)
            iids.append(region.image_id)
    if not rows:
        raise ValueError("no samples")
    return FeatureTable(np.vstack(rows), names, labels, sids, iids, dataset_tag,
                        {"profile": profile.upper()})
