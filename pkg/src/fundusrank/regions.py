"""Candidate regions (classification samples) and their ground-truth labels.

Candidate extraction is intentionally simple: global thresholds, a
morphological top-hat for vessels, and 8-connected components with area
gates. Labels come from overlap with the annotation masks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage as ndi
from skimage.filters import threshold_otsu
from skimage.morphology import disk, white_tophat

from .prep import ImagePlanes

EIGHT = np.ones((3, 3), dtype=bool)

#: kind -> (fallback class for uncovered candidates, classes whose masks are checked)
LABEL_SCHEMES: dict[str, tuple[int, tuple[int, ...]]] = {
    "bright": (0, (1, 2)),
    "red": (3, (4, 5)),
    "vessel": (0, (1,)),
}

DIARETDB1_CLASSES = ("fp_bright", "hard_exudate", "cotton_wool_spot", "fp_red", "haemorrhage", "microaneurysm")
STARE_CLASSES = ("non_vessel", "vessel")


@dataclass(frozen=True)
class Region:
    region_id: str
    image_id: str
    pixels: np.ndarray  # (m, 2) int array of (row, col)
    kind: str
    label: int = -1

    @property
    def area(self) -> int:
        return len(self.pixels)

    def bbox(self) -> tuple[int, int, int, int]:
        r0, c0 = self.pixels.min(axis=0)
        r1, c1 = self.pixels.max(axis=0)
        return int(r0), int(c0), int(r1), int(c1)


def connected_regions(mask: np.ndarray, kind: str, image_id: str = "",
                      min_area: int = 1, max_area: int | None = None) -> list[Region]:
    """8-connected components of ``mask`` whose pixel count is within the gates."""
    labels, n = ndi.label(mask, structure=EIGHT)
    out = []
    for idx, sl in enumerate(ndi.find_objects(labels), start=1):
        if sl is None:
            continue
        local = np.argwhere(labels[sl] == idx)
        area = len(local)
        if area < min_area or (max_area is not None and area > max_area):
            continue
        pixels = local + np.array([sl[0].start, sl[1].start])
        out.append(Region(f"{image_id}:{kind}:{len(out):04d}", image_id, pixels, kind))
    return out


def _threshold_candidates(plane, kind, image_id, k, min_area, max_area, exclude=None, roi=None):
    vals = plane if roi is None else plane[roi]
    if vals.size == 0:
        return []
    mask = plane > vals.mean() + k * vals.std()
    if roi is not None:
        mask &= roi
    if exclude is not None:
        mask &= ~exclude
    return connected_regions(mask, kind, image_id, min_area, max_area)


def extract_bright_candidates(planes: ImagePlanes, image_id: str = "", k: float = 2.0,
                              min_area: int = 10, max_area: int = 5000,
                              roi: np.ndarray | None = None) -> list[Region]:
    """Bright candidates: green plane above mean + k std.

    With ``roi`` the statistics and the candidates are limited to that mask
    (whole plane by default).
    """
    return _threshold_candidates(planes.I, "bright", image_id, k, min_area, max_area, roi=roi)


def extract_red_candidates(planes: ImagePlanes, image_id: str = "", k: float = 2.0,
                           min_area: int = 10, max_area: int = 5000,
                           vessel_mask: np.ndarray | None = None,
                           roi: np.ndarray | None = None) -> list[Region]:
    """Dark candidates on the inverted green plane, outside the major-vessel mask.

    The vessel mask is computed with default settings when not supplied.
    """
    if vessel_mask is None:
        vessel_mask = extract_major_vessels(planes)
    return _threshold_candidates(1.0 - planes.I, "red", image_id, k, min_area, max_area, vessel_mask, roi)


def vessel_response(planes: ImagePlanes, radius: int = 8) -> np.ndarray:
    """White top-hat of the inverted green plane (dark thin structures light up)."""
    return white_tophat(1.0 - planes.I, disk(radius))


def _otsu(response: np.ndarray) -> float | None:
    if response.max() <= response.min():
        return None
    return float(threshold_otsu(response))


def extract_major_vessels(planes: ImagePlanes, radius: int = 8, min_area: int = 200,
                          response: np.ndarray | None = None) -> np.ndarray:
    if response is None:
        response = vessel_response(planes, radius)
    thr = _otsu(response)
    mask = np.zeros(response.shape, dtype=bool)
    if thr is None:
        return mask
    for region in connected_regions(response > thr, "major", min_area=min_area):
        mask[region.pixels[:, 0], region.pixels[:, 1]] = True
    return mask


def minor_vessel_candidates(planes: ImagePlanes, major_mask: np.ndarray, image_id: str = "",
                            radius: int = 8, min_area: int = 3, max_area: int = 200,
                            threshold_scale: float = 1.0,
                            response: np.ndarray | None = None) -> list[Region]:
    if response is None:
        response = vessel_response(planes, radius)
    thr = _otsu(response)
    if thr is None:
        return []
    mask = (response > thr * threshold_scale) & ~np.asarray(major_mask, dtype=bool)
    return connected_regions(mask, "vessel", image_id, min_area, max_area)


def assign_labels(regions: Sequence[Region], gt_masks: Mapping[int, np.ndarray],
                  overlap_threshold: float = 0.5,
                  schemes: Mapping[str, tuple[int, tuple[int, ...]]] = LABEL_SCHEMES) -> list[Region]:
    """Label each region by majority overlap with the ground-truth masks.

    ``gt_masks`` is keyed by class id and must already be at plane size
    (see :func:`fundusrank.prep.resize_mask`). A region takes the candidate class
    with the largest covered fraction among those reaching
    ``overlap_threshold`` (lower id wins exact ties); otherwise it gets the
    kind's fallback class.
    """
    masks = {cid: np.asarray(m, dtype=bool) for cid, m in gt_masks.items()}
    out = []
    for region in regions:
        fallback, candidates = schemes[region.kind]
        rows, cols = region.pixels[:, 0], region.pixels[:, 1]
        best, best_frac = fallback, -1.0
        for cid in sorted(candidates):
            mask = masks.get(cid)
            if mask is None:
                continue
            frac = float(mask[rows, cols].mean())
            if frac >= overlap_threshold and frac > best_frac:
                best, best_frac = cid, frac
        out.append(replace(region, label=best))
    return out


def candidate_mask(regions: Iterable[Region], shape: tuple[int, int]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for region in regions:
        mask[region.pixels[:, 0], region.pixels[:, 1]] = True
    return mask


def write_region_dump(regions: Sequence[Region], path) -> None:
    """Audit listing: one line per region with kind, label, size and bounding box."""
    lines = ["region_id,kind,label,pixel_count,row_min,col_min,row_max,col_max"]
    for r in regions:
        r0, c0, r1, c1 = r.bbox()
        lines.append(f"{r.region_id},{r.kind},{r.label},{r.area},{r0},{c0},{r1},{c1}")
    Path(path).write_text("\n".join(lines) + "\n")
