"""Image-to-table ingestion: planes, candidate regions, labels, features."""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import regions as rg
from .errors import DataError
from .features import build_feature_table
from .prep import DatasetConfig, RawSample, load_dataset, preprocess, read_dataset_config, resize_mask
from .table import FeatureTable

logger = logging.getLogger(__name__)


@dataclass
class ExtractParams:
    """Candidate-extraction knobs; any field can be set in the dataset config."""

    sigma_sq: float = 8.0
    candidate_k: float = 2.0
    lesion_min_area: int = 10
    lesion_max_area: int = 5000
    tophat_radius: int = 8
    major_min_area: int = 200
    minor_min_area: int = 3
    minor_max_area: int = 200
    minor_threshold_scale: float = 1.0
    overlap_threshold: float = 0.5
    # > 0 limits lesion thresholding to pixels whose HSI intensity exceeds it
    fov_threshold: float = 0.0

    @classmethod
    def from_options(cls, options: dict) -> "ExtractParams":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(options) - names)
        if unknown:
            raise DataError(f"unknown dataset config key(s): {unknown}")
        kwargs = {}
        for f in fields(cls):
            if f.name in options:
                kwargs[f.name] = type(f.default)(options[f.name])
        return cls(**kwargs)


def _class_masks(raw: RawSample, cfg: DatasetConfig, shape) -> dict[int, np.ndarray]:
    return {cfg.class_id(name): resize_mask(mask, shape[0]) for name, mask in raw.gt_masks.items()}


def _check_scheme(cfg: DatasetConfig, profile: str):
    expected = {"REGION66": {1, 2, 4, 5}, "FULL98": {1}}[profile]
    n_classes = {"REGION66": 6, "FULL98": 2}[profile]
    got = {cfg.class_id(name) for name in cfg.mask_dirs}
    if len(cfg.classes) != n_classes or not got <= expected:
        raise DataError(
            f"{cfg.path}: profile {profile} expects {n_classes} classes with masks for class ids "
            f"{sorted(expected)}; got classes {cfg.classes} with masks for {sorted(got)}"
        )


def image_regions(raw: RawSample, cfg: DatasetConfig, profile: str, params: ExtractParams):
    """Planes and labeled candidate regions of one image."""
    planes = preprocess(raw, params.sigma_sq)
    masks = _class_masks(raw, cfg, planes.shape)
    response = rg.vessel_response(planes, params.tophat_radius)
    major = rg.extract_major_vessels(planes, params.tophat_radius, params.major_min_area, response)
    if profile == "REGION66":
        roi = planes.Ii > params.fov_threshold if params.fov_threshold > 0 else None
        found = rg.extract_bright_candidates(planes, raw.image_id, params.candidate_k,
                                             params.lesion_min_area, params.lesion_max_area, roi)
        found += rg.extract_red_candidates(planes, raw.image_id, params.candidate_k,
                                           params.lesion_min_area, params.lesion_max_area, major, roi)
    else:
        found = rg.minor_vessel_candidates(planes, major, raw.image_id, params.tophat_radius,
                                           params.minor_min_area, params.minor_max_area,
                                           params.minor_threshold_scale, response)
    return planes, rg.assign_labels(found, masks, params.overlap_threshold)


def ingest(config_path, profile: str | None = None, region_dump_dir=None) -> FeatureTable:
    cfg = read_dataset_config(config_path)
    profile = (profile or cfg.profile or "").upper()
    if profile not in ("REGION66", "FULL98"):
        raise DataError(f"feature profile must be REGION66 or FULL98 (config key 'profile'), got {profile!r}")
    _check_scheme(cfg, profile)
    params = ExtractParams.from_options(cfg.options)
    samples = load_dataset(config_path)
    if not samples:
        raise DataError("no samples")

    def per_image():
        for raw in samples:
            planes, regions = image_regions(raw, cfg, profile, params)
            logger.info("%s: %d candidate regions", raw.image_id, len(regions))
            if region_dump_dir is not None:
                Path(region_dump_dir).mkdir(parents=True, exist_ok=True)
                rg.write_region_dump(regions, Path(region_dump_dir) / f"{raw.image_id}.regions.csv")
            yield planes, regions

    try:
        table = build_feature_table(per_image(), profile, cfg.tag or cfg.path.stem)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    table.meta["class_names"] = list(cfg.classes)
    return table
