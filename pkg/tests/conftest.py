import os
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from fundusrank.regions import DIARETDB1_CLASSES, STARE_CLASSES


def _disc(h, w, rng, border=False):
    yy, xx = np.mgrid[0:h, 0:w]
    r = np.hypot(yy - h / 2, xx - w / 2) / (0.48 * min(h, w))
    base = np.clip(1.0 - 0.3 * r ** 2, 0.5, 1)
    inside = r < 1 if border else np.ones_like(r, dtype=bool)
    base = base * inside
    rgb = np.stack([0.75 * base, 0.38 * base, 0.15 * base], axis=-1)
    rgb += rng.normal(0, 0.01, rgb.shape) * inside[..., None]
    return rgb, yy, xx


def _vessels(rgb, yy, xx, rng, n=6, width=3.0):
    h, w = yy.shape
    mask = np.zeros((h, w), bool)
    for i in range(n):
        ang = rng.uniform(0, np.pi)
        c = np.array([h / 2, w / 2]) + rng.normal(0, h / 10, 2)
        d = np.abs((yy - c[0]) * np.cos(ang) - (xx - c[1]) * np.sin(ang))
        mask |= d < (width if i % 2 == 0 else width / 2.5)
    rgb[mask] *= 0.6
    return mask


def _spots(rgb, yy, xx, rng, n, radius, color, taken):
    mask = np.zeros(yy.shape, bool)
    h, w = yy.shape
    for _ in range(n):
        for _try in range(50):
            cy, cx = rng.uniform(0.25, 0.75, 2) * (h, w)
            r = rng.uniform(*radius)
            spot = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
            if not (spot & taken).any():
                break
        rgb[spot] = color
        mask |= spot
        taken |= spot
    return mask


def make_fundus_dataset(root: Path, kind: str = "diaretdb1", n_images: int = 3, size: int = 240,
                        seed: int = 0, border: bool = False, extra: str = "") -> Path:
    """Fundus-like images with annotation masks plus a dataset config; returns the config path."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    classes = DIARETDB1_CLASSES if kind == "diaretdb1" else STARE_CLASSES
    mask_classes = ("hard_exudate", "cotton_wool_spot", "haemorrhage", "microaneurysm") if kind == "diaretdb1" \
        else ("vessel",)
    for c in mask_classes:
        (root / c).mkdir(exist_ok=True)
    for i in range(n_images):
        rgb, yy, xx = _disc(size, size, rng, border)
        vessel = _vessels(rgb, yy, xx, rng)
        masks = {}
        if kind == "diaretdb1":
            taken = vessel.copy()
            masks["hard_exudate"] = _spots(rgb, yy, xx, rng, 6, (2.5, 5), (0.95, 0.9, 0.45), taken)
            masks["cotton_wool_spot"] = _spots(rgb, yy, xx, rng, 3, (5, 8), (0.9, 0.85, 0.7), taken)
            masks["haemorrhage"] = _spots(rgb, yy, xx, rng, 5, (4, 7), (0.35, 0.05, 0.03), taken)
            masks["microaneurysm"] = _spots(rgb, yy, xx, rng, 6, (1.5, 2.5), (0.4, 0.08, 0.05), taken)
            # unannotated distractors become false-positive candidates
            _spots(rgb, yy, xx, rng, 3, (3, 5), (0.9, 0.8, 0.5), taken)
            _spots(rgb, yy, xx, rng, 3, (3, 5), (0.3, 0.06, 0.04), taken)
        else:
            frag = np.zeros_like(vessel)
            for _ in range(14):
                cy, cx = rng.uniform(0.15, 0.85, 2) * size
                ang, length = rng.uniform(0, np.pi), rng.uniform(5, 10)
                t = np.linspace(-length / 2, length / 2, 40)
                rr = np.clip(np.round(cy + t * np.sin(ang)).astype(int), 0, size - 1)
                cc = np.clip(np.round(cx + t * np.cos(ang)).astype(int), 0, size - 1)
                frag[rr, cc] = True
            frag &= ~vessel
            rgb[frag] *= 0.55
            _spots(rgb, yy, xx, rng, 14, (1.0, 1.8), (0.45, 0.2, 0.08), vessel | frag)
            masks["vessel"] = vessel | frag
        img = (np.clip(rgb, 0, 1) * 255).astype(np.uint8)
        stem = f"img{i:03d}"
        Image.fromarray(img).save(root / "images" / f"{stem}.png")
        for c, m in masks.items():
            Image.fromarray((m * 255).astype(np.uint8)).save(root / c / f"{stem}.png")
    lines = ["images_dir = images", f"classes = {', '.join(classes)}",
             f"profile = {'REGION66' if kind == 'diaretdb1' else 'FULL98'}", f"tag = {kind}"]
    lines += [f"mask_dir.{c} = {c}" for c in mask_classes]
    if extra:
        lines.append(extra)
    cfg = root / "dataset.cfg"
    cfg.write_text("\n".join(lines) + "\n")
    return cfg


@pytest.fixture
def fundus_dataset(tmp_path):
    return make_fundus_dataset


@pytest.fixture(autouse=True)
def _no_output_env(monkeypatch):
    monkeypatch.delenv("FUNDUSRANK_OUTPUT_DIR", raising=False)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
