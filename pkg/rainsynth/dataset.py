"""
DepthDerain - Toy Dataset Generation
Procedural clear scenes with smooth synthetic depth, rendered through the
physical rain/fog model and written as rainy/clear/depth triples plus a manifest.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from imagecore import DepthMap, Image, ImageWriteError, save_depth, save_image
from imagecore.image_io import MIN_IMAGE_SIDE, quantize_like_storage
from .composer import compose_physical
from .errors import DatasetError, DatasetWriteError, InvalidParameterError
from .fog import FogParams, fog_from_depth
from .streaks import StreakParams, generate_streak_layer

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"
RAINY_DIR = "rainy"
CLEAR_DIR = "clear"
DEPTH_DIR = "depth"
DEPTH_SUFFIX = ".png16"

MANIFEST_COLUMNS = [
    "id", "height", "width",
    "beta", "atmospheric_light",
    "density", "length", "angle", "intensity", "angle_jitter", "length_jitter",
    "scene_seed", "streak_seed",
]


@dataclass
class ManifestEntry:
    id: str
    height: int
    width: int
    beta: float
    atmospheric_light: float
    density: float
    length: float
    angle: float
    intensity: float
    angle_jitter: float
    length_jitter: float
    scene_seed: int
    streak_seed: int

    def streak_params(self) -> StreakParams:
        return StreakParams(
            density=self.density,
            length=self.length,
            angle=self.angle,
            intensity=self.intensity,
            seed=self.streak_seed,
            angle_jitter=self.angle_jitter,
            length_jitter=self.length_jitter,
        )

    def fog_params(self) -> FogParams:
        return FogParams(beta=self.beta, atmospheric_light=self.atmospheric_light)

    def to_row(self) -> Dict[str, str]:
        return {key: repr(value) if isinstance(value, float) else str(value)
                for key, value in asdict(self).items()}

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> "ManifestEntry":
        try:
            return cls(
                id=row["id"],
                height=int(row["height"]),
                width=int(row["width"]),
                beta=float(row["beta"]),
                atmospheric_light=float(row["atmospheric_light"]),
                density=float(row["density"]),
                length=float(row["length"]),
                angle=float(row["angle"]),
                intensity=float(row["intensity"]),
                angle_jitter=float(row["angle_jitter"]),
                length_jitter=float(row["length_jitter"]),
                scene_seed=int(row["scene_seed"]),
                streak_seed=int(row["streak_seed"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"malformed manifest row {row}: {e}") from e


@dataclass
class DatasetManifest:
    root: Path
    entries: List[ManifestEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> List[str]:
        return [e.id for e in self.entries]

    def rainy_path(self, entry: ManifestEntry) -> Path:
        return self.root / RAINY_DIR / f"{entry.id}.png"

    def clear_path(self, entry: ManifestEntry) -> Path:
        return self.root / CLEAR_DIR / f"{entry.id}.png"

    def depth_path(self, entry: ManifestEntry) -> Path:
        return self.root / DEPTH_DIR / f"{entry.id}{DEPTH_SUFFIX}"

    def resolution(self) -> Tuple[int, int]:
        sizes = {(e.height, e.width) for e in self.entries}
        if len(sizes) != 1:
            raise DatasetError(f"dataset mixes resolutions: {sorted(sizes)}")
        return sizes.pop()

    def validate(self) -> None:
        """Raise DatasetError when any entry lacks one of its three files."""
        missing = []
        for entry in self.entries:
            for path in (self.rainy_path(entry), self.clear_path(entry), self.depth_path(entry)):
                if not path.is_file():
                    missing.append(str(path))
        if missing:
            raise DatasetError(
                f"{len(missing)} dataset file(s) missing, first: {missing[0]}"
            )


def load_manifest(root: Union[str, Path]) -> DatasetManifest:
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"no manifest at {manifest_path}")
    with open(manifest_path, newline="", encoding="utf-8") as f:
        entries = [ManifestEntry.from_row(row) for row in csv.DictReader(f)]
    if not entries:
        raise DatasetError(f"manifest {manifest_path} lists no images")
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"manifest {manifest_path} repeats image ids")
    return DatasetManifest(root=root, entries=entries)


def render_clear_scene(height: int, width: int, seed: int) -> Tuple[Image, DepthMap]:
    """
    Procedural outdoor-like scene: gradient sky over a receding ground plane
    with textured boxes and discs placed on the ground.

    Depth is 1.0 for sky, falls linearly from the horizon to the bottom edge,
    and each object takes the ground depth at its base.
    """
    rng = np.random.default_rng(seed)
    ys = np.linspace(0.0, 1.0, height)[:, None] * np.ones((1, width))
    xs = np.ones((height, 1)) * np.linspace(0.0, 1.0, width)[None, :]

    horizon = rng.uniform(0.3, 0.55)
    sky_top = rng.uniform(0.45, 0.8, size=3)
    sky_bottom = rng.uniform(0.7, 1.0, size=3)
    ground_far = rng.uniform(0.3, 0.6, size=3)
    ground_near = rng.uniform(0.05, 0.35, size=3)

    sky_t = np.clip(ys / horizon, 0.0, 1.0)[:, :, None]
    ground_t = np.clip((ys - horizon) / (1.0 - horizon), 0.0, 1.0)
    sky = sky_top + (sky_bottom - sky_top) * sky_t
    ground = ground_far + (ground_near - ground_far) * ground_t[:, :, None]
    is_sky = (ys < horizon)[:, :, None]
    pixels = np.where(is_sky, sky, ground)

    depth = np.where(ys < horizon, 1.0, 1.0 - 0.95 * ground_t)

    # Ground texture: faint stripes receding toward the horizon
    stripe = 0.04 * np.sin(2.0 * np.pi * (6.0 + 10.0 * ground_t) * xs + rng.uniform(0, 2 * np.pi))
    pixels = pixels + np.where(is_sky, 0.0, stripe[:, :, None])

    objects = []
    for _ in range(int(rng.integers(2, 6))):
        base = rng.uniform(horizon + 0.05, 1.0)
        nearness = (base - horizon) / (1.0 - horizon)
        size = 0.08 + 0.25 * nearness * rng.uniform(0.6, 1.0)
        objects.append((base, size, rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0, size=3),
                        bool(rng.integers(0, 2)), rng.uniform(4.0, 14.0)))

    # Painter's order: far objects first
    for base, size, cx, color, is_box, freq in sorted(objects, key=lambda o: o[0]):
        obj_depth = 1.0 - 0.95 * (base - horizon) / (1.0 - horizon)
        if is_box:
            inside = (np.abs(xs - cx) < size * 0.5) & (ys <= base) & (ys >= base - size)
        else:
            inside = (xs - cx) ** 2 + (ys - (base - size * 0.5)) ** 2 < (size * 0.5) ** 2
        texture = 0.06 * np.sin(2.0 * np.pi * freq * (xs + ys))
        pixels = np.where(inside[:, :, None], color + texture[:, :, None], pixels)
        depth = np.where(inside, obj_depth, depth)

    pixels = np.clip(pixels, 0.0, 1.0)
    depth = np.clip(depth, 0.0, 1.0)
    return Image(pixels), DepthMap(depth)


@dataclass
class _SynthesizedScene:
    entry: ManifestEntry
    clear: Image
    depth: DepthMap
    rainy: Image


def synthesize_scene(
    index: int,
    height: int,
    width: int,
    streak: StreakParams,
    fog: FogParams,
    seed: int,
) -> _SynthesizedScene:
    """
    Build one scene. Components are quantized to their stored precision before
    composing so the rainy image is reproducible from the files on disk.
    """
    scene_seed = seed + index
    clear, depth = render_clear_scene(height, width, scene_seed)
    clear = Image(quantize_like_storage(clear.pixels, 255.0))
    depth = DepthMap(quantize_like_storage(depth.values, 65535.0))

    streak_i = replace(streak, seed=streak.seed + scene_seed)
    streaks, _ = generate_streak_layer(height, width, streak_i)
    fog_layer = fog_from_depth(depth, fog)
    rainy = compose_physical(clear, streaks, fog_layer, fog.atmospheric_light)

    entry = ManifestEntry(
        id=f"{index:04d}",
        height=height,
        width=width,
        beta=float(fog.beta),
        atmospheric_light=float(fog.atmospheric_light),
        density=float(streak.density),
        length=float(streak.length),
        angle=float(streak.angle),
        intensity=float(streak.intensity),
        angle_jitter=float(streak.angle_jitter),
        length_jitter=float(streak.length_jitter),
        scene_seed=scene_seed,
        streak_seed=streak_i.seed,
    )
    return _SynthesizedScene(entry=entry, clear=clear, depth=depth, rainy=rainy)


def make_toy_dataset(
    n: int,
    height: int,
    width: int,
    streak: Optional[StreakParams] = None,
    fog: Optional[FogParams] = None,
    seed: int = 0,
    out_dir: Union[str, Path] = "data/toy",
    workers: int = 1,
) -> DatasetManifest:
    """
    Write n rainy/clear/depth triples and a manifest under out_dir.

    Image i uses scene seed (seed + i), so parallel generation writes exactly
    what serial generation would.
    """
    if n < 1:
        raise InvalidParameterError(f"dataset size must be at least 1, got {n}")
    if height < MIN_IMAGE_SIDE or width < MIN_IMAGE_SIDE:
        raise InvalidParameterError(
            f"images must be at least {MIN_IMAGE_SIDE}×{MIN_IMAGE_SIDE}, got {height}×{width}"
        )
    streak = streak or StreakParams()
    fog = fog or FogParams()
    root = Path(out_dir)

    try:
        for sub in (RAINY_DIR, CLEAR_DIR, DEPTH_DIR):
            (root / sub).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetWriteError(f"cannot create dataset directory {root}: {e}") from e

    manifest = DatasetManifest(root=root)

    def build(index: int) -> ManifestEntry:
        scene = synthesize_scene(index, height, width, streak, fog, seed)
        try:
            save_image(scene.rainy, manifest.rainy_path(scene.entry))
            save_image(scene.clear, manifest.clear_path(scene.entry))
            save_depth(scene.depth, manifest.depth_path(scene.entry))
        except ImageWriteError as e:
            raise DatasetWriteError(str(e)) from e
        return scene.entry

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(build, range(n)))
    else:
        entries = [build(i) for i in range(n)]
    manifest.entries = entries

    try:
        with open(root / MANIFEST_NAME, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=MANIFEST_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for entry in entries:
                writer.writerow(entry.to_row())
    except OSError as e:
        raise DatasetWriteError(f"cannot write manifest under {root}: {e}") from e

    logger.info("Wrote %d scene(s) at %dx%d to %s", n, height, width, root)
    return manifest
