"""
DepthDerain - Training Data
Manifest-backed paired dataset and the deterministic per-epoch batch order.
"""

import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, Union

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset, Sampler

from imagecore import load_depth, load_image
from netgraph import depth_to_tensor, image_to_tensor
from rainsynth import DatasetError, DatasetManifest, load_manifest

logger = logging.getLogger(__name__)


class PairedRainDataset(Dataset):
    """(rainy, clear, depth) tensors for every manifest entry, decoded once and cached."""

    def __init__(self, manifest: Union[DatasetManifest, str, Path], cache: bool = True):
        if not isinstance(manifest, DatasetManifest):
            manifest = load_manifest(manifest)
        manifest.validate()
        self.manifest = manifest
        self.height, self.width = manifest.resolution()
        self.cache = cache
        self._items: Dict[int, Dict[str, object]] = {}

    def __len__(self) -> int:
        return len(self.manifest)

    def __getitem__(self, index: int) -> Dict[str, object]:
        if index in self._items:
            return self._items[index]
        entry = self.manifest.entries[index]
        rainy = load_image(self.manifest.rainy_path(entry))
        clear = load_image(self.manifest.clear_path(entry))
        depth = load_depth(self.manifest.depth_path(entry))
        if not depth.matches(clear) or rainy.shape != clear.shape:
            raise DatasetError(f"entry {entry.id} has mismatched image and depth sizes")
        item = {
            "id": entry.id,
            "rainy": image_to_tensor(rainy)[0],
            "clear": image_to_tensor(clear)[0],
            "depth": depth_to_tensor(depth)[0],
        }
        if self.cache:
            self._items[index] = item
        return item

    def check_stride(self, stride: int) -> None:
        if self.height % stride or self.width % stride:
            raise DatasetError(
                f"dataset resolution {self.height}×{self.width} is not a multiple of the model stride {stride}"
            )

    def clear_batch(self) -> torch.Tensor:
        return torch.stack([self[i]["clear"] for i in range(len(self))])


class EpochShuffleSampler(Sampler):
    """
    Batch sampler whose order depends only on (seed, epoch).

    `set_epoch(epoch, start_batch)` positions it anywhere in the schedule so
    a resumed run sees the same batches an uninterrupted run would.
    """

    def __init__(self, size: int, batch_size: int, seed: int = 0):
        if size < 1:
            raise DatasetError("cannot sample from an empty dataset")
        self.size = size
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0
        self.start_batch = 0

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(self.size / self.batch_size)

    def order(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.seed, epoch]).permutation(self.size)

    def batches(self, epoch: int) -> List[List[int]]:
        order = self.order(epoch).tolist()
        return [order[i:i + self.batch_size] for i in range(0, self.size, self.batch_size)]

    def set_epoch(self, epoch: int, start_batch: int = 0) -> None:
        self.epoch = epoch
        self.start_batch = start_batch

    def __iter__(self) -> Iterator[List[int]]:
        yield from self.batches(self.epoch)[self.start_batch:]

    def __len__(self) -> int:
        return self.batches_per_epoch - self.start_batch


def make_loader(
    dataset: PairedRainDataset,
    sampler: EpochShuffleSampler,
    num_workers: int = 0,
) -> DataLoader:
    # Batch order comes from the sampler alone, so workers cannot reorder it.
    # A private generator keeps worker seeding off the global torch RNG.
    generator = torch.Generator().manual_seed(sampler.seed)
    return DataLoader(dataset, batch_sampler=sampler, num_workers=num_workers, generator=generator)


def split_batch(batch: Union[Dict[str, object], tuple, list]):
    """(rainy, clear, depth) from a collated dict or a plain triple."""
    if isinstance(batch, dict):
        return batch["rainy"], batch["clear"], batch["depth"]
    rainy, clear, depth = batch
    return rainy, clear, depth

