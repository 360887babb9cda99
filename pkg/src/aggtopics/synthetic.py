"""Synthetic grouped corpora for experiments and tests.

Units draw tokens from a shared background vocabulary; a fraction of each
group's units additionally carries the group's marker terms. Aggregating by
group concentrates the markers into single documents, which is the effect
the toolkit is built to measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import RawUnit


@dataclass
class SyntheticCorpus:
    units: list[RawUnit]
    groups: list[str]
    markers: dict[str, list[str]]  # group -> its marker tokens

    def all_markers(self) -> list[str]:
        return [m for g in self.groups for m in self.markers[g]]


def make_grouped_units(
    n_groups: int = 20,
    units_per_group: int = 150,
    n_background_terms: int = 300,
    markers_per_group: int = 5,
    marked_fraction: float = 0.10,
    tokens_per_unit: int = 15,
    seed: int = 0,
) -> SyntheticCorpus:
    """Generate group-labeled units over a shared background vocabulary.

    Each unit has `tokens_per_unit` tokens drawn uniformly from the
    background; a `marked_fraction` share of every group's units carries
    the group's `markers_per_group` markers on top (one occurrence each).
    Metadata carries the group label and the unit's own id (so per-unit
    validity designs can address rows by entity key).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    background = [f"bg{i:03d}" for i in range(n_background_terms)]
    groups = [f"g{i:02d}" for i in range(n_groups)]
    markers = {g: [f"{g}marker{j}" for j in range(markers_per_group)] for g in groups}

    n_marked = int(round(marked_fraction * units_per_group))
    units: list[RawUnit] = []
    for g in groups:
        marked = set(rng.choice(units_per_group, size=n_marked, replace=False).tolist())
        for u in range(units_per_group):
            tokens = [background[i] for i in rng.integers(0, n_background_terms, tokens_per_unit)]
            if u in marked:
                tokens = tokens + markers[g]
            uid = f"{g}u{u:04d}"
            units.append(
                RawUnit(
                    unit_id=uid,
                    text=" ".join(tokens),
                    metadata={"group": [g], "unit": [uid]},
                )
            )
    return SyntheticCorpus(units=units, groups=groups, markers=markers)


def make_blobs(
    n_per_blob: int = 10,
    centers: list[tuple[float, float]] | None = None,
    scale: float = 0.05,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Well-separated 2-D Gaussian blobs: (points, blob labels)."""
    if centers is None:
        centers = [(0.0, 0.0), (5.0, 5.0), (-5.0, 5.0)]
    rng = np.random.Generator(np.random.PCG64(seed))
    points = []
    labels = []
    for b, (cx, cy) in enumerate(centers):
        pts = rng.normal(loc=(cx, cy), scale=scale, size=(n_per_blob, 2))
        points.append(pts)
        labels.extend([b] * n_per_blob)
    return np.vstack(points), np.array(labels, dtype=np.int64)
