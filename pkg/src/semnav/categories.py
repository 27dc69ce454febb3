"""Object category registry and the co-occurrence prior shared by the scripted oracle.

The prior is a deterministic stand-in for common-sense room semantics: categories
that usually share a room get a high prior, everything else a low floor. Values
are plain constants so scores computed from them can be checked by hand.
"""

from __future__ import annotations

import numpy as np

# Fixed category set C for the default scene collection. The first six are the
# classic object-goal categories; the rest provide room context for scoring.
DEFAULT_CATEGORIES: tuple[str, ...] = (
    "chair",
    "bed",
    "plant",
    "toilet",
    "tv",
    "sofa",
    "table",
    "sink",
    "shower",
    "cabinet",
    "refrigerator",
    "lamp",
)

GOAL_CATEGORIES: tuple[str, ...] = ("chair", "bed", "plant", "toilet", "tv", "sofa")

# Room groupings used to build the co-occurrence prior. A category may belong
# to several rooms (e.g. sink).
_ROOMS: dict[str, tuple[str, ...]] = {
    "bathroom": ("toilet", "sink", "shower"),
    "bedroom": ("bed", "lamp", "cabinet"),
    "living": ("sofa", "tv", "table", "plant", "chair", "lamp"),
    "kitchen": ("refrigerator", "sink", "cabinet", "table", "chair"),
}

SAME_ROOM_PRIOR = 0.7
CROSS_ROOM_PRIOR = 0.15
SELF_PRIOR = 1.0


def _build_cooccurrence(categories: tuple[str, ...]) -> np.ndarray:
    k = len(categories)
    index = {c: i for i, c in enumerate(categories)}
    table = np.full((k, k), CROSS_ROOM_PRIOR)
    for members in _ROOMS.values():
        present = [index[c] for c in members if c in index]
        for a in present:
            for b in present:
                if a != b:
                    table[a, b] = SAME_ROOM_PRIOR
    np.fill_diagonal(table, SELF_PRIOR)
    return table


COOCCURRENCE: np.ndarray = _build_cooccurrence(DEFAULT_CATEGORIES)


def cooccurrence_prior(category: str, goal: str, categories: tuple[str, ...] = DEFAULT_CATEGORIES) -> float:
    """Prior that seeing `category` indicates the room also holds `goal`."""
    if categories is DEFAULT_CATEGORIES:
        table = COOCCURRENCE
    else:
        table = _build_cooccurrence(categories)
    return float(table[categories.index(category), categories.index(goal)])
