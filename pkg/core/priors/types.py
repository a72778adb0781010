"""Depth prior value types and the per-view cache."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from core.errors import InvalidParameterError, ShapeError

logger = logging.getLogger(__name__)


class PriorSource(str, Enum):
    """Origin of a depth prior."""
    STEREO_SELF = "stereo_self"
    SFM_SPARSE = "sfm_sparse"
    EXTERNAL_ALIGNED = "external_aligned"
    GT_ORACLE = "gt_oracle"


@dataclass(frozen=True, eq=False)
class DepthPrior:
    """Per-view depth target with its validity mask."""
    depth: np.ndarray
    valid: np.ndarray
    source: PriorSource
    created_at: int = 0
    baseline_used: Optional[float] = None

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if depth.shape != valid.shape or depth.ndim != 2:
            raise ShapeError(f"Prior depth {depth.shape} and mask {valid.shape} must be equal 2D shapes")
        d = depth[valid]
        if not np.all(np.isfinite(d) & (d > 0)):
            raise InvalidParameterError("Prior depth must be positive and finite wherever valid")
        object.__setattr__(self, "depth", np.where(valid, depth, 0.0))
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.depth.shape

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    @property
    def valid_fraction(self) -> float:
        return self.valid_count / float(self.valid.size)


@dataclass
class PriorEvent:
    """One prior generation."""
    view_id: str
    iteration: int
    source: str
    baseline: Optional[float]
    valid_fraction: float


@dataclass
class PriorStats:
    """Generation history of the priors served during a run."""
    events: List[PriorEvent] = field(default_factory=list)
    cache_hits: int = 0
    failures: int = 0

    def created_at(self, view_id: str) -> List[int]:
        return [e.iteration for e in self.events if e.view_id == view_id]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "generated": len(self.events),
            "cache_hits": self.cache_hits,
            "failures": self.failures,
            "events": [e.__dict__.copy() for e in self.events],
        }


class PriorCache:
    """Map view id -> most recent DepthPrior, with generation bookkeeping."""

    def __init__(self):
        self._entries: Dict[str, DepthPrior] = {}
        self.stats = PriorStats()

    def __contains__(self, view_id: str) -> bool:
        return view_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, view_id: str) -> Optional[DepthPrior]:
        return self._entries.get(view_id)

    def is_fresh(self, view_id: str, iteration: int, refresh_interval: int) -> bool:
        """True when a cached entry exists and has not expired."""
        entry = self._entries.get(view_id)
        return entry is not None and iteration - entry.created_at < refresh_interval

    def put(self, view_id: str, prior: DepthPrior) -> None:
        self._entries[view_id] = prior
        self.stats.events.append(PriorEvent(
            view_id=view_id,
            iteration=prior.created_at,
            source=prior.source.value,
            baseline=prior.baseline_used,
            valid_fraction=prior.valid_fraction,
        ))

    def clear(self) -> None:
        self._entries.clear()
