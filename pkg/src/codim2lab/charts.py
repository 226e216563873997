"""Charts, deck transformations and atlases for immersions into R^{n+2}.

A chart is a smooth map from a box in R^n into ambient space, evaluated in
batched jet arithmetic.  An atlas bundles analysis charts (used for point
sampling and critical-point searches), integration charts (an a.e.-disjoint
cover used by product quadrature), deck transformations with their
equivariance contract f(tau(x)) = f(x), and topological metadata.

Charts are code, not data: serialization stores the gallery constructor
name plus parameters and rebuilds the atlas on load.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import json
import numpy as np

from . import jets
from .errors import DomainViolation


@dataclass
class Chart:
    """A parametrized immersion piece.

    ``map_jets(u, order)`` receives points of shape (B, n) and returns a list
    of ``ambient_dim`` jets.  ``box`` is the evaluation domain; ``sample_box``
    the sub-box used for seeding and integration (defaults to ``box``).
    ``periodic`` flags coordinates with period 2*pi-style wrapping handled by
    the atlas deck maps.
    """

    label: str
    n: int
    ambient_dim: int
    box: tuple
    map_jets: Callable
    sample_box: tuple | None = None
    periodic: tuple | None = None
    #: per-dimension Newton seed counts (critical point searches)
    newton_seeds: tuple | None = None
    #: per-dimension Gauss-Legendre node counts (volume quadrature)
    quad_counts: tuple | None = None
    #: region where converged critical points are accepted (defaults to box;
    #: shrink it where the chart approaches a coordinate singularity)
    accept_box: tuple | None = None

    def __post_init__(self):
        if self.sample_box is None:
            self.sample_box = self.box
        if self.accept_box is None:
            self.accept_box = self.box

    def accepts(self, u) -> np.ndarray:
        u = np.atleast_2d(u)
        lo = np.array([b[0] for b in self.accept_box])
        hi = np.array([b[1] for b in self.accept_box])
        return np.all((u >= lo) & (u <= hi), axis=1)

    def contains(self, u, margin: float = 0.0) -> np.ndarray:
        u = np.atleast_2d(u)
        lo = np.array([b[0] for b in self.box]) - margin
        hi = np.array([b[1] for b in self.box]) + margin
        return np.all((u >= lo) & (u <= hi), axis=1)

    def jets(self, u, order: int = 3) -> list:
        """Ambient jets at the points ``u`` (shape (B, n) or (n,))."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.n:
            raise DomainViolation(f"expected {self.n} coordinates, got {u.shape[1]}")
        return self.map_jets(u, order)

    def values(self, u) -> np.ndarray:
        """Ambient positions, shape (B, ambient_dim)."""
        out = self.jets(u, order=1)
        return np.stack([j.f for j in out], axis=1)

    def d1(self, u) -> np.ndarray:
        """Differential, shape (B, ambient_dim, n)."""
        out = self.jets(u, order=1)
        return np.stack([j.d1 for j in out], axis=1)

    def grid(self, counts: Sequence[int], interior: float = 1e-3) -> np.ndarray:
        """Regular product grid over sample_box, pulled slightly inside."""
        axes = []
        for (lo, hi), c in zip(self.sample_box, counts):
            pad = interior * (hi - lo)
            axes.append(np.linspace(lo + pad, hi - pad, int(c)))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([b[0] for b in self.sample_box])
        hi = np.array([b[1] for b in self.sample_box])
        return lo + (hi - lo) * rng.random((count, self.n))


@dataclass
class DeckMap:
    """Domain self-map with f(tau(x)) = f(x); isometric for the induced metric."""

    label: str
    chart_labels: tuple
    apply: Callable
    isometry: bool = True


@dataclass
class ExampleMetadata:
    """Expected topology and verdicts used by the Morse/tightness reports."""

    betti: tuple
    orientable: bool = True
    expected_tau: tuple | None = None
    expected_strata: str = ""
    #: minimal total critical-point count of a generic height function,
    #: the reference value for the tightness verdict
    tight_target: int | None = None


@dataclass
class Atlas:
    """Charts plus deck data and metadata for one gallery example."""

    name: str
    params: dict
    n: int
    charts: list = field(default_factory=list)
    quad_charts: list = field(default_factory=list)
    deck_maps: list = field(default_factory=list)
    metadata: ExampleMetadata | None = None
    #: measure weight per quad chart (1.0 = chart covers its region once)
    quad_weights: list | None = None

    @property
    def ambient_dim(self) -> int:
        return self.n + 2

    def sample_points(self, count: int, seed: int = 0):
        """Quasi-uniform parameter samples spread over the analysis charts.

        Returns a list of (chart, points) pairs; the split is proportional
        to chart count, which is adequate for property sweeps.
        """
        rng = np.random.default_rng(seed)
        per = max(1, count // max(len(self.charts), 1))
        out = []
        for chart in self.charts:
            out.append((chart, chart.sample(per, rng)))
        return out

    def diameter(self, seed: int = 0) -> float:
        pts = []
        for chart, u in self.sample_points(512, seed):
            pts.append(chart.values(u))
        pts = np.concatenate(pts, axis=0)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def deck_defect(self, samples: int = 1000, seed: int = 0) -> float:
        """Worst ambient mismatch ||f(tau(x)) - f(x)|| over sampled points."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for deck in self.deck_maps:
            for chart in self.charts:
                if deck.chart_labels and chart.label not in deck.chart_labels:
                    continue
                u = chart.sample(samples, rng)
                v = deck.apply(u)
                worst = max(worst, float(np.max(np.linalg.norm(
                    chart.values(u) - chart.values(v), axis=1))))
        return worst

    def to_json(self) -> str:
        return json.dumps({"example": self.name, "params": self.params})


def atlas_from_json(text: str) -> Atlas:
    """Rebuild an atlas from its JSON descriptor via the gallery registry."""
    from . import gallery

    doc = json.loads(text)
    try:
        ctor = gallery.REGISTRY[doc["example"]]
    except KeyError:
        raise ValueError(f"unknown gallery example {doc.get('example')!r}")
    return ctor(**doc.get("params", {}))


def map_from_components(components: Callable) -> Callable:
    """Adapter: build map_jets from a function of coordinate jets.

    ``components(vars) -> list of jets`` where ``vars`` are the seeded
    coordinate jets.  Keeps gallery chart definitions compact.
    """

    def map_jets(u, order):
        return components(jets.variables(u, order))

    return map_jets
