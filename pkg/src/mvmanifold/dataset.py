"""Multi-view dataset container, CSV ingestion and synthetic scenarios."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import AlignmentError, CapacityError, ConfigurationError, DatasetError, ParseError


@dataclass
class MultiViewDataset:
    """M feature matrices measured on the same N samples.

    Parameters
    ----------
    views : list of (N, p_m) arrays
    labels : (N,) int array, optional
        Ground-truth cluster ids.
    names : list of str, optional
        One identifier per view.
    """

    views: list
    labels: Optional[np.ndarray] = None
    names: Optional[list] = None

    def __post_init__(self):
        if len(self.views) < 1:
            raise DatasetError("a dataset needs at least one view")
        views = []
        for m, X in enumerate(self.views):
            X = np.asarray(X, dtype=float)
            if X.ndim == 1:
                X = X[:, None]
            if X.ndim != 2 or X.shape[1] < 1:
                raise DatasetError(f"view {m} must be a non-empty 2-D matrix, got shape {X.shape}")
            views.append(X)
        rows = {X.shape[0] for X in views}
        if len(rows) != 1:
            raise AlignmentError(f"views have differing row counts: {[X.shape[0] for X in views]}")
        n = rows.pop()
        if n < 2:
            raise DatasetError(f"need at least 2 samples, got {n}")
        self.views = views
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.shape[0] != n:
                raise AlignmentError(f"labels have {labels.size} entries, views have {n} rows")
            if not np.issubdtype(labels.dtype, np.integer):
                if not np.all(np.equal(np.mod(labels, 1), 0)):
                    raise DatasetError("labels must be integers")
                labels = labels.astype(int)
            self.labels = labels
        if self.names is not None:
            if len(self.names) != len(views):
                raise DatasetError("one name per view is required")
            self.names = list(self.names)

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list:
        return [X.shape[1] for X in self.views]

    @property
    def n_clusters(self) -> Optional[int]:
        return None if self.labels is None else len(np.unique(self.labels))

    def view_names(self) -> list:
        return self.names if self.names is not None else [f"view{m + 1}" for m in range(self.n_views)]

    def subset(self, rows) -> "MultiViewDataset":
        """Row subset, applied identically to every view and the labels."""
        rows = np.asarray(rows)
        labels = None if self.labels is None else self.labels[rows]
        return MultiViewDataset([X[rows] for X in self.views], labels, self.names)

    def select_views(self, idx: Sequence[int]) -> "MultiViewDataset":
        idx = list(idx)
        names = None if self.names is None else [self.names[i] for i in idx]
        return MultiViewDataset([self.views[i] for i in idx], self.labels, names)

    def concatenated(self) -> np.ndarray:
        return np.hstack(self.views)


# --------------------------------------------------------------------------- CSV I/O


def _read_matrix(path, header=False, delimiter=","):
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        if delimiter is None:
            lines = (line.split() for line in fh)
        else:
            lines = csv.reader(fh, delimiter=delimiter)
        for r, line in enumerate(lines, start=1):
            if header and r == 1:
                continue
            if not line or all(not cell.strip() for cell in line):
                continue
            values = []
            for c, cell in enumerate(line, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(path, r, c, f"non-numeric value {cell.strip()!r}") from None
            if rows and len(values) != len(rows[0]):
                raise ParseError(path, r, len(values), f"expected {len(rows[0])} columns, found {len(values)}")
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def load_multiview(view_paths, label_path=None, header=False, delimiter=",") -> MultiViewDataset:
    """Load aligned views from numeric CSV files.

    Rows are matched by position. ``delimiter=None`` splits on whitespace,
    which reads the raw UCI ``mfeat-*`` files directly.
    """
    if not view_paths:
        raise DatasetError("no view files given")
    views = [_read_matrix(p, header=header, delimiter=delimiter) for p in view_paths]
    counts = [X.shape[0] for X in views]
    if len(set(counts)) != 1:
        detail = ", ".join(f"{Path(p).name}={n}" for p, n in zip(view_paths, counts))
        raise AlignmentError(f"row counts differ across views: {detail}")
    labels = None
    if label_path is not None:
        raw = _read_matrix(label_path, header=header, delimiter=delimiter)
        if raw.shape[1] != 1:
            raise DatasetError(f"{label_path}: labels file must have a single column")
        raw = raw[:, 0]
        if not np.all(raw == np.round(raw)):
            raise DatasetError(f"{label_path}: labels must be integers")
        labels = raw.astype(int)
        if labels.size != counts[0]:
            raise AlignmentError(f"{label_path}: {labels.size} labels for {counts[0]} samples")
    names = [Path(p).stem for p in view_paths]
    return MultiViewDataset(views, labels, names)


def _natural_key(path):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", path.name)]


def load_directory(directory, header=False, delimiter=",") -> MultiViewDataset:
    """Every ``*.csv`` except ``labels.csv`` is a view, in natural filename order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"{directory} is not a directory")
    views = sorted((p for p in directory.glob("*.csv") if p.name != "labels.csv"), key=_natural_key)
    if not views:
        raise DatasetError(f"{directory}: no view CSV files found")
    labels = directory / "labels.csv"
    return load_multiview(views, labels if labels.exists() else None, header=header, delimiter=delimiter)


def save_dataset(ds: MultiViewDataset, directory) -> list:
    """Write ``view1.csv``..``viewM.csv`` (and ``labels.csv``); returns written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for m, X in enumerate(ds.views, start=1):
        path = directory / f"view{m}.csv"
        np.savetxt(path, X, delimiter=",", fmt="%.17g")
        written.append(path)
    if ds.labels is not None:
        path = directory / "labels.csv"
        np.savetxt(path, ds.labels, fmt="%d")
        written.append(path)
    return written


# --------------------------------------------------------------------------- synthetic scenarios

MEAN_SHIFT = 5.0

# Per-view cluster-to-group maps: group 0 has mean zero, group g > 0 is shifted
# by MEAN_SHIFT on coordinate block g.  A..E are clusters 0..4.
_MMDS_GROUPS = [
    (0, 0, 1),  # view 1 separates C
    (0, 1, 0),  # view 2 separates B
    (1, 0, 0),  # view 3 separates A
]
_MCS_GROUPS = [
    (1, 1, 0, 0, 0),  # view 1: {A, B} vs {C, D, E}
    (0, 1, 1, 0, 0),  # view 2: {B, C} vs {A, D, E}
    (0, 0, 0, 1, 2),  # view 3: D and E apart from each other and from {A, B, C}
]


@dataclass(frozen=True)
class SyntheticScenario:
    kind: str
    seed: int = 0
    n_samples: int = 300
    n_clusters: int = 3
    dims_per_view: tuple = field(default=(300, 300, 300))
    extra_noise: int = 0

    KINDS = ("MMDS", "NDS", "MCS", "NDS_EXTRA_NOISE")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigurationError(f"unknown scenario {self.kind!r}; expected one of {self.KINDS}")
        if self.n_clusters < 1 or self.n_samples % self.n_clusters:
            raise ConfigurationError("n_samples must be a positive multiple of n_clusters")
        if any(p < 1 for p in self.dims_per_view):
            raise ConfigurationError("every view needs at least one feature")
        groups = self.groups()
        if len(groups) != len(self.dims_per_view):
            raise ConfigurationError(f"{self.kind} has {len(groups)} views, got {len(self.dims_per_view)} dims")
        if any(len(g) != self.n_clusters for g in groups):
            raise ConfigurationError(f"{self.kind} is defined for a fixed cluster count")
        if self.kind == "NDS_EXTRA_NOISE" and self.extra_noise < 1:
            raise ConfigurationError("NDS_EXTRA_NOISE needs at least one extra noisy view")

    @classmethod
    def mmds(cls, seed=0):
        return cls("MMDS", seed, 300, 3, (300, 300, 300))

    @classmethod
    def nds(cls, seed=0):
        return cls("NDS", seed, 300, 3, (100,) * 4)

    @classmethod
    def mcs(cls, seed=0):
        return cls("MCS", seed, 500, 5, (100,) * 3)

    @classmethod
    def nds_extra_noise(cls, count, seed=0):
        return cls("NDS_EXTRA_NOISE", seed, 300, 3, (100,) * (4 + count), count)

    @classmethod
    def from_name(cls, name, seed=0):
        """Parse ``mmds``, ``nds``, ``mcs`` or ``nds+<c>``."""
        key = name.strip().lower()
        if key == "mmds":
            return cls.mmds(seed)
        if key == "nds":
            return cls.nds(seed)
        if key == "mcs":
            return cls.mcs(seed)
        match = re.fullmatch(r"nds\+(\d+)", key)
        if match:
            return cls.nds_extra_noise(int(match.group(1)), seed)
        raise ConfigurationError(f"unknown scenario name {name!r}")

    def groups(self):
        if self.kind == "MMDS":
            return list(_MMDS_GROUPS)
        if self.kind == "MCS":
            return list(_MCS_GROUPS)
        noise = (0,) * self.n_clusters
        return list(_MMDS_GROUPS) + [noise] * (1 + (self.extra_noise if self.kind == "NDS_EXTRA_NOISE" else 0))


def cluster_means(groups, p, shift=MEAN_SHIFT):
    """(k, p) mean matrix for one view given its cluster-to-group map."""
    block = math.ceil(p / 3)
    means = np.zeros((len(groups), p))
    for c, g in enumerate(groups):
        if g > 0:
            lo = (g - 1) * block
            if lo >= p:
                raise ConfigurationError(f"view with {p} features cannot hold coordinate block {g}")
            means[c, lo:lo + block] = shift
    return means


def random_polynomial(rng):
    """Integer coefficients in [1, 5] for powers 0..degree, degree in {2, 3, 4}."""
    degree = int(rng.integers(2, 5))
    return rng.integers(1, 6, size=degree + 1).astype(float)


def generate_synthetic(scenario: SyntheticScenario, return_params=False):
    """Draw a scenario: X = MVN(mu_m, I) + MVN(0, I), then a per-view polynomial.

    Clusters are balanced and stored in contiguous blocks of rows. With
    ``return_params`` the per-view means and polynomial coefficients (lowest
    power first) are returned as well.
    """
    rng = np.random.default_rng(scenario.seed)
    n, k = scenario.n_samples, scenario.n_clusters
    labels = np.repeat(np.arange(k), n // k)
    views, params = [], []
    for groups, p in zip(scenario.groups(), scenario.dims_per_view):
        means = cluster_means(groups, p)
        signal = means[labels] + rng.standard_normal((n, p))
        noise = rng.standard_normal((n, p))
        coeffs = random_polynomial(rng)
        views.append(np.polynomial.polynomial.polyval(signal + noise, coeffs))
        params.append({"means": means, "coefficients": coeffs})
    names = [f"view{m + 1}" for m in range(len(views))]
    ds = MultiViewDataset(views, labels, names)
    return (ds, params) if return_params else ds


def balance_subset(ds: MultiViewDataset, per_cluster: dict, seed=0) -> MultiViewDataset:
    """Subsample clusters without replacement; clusters not listed are kept whole.

    Selected rows keep their original relative order.
    """
    if ds.labels is None:
        raise DatasetError("balance_subset needs labels")
    rng = np.random.default_rng(seed)
    keep = []
    present = set(np.unique(ds.labels).tolist())
    for c in per_cluster:
        if c not in present:
            raise DatasetError(f"cluster {c!r} does not occur in the labels")
    for c in sorted(present):
        members = np.flatnonzero(ds.labels == c)
        if c in per_cluster:
            want = int(per_cluster[c])
            if want > members.size:
                raise CapacityError(f"cluster {c}: requested {want}, only {members.size} available")
            if want < 0:
                raise DatasetError(f"cluster {c}: negative count")
            members = rng.choice(members, size=want, replace=False)
        keep.append(members)
    rows = np.sort(np.concatenate(keep))
    return ds.subset(rows)
