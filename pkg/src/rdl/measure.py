"""Finitely supported measures over labeled points, hypothesis matrices, and data loading."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .losses import Loss

__all__ = [
    "DataError",
    "LabeledPoint",
    "FiniteMeasure",
    "HypothesisSet",
    "Problem",
    "LoadedData",
    "mirror_indices",
    "margins",
    "restrict",
    "conditional",
    "sample",
    "sample_problem",
    "subset_problem",
    "load_libsvm",
    "load_csv",
]


class DataError(ValueError):
    """Malformed or out-of-contract input data."""


@dataclass(frozen=True, eq=False)
class LabeledPoint:
    x: np.ndarray  # 1-d feature vector
    y: int         # label in {-1, +1}
    id: int        # stable index assigned at load/construction time

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise DataError(f"label must be -1 or +1, got {self.y}")


def _key(x: np.ndarray, y: int) -> tuple:
    return (x.tobytes(), y)


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Nonnegative masses on a finite list of labeled points.

    Duplicate (x, y) pairs are merged at construction (masses added, first id
    kept); use the ``build`` constructor for anything user-facing.
    """

    points: tuple[LabeledPoint, ...]
    masses: np.ndarray
    total_mass: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        object.__setattr__(self, "masses", masses)
        if len(self.points) != masses.shape[0]:
            raise DataError("points and masses length mismatch")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise DataError("masses must be finite and nonnegative")
        total = float(masses.sum())
        if self.total_mass is None:
            object.__setattr__(self, "total_mass", total)
        elif abs(self.total_mass - total) > 1e-12 * max(1.0, total):
            raise DataError("total_mass inconsistent with masses")

    @classmethod
    def build(cls, xs, ys, masses, ids=None) -> "FiniteMeasure":
        xs = [np.ascontiguousarray(x, dtype=float) for x in np.atleast_2d(np.asarray(xs, dtype=float))]
        ys = [int(y) for y in np.asarray(ys).ravel()]
        masses = np.asarray(masses, dtype=float).ravel()
        if not (len(xs) == len(ys) == masses.shape[0]):
            raise DataError("xs, ys, masses length mismatch")
        if ids is None:
            ids = list(range(len(xs)))
        merged: dict[tuple, int] = {}
        points: list[LabeledPoint] = []
        out_mass: list[float] = []
        for x, y, m, pid in zip(xs, ys, masses, ids):
            k = _key(x, y)
            if k in merged:
                out_mass[merged[k]] += m
            else:
                merged[k] = len(points)
                points.append(LabeledPoint(x=x, y=y, id=int(pid)))
                out_mass.append(float(m))
        return cls(points=tuple(points), masses=np.asarray(out_mass))

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points[0].x.shape[0] if self.points else 0

    def feature_matrix(self) -> np.ndarray:
        return np.vstack([p.x for p in self.points]) if self.points else np.zeros((0, 0))

    def labels(self) -> np.ndarray:
        return np.array([p.y for p in self.points], dtype=float)

    def support(self) -> np.ndarray:
        """Indices carrying positive mass."""
        return np.nonzero(self.masses > 0)[0]

    def with_masses(self, masses: np.ndarray) -> "FiniteMeasure":
        return FiniteMeasure(points=self.points, masses=np.asarray(masses, dtype=float))

    def normalized(self) -> "FiniteMeasure":
        if self.total_mass <= 0:
            raise DataError("cannot normalize a zero measure")
        return self.with_masses(self.masses / self.total_mass)


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    """Matrix of hypothesis values, entry (i, j) = h_j(x_i), all in [-1, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2:
            raise DataError("hypothesis matrix must be 2-d")
        if not np.all(np.isfinite(m)) or np.any(np.abs(m) > 1.0 + 1e-12):
            raise DataError("hypothesis values must be finite and in [-1, 1]")

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


def mirror_indices(points: tuple[LabeledPoint, ...]) -> np.ndarray:
    """mirror[i] = j iff x_j == x_i bitwise and y_j == -y_i, else -1."""
    lookup = {_key(p.x, p.y): i for i, p in enumerate(points)}
    out = np.full(len(points), -1, dtype=int)
    for i, p in enumerate(points):
        j = lookup.get(_key(p.x, -p.y))
        if j is not None:
            out[i] = j
    return out


@dataclass(frozen=True, eq=False)
class Problem:
    measure: FiniteMeasure
    hypotheses: HypothesisSet
    loss: Loss
    mirror: np.ndarray

    def __post_init__(self):
        if self.hypotheses.matrix.shape[0] != self.measure.n:
            raise DataError("hypothesis rows must align with measure points")

    @classmethod
    def build(cls, measure: FiniteMeasure, hypotheses: HypothesisSet, loss: Loss) -> "Problem":
        return cls(measure=measure, hypotheses=hypotheses, loss=loss,
                   mirror=mirror_indices(measure.points))

    @property
    def n(self) -> int:
        return self.measure.n

    @property
    def d(self) -> int:
        return self.hypotheses.d

    def with_measure(self, measure: FiniteMeasure) -> "Problem":
        return Problem(measure=measure, hypotheses=self.hypotheses,
                       loss=self.loss, mirror=self.mirror)

    def with_loss(self, loss: Loss) -> "Problem":
        return Problem(measure=self.measure, hypotheses=self.hypotheses,
                       loss=loss, mirror=self.mirror)

    def restricted(self, indices) -> "Problem":
        return self.with_measure(restrict(self.measure, indices))

    def normalized(self) -> "Problem":
        return self.with_measure(self.measure.normalized())


def margins(problem: Problem, w: np.ndarray) -> np.ndarray:
    """Per-point loss inputs -y_i * <h(x_i), w>; bounded by ||w||_1."""
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.d,):
        raise DataError(f"weight vector must have length {problem.d}, got shape {w.shape}")
    return -problem.measure.labels() * (problem.hypotheses.matrix @ w)


def restrict(measure: FiniteMeasure, indices) -> FiniteMeasure:
    """Zero the masses outside the index set."""
    keep = np.zeros(measure.n, dtype=bool)
    keep[np.asarray(indices, dtype=int)] = True
    return measure.with_masses(np.where(keep, measure.masses, 0.0))


def conditional(measure: FiniteMeasure, indices) -> FiniteMeasure:
    """Restrict and renormalize by the restricted mass."""
    r = restrict(measure, indices)
    if r.total_mass <= 0:
        raise DataError("conditional measure on a null set")
    return r.with_masses(r.masses / r.total_mass)


def sample(measure: FiniteMeasure, n: int, seed: int) -> FiniteMeasure:
    """Empirical measure of n i.i.d. draws, masses counts/n; ids preserved."""
    if measure.total_mass <= 0:
        raise DataError("cannot sample from a zero measure")
    if n < 1:
        raise DataError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    p = measure.masses / measure.total_mass
    idx = rng.choice(measure.n, size=n, replace=True, p=p)
    uniq, counts = np.unique(idx, return_counts=True)
    points = tuple(measure.points[i] for i in uniq)
    return FiniteMeasure(points=points, masses=counts / float(n))


def sample_problem(problem: Problem, n: int, seed: int) -> Problem:
    """Sample the measure and carry the matching hypothesis rows along."""
    emp = sample(problem.measure, n, seed)
    id_to_row = {p.id: i for i, p in enumerate(problem.measure.points)}
    rows = np.array([id_to_row[p.id] for p in emp.points], dtype=int)
    return Problem.build(emp, HypothesisSet(problem.hypotheses.matrix[rows]), problem.loss)


def subset_problem(problem: Problem, indices) -> Problem:
    """Uniform empirical problem on a subset of support points (for splits)."""
    indices = np.asarray(indices, dtype=int)
    points = tuple(problem.measure.points[i] for i in indices)
    m = FiniteMeasure(points=points, masses=np.full(len(indices), 1.0 / len(indices)))
    return Problem.build(m, HypothesisSet(problem.hypotheses.matrix[indices]), problem.loss)


# -- data ingestion ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LoadedData:
    measure: FiniteMeasure
    hypotheses: HypothesisSet
    scale: np.ndarray      # per-column max-abs divisors applied to features
    raw_count: int

    def to_problem(self, loss: Loss) -> Problem:
        return Problem.build(self.measure, self.hypotheses, loss)


_LABEL_MAP = {1.0: 1, -1.0: -1, 0.0: -1}


def _map_label(raw: float, line_no: int) -> int:
    try:
        return _LABEL_MAP[float(raw)]
    except KeyError:
        raise DataError(f"line {line_no}: label {raw!r} not in {{-1, 0, +1}}") from None


def _finish(features: list[np.ndarray], labels: list[int]) -> LoadedData:
    if not features:
        raise DataError("empty dataset")
    d = max(f.shape[0] for f in features)
    X = np.zeros((len(features), d))
    for i, f in enumerate(features):
        X[i, : f.shape[0]] = f
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    X = X / scale
    n = len(features)
    measure = FiniteMeasure.build(X, labels, np.full(n, 1.0 / n))
    hyp = HypothesisSet(measure.feature_matrix())
    return LoadedData(measure=measure, hypotheses=hyp, scale=scale, raw_count=n)


def load_libsvm(path) -> LoadedData:
    """Sparse text format ``label idx:val ...`` with 1-based indices."""
    features: list[np.ndarray] = []
    labels: list[int] = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise DataError(f"line {line_no}: bad label field {parts[0]!r}") from None
        labels.append(_map_label(label, line_no))
        pairs = []
        for tok in parts[1:]:
            try:
                idx_s, val_s = tok.split(":", 1)
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise DataError(f"line {line_no}: bad feature token {tok!r}") from None
            if idx < 1:
                raise DataError(f"line {line_no}: indices are 1-based, got {idx}")
            pairs.append((idx, val))
        width = max((i for i, _ in pairs), default=0)
        row = np.zeros(width)
        for idx, val in pairs:
            row[idx - 1] = val
        features.append(row)
    return _finish(features, labels)


def load_csv(path, label_column: str) -> LoadedData:
    """CSV with a header row; every non-label column is a numeric feature."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or label_column not in reader.fieldnames:
            raise DataError(f"label column {label_column!r} not found in header")
        feature_cols = [c for c in reader.fieldnames if c != label_column]
        features, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            try:
                labels.append(_map_label(float(row[label_column]), line_no))
                features.append(np.array([float(row[c]) for c in feature_cols]))
            except (TypeError, ValueError) as exc:
                if isinstance(exc, DataError):
                    raise
                raise DataError(f"line {line_no}: non-numeric value") from None
    return _finish(features, labels)
