"""Deterministic synthetic multiclass datasets.

Features always live in [-1, 1] per dimension (the range BIM clipping and
random probing assume). Two generators: gaussian blobs with class means
placed away from each other, and concentric ring classes in the first two
dimensions.
"""

import io
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, SpecError
from .rng import stream

FEATURE_RANGE = (-1.0, 1.0)

# Default blob spread: tuned so a family-A model reaches ~0.85-0.92 test
# accuracy on the default scale, leaving enough misclassifications for
# watermark material and a clearly nonzero population disagreement share.
DEFAULT_SPREAD = 0.45


@dataclass(frozen=True)
class GenSpec:
    kind: str = "gaussian_blobs"  # gaussian_blobs | ring_classes
    classes: int = 4
    dims: int = 8
    samples_per_class: int = 250
    spread: float = DEFAULT_SPREAD

    def __post_init__(self):
        if self.kind not in ("gaussian_blobs", "ring_classes"):
            raise SpecError(f"unknown generator kind {self.kind!r}")
        if self.classes < 2 or self.dims < 2:
            raise SpecError("need classes >= 2 and dims >= 2")
        if self.samples_per_class < 1:
            raise SpecError("samples_per_class must be positive")
        if self.spread <= 0:
            raise SpecError("spread must be positive")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, D) float64 in [-1, 1]
    labels: np.ndarray  # (N,) ints in [0, K)
    class_count: int
    name: str
    seed: int

    def __post_init__(self):
        if len(self.features) == 0 or len(self.features) != len(self.labels):
            raise SpecError("features/labels size mismatch or empty dataset")
        if not np.isfinite(self.features).all():
            raise SpecError("non-finite features")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise SpecError("label out of range")

    def __len__(self):
        return len(self.features)

    @property
    def dims(self):
        return self.features.shape[1]


def generate(spec: GenSpec, seed: int) -> Dataset:
    rng = stream(seed, f"gen/{spec.kind}")
    k, d, m = spec.classes, spec.dims, spec.samples_per_class
    if spec.kind == "gaussian_blobs":
        means = rng.uniform(-0.6, 0.6, size=(k, d))
        features = np.concatenate(
            [means[c] + spec.spread * rng.standard_normal((m, d)) for c in range(k)]
        )
    else:  # ring_classes: radius encodes the class in the first two dims
        radii = (np.arange(k) + 1) / (k + 1)
        parts = []
        for c in range(k):
            theta = rng.uniform(0, 2 * np.pi, size=m)
            r = radii[c] + spec.spread * 0.25 * rng.standard_normal(m)
            block = spec.spread * 0.25 * rng.standard_normal((m, d))
            block[:, 0] = r * np.cos(theta)
            block[:, 1] = r * np.sin(theta)
            parts.append(block)
        features = np.concatenate(parts)
    features = np.clip(features, *FEATURE_RANGE)
    labels = np.repeat(np.arange(k), m)
    return Dataset(features, labels, k, f"{spec.kind}-k{k}-d{d}", seed)


def split(dataset: Dataset, test_fraction: float, seed: int):
    """Disjoint, union-complete (train, test) split with a seeded shuffle."""
    if not 0 < test_fraction < 1:
        raise SpecError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise SpecError("degenerate split: one side would be empty")
    order = stream(seed, "split").permutation(n)
    test_idx, train_idx = order[:n_test], order[n_test:]
    mk = lambda idx, suffix: Dataset(
        dataset.features[idx], dataset.labels[idx], dataset.class_count,
        f"{dataset.name}/{suffix}", seed,
    )
    return mk(train_idx, "train"), mk(test_idx, "test")


def sample_queries(dataset: Dataset, budget_fraction: float, seed: int) -> np.ndarray:
    """Uniform sample without replacement of round(budget * N) feature rows."""
    if not 0 < budget_fraction <= 1:
        raise SpecError(f"budget_fraction must be in (0, 1], got {budget_fraction}")
    n = len(dataset)
    count = int(round(n * budget_fraction))
    if count < 1:
        raise SpecError("query budget yields zero samples")
    idx = stream(seed, "queries").permutation(n)[:count]
    return dataset.features[idx]


def random_probe_inputs(count: int, dims: int, value_range=FEATURE_RANGE, seed: int = 0) -> np.ndarray:
    if count < 1:
        raise SpecError("count must be positive")
    lo, hi = value_range
    if not hi > lo:
        raise SpecError(f"empty range [{lo}, {hi}]")
    return stream(seed, "probes").uniform(lo, hi, size=(count, dims))


# Tabular text format: a '#' header carrying dims/classes/seed/name, then one
# CSV row per sample with the integer label last.

def dump_dataset(dataset: Dataset) -> str:
    buf = io.StringIO()
    buf.write(
        f"# seedmark-dataset v1 dims={dataset.dims} classes={dataset.class_count} "
        f"seed={dataset.seed} name={dataset.name}\n"
    )
    for row, label in zip(dataset.features, dataset.labels):
        buf.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    return buf.getvalue()


def parse_dataset(text: str) -> Dataset:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or not lines[0].startswith("# seedmark-dataset v1 "):
        raise FormatError("missing or unrecognized dataset header")
    fields = dict(
        part.split("=", 1) for part in lines[0].split()[3:] if "=" in part
    )
    try:
        dims = int(fields["dims"])
        classes = int(fields["classes"])
        seed = int(fields["seed"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad dataset header: {exc}") from exc
    features, labels = [], []
    for ln, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != dims + 1:
            raise FormatError(f"line {ln}: expected {dims + 1} columns, got {len(cells)}")
        try:
            features.append([float(c) for c in cells[:-1]])
            labels.append(int(cells[-1]))
        except ValueError as exc:
            raise FormatError(f"line {ln}: {exc}") from exc
    if not features:
        raise FormatError("dataset has no rows")
    labels = np.array(labels)
    if labels.max() >= classes:
        raise FormatError("label exceeds declared class count")
    return Dataset(np.array(features), labels, classes, fields.get("name", "loaded"), seed)


def save_dataset(dataset: Dataset, path):
    with open(path, "w") as fh:
        fh.write(dump_dataset(dataset))


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        return parse_dataset(fh.read())
