"""Synthetic paired sim/real data with controllable domain shift.

Classification track: Gaussian-mixture domains where the "real" domain
differs from the "sim" one by a mean translation (covariate shift)
and/or skewed class priors (label shift), independently switchable.

Detection track: random scenes of ground-truth boxes plus a generator
of anchor-level Monte-Carlo detector outputs (noisy box samples and
sigmoid score samples), standing in for a BNN detector head so the
fusion/acquisition stack can run without training an actual detector.

Everything is a pure function of (spec, seed).  Parallel per-scene
generation derives child seeds with numpy's SeedSequence spawning
(seed mixing: SeedSequence([seed, index])).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import AnchorPrediction, read_anchor_records, write_anchor_records


@dataclass
class LabeledExample:
    """One classification-track example: feature vector and class label."""

    x: np.ndarray
    y: int


@dataclass
class ClassificationDomainSpec:
    """A Gaussian-mixture domain: one isotropic blob per class."""

    class_means: np.ndarray          # (C, d)
    cov_scale: float = 1.0
    class_priors: np.ndarray = None  # uniform when omitted
    n_points: int = 1000

    def __post_init__(self):
        self.class_means = np.atleast_2d(np.asarray(self.class_means, dtype=float))
        if self.cov_scale <= 0:
            raise ValueError("cov_scale must be > 0")
        c = self.class_means.shape[0]
        if self.class_priors is None:
            self.class_priors = np.full(c, 1.0 / c)
        self.class_priors = np.asarray(self.class_priors, dtype=float)
        if abs(self.class_priors.sum() - 1.0) > 1e-9:
            raise ValueError("class_priors must sum to 1")

    @property
    def n_classes(self) -> int:
        return self.class_means.shape[0]

    @property
    def dim(self) -> int:
        return self.class_means.shape[1]


def shifted_domain(spec: ClassificationDomainSpec, translation=None,
                   priors=None) -> ClassificationDomainSpec:
    """Derive a shifted domain: translate all class means and/or replace priors."""
    means = spec.class_means
    if translation is not None:
        means = means + np.asarray(translation, dtype=float)
    new_priors = spec.class_priors if priors is None else np.asarray(priors, dtype=float)
    return ClassificationDomainSpec(class_means=means, cov_scale=spec.cov_scale,
                                    class_priors=new_priors, n_points=spec.n_points)


def skewed_priors(n_classes: int, skew: float) -> np.ndarray:
    """Power-law priors p_c proportional to (c+1)^-skew; skew 0 is uniform."""
    if skew < 0:
        raise ValueError("skew must be >= 0")
    raw = (np.arange(n_classes) + 1.0) ** (-skew)
    return raw / raw.sum()


def grid_class_means(n_classes: int, dim: int, separation: float) -> np.ndarray:
    """Well-separated means: one-hot directions scaled by `separation`."""
    if dim < n_classes:
        raise ValueError("dim must be >= n_classes for one-hot class means")
    means = np.zeros((n_classes, dim))
    means[np.arange(n_classes), np.arange(n_classes)] = separation
    return means


def generate_classification(spec: ClassificationDomainSpec, n: int,
                            seed) -> list[LabeledExample]:
    """Draw n labeled points: class from priors, point from its Gaussian."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(spec.n_classes, size=n, p=spec.class_priors)
    noise = rng.standard_normal((n, spec.dim)) * np.sqrt(spec.cov_scale)
    points = spec.class_means[labels] + noise
    return [LabeledExample(x=points[i], y=int(labels[i])) for i in range(n)]


def stack_examples(examples) -> tuple[np.ndarray, np.ndarray]:
    """(X, y) arrays from a list of LabeledExample."""
    x = np.array([ex.x for ex in examples])
    y = np.array([ex.y for ex in examples], dtype=int)
    return x, y


# ---------------------------------------------------------------------------
# detection track
# ---------------------------------------------------------------------------

@dataclass
class DetectionScene:
    """Ground truth for one image: class ids and boxes inside an extent."""

    width: float
    height: float
    gt_classes: np.ndarray    # (n_obj,)
    gt_boxes: np.ndarray      # (n_obj, 4)

    def __post_init__(self):
        self.gt_classes = np.asarray(self.gt_classes, dtype=int)
        self.gt_boxes = np.asarray(self.gt_boxes, dtype=float).reshape(-1, 4)

    @property
    def n_objects(self) -> int:
        return len(self.gt_classes)


@dataclass
class DetectionSceneSpec:
    """Scene geometry plus detector-output noise knobs.

    The noise fields accept scalars or per-class arrays of length
    n_classes, so a caller can degrade specific classes (the
    sim-to-real surrogate uses this to model per-class skill).
    """

    width: float = 128.0
    height: float = 128.0
    n_classes: int = 3
    objects_per_scene: tuple[int, int] = (1, 3)
    class_priors: np.ndarray = None
    box_size_range: tuple[float, float] = (24.0, 48.0)
    sigma_box: object = 1.0          # scalar or (C,) pixels
    score_noise: object = 0.5        # scalar or (C,) logit-space sigma
    true_logit: object = 2.0         # scalar or (C,) true-class logit mean
    off_logit: float = -4.0          # off-class logit mean (kept negative)
    miss_prob: object = 0.0          # scalar or (C,) chance an object yields no anchors
    anchors_per_object: int = 3
    mc_samples: int = 10

    def __post_init__(self):
        if self.class_priors is None:
            self.class_priors = np.full(self.n_classes, 1.0 / self.n_classes)
        self.class_priors = np.asarray(self.class_priors, dtype=float)
        if abs(self.class_priors.sum() - 1.0) > 1e-9:
            raise ValueError("class_priors must sum to 1")
        lo, hi = self.objects_per_scene
        if lo < 0 or hi < lo:
            raise ValueError("invalid objects_per_scene range")
        if self.anchors_per_object < 1 or self.mc_samples < 1:
            raise ValueError("need anchors_per_object >= 1 and mc_samples >= 1")
        smin, smax = self.box_size_range
        if smin <= 0 or smax < smin:
            raise ValueError("invalid box_size_range")
        if smax > self.width or smax > self.height:
            raise ValueError("box size range infeasible for scene extent")

    def per_class(self, value) -> np.ndarray:
        arr = np.broadcast_to(np.asarray(value, dtype=float), (self.n_classes,))
        return np.array(arr)


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def generate_detection_scenes(spec: DetectionSceneSpec, n: int,
                              seed) -> list[DetectionScene]:
    """n random scenes with object counts, classes and boxes from the spec."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seeds = _as_seed_sequence(seed).spawn(n)
    scenes = []
    lo, hi = spec.objects_per_scene
    smin, smax = spec.box_size_range
    for child in seeds:
        rng = np.random.default_rng(child)
        n_obj = int(rng.integers(lo, hi + 1))
        classes = rng.choice(spec.n_classes, size=n_obj, p=spec.class_priors)
        boxes = np.empty((n_obj, 4))
        for i in range(n_obj):
            w = rng.uniform(smin, smax)
            h = rng.uniform(smin, smax)
            x0 = rng.uniform(0.0, spec.width - w)
            y0 = rng.uniform(0.0, spec.height - h)
            boxes[i] = (x0, y0, x0 + w, y0 + h)
        scenes.append(DetectionScene(width=spec.width, height=spec.height,
                                     gt_classes=classes, gt_boxes=boxes))
    return scenes


def synth_detector_outputs(scene: DetectionScene, spec: DetectionSceneSpec,
                           seed) -> list[AnchorPrediction]:
    """Anchor-level MC outputs for one scene.

    Per surviving ground-truth object (objects drop out with the
    per-class miss probability), anchors_per_object anchors are
    emitted; each carries mc_samples box samples (ground-truth corners
    plus Gaussian jitter, corners re-ordered if the jitter inverts
    them) and mc_samples score vectors (sigmoid of the true-class /
    off-class logits plus Gaussian noise).  Noisier spec values raise
    the downstream classification and regression entropies.
    """
    rng = np.random.default_rng(seed)
    sigma_box = spec.per_class(spec.sigma_box)
    score_noise = spec.per_class(spec.score_noise)
    true_logit = spec.per_class(spec.true_logit)
    miss_prob = spec.per_class(spec.miss_prob)
    t, m = spec.mc_samples, spec.anchors_per_object

    preds = []
    for cls, box in zip(scene.gt_classes, scene.gt_boxes):
        if miss_prob[cls] > 0 and rng.random() < miss_prob[cls]:
            continue
        for _ in range(m):
            jitter = rng.standard_normal((t, 4)) * sigma_box[cls]
            samples = box + jitter
            x_lo = np.minimum(samples[:, 0], samples[:, 2] - 1e-3)
            x_hi = np.maximum(samples[:, 2], samples[:, 0] + 1e-3)
            y_lo = np.minimum(samples[:, 1], samples[:, 3] - 1e-3)
            y_hi = np.maximum(samples[:, 3], samples[:, 1] + 1e-3)
            boxes = np.stack([x_lo, y_lo, x_hi, y_hi], axis=1)
            logits = np.full((t, spec.n_classes), spec.off_logit)
            logits[:, cls] = true_logit[cls]
            logits = logits + rng.standard_normal((t, spec.n_classes)) * score_noise[cls]
            scores = 1.0 / (1.0 + np.exp(-logits))
            preds.append(AnchorPrediction(score_samples=scores, box_samples=boxes))
    return preds


# ---------------------------------------------------------------------------
# dataset dump/load
# ---------------------------------------------------------------------------

def save_detection_dataset(path_anchors, path_labels, scenes, spec,
                           seed) -> None:
    """Detector outputs in the anchor interchange format + labels sidecar.

    The sidecar holds one block per image:
    'image <id> <n_objects> <width> <height>' followed by n_objects
    lines of 'class x_min y_min x_max y_max'.
    """
    seeds = _as_seed_sequence(seed).spawn(len(scenes))
    records = [(str(i), synth_detector_outputs(scene, spec, child))
               for i, (scene, child) in enumerate(zip(scenes, seeds))]
    write_anchor_records(path_anchors, records)
    with open(path_labels, "w") as fh:
        fh.write("# detection labels sidecar v1\n")
        for i, scene in enumerate(scenes):
            fh.write(f"image {i} {scene.n_objects} "
                     f"{repr(float(scene.width))} {repr(float(scene.height))}\n")
            for cls, box in zip(scene.gt_classes, scene.gt_boxes):
                coords = " ".join(repr(float(v)) for v in box)
                fh.write(f"{int(cls)} {coords}\n")


def load_detection_dataset(path_anchors, path_labels):
    """Inverse of save_detection_dataset: (anchor records, scenes)."""
    records = read_anchor_records(path_anchors)
    with open(path_labels) as fh:
        lines = [ln.strip() for ln in fh
                 if ln.strip() and not ln.lstrip().startswith("#")]
    scenes = []
    pos = 0
    while pos < len(lines):
        parts = lines[pos].split()
        if parts[0] != "image" or len(parts) != 5:
            raise ValueError(f"malformed sidecar header: {lines[pos]!r}")
        n_obj = int(parts[2])
        width, height = float(parts[3]), float(parts[4])
        pos += 1
        classes, boxes = [], []
        for _ in range(n_obj):
            vals = lines[pos].split()
            classes.append(int(vals[0]))
            boxes.append([float(v) for v in vals[1:5]])
            pos += 1
        scenes.append(DetectionScene(width=width, height=height,
                                     gt_classes=np.array(classes, dtype=int),
                                     gt_boxes=np.array(boxes).reshape(-1, 4)))
    return records, scenes


def save_classification_dataset(path, examples) -> None:
    """One line per example: label then feature values (repr floats)."""
    with open(path, "w") as fh:
        fh.write("# classification dataset v1\n")
        for ex in examples:
            feats = " ".join(repr(float(v)) for v in ex.x)
            fh.write(f"{int(ex.y)} {feats}\n")


def load_classification_dataset(path) -> list[LabeledExample]:
    examples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = line.split()
            examples.append(LabeledExample(x=np.array([float(v) for v in vals[1:]]),
                                           y=int(vals[0])))
    return examples
