"""Anchor-level clustering and Bayesian fusion of detector outputs.

Replaces hard NMS suppression: anchor predictions carrying Monte-Carlo
samples are grouped by spatial affinity (IoU of mean boxes) and every
cluster is fused into a single detection with a per-class score vector
and a Gaussian box distribution (mean + 4x4 covariance).

Fusion rules
------------
classification:  elementwise product of the member mean score vectors
                 (independent per-class Bernoullis; optional categorical
                 renormalization behind a flag)
regression:      product of Gaussians, i.e. precision-weighted fusion:
                 P = sum_i P_i,  mu = P^-1 sum_i P_i mu_i

Covariances get a small diagonal regularizer before inversion so that
noise-free synthetic samples do not produce singular matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COV_REGULARIZER = 1e-6
DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class Box:
    """Axis-aligned 2D box in pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        arr = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(np.isfinite(v) for v in arr):
            raise ValueError(f"box coordinates must be finite, got {arr}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {arr}: need x_min < x_max and y_min < y_max")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max], dtype=float)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @staticmethod
    def from_array(a) -> "Box":
        a = np.asarray(a, dtype=float)
        return Box(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass
class AnchorPrediction:
    """Monte-Carlo samples of one anchor: T score vectors and T boxes.

    score_samples: (T, n_classes) array, entries in [0, 1]
    box_samples:   (T, 4) array of (x_min, y_min, x_max, y_max)
    """

    score_samples: np.ndarray
    box_samples: np.ndarray

    def __post_init__(self):
        self.score_samples = np.atleast_2d(np.asarray(self.score_samples, dtype=float))
        self.box_samples = np.atleast_2d(np.asarray(self.box_samples, dtype=float))
        if self.score_samples.shape[0] != self.box_samples.shape[0]:
            raise ValueError("score_samples and box_samples must have the same sample count")
        if self.score_samples.shape[0] < 1:
            raise ValueError("need at least one Monte-Carlo sample")
        if self.box_samples.shape[1] != 4:
            raise ValueError("box samples must be 4-vectors")
        if np.any(self.score_samples < 0) or np.any(self.score_samples > 1):
            raise ValueError("scores must lie in [0, 1]")

    @property
    def n_samples(self) -> int:
        return self.score_samples.shape[0]

    @property
    def n_classes(self) -> int:
        return self.score_samples.shape[1]

    def mean_scores(self) -> np.ndarray:
        return self.score_samples.mean(axis=0)

    def mean_box(self) -> np.ndarray:
        return self.box_samples.mean(axis=0)


@dataclass
class DetectionCluster:
    """Anchors grouped by spatial affinity; the center has the top score."""

    center_index: int
    members: list[AnchorPrediction]

    def __post_init__(self):
        if not self.members:
            raise ValueError("cluster must have at least one member")
        if not (0 <= self.center_index < len(self.members)):
            raise ValueError("center_index out of range")

    @property
    def center(self) -> AnchorPrediction:
        return self.members[self.center_index]

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class FusedDetection:
    """One output detection: class score vector plus Gaussian box."""

    class_probs: np.ndarray   # (n_classes,)
    box_mean: np.ndarray      # (4,)
    box_cov: np.ndarray       # (4, 4), symmetric positive definite
    cluster_size: int = 1

    def __post_init__(self):
        self.class_probs = np.asarray(self.class_probs, dtype=float)
        self.box_mean = np.asarray(self.box_mean, dtype=float)
        self.box_cov = np.asarray(self.box_cov, dtype=float)

    @property
    def label(self) -> int:
        """argmax class, ties broken toward the smaller index."""
        return int(np.argmax(self.class_probs))

    @property
    def confidence(self) -> float:
        return float(self.class_probs[self.label])


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two valid boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def iou_arrays(a, b) -> float:
    """IoU of two boxes given as 4-vectors (no validity checks)."""
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def mc_statistics(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased covariance of 4-vector samples.

    A single sample yields a zero covariance matrix by convention.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("no samples")
    mean = samples.mean(axis=0)
    t = samples.shape[0]
    if t == 1:
        return mean, np.zeros((samples.shape[1], samples.shape[1]))
    centered = samples - mean
    cov = centered.T @ centered / (t - 1)
    return mean, cov


def cluster_anchors(preds: list[AnchorPrediction],
                    iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> list[DetectionCluster]:
    """Greedy score-descending clustering by mean-box IoU.

    The highest-scoring unassigned anchor becomes a cluster center and
    absorbs every unassigned anchor whose mean box overlaps it with
    IoU >= iou_threshold.  Score ties break toward the lower anchor
    index.  Every anchor ends up in exactly one cluster.
    """
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValueError("iou_threshold must lie in [0, 1]")
    if not preds:
        return []
    top_scores = np.array([p.mean_scores().max() for p in preds])
    mean_boxes = [p.mean_box() for p in preds]
    order = np.argsort(-top_scores, kind="stable")

    assigned = np.zeros(len(preds), dtype=bool)
    clusters = []
    for idx in order:
        if assigned[idx]:
            continue
        assigned[idx] = True
        member_ids = [idx]
        for other in order:
            if assigned[other]:
                continue
            if iou_arrays(mean_boxes[idx], mean_boxes[other]) >= iou_threshold:
                assigned[other] = True
                member_ids.append(other)
        clusters.append(DetectionCluster(center_index=0,
                                         members=[preds[i] for i in member_ids]))
    return clusters


def fuse_categorical(cluster: DetectionCluster, renormalize: bool = False) -> np.ndarray:
    """Per-class product of the member mean score vectors.

    Default keeps the independent-Bernoulli form (no renormalization);
    renormalize=True divides by the sum to interpret the result as a
    categorical distribution.  Products run in log space.
    """
    log_prod = np.zeros(cluster.center.n_classes)
    for member in cluster.members:
        with np.errstate(divide="ignore"):
            log_prod += np.log(member.mean_scores())
    probs = np.exp(log_prod)
    if renormalize:
        total = probs.sum()
        if total <= 0:
            raise ValueError("all-zero class products cannot be renormalized")
        probs = probs / total
    return probs


def fuse_gaussian(cluster: DetectionCluster,
                  regularizer: float = COV_REGULARIZER) -> tuple[np.ndarray, np.ndarray]:
    """Precision-weighted product-of-Gaussians fusion of a cluster.

    Each member is reduced to (mean, cov) via mc_statistics, the
    covariance regularized with `regularizer` on the diagonal, and the
    Gaussians multiplied: fused precision is the sum of member
    precisions, fused mean the precision-weighted mean.
    """
    eye = np.eye(4)
    precision_sum = np.zeros((4, 4))
    weighted_mean_sum = np.zeros(4)
    for member in cluster.members:
        mean, cov = mc_statistics(member.box_samples)
        cov = cov + regularizer * eye
        try:
            np.linalg.cholesky(cov)
            precision = np.linalg.inv(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("degenerate covariance") from exc
        precision_sum += precision
        weighted_mean_sum += precision @ mean
    try:
        fused_cov = np.linalg.inv(precision_sum)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate covariance") from exc
    fused_cov = 0.5 * (fused_cov + fused_cov.T)
    fused_mean = fused_cov @ weighted_mean_sum
    return fused_mean, fused_cov


def bayesod_inference(preds: list[AnchorPrediction],
                      iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                      cls_bayesian: bool = False,
                      regularizer: float = COV_REGULARIZER) -> list[FusedDetection]:
    """Cluster anchors and fuse each cluster into one detection.

    Box distributions always go through Gaussian fusion; class scores go
    through the categorical product only when cls_bayesian is set,
    otherwise the cluster center's mean scores are used (Bayesian
    inference on the regression head only).
    """
    detections = []
    for cluster in cluster_anchors(preds, iou_threshold):
        box_mean, box_cov = fuse_gaussian(cluster, regularizer)
        if cls_bayesian:
            class_probs = fuse_categorical(cluster)
        else:
            class_probs = cluster.center.mean_scores()
        detections.append(FusedDetection(class_probs=class_probs,
                                         box_mean=box_mean,
                                         box_cov=box_cov,
                                         cluster_size=cluster.size))
    return detections


# ---------------------------------------------------------------------------
# anchor-sample interchange format
#
# One block per image, whitespace-separated, '#' starts a comment line:
#
#   image <image_id> <n_classes> <T> <n_anchors>
#   <for each anchor, in order:>
#       T lines of n_classes score values
#       T lines of 4 box values (x_min y_min x_max y_max)
#
# Field order is fixed; floats are written with repr so files round-trip
# exactly.
# ---------------------------------------------------------------------------

def write_anchor_records(path, records) -> None:
    """Write (image_id, [AnchorPrediction, ...]) pairs to a text file."""
    with open(path, "w") as fh:
        fh.write("# anchor-sample interchange v1\n")
        for image_id, preds in records:
            if preds:
                n_classes = preds[0].n_classes
                t = preds[0].n_samples
            else:
                n_classes, t = 0, 0
            fh.write(f"image {image_id} {n_classes} {t} {len(preds)}\n")
            for pred in preds:
                if pred.n_classes != n_classes or pred.n_samples != t:
                    raise ValueError("all anchors of one image must share |C| and T")
                for row in pred.score_samples:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
                for row in pred.box_samples:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_anchor_records(path) -> list[tuple[str, list[AnchorPrediction]]]:
    """Read back records written by write_anchor_records."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh
                 if ln.strip() and not ln.lstrip().startswith("#")]
    records = []
    pos = 0
    while pos < len(lines):
        parts = lines[pos].split()
        if parts[0] != "image" or len(parts) != 5:
            raise ValueError(f"malformed image header: {lines[pos]!r}")
        image_id = parts[1]
        n_classes, t, n_anchors = int(parts[2]), int(parts[3]), int(parts[4])
        pos += 1
        preds = []
        for _ in range(n_anchors):
            scores = np.array([[float(v) for v in lines[pos + i].split()]
                               for i in range(t)])
            pos += t
            boxes = np.array([[float(v) for v in lines[pos + i].split()]
                              for i in range(t)])
            pos += t
            if scores.shape != (t, n_classes) or boxes.shape != (t, 4):
                raise ValueError(f"malformed anchor block for image {image_id}")
            preds.append(AnchorPrediction(score_samples=scores, box_samples=boxes))
        records.append((image_id, preds))
    return records
