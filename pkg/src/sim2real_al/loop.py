"""The active-learning loop: train on sim, score the pool, select,
oracle-label, fine-tune, evaluate; repeated until the budget runs out.

Holds the two desk-scale tracks (Gaussian-mixture classification with
the MC-dropout learner, synthetic detection with a skill-based
surrogate detector), the evaluation metrics (accuracy, greedy-matching
mAP, inter-class variation), gap bridging reports, and the on-disk run
artifacts (curve CSV + replayable manifest).

Determinism: every random decision derives from the run seed through
fixed SeedSequence streams, so a (config, seed) pair always reproduces
the same curve byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import xlogy

from . import acquisition as acq
from . import sampling
from .fusion import bayesod_inference, iou_arrays
from .learner import MCDropoutClassifier, TrainConfig
from .synthdata import (ClassificationDomainSpec, DetectionScene,
                        DetectionSceneSpec, LabeledExample,
                        generate_classification, generate_detection_scenes,
                        grid_class_means, shifted_domain, skewed_priors,
                        stack_examples, synth_detector_outputs)

# seed stream tags (mixed into SeedSequence entropy)
_TRAIN, _SELECT, _EVAL, _REFERENCE, _SCORE, _PREDICT, _DATA = range(7)


def _stream_seed(run_seed: int, stream: int, iteration: int = 0,
                 extra: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(run_seed), stream, iteration, extra])


# ---------------------------------------------------------------------------
# run configuration and curve containers
# ---------------------------------------------------------------------------

@dataclass
class ALRunConfig:
    iterations: int = 10
    selection: sampling.SelectionConfig = field(default_factory=sampling.SelectionConfig)
    acquisition: acq.AcquisitionConfig = field(default_factory=acq.AcquisitionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple = (0,)
    level: float = 0.95            # gap fraction considered "bridged"
    replay: bool = True            # fine-tune on sim + all labeled real
    mc_passes: int = 10            # T predictive samples (batchbald scoring)
    selection_seed: int = 0        # extra entropy mixed into selection draws
    iou_threshold: float = 0.5     # detection clustering + matching
    cls_bayesian: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not (0.0 < self.level <= 1.0):
            raise ValueError("level must lie in (0, 1]")


@dataclass
class ALState:
    """Bookkeeping of one run: acquired ids never return to the pool."""

    pool_ids: list[int]
    labeled_ids: list[int] = field(default_factory=list)
    iteration: int = 0
    model: object = None

    def acquire(self, ids) -> None:
        ids = list(ids)
        overlap = set(ids) - set(self.pool_ids)
        if overlap:
            raise ValueError(f"ids not in pool: {sorted(overlap)}")
        if set(ids) & set(self.labeled_ids):
            raise ValueError("id acquired twice")
        self.labeled_ids.extend(ids)
        chosen = set(ids)
        self.pool_ids = [i for i in self.pool_ids if i not in chosen]


@dataclass
class CurvePoint:
    iteration: int
    labeled_count: int
    labeled_fraction: float
    metric: float
    icv: float


@dataclass
class LearningCurve:
    points: list[CurvePoint]
    sim_perf: float
    real_perf: float
    strategy: str
    seed: int
    level: float = 0.95
    truncated: bool = False
    selected_ids: list[list[int]] = field(default_factory=list)

    @property
    def metrics(self) -> np.ndarray:
        return np.array([p.metric for p in self.points])


@dataclass
class GapReport:
    gap: float
    bridged_fraction: float | None   # None when never bridged
    mean_metric: float
    level: float
    sim_perf: float
    real_perf: float
    inverted: bool = False


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def evaluate_classifier(model, x_test, y_test) -> float:
    """Argmax accuracy of predict_mean; ties go to the smaller class."""
    x_test = np.atleast_2d(np.asarray(x_test, dtype=float))
    y_test = np.asarray(y_test, dtype=int)
    if x_test.shape[0] == 0:
        raise ValueError("empty test set")
    probs = np.atleast_2d(model.predict_mean(x_test))
    return float((probs.argmax(axis=1) == y_test).mean())


def evaluate_detection(detections_per_image, scenes, iou_threshold: float = 0.5) -> float:
    """Mean average precision with greedy confidence-ordered matching.

    Each fused detection counts for its argmax class with its max score
    as confidence.  Per class, detections sorted by descending
    confidence greedily match the unmatched same-image ground-truth box
    of best IoU >= iou_threshold; the all-point interpolated AP is then
    averaged over the classes present in the ground truth.
    """
    n_gt_per_class: dict[int, int] = {}
    for scene in scenes:
        for cls in scene.gt_classes:
            n_gt_per_class[int(cls)] = n_gt_per_class.get(int(cls), 0) + 1
    if not n_gt_per_class:
        raise ValueError("empty ground truth")

    by_class: dict[int, list] = {c: [] for c in n_gt_per_class}
    for img_idx, dets in enumerate(detections_per_image):
        for det_idx, det in enumerate(dets):
            label = det.label
            if label in by_class:
                by_class[label].append((det.confidence, img_idx, det_idx, det.box_mean))

    aps = []
    for cls in sorted(n_gt_per_class):
        dets = sorted(by_class[cls], key=lambda d: (-d[0], d[1], d[2]))
        matched = [np.zeros(len(s.gt_classes), dtype=bool) for s in scenes]
        tp = np.zeros(len(dets))
        for rank, (_, img_idx, _, box) in enumerate(dets):
            scene = scenes[img_idx]
            best_iou, best_gt = iou_threshold, -1
            for gi, (gcls, gbox) in enumerate(zip(scene.gt_classes, scene.gt_boxes)):
                if int(gcls) != cls or matched[img_idx][gi]:
                    continue
                overlap = iou_arrays(box, gbox)
                if overlap >= best_iou:
                    best_iou, best_gt = overlap, gi
            if best_gt >= 0:
                matched[img_idx][best_gt] = True
                tp[rank] = 1.0
        aps.append(_average_precision(tp, n_gt_per_class[cls]))
    return float(np.mean(aps))


def _average_precision(tp: np.ndarray, n_gt: int) -> float:
    """All-point interpolated AP from confidence-ordered TP flags."""
    if len(tp) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    recall = cum_tp / n_gt
    precision = cum_tp / np.arange(1, len(tp) + 1)
    # precision envelope (monotone non-increasing from the right)
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recall, precision):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return float(ap)


def inter_class_variation(labels, n_classes: int) -> float:
    """Population std of per-class instance counts times the class count.

    Zero-count classes are included; an empty selection scores 0.
    """
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError("labels outside [0, n_classes)")
    counts = np.bincount(labels, minlength=n_classes)[:n_classes]
    return float(np.std(counts) * n_classes)


def gap_report(curve: LearningCurve, sim_perf: float = None,
               real_perf: float = None, level: float = None) -> GapReport:
    """Gap arithmetic: bridged when the curve first reaches
    sim_perf + level * (real_perf - sim_perf)."""
    sim_perf = curve.sim_perf if sim_perf is None else sim_perf
    real_perf = curve.real_perf if real_perf is None else real_perf
    level = curve.level if level is None else level
    if not (0.0 < level <= 1.0):
        raise ValueError("level must lie in (0, 1]")
    inverted = real_perf < sim_perf
    gap = real_perf - sim_perf
    threshold = sim_perf + level * gap
    bridged = None
    for point in curve.points:
        if point.metric >= threshold:
            bridged = point.labeled_fraction
            break
    later = [p.metric for p in curve.points if p.iteration >= 1]
    mean_metric = float(np.mean(later)) if later else float("nan")
    return GapReport(gap=gap, bridged_fraction=bridged, mean_metric=mean_metric,
                     level=level, sim_perf=sim_perf, real_perf=real_perf,
                     inverted=inverted)


def _entropy_rows(probs: np.ndarray) -> np.ndarray:
    return -(xlogy(probs, probs)).sum(axis=-1)


# ---------------------------------------------------------------------------
# dataset bundles and oracles
# ---------------------------------------------------------------------------

@dataclass
class ClassificationDatasets:
    sim_train: list[LabeledExample]
    pool_x: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    n_classes: int
    real_perf: float | None = None


@dataclass
class DetectionDatasets:
    sim_scenes: list[DetectionScene]
    pool_scenes: list[DetectionScene]
    test_scenes: list[DetectionScene]
    n_classes: int
    real_perf: float | None = None


def make_classification_oracle(pool_y):
    """Ground-truth labeling oracle over pool ids."""
    pool_y = np.asarray(pool_y, dtype=int)

    def oracle(ids):
        return pool_y[np.asarray(list(ids), dtype=int)]

    return oracle


def make_detection_oracle(pool_scenes):
    """Annotation oracle: returns the scenes' ground truth."""

    def oracle(ids):
        return [pool_scenes[i] for i in ids]

    return oracle


# ---------------------------------------------------------------------------
# detection-track surrogate detector
# ---------------------------------------------------------------------------

@dataclass
class SurrogateParams:
    """How per-class skill maps labeled-instance counts to output noise.

    Skill s = e / (e + kappa) with e = sim_weight * n_sim + n_real
    counted per class; each noise knob interpolates linearly from its
    weak (s=0) to its strong (s=1) end.
    """

    kappa: float = 40.0
    sim_weight: float = 0.15
    true_logit_weak: float = 0.3
    true_logit_strong: float = 3.0
    sigma_box_weak: float = 6.0
    sigma_box_strong: float = 0.8
    score_noise_weak: float = 1.5
    score_noise_strong: float = 0.3
    miss_weak: float = 0.5
    miss_strong: float = 0.02


class DetectionSurrogate:
    """Stand-in detector whose per-class output quality tracks how many
    labeled instances of that class it has seen (sim counts discounted).

    Immutable: with_sim / with_real return new snapshots.
    """

    def __init__(self, scene_spec: DetectionSceneSpec, params: SurrogateParams,
                 sim_counts=None, real_counts=None):
        self.scene_spec = scene_spec
        self.params = params
        c = scene_spec.n_classes
        self.sim_counts = np.zeros(c) if sim_counts is None else np.asarray(sim_counts, dtype=float)
        self.real_counts = np.zeros(c) if real_counts is None else np.asarray(real_counts, dtype=float)

    def _counted(self, scenes) -> np.ndarray:
        counts = np.zeros(self.scene_spec.n_classes)
        for scene in scenes:
            counts += np.bincount(scene.gt_classes,
                                  minlength=self.scene_spec.n_classes)
        return counts

    def with_sim(self, scenes) -> "DetectionSurrogate":
        return DetectionSurrogate(self.scene_spec, self.params,
                                  self.sim_counts + self._counted(scenes),
                                  self.real_counts)

    def with_real(self, scenes) -> "DetectionSurrogate":
        return DetectionSurrogate(self.scene_spec, self.params,
                                  self.sim_counts,
                                  self.real_counts + self._counted(scenes))

    def competence(self) -> np.ndarray:
        e = self.params.sim_weight * self.sim_counts + self.real_counts
        return e / (e + self.params.kappa)

    def output_spec(self) -> DetectionSceneSpec:
        """Scene spec with per-class noise derived from current skill."""
        s = self.competence()
        p = self.params

        def interp(weak, strong):
            return weak + (strong - weak) * s

        return replace(self.scene_spec,
                       sigma_box=interp(p.sigma_box_weak, p.sigma_box_strong),
                       score_noise=interp(p.score_noise_weak, p.score_noise_strong),
                       true_logit=interp(p.true_logit_weak, p.true_logit_strong),
                       miss_prob=interp(p.miss_weak, p.miss_strong))

    def detect(self, scene: DetectionScene, seed, iou_threshold: float = 0.5,
               cls_bayesian: bool = False):
        """Fused detections for one scene at the current skill level."""
        anchors = synth_detector_outputs(scene, self.output_spec(), seed)
        return bayesod_inference(anchors, iou_threshold=iou_threshold,
                                 cls_bayesian=cls_bayesian)


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

def run_al(cfg: ALRunConfig, datasets, learner, oracle, seed: int = 0) -> LearningCurve:
    """One full active-learning run; see module docstring for the steps."""
    if isinstance(datasets, ClassificationDatasets):
        return _run_classification(cfg, datasets, learner, oracle, seed)
    if isinstance(datasets, DetectionDatasets):
        return _run_detection(cfg, datasets, learner, oracle, seed)
    raise TypeError(f"unsupported dataset bundle {type(datasets).__name__}")


def _run_classification(cfg, data: ClassificationDatasets, learner, oracle,
                        seed: int) -> LearningCurve:
    x_sim, y_sim = stack_examples(data.sim_train)
    pool_x = np.asarray(data.pool_x, dtype=float)
    n_pool0 = pool_x.shape[0]
    state = ALState(pool_ids=list(range(n_pool0)))

    t0 = replace(cfg.train, fine_tune=False,
                 seed=_seed_int(_stream_seed(seed, _TRAIN, 0)))
    state.model = learner.fit(x_sim, y_sim, t0)
    sim_perf = evaluate_classifier(state.model, data.test_x, data.test_y)

    if data.real_perf is not None:
        real_perf = data.real_perf
    else:
        ref_cfg = replace(cfg.train, fine_tune=False,
                          seed=_seed_int(_stream_seed(seed, _REFERENCE, 0)))
        ref_model = learner.fit(pool_x, oracle(state.pool_ids), ref_cfg)
        real_perf = evaluate_classifier(ref_model, data.test_x, data.test_y)

    points = [CurvePoint(0, 0, 0.0, sim_perf, 0.0)]
    labeled_y = np.empty(0, dtype=int)
    selected_log: list[list[int]] = []
    truncated = False

    for it in range(1, cfg.iterations + 1):
        if len(state.pool_ids) < cfg.selection.batch_size:
            truncated = True
            break
        state.iteration = it
        labeled_x = pool_x[state.labeled_ids]
        ids = _select_classification(cfg, state.model, pool_x, state.pool_ids,
                                     np.vstack([x_sim, labeled_x]), seed, it)
        batch_y = np.asarray(oracle(ids), dtype=int)
        state.acquire(ids)
        labeled_x = pool_x[state.labeled_ids]
        labeled_y = np.concatenate([labeled_y, batch_y])

        if cfg.replay:
            xt = np.vstack([x_sim, labeled_x])
            yt = np.concatenate([y_sim, labeled_y])
        else:
            xt, yt = labeled_x, labeled_y
        tcfg = replace(cfg.train, seed=_seed_int(_stream_seed(seed, _TRAIN, it)))
        state.model = state.model.fit(xt, yt, tcfg)

        metric = evaluate_classifier(state.model, data.test_x, data.test_y)
        points.append(CurvePoint(it, len(labeled_y), len(labeled_y) / n_pool0,
                                 metric, inter_class_variation(batch_y, data.n_classes)))
        selected_log.append(list(ids))

    return LearningCurve(points=points, sim_perf=sim_perf, real_perf=real_perf,
                         strategy=cfg.selection.strategy, seed=seed,
                         level=cfg.level, truncated=truncated,
                         selected_ids=selected_log)


def _select_classification(cfg, model, pool_x, pool_ids, labeled_x, seed, it):
    sel = cfg.selection
    sel_seed = _stream_seed(seed, _SELECT, it, cfg.selection_seed)

    def entropy_of(pid):
        return acq.categorical_entropy(model.predict_mean(pool_x[pid]))

    if sel.strategy == "random":
        return sampling.select_random(pool_ids, sel.batch_size, sel_seed)
    if sel.strategy == "topn":
        scored = [(pid, entropy_of(pid)) for pid in pool_ids]
        return sampling.select_topn(scored, sel.batch_size)
    if sel.strategy == "subsample_topn":
        return sampling.select_subsample_topn(pool_ids, entropy_of,
                                              sel.subsample_fraction,
                                              sel.batch_size, sel_seed)
    if sel.strategy == "coreset":
        idx = sampling.select_coreset(model.features(pool_x[pool_ids]),
                                      model.features(labeled_x),
                                      sel.batch_size)
        return [pool_ids[i] for i in idx]
    if sel.strategy == "batchbald":
        pred_seed = _seed_int(_stream_seed(seed, _PREDICT, it))
        samples = model.predict_samples(pool_x[pool_ids], cfg.mc_passes,
                                        seed=pred_seed)
        idx = sampling.select_batchbald(samples, sel.batch_size,
                                        sel.mc_count, sel_seed)
        return [pool_ids[i] for i in idx]
    if sel.strategy == "clue":
        probs = np.atleast_2d(model.predict_mean(pool_x[pool_ids]))
        idx = sampling.select_clue(model.features(pool_x[pool_ids]),
                                   _entropy_rows(probs),
                                   sel.batch_size, sel_seed)
        return [pool_ids[i] for i in idx]
    raise ValueError(f"unknown strategy {sel.strategy!r}")


def _run_detection(cfg, data: DetectionDatasets, learner: DetectionSurrogate,
                   oracle, seed: int) -> LearningCurve:
    n_pool0 = len(data.pool_scenes)
    state = ALState(pool_ids=list(range(n_pool0)))

    state.model = learner.with_sim(data.sim_scenes)
    sim_perf = _evaluate_surrogate(cfg, state.model, data.test_scenes, seed, 0)

    if data.real_perf is not None:
        real_perf = data.real_perf
    else:
        ref = DetectionSurrogate(learner.scene_spec, learner.params)
        ref = ref.with_real(oracle(state.pool_ids))
        real_perf = _evaluate_surrogate(cfg, ref, data.test_scenes, seed, 0,
                                        stream=_REFERENCE)

    points = [CurvePoint(0, 0, 0.0, sim_perf, 0.0)]
    selected_log: list[list[int]] = []
    labeled_scenes = list(data.sim_scenes)
    truncated = False

    for it in range(1, cfg.iterations + 1):
        if len(state.pool_ids) < cfg.selection.batch_size:
            truncated = True
            break
        state.iteration = it
        ids = _select_detection(cfg, state.model, data.pool_scenes,
                                state.pool_ids, labeled_scenes, n_pool0,
                                seed, it)
        batch_scenes = oracle(ids)
        state.model = state.model.with_real(batch_scenes)
        labeled_scenes.extend(batch_scenes)
        state.acquire(ids)

        metric = _evaluate_surrogate(cfg, state.model, data.test_scenes, seed, it)
        batch_labels = np.concatenate([s.gt_classes for s in batch_scenes]) \
            if batch_scenes else np.empty(0, dtype=int)
        labeled_count = len(state.labeled_ids)
        points.append(CurvePoint(it, labeled_count, labeled_count / n_pool0,
                                 metric, inter_class_variation(batch_labels,
                                                               data.n_classes)))
        selected_log.append(list(ids))

    return LearningCurve(points=points, sim_perf=sim_perf, real_perf=real_perf,
                         strategy=cfg.selection.strategy, seed=seed,
                         level=cfg.level, truncated=truncated,
                         selected_ids=selected_log)


def _evaluate_surrogate(cfg, model, test_scenes, seed, it, stream=_EVAL) -> float:
    detections = [model.detect(scene,
                               _stream_seed(seed, stream, it, sid),
                               iou_threshold=cfg.iou_threshold,
                               cls_bayesian=cfg.cls_bayesian)
                  for sid, scene in enumerate(test_scenes)]
    return evaluate_detection(detections, test_scenes, cfg.iou_threshold)


def _select_detection(cfg, model, pool_scenes, pool_ids, labeled_scenes,
                      n_pool0, seed, it):
    sel = cfg.selection
    sel_seed = _stream_seed(seed, _SELECT, it, cfg.selection_seed)

    def fused_for(pid):
        return model.detect(pool_scenes[pid],
                            _stream_seed(seed, _SCORE, it, pid),
                            iou_threshold=cfg.iou_threshold,
                            cls_bayesian=cfg.cls_bayesian)

    def score_of(pid):
        return acq.score_image(fused_for(pid), cfg.acquisition, image_id=pid).score

    if sel.strategy == "random":
        return sampling.select_random(pool_ids, sel.batch_size, sel_seed)
    if sel.strategy == "topn":
        return sampling.select_topn([(pid, score_of(pid)) for pid in pool_ids],
                                    sel.batch_size)
    if sel.strategy == "subsample_topn":
        return sampling.select_subsample_topn(pool_ids, score_of,
                                              sel.subsample_fraction,
                                              sel.batch_size, sel_seed)
    if sel.strategy in ("coreset", "clue"):
        n_classes = model.scene_spec.n_classes
        feats = np.array([_scene_feature(fused_for(pid), n_classes)
                          for pid in pool_ids])
        if sel.strategy == "coreset":
            lab = np.array([_scene_feature(
                model.detect(s, _stream_seed(seed, _SCORE, it, n_pool0 + sid),
                             iou_threshold=cfg.iou_threshold,
                             cls_bayesian=cfg.cls_bayesian), n_classes)
                for sid, s in enumerate(labeled_scenes)])
            idx = sampling.select_coreset(feats, lab, sel.batch_size)
        else:
            unc = np.array([score_of(pid) for pid in pool_ids])
            idx = sampling.select_clue(feats, np.maximum(unc, 0.0),
                                       sel.batch_size, sel_seed)
        return [pool_ids[i] for i in idx]
    if sel.strategy == "batchbald":
        raise ValueError("batchbald needs per-item class-probability samples; "
                         "it is only available on the classification track")
    raise ValueError(f"unknown strategy {sel.strategy!r}")


def _scene_feature(detections, n_classes: int) -> np.ndarray:
    """Image-level embedding: mean fused class scores plus detection count."""
    if not detections:
        return np.zeros(n_classes + 1)
    probs = np.mean([d.class_probs for d in detections], axis=0)
    return np.concatenate([probs, [float(len(detections))]])


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# experiment assembly (shared by the CLI, demos and acceptance suite)
# ---------------------------------------------------------------------------

@dataclass
class ClassificationExperimentSpec:
    """Digits-analog track: Gaussian mixtures with a sim->real shift.

    Defaults are calibrated so a sim-trained model lands well under a
    real-trained one and the pool's rare classes carry the signal that
    uncertainty selection must find.
    """

    n_classes: int = 8
    dim: int = 8
    sim_size: int = 500
    pool_size: int = 2000
    test_size: int = 1000
    class_separation: float = 4.0
    cov_scale: float = 1.0
    mean_shift: float = 5.5      # translation magnitude (covariate shift)
    label_skew: float = 2.5      # power-law pool priors (label shift)
    hidden_dim: int = 64
    dropout_rate: float = 0.1
    seed: int = 100              # dataset stream base, mixed with the run seed


def build_classification_experiment(spec: ClassificationExperimentSpec,
                                    run_seed: int):
    """Datasets, oracle and learner template for one run seed."""
    data_ss = np.random.SeedSequence([spec.seed, _DATA, int(run_seed)])
    s_sim, s_pool, s_test, s_dir = data_ss.spawn(4)

    means = grid_class_means(spec.n_classes, spec.dim, spec.class_separation)
    sim_domain = ClassificationDomainSpec(class_means=means,
                                          cov_scale=spec.cov_scale)
    direction = np.random.default_rng(s_dir).standard_normal(spec.dim)
    direction /= np.linalg.norm(direction)
    real_domain = shifted_domain(
        sim_domain,
        translation=spec.mean_shift * direction,
        priors=skewed_priors(spec.n_classes, spec.label_skew))
    # real test set keeps the covariate shift but uniform labels
    test_domain = shifted_domain(sim_domain,
                                 translation=spec.mean_shift * direction)

    sim_train = generate_classification(sim_domain, spec.sim_size, s_sim)
    pool = generate_classification(real_domain, spec.pool_size, s_pool)
    test = generate_classification(test_domain, spec.test_size, s_test)
    pool_x, pool_y = stack_examples(pool)
    test_x, test_y = stack_examples(test)

    datasets = ClassificationDatasets(sim_train=sim_train, pool_x=pool_x,
                                      test_x=test_x, test_y=test_y,
                                      n_classes=spec.n_classes)
    oracle = make_classification_oracle(pool_y)
    learner = MCDropoutClassifier(spec.dim, spec.hidden_dim, spec.n_classes,
                                  dropout_rate=spec.dropout_rate)
    return datasets, oracle, learner


@dataclass
class DetectionExperimentSpec:
    """Detection-analog track: synthetic scenes plus the skill surrogate."""

    n_classes: int = 3
    width: float = 128.0
    height: float = 128.0
    objects_min: int = 1
    objects_max: int = 3
    box_min: float = 24.0
    box_max: float = 48.0
    anchors_per_object: int = 3
    mc_samples: int = 10
    sim_scenes: int = 100
    pool_scenes: int = 400
    test_scenes: int = 160
    label_skew: float = 1.5
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    seed: int = 100


def build_detection_experiment(spec: DetectionExperimentSpec, run_seed: int):
    data_ss = np.random.SeedSequence([spec.seed, _DATA, int(run_seed)])
    s_sim, s_pool, s_test = data_ss.spawn(3)

    base = DetectionSceneSpec(width=spec.width, height=spec.height,
                              n_classes=spec.n_classes,
                              objects_per_scene=(spec.objects_min, spec.objects_max),
                              box_size_range=(spec.box_min, spec.box_max),
                              anchors_per_object=spec.anchors_per_object,
                              mc_samples=spec.mc_samples)
    pool_spec = replace(base, class_priors=skewed_priors(spec.n_classes,
                                                         spec.label_skew))

    sim_scenes = generate_detection_scenes(base, spec.sim_scenes, s_sim)
    pool_scenes = generate_detection_scenes(pool_spec, spec.pool_scenes, s_pool)
    test_scenes = generate_detection_scenes(base, spec.test_scenes, s_test)

    datasets = DetectionDatasets(sim_scenes=sim_scenes, pool_scenes=pool_scenes,
                                 test_scenes=test_scenes,
                                 n_classes=spec.n_classes)
    oracle = make_detection_oracle(pool_scenes)
    learner = DetectionSurrogate(base, spec.surrogate)
    return datasets, oracle, learner


# ---------------------------------------------------------------------------
# run artifacts: curve CSV and replayable manifest
# ---------------------------------------------------------------------------

CSV_HEADER = "run_seed,strategy,iteration,labeled_count,labeled_fraction,metric,icv"


def curve_csv_text(curves) -> str:
    lines = [CSV_HEADER]
    for curve in curves:
        for p in curve.points:
            lines.append(f"{curve.seed},{curve.strategy},{p.iteration},"
                         f"{p.labeled_count},{repr(p.labeled_fraction)},"
                         f"{repr(p.metric)},{repr(p.icv)}")
    return "\n".join(lines) + "\n"


def write_curve_csv(path, curves) -> None:
    with open(path, "w") as fh:
        fh.write(curve_csv_text(curves))


def read_curve_csv(path) -> dict:
    """Rows grouped by run seed: {seed: list of CurvePoint}, plus strategy."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    by_seed: dict[int, list[CurvePoint]] = {}
    strategies: dict[int, str] = {}
    for ln in lines[1:]:
        seed_s, strategy, it, count, frac, metric, icv = ln.split(",")
        seed = int(seed_s)
        strategies[seed] = strategy
        by_seed.setdefault(seed, []).append(
            CurvePoint(int(it), int(count), float(frac), float(metric), float(icv)))
    return {"points": by_seed, "strategies": strategies}


def manifest_text(config_items: dict, curves) -> str:
    """Replayable run record: versions, resolved config, per-run outcomes.

    Deliberately free of timestamps and filesystem paths so that
    reruns of the same (config, seed) are byte-identical.
    """
    import scipy

    from . import __version__
    lines = ["manifest_version = 1",
             f"package_version = {__version__}",
             f"numpy_version = {np.__version__}",
             f"scipy_version = {scipy.__version__}"]
    for key in sorted(config_items):
        lines.append(f"config.{key} = {config_items[key]}")
    for curve in curves:
        tag = f"run.{curve.seed}"
        lines.append(f"{tag}.strategy = {curve.strategy}")
        lines.append(f"{tag}.level = {repr(curve.level)}")
        lines.append(f"{tag}.sim_perf = {repr(curve.sim_perf)}")
        lines.append(f"{tag}.real_perf = {repr(curve.real_perf)}")
        lines.append(f"{tag}.truncated = {curve.truncated}")
        for it, ids in enumerate(curve.selected_ids, start=1):
            lines.append(f"{tag}.selected.{it} = " + ",".join(str(i) for i in ids))
    return "\n".join(lines) + "\n"


def write_manifest(path, config_items: dict, curves) -> None:
    with open(path, "w") as fh:
        fh.write(manifest_text(config_items, curves))


def read_manifest(path) -> dict:
    """Flat key -> string value mapping of a manifest file."""
    items = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if " = " not in line:
                raise ValueError(f"{path}:{lineno}: malformed manifest line {line!r}")
            key, value = line.split(" = ", 1)
            items[key.strip()] = value
    if items.get("manifest_version") != "1":
        raise ValueError(f"{path}: unsupported or missing manifest_version")
    return items


def curve_from_artifacts(manifest: dict, csv_data: dict, seed: int) -> LearningCurve:
    """Rebuild a LearningCurve from manifest + CSV rows for gap recomputation."""
    tag = f"run.{seed}"
    points = csv_data["points"][seed]
    selected = []
    it = 1
    while f"{tag}.selected.{it}" in manifest:
        raw = manifest[f"{tag}.selected.{it}"]
        selected.append([int(v) for v in raw.split(",")] if raw else [])
        it += 1
    return LearningCurve(points=points,
                         sim_perf=float(manifest[f"{tag}.sim_perf"]),
                         real_perf=float(manifest[f"{tag}.real_perf"]),
                         strategy=manifest[f"{tag}.strategy"],
                         seed=seed,
                         level=float(manifest[f"{tag}.level"]),
                         truncated=manifest[f"{tag}.truncated"] == "True",
                         selected_ids=selected)
