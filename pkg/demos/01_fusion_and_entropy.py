"""Cluster-and-fuse walkthrough: from raw anchor samples to one detection.

Three anchors fire around the same object, each with a handful of
Monte-Carlo box and score samples.  Spatial clustering groups them,
product fusion collapses the cluster into one detection, and the two
entropy measures read off how unsure the detector still is.
"""

import numpy as np

from sim2real_al.acquisition import cls_entropy, reg_entropy
from sim2real_al.fusion import (AnchorPrediction, bayesod_inference,
                                cluster_anchors, iou, Box)

rng = np.random.default_rng(7)

# one object near (20, 20)-(52, 52); anchors jitter around it
gt = np.array([20.0, 20.0, 52.0, 52.0])
anchors = []
for k in range(3):
    boxes = gt + rng.normal(0, 2.0, size=(10, 4))
    logits = np.full((10, 3), -4.0)
    logits[:, 1] = 2.0                      # class 1 is the right one
    logits += rng.normal(0, 0.8, size=(10, 3))
    scores = 1 / (1 + np.exp(-logits))
    anchors.append(AnchorPrediction(score_samples=scores, box_samples=boxes))

# a distractor anchor far away, low score
far = np.array([100.0, 100.0, 120.0, 120.0])
anchors.append(AnchorPrediction(
    score_samples=rng.uniform(0.05, 0.3, size=(10, 3)),
    box_samples=far + rng.normal(0, 1.0, size=(10, 4))))

print("pairwise IoU of the first two anchor mean boxes:",
      round(iou(Box.from_array(anchors[0].mean_box()),
                Box.from_array(anchors[1].mean_box())), 3))

clusters = cluster_anchors(anchors, iou_threshold=0.5)
print(f"{len(anchors)} anchors -> {len(clusters)} clusters "
      f"(sizes {[c.size for c in clusters]})")

detections = bayesod_inference(anchors, iou_threshold=0.5)
for i, det in enumerate(detections):
    u_cls = cls_entropy(det.class_probs)
    u_reg = reg_entropy(det.box_cov)
    print(f"detection {i}: label={det.label} conf={det.confidence:.3f} "
          f"members={det.cluster_size}")
    print(f"  box mean {np.round(det.box_mean, 1)}")
    print(f"  semantic entropy {u_cls:.3f} nats, spatial entropy {u_reg:.3f} nats")

print("\nthe fused box of the 3-anchor cluster is much tighter than any "
      "single anchor's sample cloud: covariance shrinks as 1/M.")
