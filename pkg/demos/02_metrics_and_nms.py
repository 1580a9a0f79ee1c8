"""
Metrics and endpoint NMS
========================

A walk through the evaluation conventions with tiny hand-made predictions,
then the effect of endpoint non-maximum suppression on a scored set.
"""

import numpy as np

from trajset import AgentClass, eval_multimodal, select_nms, tri
from trajset.nms import ScoredSet
from trajset.setgen import TrajectorySet

# %%
# Best-of-k picks the prediction whose endpoint is nearest, then reports that
# prediction's ADE, even when another mode has lower ADE.

gt = np.zeros((6, 2))
a = np.zeros((6, 2))
a[-1] = [3.0, 0.0]              # good path, bad endpoint
b = np.full((6, 2), [2.2, 0.0])
b[-1] = [1.0, 0.0]              # worse path, better endpoint
print(eval_multimodal([np.stack([a, b])], gt[None], k=2).as_dict())

# A miss is an endpoint error strictly above 2 m.
hit = np.zeros((1, 3, 2))
hit[0, -1] = [2.0, 0.0]
print("MR at exactly 2 m:", eval_multimodal([hit], np.zeros((1, 3, 2)), 1).miss_rate)

# %%
# Turn-rate infeasibility flags predictions that turn tighter than the class allows.

ang = -np.pi / 2 + 0.3 * np.arange(8)
tight = np.column_stack([np.cos(ang), 1 + np.sin(ang)])  # radius 1 m
straight = np.column_stack([np.arange(1.0, 9.0), np.zeros(8)])
print("vehicle TRI:", tri([np.stack([tight, straight])], [AgentClass.VEHICLE], [[0.0, 0.0]]), "%")
print("pedestrian TRI:", tri([np.stack([tight, straight])], [AgentClass.PEDESTRIAN], [[0.0, 0.0]]), "%")

# %%
# NMS: three candidates, two of them ending 1 m apart. With r_nms = 1.8 the
# second is suppressed and the distant third takes its place.

ends = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
trajs = np.linspace(0, 1, 5)[None, :, None] * ends[:, None, :]
scored = ScoredSet(TrajectorySet(trajs), np.array([0.5, 0.3, 0.2]))
for r in (0.0, 1.8):
    picked = select_nms(scored, k=2, r_nms=r)
    print(f"r_nms={r}:", [(t[-1].tolist(), p) for t, p in picked])
