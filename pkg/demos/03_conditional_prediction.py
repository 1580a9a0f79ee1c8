"""
Conditioning on the AV plan
===========================

In the synthetic intersection scenes the other driver yields when the AV
goes and proceeds when it stops. A classifier that sees the AV plan (late
fusion) can tell the two apart; one that does not must guess.
"""

import numpy as np

from trajset import eval_multimodal, rcc
from trajset import model as M
from trajset.setgen import generate_set_metric_driven
from trajset.synth import Dataset, make_interaction_dataset, make_interaction_scenario

train = make_interaction_dataset(500, seed=1)
test = make_interaction_dataset(300, seed=2)
tset, _ = generate_set_metric_driven(train.futures(), 128)
bank = M.SetBank(tset)

# %%
# Train both variants with the same schedule and the same set.

cfg = M.TrainConfig(schedule=[(1e-3, 20), (1e-4, 10)])
models = {}
for conditional in (False, True):
    x, av, _, _ = M.training_arrays(train, bank, conditional)
    net = M.build_model(x.shape[1], bank, conditional=conditional,
                        n_av_features=None if av is None else av.shape[1])
    curve = M.train(net, train, bank, cfg)
    models[conditional] = net
    preds = M.predict_dataset(net, test, bank, k=1)
    rep = eval_multimodal([p.trajectories for p in preds], test.futures(), 1)
    name = "late fusion  " if conditional else "unconditional"
    print(f"{name} minFDE@1 {rep.min_fde:6.2f} m  MR@1 {rep.miss_rate:5.1f} %  "
          f"final loss {curve[-1]:.3f}  RCC {rcc(net):.1f} %")

# %%
# Late fusion means the scene encoding is computed once and reused for every
# candidate plan. Here one scene is scored under its own plan and the
# opposite one.

sc = test.scenarios[0]
alt_plan = "go" if sc.meta["av_plan"] == "stop" else "stop"
alt = make_interaction_scenario(0, seed=2, av_plan=alt_plan)  # same scene, other plan
x, av = M.dataset_features(test.subset([0]), conditional=True)
_, av_alt = M.dataset_features(Dataset([alt], test.dt, test.t_past, test.t_future), conditional=True)
for plan, probs in zip((sc.meta["av_plan"], alt_plan), M.conditioned_forward(models[True], x, [av, av_alt])):
    best = int(np.argmax(probs[0]))
    print(f"AV plan {plan:4s}: most likely endpoint {np.round(bank.trajectories[best, -1], 1)}")
