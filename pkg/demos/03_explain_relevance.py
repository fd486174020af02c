"""Attribute a trained model's decisions back to channels.

Trains briefly on an easy cohort, then runs the epsilon relevance pass
per test trial and aggregates class-conditional channel relevance. The
bars should concentrate on the channel group each class amplifies.
"""

import numpy as np

from mirep.evaluation import plan_scenario1, run_split, variant_by_name
from mirep.explain import lrp_epsilon, topographic_relevance
from mirep.model import EncoderConfig
from mirep.model.encoders import forward
from mirep.signal import CohortSpec, generate_cohort
from mirep.training import LossWeights, TrainConfig

spec = CohortSpec(num_subjects=3, trials_per_class=30, seed=11)
trials = generate_cohort(spec)
config = EncoderConfig(backbone="eegnet", n_c=spec.n_c, n_t=spec.n_t,
                       sample_rate=spec.sample_rate)
train_config = TrainConfig(epochs=30, batch_size=30, lr=5e-3,
                           lr_decay_per_epoch=0.99, l2=0.0, dropout=0.0,
                           patience=10)
plan = plan_scenario1(trials, seed=0, n_folds=5)
run = plan.runs[0]
_, result, model = run_split(trials, run, "I", config, train_config,
                             LossWeights(0.5, 0.3, 0.5), variant_by_name("IV"),
                             base_seed=0)
print(f"trained to val accuracy {result.best_val_acc:.3f} "
      f"(epoch {result.best_epoch})")

test_trials = [trials[i] for i in run.test_idx]
maps = {0: [], 1: []}
for t in test_trials:
    _, probs = forward(t.x[None, :, :, None].astype(np.float32), model)
    if int(np.argmax(probs[0])) == t.label:
        maps[t.label].append(lrp_epsilon(model, t, t.label))

for label in (0, 1):
    topo = topographic_relevance(maps[label])
    print(f"\nclass {label} relevance over {len(maps[label])} correct trials "
          f"(ground-truth group {spec.groups[label]}):")
    for c, value in enumerate(topo.values):
        bar = "#" * int(round(30 * value))
        mark = "*" if c in spec.groups[label] else " "
        print(f"  ch {c} {mark} |{bar}")
