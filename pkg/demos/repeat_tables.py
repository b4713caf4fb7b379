"""Can the repeat model find the recency and frequency weights that generated the data?

Plants strong recency decay, trains on 50k re-purchase instances and prints
the recovered tables next to the truth, then compares against the two
baselines on held-out instances.
"""

import numpy as np

from spendseq import repeat, synth

s_true = np.linspace(1.0, 3.0, 8)
t_true = 0.5 ** np.arange(8)
train = synth.generate_repeat_instances(50_000, s_true, t_true, seed=1)
test = synth.generate_repeat_instances(20_000, s_true, t_true, seed=2)

model = repeat.train_repeat(train)
# users make 40 purchases, so the 50+ frequency bucket never votes and its weight is not identified
print("frequency bucket weights")
print("  true   ", np.round(s_true, 3))
print("  learned", np.round(model.s_weights, 3))
print("recency bucket weights")
print("  true   ", np.round(t_true, 3))
print("  learned", np.round(model.t_weights, 3))
print(f"objective: {model.trajectory[0]:.1f} -> {model.trajectory[-1]:.1f} in {model.outer_iterations} rounds")

m = repeat.evaluate_repeat(model, test)
print(f"\naccuracy  model {m.model_acc:.3f}  most recent {m.recent_acc:.3f}  most frequent {m.frequent_acc:.3f}")
