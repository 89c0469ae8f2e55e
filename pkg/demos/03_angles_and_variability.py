# %% [markdown]
# # How the class subspaces sit, and what they do to the features
#
# Principal angles describe the relative position of two subspaces. After
# training we look at the smallest angle between each pair of classes, then
# at two feature statistics: intra-class variability (mean angle between
# same-class features) and the class separation R².

# %%
import numpy as np

from gcr.analysis import (FeatureBank, angle_report, class_separation_r2,
                          intra_class_variability, principal_angles)
from gcr.data import make_blobs
from gcr.train import TrainConfig, train

# %% [markdown]
# Sanity first: two lines at 45 degrees.

# %%
e = np.eye(3)
print(principal_angles(e[:, :1], ((e[:, 0] + e[:, 1]) / np.sqrt(2))[:, None]))

# %%
train_set, test_set = make_blobs(10, 64, 300, spread=1.5, seed=0, modes=3,
                                 test_per_class=200)
models = {k: train(TrainConfig(head="gcr", k=k, epochs=15), train_set).model for k in (1, 4, 8)}
models["linear"] = train(TrainConfig(head="linear", epochs=15), train_set).model

# %%
report = angle_report(models[8].head.param)
off = ~np.eye(report.num_classes, dtype=bool)
print("k=8 smallest pairwise angle: min %.1f  median %.1f degrees"
      % (report.min_angle[off].min(), np.median(report.min_angle[off])))

# %% [markdown]
# Larger subspaces leave more room inside a class. Variability goes up with
# k and R² goes down: features are less collapsed. A single seed is noisy
# between k=4 and k=8; medians over several seeds settle the order.

# %%
for name, model in models.items():
    bank = FeatureBank(model.features(test_set.x), test_set.y)
    print(f"{str(name):>6}  variability {intra_class_variability(bank):6.2f}"
          f"  R2 {class_separation_r2(bank):.3f}")
