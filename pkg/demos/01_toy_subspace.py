# %% [markdown]
# # A line chasing a vector
#
# The smallest Grassmann problem: G(1, 2), the lines through the origin of
# the plane. We look for the line that keeps as much of a fixed vector x0 as
# possible. The answer is obviously span(x0), and the best projected length
# is ||x0||, so this is a good place to watch RSGD work.

# %%
import numpy as np

from gcr.train import fit_projection_toy

x0 = np.array([1.2, -1.6])
start = np.array([[0.0], [1.0]])
basis, history = fit_projection_toy(x0, start, lr=0.4, momentum=0.9, steps=120)

# %%
for t in (0, 5, 10, 20, 40, 80, 120):
    print(f"step {t:4d}  ||proj x0|| = {history[t]:.12f}")
print("target        ", np.linalg.norm(x0))

# %% [markdown]
# The learned basis vector is x0 / ||x0|| up to sign. Sign is a gauge: both
# vectors span the same line.

# %%
print("basis", basis[:, 0], " x0/|x0|", x0 / np.linalg.norm(x0))

# %% [markdown]
# A start exactly orthogonal to x0 is a critical point. The objective is zero
# there and the gradient vanishes, so the optimizer refuses to move.

# %%
from gcr.errors import DegenerateFeature

try:
    fit_projection_toy(np.array([1.0, 0.0]), np.array([[0.0], [1.0]]))
except DegenerateFeature as exc:
    print("orthogonal start:", exc)
