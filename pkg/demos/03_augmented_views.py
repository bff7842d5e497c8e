"""
Explanation-guided views versus random views
============================================

Elements scoring above ``mean + lambda * std`` survive in both views; the
rest are split so that view 2 keeps exactly what view 1 dropped.
"""

import numpy as np

from samgcl.augment import AugmentConfig, apply, make_masks, random_masks
from samgcl.graph import generate_motif_dataset, motif_membership
from samgcl.sam import Explanation, edge_scores, normalize01

ds = generate_motif_dataset(seed=1)
g, member = ds.graphs[0], motif_membership(ds)[0]
rng = np.random.default_rng(0)

# %%
# A stand-in explainer that prefers motif nodes.
psi = member + 0.3 * rng.random(g.num_nodes)
expl = Explanation(psi, normalize01(psi), edge_scores(psi, g.edges), np.ones(1))

for lam in (-1.0, 0.0, 1.0):
    masks = make_masks(g, expl, AugmentConfig(lambda_e=lam, lambda_f=lam), None, rng)
    both = masks.edge_mask_1 & masks.edge_mask_2
    print(f"lambda={lam:+.0f}: edges in both views {both.sum()}/{g.num_edges}")

# %%
# Random views keep each edge independently in each view.
g1, g2 = apply(g, random_masks(g, 0.8, 0.8, rng))
print("random views keep", g1.num_edges, "and", g2.num_edges, "of", g.num_edges, "edges")
