"""
Semi-supervised labels on two moons
===================================

Ten percent of the points carry labels. The rest are filled in by the
harmonic solution on the learned graph, then read off with an argmax.
"""

import numpy as np

from smkl import LabelVector, SolverConfig, build_bank, evaluate, fit_ssl, split_labeled
from smkl.datasets import make_moons

X, y = make_moons(n=200, noise=0.05, seed=0)
bank = build_bank(X, "ssl7")
Y = LabelVector.from_array(y)

###############################################################################
# A weak graph-smoothness term works better here than the defaults: with
# alpha=1 the labeled points of one class can end up cut off from the rest.

cfg = SolverConfig(alpha=0.1, beta=1.0, gamma=0.1)

accs = []
for k in range(5):
    mask = split_labeled(Y, 0.1, seed=k)
    result = fit_ssl(bank, Y, mask, cfg.with_(seed=k))
    acc = evaluate(result.labels, y, mask.unlabeled_idx, mode="ssl").acc
    accs.append(acc)
    print(f"split {k}: {len(mask.labeled_idx)} labeled, unlabeled accuracy {acc:.4f}")

print(f"mean {np.mean(accs):.4f} +- {np.std(accs):.4f}")
