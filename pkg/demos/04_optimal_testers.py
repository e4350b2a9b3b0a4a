"""
Optimal covariant testers
=========================

For a tester built by rotating one seed with random unitaries on both sides,
the averaged error eta depends only on three numbers A, B, C.  Choosing the
seed well reaches the lowest possible eta for each class of devices.
"""

import numpy as np

from qtomo.combs import realize_tester, tester_probabilities
from qtomo.devices import random_unital_channel
from qtomo.harness import ExperimentConfig, run_experiment
from qtomo.optimal import build_optimal_tester, optimal_seed, results_table

# %%
# Closed forms against the seed pipeline for all classes and d = 2..5.
for row in results_table():
    print(f"{row['kind']:9s} d={row['d']}  eta={row['eta_bound']:.6g}  residual={row['residual']:.1e}")

# %%
# The optimal seed for unital channels is maximally entangled: its reduced
# state is maximally mixed, with purity 1/2 at d = 2.
seed = optimal_seed("unital", 2)
print("beta:", seed.beta, "purity:", seed.purity)

# %%
# Any tester can be run as "prepare a probe, apply the channel to half of
# it, measure a POVM".  The realization gives the same outcome statistics.
T = build_optimal_tester("unital", 2)
Z = realize_tester(T)
C = random_unital_channel(2, rng=np.random.default_rng(0))
print("max probability difference:", np.max(np.abs(Z.probabilities(C) - tester_probabilities(T, C))))

# %%
# Finally a Monte Carlo run: 300 repeated tomographies of a unital channel,
# 10^4 shots each.  The empirical eta should be close to the optimum 28.
rec = run_experiment(ExperimentConfig(task="process", kind="unital", shots=10_000, trials=300, seed=2))
print("MSE / prediction:", round(rec.ratio, 3), " empirical eta:", round(rec.extra["eta_empirical"], 2))
