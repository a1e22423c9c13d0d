#!/usr/bin/env python3
"""Brute-force GPCM/NRM reference evaluator.

Evaluates category probabilities directly as ratios of exponentials,
with no log-sum-exp rearrangement, so the C++ implementation can be
checked against an independent computation path.  Run this script to
regenerate the frozen constants used in tests/unit/test_model_core.cpp.
"""
import math

# Item 1 of the built-in generating bank: a, (d2..d5)
ITEM1_A = 1.476
ITEM1_STEPS = (-1.726, -0.145, -0.849, 1.765)


def gpcm_probs(theta, a, steps):
    """P(category k), k=1..m, via the plain exponential-ratio formula."""
    m = len(steps) + 1
    deltas = (0.0,) + tuple(steps)  # d1 = 0
    numers = []
    for k in range(1, m + 1):
        s = sum(a * (theta - deltas[h]) for h in range(k))
        numers.append(math.exp(s))
    z = sum(numers)
    return [x / z for x in numers]


def item1_probs(theta):
    return gpcm_probs(theta, ITEM1_A, ITEM1_STEPS)


def loglik(responses, banks, thetas):
    """responses[i][j] is a 0-based category; banks[j] = (a, steps)."""
    total = 0.0
    for i, theta in enumerate(thetas):
        for j, (a, steps) in enumerate(banks):
            total += math.log(gpcm_probs(theta, a, steps)[responses[i][j]])
    return total


if __name__ == "__main__":
    for theta in (-2.0, 0.0, 2.0):
        p = item1_probs(theta)
        print(f"theta={theta:+.1f}:", ", ".join(f"{x:.16e}" for x in p))
