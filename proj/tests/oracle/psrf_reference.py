#!/usr/bin/env python3
"""Ten-line reference for the Gelman-Rubin potential scale reduction factor.

PSRF = sqrt(((n-1)/n * W + B/n) / W), W = mean within-chain sample
variance, B = n * variance of the chain means.  Regenerates the frozen
constant used in tests/unit/test_mcmc.cpp.
"""
import numpy as np

chains = np.array([[0, 2] * 5, [10, 12] * 5], dtype=float)
n = chains.shape[1]
w = chains.var(axis=1, ddof=1).mean()
b = n * chains.mean(axis=1).var(ddof=1)
print(f"W = {w}, B = {b}")
print(f"psrf = {np.sqrt(((n - 1) / n * w + b / n) / w):.16e}")
