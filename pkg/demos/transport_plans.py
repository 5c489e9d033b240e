"""Entropic transport between paired point clouds, next to the exact optimum.

The instances are small enough to enumerate every permutation, so the
unregularized optimum is available as a reference.  Shows the epsilon
ladder closing the gap and what the plan itself looks like.

    python3 demos/transport_plans.py
"""

import itertools

import numpy as np

from psda.otreg import cost_matrix, ot_loss, sinkhorn


def exact_assignment(cost):
    # brute force over permutations, fine for n <= 6
    n = cost.shape[0]
    best = np.inf
    best_perm = None
    for perm in itertools.permutations(range(n)):
        v = sum(cost[i, perm[i]] for i in range(n)) / n
        if v < best:
            best = v
            best_perm = perm
    return best, best_perm


def main():
    rng = np.random.default_rng(20)
    n, d = 5, 3
    orig = rng.normal(size=(n, d))
    aug = orig[::-1] + rng.normal(size=(n, d)) * 0.1  # scrambled plus noise

    cost = cost_matrix(orig, aug)
    print("cost matrix (squared distances, %dx%d):" % cost.shape)
    for row in cost:
        print("   " + " ".join("%7.3f" % v for v in row))

    lp, perm = exact_assignment(cost)
    print("\nexact optimum %.6f via permutation %s" % (lp, perm))

    print("\nepsilon ladder (uniform marginals)")
    print("  %8s  %12s  %10s  %6s  %s" % ("epsilon", "loss", "gap", "iters", "marginal_err"))
    for eps in (1.0, 0.1, 0.01, 0.001):
        plan = sinkhorn(cost, eps, max_iter=200000, tol=1e-12)
        loss = ot_loss(plan, cost)
        gap = loss - lp
        print("  %8g  %12.6f  %10.2e  %6d  %.2e"
              % (eps, loss, gap, plan.iterations_used, plan.marginal_error))

    # at small epsilon the plan concentrates on the optimal permutation
    plan = sinkhorn(cost, 0.001, max_iter=200000, tol=1e-12)
    print("\nplan at epsilon=0.001, rows scaled by n (1.0 = full mass):")
    scaled = plan.plan * n
    for i, row in enumerate(scaled):
        marks = " ".join("%5.3f" % v for v in row)
        print("   row %d: %s   <- perm says col %d" % (i, marks, perm[i]))

    support = scaled.argmax(axis=1)
    print("\nargmax per row:", support.tolist(), " matches exact permutation:",
          tuple(support) == perm)


if __name__ == "__main__":
    main()
