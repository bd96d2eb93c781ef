"""The dependent Brownian coefficient pair (A, B).

Shows the marginal checks (E log A = -log 2, Hill index of B near 1), the
chi-square test of the joint law, and a small left-tail table for A B' + B.
"""

import math

import numpy as np

from iedtails import make_rng
from iedtails import flemingviot as fv
from iedtails.tail_estimation import hill_fit


def main():
    a, b, _, _ = fv.sample_pairs(make_rng(1), 1_000_000)
    print(f"E[log A] = {np.mean(np.log(a)):.4f} (exact {-math.log(2):.4f})")
    print(f"Hill index of B (k=1e4) = {hill_fit(b, 10_000).alpha_hat:.3f}")
    stat, p = fv.chi_square_test(a, b)
    print(f"chi-square on 20x20 quantile cells: stat={stat:.1f} p={p:.3f}")

    eps = [0.2, 0.1]
    n = fv.required_n(min(eps))
    print(f"tail table with n={n}")
    table = fv.dependent_tail_experiment(eps, n, make_rng(2))
    print(table.to_csv())


if __name__ == "__main__":
    main()
