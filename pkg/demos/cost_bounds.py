"""One-shot and second-order redistribution costs over an epsilon grid.

Run: python3 demos/cost_bounds.py
"""

import numpy as np

from stateredist import bundled_example, thm1_cost, thm2_expansion
from stateredist.states import to_pure
from stateredist.tensor import SystemLayout, random_pure_state

EPS = (0.05, 0.1, 0.2, 0.3, 0.4)


def table(name, psi):
    print(f"\n{name}")
    print(f"{'eps':>5} {'eps_prime':>10} {'delta_q':>9} {'delta_e':>9} {'cost':>9} {'a':>7} {'b':>7}")
    for eps in EPS:
        rep = thm1_cost(psi, eps)
        co = thm2_expansion(psi, eps)
        print(
            f"{eps:5.2f} {rep.epsilon_prime:10.3e} {rep.delta_q:9.4f} {rep.delta_e:9.4f}"
            f" {rep.one_shot_cost:9.4f} {co.a:7.4f} {co.b:7.4f}"
        )


if __name__ == "__main__":
    table("GHZ on A, B, C with an 8-dim reference", to_pure(bundled_example()))
    layout = SystemLayout([("A", 2), ("B", 2), ("C", 2), ("R", 8)])
    table("Haar-random pure state, seed 1", random_pure_state(layout, np.random.default_rng(1)))
    print("\nThe one-shot cost is dominated by -2 log eps' at this size; a and b only matter for many copies.")
