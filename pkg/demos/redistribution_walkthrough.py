"""Stage by stage run of the two-step redistribution protocol.

Alice's A is maximally entangled with Charlie's C, so the relay step can move
it with one ebit and no qubits. A random state needs qubits as well.

Run: python3 demos/redistribution_walkthrough.py
"""

import numpy as np

from stateredist import redistribute
from stateredist.tensor import SystemLayout, maximally_entangled, random_pure_state, tensor


def show(title, psi, q_budget, ebits, eps=0.2, seed=5):
    out = redistribute(psi, q_budget, ebits, eps, seed)
    print(f"\n{title}: q_budget={q_budget} initial ebits={ebits}")
    for st in out.per_stage:
        extra = {k: v for k, v in st.items() if k not in ("stage", "norm")}
        print(f"  {st['stage']:<13} norm={st['norm']:.12f} {extra}")
    print(
        f"  sent {out.qubits_physically_sent} qubits, consumed {out.ebits_consumed} ebits,"
        f" returned {out.ebits_returned}, fidelity {out.final_fidelity:.6f}"
    )


if __name__ == "__main__":
    gen = np.random.default_rng(0)
    relay = tensor(maximally_entangled(2, ("A", "C")), random_pure_state([("B", 2), ("R", 2)], gen))
    show("A entangled with C", relay, 0, 1)
    rand = random_pure_state(SystemLayout([("A", 2), ("B", 2), ("C", 2), ("R", 8)]), gen)
    for q in (0, 1):
        show("random state", rand, q, 1)
