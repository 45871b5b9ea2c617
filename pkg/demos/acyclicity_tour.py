"""Walk through the log-det acyclicity function on small graphs.

Run with ``python demos/acyclicity_tour.py``.
"""

import numpy as np

from nomad.acyclicity import eval_logdet, eval_matexp
from nomad.graphs import find_cycle, is_acyclic


def show(name, w):
    ld, me = eval_logdet(w, 1.0), eval_matexp(w)
    print(f"{name:>12}: acyclic={is_acyclic(w)!s:5}  logdet h={ld.value:.3e}  "
          f"matexp h={me.value:.3e}")


chain = np.array([[0.0, 0.8, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 0.0]])
show("chain", chain)

loop = chain.copy()
loop[2, 0] = 0.3
show("three-cycle", loop)
print("cycle found:", find_cycle(loop))

# h grows with the weight on the closing edge, and its gradient points at it
for t in (0.1, 0.3, 0.6):
    loop[2, 0] = t
    ev = eval_logdet(loop, 1.0)
    print(f"closing weight {t:.1f}: h={ev.value:.4f}  dh/dW[2,0]={ev.gradient[2, 0]:.4f}")

# outside the domain (spectral radius >= s) the log-det form is undefined
big = loop * 3
print("scaled loop in domain:", eval_logdet(big, 1.0).in_domain)
