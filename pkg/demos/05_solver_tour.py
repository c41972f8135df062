"""Tour of the conic solver: duals, certificates, and the text dump.

Small self-contained problems showing the pieces the beamforming
algorithms rely on: dual prices matching sensitivities, Farkas
certificates for infeasible systems, and the debug dump format.
"""

import numpy as np

from cobeam.conic import (ConicProblem, dump_problem, solve,
                          verify_infeasibility_certificate)

# a single-user quality-of-service design: min Tr(W), Tr(h h^H W) >= 2
rng = np.random.default_rng(3)
h = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
prob = ConicProblem()
W = prob.add_psd_var(3, name="W")
prob.set_objective(matrix={W: np.eye(3)})
prob.add_constraint(matrix={W: np.outer(h, h.conj())}, rel=">=", rhs=2.0,
                    label="qos")
sol = solve(prob)
print("single-user design")
print(f"  status     : {sol.status.value}")
print(f"  objective  : {sol.objective:.8f} "
      f"(closed form {2.0 / np.linalg.norm(h) ** 2:.8f})")
print(f"  dual price : {sol.duals[0]:.6f} "
      "(power cost per unit of target)")
print(f"  kkt        : {sol.kkt}")

# an infeasible pair of trace bounds produces a verified certificate
bad = ConicProblem()
X = bad.add_psd_var(2)
H = np.outer(h[:2], h[:2].conj())
bad.add_constraint(matrix={X: H}, rel=">=", rhs=3.0)
bad.add_constraint(matrix={X: H}, rel="<=", rhs=1.0)
sol = solve(bad)
check = verify_infeasibility_certificate(bad, sol.certificate["weights"])
print("\nconflicting bounds")
print(f"  status    : {sol.status.value}")
print(f"  weights   : {sol.certificate['weights']}")
print(f"  verified  : {check['ok']} "
      f"(violation {check['violation']:.3f})")

print("\nproblem dump for offline cross-checking:")
print(dump_problem(bad))
