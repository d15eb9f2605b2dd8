"""The coupled-chart picture of the lifted cotangent structure.

A connection splits each covector into a subgroup momentum and an
annihilator part.  This script builds the default splitting and a
deformed one for the Heisenberg pair, round-trips a covector through
the identification, and then checks that the canonical two-form
equals its coupled-chart expression, pointwise, for both splittings,
on ordinary points and on the critical slice phi = 0.
"""

import random

from bsymp import lie, reduction as red

pair = lie.builtin("heisenberg_q(1)")
m = len(pair.h_names)

theta0 = red.make_connection(pair)
theta1 = red.make_connection(
    pair, deformation=([0.3] + [0.0] * (m - 1),
                       f"1 + {pair.phi_name}^2", True))

rng = random.Random(13)
n = 2 * m + 2

print("pair: heisenberg_q(1), subgroup coordinates", ", ".join(pair.h_names))
print()

# split one covector at a base point and reassemble it
g = [rng.uniform(-0.7, 0.7) for _ in range(m + 1)]
alpha = [rng.uniform(-1, 1) for _ in range(m + 1)]
cp = red.psi_theta(theta0, g, alpha)
back = red.psi_theta_inverse(theta0, cp)
err = max(abs(a - b) for a, b in zip(back, alpha))
print("split covector:")
print(f"  subgroup momentum = {[round(v, 4) for v in cp.mu]}")
print(f"  annihilator coefficient p = {cp.element.p:+.4f}")
print(f"  round-trip error: {err:.2e}")
print()

# the identity omega = -d(coupling term) in the coupled chart,
# sampled as a two-form pairing on random tangent vectors
for label, theta in (("default", theta0), ("deformed", theta1)):
    worst_off = 0.0
    worst_on = 0.0
    for t in range(40):
        pt = [rng.uniform(-0.7, 0.7) for _ in range(n)]
        if t % 2:
            pt[m] = 0.0  # land exactly on the slice
        v = [rng.uniform(-1, 1) for _ in range(n)]
        w = [rng.uniform(-1, 1) for _ in range(n)]
        r = red.coupling_identity_residual(theta, pt, v, w)
        if t % 2:
            worst_on = max(worst_on, r)
        else:
            worst_off = max(worst_off, r)
    print(f"{label} splitting: worst residual off slice {worst_off:.2e}, "
          f"on slice {worst_on:.2e}")

print()
print("both splittings satisfy the identity; the choice of connection")
print("moves the chart, not the structure.")
