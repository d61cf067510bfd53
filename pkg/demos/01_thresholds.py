"""
Threshold functions of weakly convex penalties
==============================================

The firm penalty and the integer-lattice penalty are not convex, but their
threshold (prox) maps are still single valued as long as ``alpha * rho < 1``.
This script tabulates a few of them and writes a small chart gallery.
"""

import numpy as np

from proxista.penalty import make_firm, make_integer_lattice, make_l1

firm = make_firm(1.0, 0.5)
lattice = make_integer_lattice(4)

# firm threshold: zero on [-alpha*tau, alpha*tau], identity past tau/rho,
# a steeper-than-identity ramp in between
s = np.linspace(-3, 3, 13)
for alpha in (0.5, 1.0, 1.5):
    print(f"firm  alpha={alpha:<4}", np.round(firm.prox(s, alpha), 3))

# the l1 threshold (soft) never has slope above one
print("soft  alpha=1   ", np.round(make_l1(1.0).prox(s, 1.0), 3))

# lattice threshold pulls values toward the nearest integer in {0..K}
z = np.linspace(-0.5, 4.5, 11)
print("lattice alpha=0.25", np.round(lattice.prox(z, 0.25), 3))

# the ramp is where the Lipschitz constant 1/(1 - alpha*rho) is attained
a = 1.0
x1, x2 = firm.prox(np.array([1.2, 1.8]), a)
print("ramp slope:", (x2 - x1) / 0.6, " bound:", 1 / (1 - a * firm.rho))

# past alpha*rho = 1 the threshold is undefined and the call is refused
try:
    firm.prox(1.0, 2.5)
except ValueError as e:
    print("refused:", e)

if __name__ == "__main__":
    import tempfile

    from proxista.experiments import default_spec, plot_penalty_gallery

    out = tempfile.mkdtemp(prefix="gallery-")
    plot_penalty_gallery(default_spec("firm-gallery"), out=out)
    print("charts in", out)
