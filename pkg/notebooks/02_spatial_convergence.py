"""
Spatial convergence under halving grids
=======================================

Fixed small time steps isolate the spatial error. Consecutive grids are
compared on the coarser grid's nodes and the observed order is
``log2(e(2h) / e(h))``.

The full protocol (``T = 0.2``, ``k = 2.5e-6``, five grids) takes about twenty
minutes. With ``QUICK = True`` the horizon is ``T = 0.01``, which finishes in
under a minute; so close to expiry the solution is still rough and the
coarse grids are far from their asymptotic order.
"""

# %%
import math

from regime_rkf import convergence_study, two_regime_model
from regime_rkf.pricing import xbar_cells_for

QUICK = True
hs = (0.2, 0.1, 0.05, 0.025, 0.0125)
t_short, fixed_k = (0.01, 1e-5) if QUICK else (0.2, 2.5e-6)

# %% [markdown]
# The boundary update samples the solution at three multiples of an offset.
# On the coarsest grid the usual four-cell offset would reach too far, so it
# is reduced there.

# %%
print("offset in cells:", {h: xbar_cells_for(h) for h in hs})

# %%
report = convergence_study(two_regime_model(), hs, fixed_k=fixed_k, t_short=t_short)


def show(v, spec):
    return format(v, spec) if math.isfinite(v) else ""


print(f"{'h':>8} {'err u':>10} {'order u':>8} {'err w':>10} {'order w':>8}")
for h, eu, ou, ew, ow in zip(report.hs, report.err_u, report.order_u, report.err_w,
                             report.order_w):
    print(f"{h:>8} {show(eu, '10.3e')} {show(ou, '8.3f')} {show(ew, '10.3e')} {show(ow, '8.3f')}")
