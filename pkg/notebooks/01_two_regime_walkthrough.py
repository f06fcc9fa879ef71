"""
Two-regime American put, end to end
===================================

Solve the two-regime benchmark, tabulate prices, and look at the exercise
boundaries and at how the step controller spends its budget.
Run with ``python notebooks/01_two_regime_walkthrough.py``; figures are
written next to the script.
"""

# %%
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from regime_rkf import GridSpec, PriceSurface, format_table, solve, table, two_regime_model  # noqa: E402

HERE = Path(__file__).resolve().parent

# %% [markdown]
# The model switches between a volatile high-rate state and a calm low-rate
# state. Both boundaries start at the strike at expiry.

# %%
model = two_regime_model()
result = solve(model, GridSpec.from_spacing(0.025), with_gamma=True)
surface = PriceSurface.from_result(result)
print("boundaries at maturity:", np.round(surface.boundaries, 5))
print(format_table(table(surface, (3.5, 4.5, 6.0, 7.5, 9.0, 10.5, 12.0))))

# %% [markdown]
# Exercise boundaries against time to expiry. The early part drops steeply,
# which is where the controller takes its smallest steps.

# %%
taus = np.array([t for t, _ in result.trajectory])
sf = np.array([s for _, s in result.trajectory])
ks = np.array([r.k_used for r in result.accepted_steps])

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for m in range(model.n_regimes):
    ax1.plot(taus, sf[:, m], label=f"regime {m + 1}")
ax1.set_xlabel("time to expiry")
ax1.set_ylabel("exercise boundary")
ax1.legend()
ax2.semilogy(taus[1:], ks)
ax2.set_xlabel("time to expiry")
ax2.set_ylabel("accepted step size")
fig.tight_layout()
fig.savefig(HERE / "two_regime_boundaries.png", dpi=120)
rejected = sum(not r.accepted for r in result.steps)
print(f"{len(ks)} accepted steps, {rejected} rejected")

# %% [markdown]
# Price, delta and gamma in the asset price for both regimes.

# %%
from regime_rkf import delta_at, gamma_at, price_at  # noqa: E402

spots = np.linspace(3.0, 16.0, 400)
fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for m in range(model.n_regimes):
    for ax, fn in zip(axes, (price_at, delta_at, gamma_at)):
        ax.plot(spots, [fn(surface, m, s) for s in spots], label=f"regime {m + 1}")
for ax, name in zip(axes, ("price", "delta", "gamma")):
    ax.set_xlabel("S")
    ax.set_title(name)
axes[0].legend()
fig.tight_layout()
fig.savefig(HERE / "two_regime_greeks.png", dpi=120)
