"""
Trend/noise decomposition and sliding windows
=============================================

A synthetic RSRP/SINR trace is split into a slow EMA trend and a fast
residual, then cut into fixed-length windows whose labels are the next
step's trend and noise.
"""

# %%
# A short synthetic trace: one session, one record per second.
import numpy as np

from lqe import SyntheticSpec, generate_synthetic_trace, ema_decompose, smoothing_factor
from lqe.preprocess import windows_from_traces

trace = generate_synthetic_trace(SyntheticSpec(length=600, seed=4, seasonal_amplitude=(6.0, 0.0)))
print(f"{len(trace)} records, features: RSRP and SINR")
print("first five RSRP values:", np.round(trace.values[:5, 0], 2))

# %%
# The smoothing factor for span tau is 2 / (tau + 1). Larger spans give a
# smoother trend and push more of the variation into the noise channel.
for tau in (1, 10, 120):
    d = ema_decompose(trace.values, tau)
    print(f"tau={tau:4d}  alpha={smoothing_factor(tau):.4f}  "
          f"trend sd={d.trend[:, 0].std():6.2f}  noise sd={d.noise[:, 0].std():6.2f}")

# %%
# Trend plus noise reproduces the input exactly, whatever the span.
d = ema_decompose(trace.values, 120)
print("max reconstruction error:", np.abs(d.trend + d.noise - trace.values).max())

# %%
# Windows of N steps, stride 1. Each window sees [trend, noise] for both
# features (4 channels) and is labelled with the RSRP trend and noise of
# the step right after it.
windows = windows_from_traces([trace], tau=120, window=30)
first = windows[0]
print(f"{len(windows)} windows, input shape {first.inputs.shape}")
print("label of window 0 (trend, noise):", np.round(first.label, 3), "grade:", first.label_grade.label)

# %%
# The label grade comes from the raw RSRP at that step, which equals trend
# plus noise.
print("raw RSRP at step 30:", round(float(trace.values[30, 0]), 3),
      " trend+noise:", round(float(first.label.sum()), 3))
