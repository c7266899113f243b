"""
Grading forecasts and scoring them
==================================

Forecast RSRP values are binned into five quality grades. We score a
model against the persistence baseline, which simply repeats the last
observed grade.
"""

# %%
# The grade thresholds. Each boundary value belongs to the lower grade,
# except -84 dBm, which already counts as very good.
import numpy as np

from lqe import (GRADE_LABELS, RunConfig, SyntheticSpec, generate_synthetic_trace,
                 grade_array)
from lqe.pipeline import evaluate_windows, fit

for x in (-120.0, -115.0, -110.0, -105.0, -95.0, -90.0, -84.0, -70.0):
    print(f"{x:7.1f} dBm -> {GRADE_LABELS[grade_array(np.array([x]))[0]]}")

# %%
# Train on a trace with a 12 s cycle. Persistence lags the cycle by one
# step, while the LSTM can learn its shape. A 25-epoch budget takes under
# a minute; very short runs usually still lose to persistence.
trace = generate_synthetic_trace(SyntheticSpec(
    length=6000, means=(-90.0, 8.6), sds=(8.0, 9.7), autocorr=(0.7, 0.5),
    seasonal_amplitude=(12.0, 0.0), seasonal_period=12, seed=11))
model, history, data = fit([trace], RunConfig.from_preset("desk", seed=3, max_epochs=25))

# %%
# Score on the held-out tail of the trace.
report, forecast = evaluate_windows(model, data.raw.test)
for key, value in report.summary().items():
    print(f"{key:26s} {value:.4f}" if isinstance(value, float) else f"{key:26s} {value}")

verdict = "beats" if report.accuracy > report.baseline_accuracy["persistence"] else "does not beat"
print(f"after {history.stopped_epoch} epochs the model {verdict} persistence on grade accuracy")

# %%
# Rows are true grades, columns predicted grades.
print(" " * 13 + "".join(f"{g[:9]:>10s}" for g in GRADE_LABELS))
for label, row in zip(GRADE_LABELS, report.confusion):
    print(f"{label:13s}" + "".join(f"{c:10d}" for c in row))
