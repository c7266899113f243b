"""
Training a small model
======================

Fit the desk-sized LSTM (window 30, 16 units per layer) to a synthetic
trace with a periodic component, then save it to disk and load it back.
Takes a minute or two on a laptop.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from lqe import RunConfig, SyntheticSpec, generate_synthetic_trace
from lqe.model import load_model_file, save_model_file
from lqe.pipeline import fit

trace = generate_synthetic_trace(SyntheticSpec(
    length=6000, means=(-90.0, 8.6), sds=(8.0, 9.7), autocorr=(0.7, 0.5),
    seasonal_amplitude=(12.0, 0.0), seasonal_period=12, seed=11))

# %%
# The desk preset keeps the full-scale learning rate, batch size, dropout
# and early-stopping rule, and only shrinks the network and epoch budget.
# Here we cap it further at 8 epochs to keep the demo short.
config = RunConfig.from_preset("desk", seed=3, max_epochs=8)
print(config.to_json())

# %%
# ``fit`` windows the trace, splits it 7:2:1 in time order, standardizes
# with training statistics, oversamples rare grades and trains with Adam.
model, history, data = fit([trace], config,
                           on_epoch=lambda e, tl, vl: print(f"epoch {e:2d}  train {tl:.4f}  val {vl:.4f}"))
print(f"train/val/test windows: {len(data.raw.train)}/{len(data.validation)}/{len(data.test)}"
      f" ({len(data.train)} after oversampling)")
print(f"best validation loss {history.best_val_loss:.4f} at epoch {history.best_epoch}")

# %%
# The model file stores the network, the standardizer and the window
# settings, so it is all that ``evaluate`` and ``predict`` need.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.lqem"
    save_model_file(model, path)
    again = load_model_file(path)
    print(f"{path.stat().st_size} bytes on disk")
    same = np.array_equal(model.forecast(data.raw.test).rsrp, again.forecast(data.raw.test).rsrp)
    print("reloaded model gives identical forecasts:", same)
