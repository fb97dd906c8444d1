# %% [markdown]
# # Comparison tables and ablation
#
# Constant rate (0.185 kWh/km), OLS on trip descriptors, physics only and
# physics + residual, all scored on the held-out test split.

# %%
from ev_discharge import build_corpus, evaluate, fit_residual_model
from ev_discharge.dataset import CorpusSettings
from ev_discharge.network import TrainConfig

corpus = build_corpus(settings=CorpusSettings(n_trips=1500, seed=0))
model, _ = fit_residual_model(corpus, TrainConfig(seed=0))
report = evaluate(corpus, model, ablation_config=TrainConfig(seed=0))
print(report.to_text())

# %% [markdown]
# The E_p row of the ablation is the interesting one: the remaining features
# (distance, speeds, mode, temperature) nearly determine E_p, so dropping it
# costs only a fraction of a point and the gap moves with the seed.

# %%
import tempfile
from pathlib import Path

from ev_discharge.evaluation import build_predictors, emit_figure_data

out = Path(tempfile.mkdtemp())
paths = emit_figure_data(corpus, out, build_predictors(corpus, model), n_steps=200)
for name, p in paths.items():
    print(name, sum(1 for _ in open(p)) - 1, "rows")
