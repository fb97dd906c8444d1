# %% [markdown]
# # Training the residual network
#
# 11 standardized features -> 64 -> 32 -> 16 -> 1, ReLU, dropout on the two
# deeper hidden layers, Adam with step decay and early stopping.

# %%
import numpy as np

from ev_discharge import build_corpus, fit_residual_model
from ev_discharge.dataset import select
from ev_discharge.dataset import CorpusSettings
from ev_discharge.network import TrainConfig, gradient_check, init_network

corpus = build_corpus(settings=CorpusSettings(n_trips=1500, seed=0))
model, log = fit_residual_model(corpus, TrainConfig(seed=0))
print("parameters", model.net.n_parameters)
print("best epoch", log.best_epoch, "stopped", log.stopped_epoch, "early stop", log.early_stopped)

# %%
for e in range(0, len(log.epochs), 10):
    print(f"epoch {e:4d}  train {log.train_loss[e]:.4f}  val {log.val_loss[e]:.4f}  lr {log.lr[e]:.2e}")

# %% [markdown]
# Backprop against central differences on a random net.

# %%
rng = np.random.default_rng(3)
net = init_network(rng=rng)
net.weights[-1] = rng.normal(0, 0.3, net.weights[-1].shape)
print("max relative gradient error", gradient_check(net, rng.normal(size=(16, 11)), rng.normal(size=16), rng=rng))

# %%
from ev_discharge.hybrid import predict_records
from ev_discharge.evaluation import compute_metrics

test = select(corpus, "test")
truth = [r.true_energy for r in test]
print("physics", compute_metrics(predict_records(None, test), truth).to_dict())
print("hybrid ", compute_metrics(predict_records(model, test), truth).to_dict())
