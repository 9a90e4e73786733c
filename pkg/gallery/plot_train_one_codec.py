"""
Training one codec in memory
============================

A small end-to-end run: synthesize scenes, train a CGD head on gradient
orientation histograms, and score it on held-out rotated crops. The full
benchmark lives behind ``circrot compare``; this is the same loop without
files.
"""

import numpy as np

from circrot import evaluate, make_codec
from circrot.features import FeatureExtractor
from circrot.model import TrainConfig, forward, manifest_features, train
from circrot.codecs import decode
from circrot.synthdata import build_splits

train_m, val_m, test_m = build_splits(400, 0.1, 100, split_seed=1, test_seed=2)
fx = FeatureExtractor()
codec = make_codec("cgd")

cfg = TrainConfig(max_epochs=15, patience=15, seed=0)
params, log = train(codec, fx, train_m, val_m, cfg,
                    on_epoch=lambda e, loss, mae: print(f"epoch {e:2d} loss {loss:.4f} val MAE {mae:.2f}"))

pred = decode(codec, forward(params, manifest_features(fx, test_m)))
report = evaluate(pred, test_m.angles)
print(f"best epoch {log.best_epoch}; test MAE {report.mae:.2f} deg, Acc@5 {report.acc_at[5]:.2f}")

# swapping the codec is one line: try "da" and watch the errors pile up near 0/360
worst = np.argsort(-np.abs(((pred - test_m.angles) + 180) % 360 - 180))[:5]
print("worst test angles:", np.round(test_m.angles[worst], 1))
