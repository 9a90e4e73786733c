"""
Reading the metric suite
========================

All metrics start from circular errors, so a prediction of 359 for a truth
of 1 is 2 degrees off, not 358.
"""

import numpy as np

from circrot import evaluate, per_sample_errors

truth = np.array([1.0, 90.0, 180.0, 270.0, 359.0])
pred = np.array([359.0, 93.0, 170.0, 271.0, 1.0])

print("errors:", per_sample_errors(pred, truth))

report = evaluate(pred, truth)
print(f"MAE {report.mae:.2f}  RMSE {report.rmse:.2f}  median {report.median:.2f}")
for k in report.acc_at:
    # AUC@k averages Acc@t over t in [0, k], so it rewards errors well below k
    print(f"Acc@{k} {report.acc_at[k]:.2f}  AUC@{k} {report.auc_at[k]:.3f}")

print(report.to_json())
