"""
Undoing readout errors
======================

Build a confusion matrix from independent bit flips, estimate it from
calibration shots, then recover a distribution by direct inversion and by
iterative Bayesian unfolding.
"""

import numpy as np

from qtsp.bench import mitigation_trials
from qtsp.mitigation import ConfusionModel, calibrate, mitigate_ibu, mitigate_inversion, total_variation

R = ConfusionModel.from_flip_probs(2, p01=0.03, p10=0.07)
print(np.round(R.R, 4))

# %% exact problem: both methods recover p
p = np.array([0.5, 0.2, 0.2, 0.1])
m = R.apply(p)
print("inversion", np.round(mitigate_inversion(R, m), 6))
print("ibu      ", np.round(mitigate_ibu(R, m, iterations=100), 6))

# %% finite shots and an estimated calibration
est = calibrate(R, shots_per_state=1024, seed=1)
counts = np.random.default_rng(2).multinomial(1024, m)
for name, fn in (("inversion", mitigate_inversion), ("ibu", mitigate_ibu)):
    print(name, "TV error", round(total_variation(fn(est, counts), p), 4))

# %% many perturbed-calibration trials
rows = mitigation_trials(200, root_seed=2024)
wins = sum(a <= b for _, a, b in rows)
print(f"IBU not worse than inversion in {wins}/200 trials")
