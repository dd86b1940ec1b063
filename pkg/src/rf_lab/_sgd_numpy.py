"""Pure-NumPy SGD inner loop; fallback when the compiled kernel is absent.

Both backends implement the same contract: advance hinge-loss SGD on a
two-layer net for ``count`` steps starting at ``start``, writing per-step
loss and the post-step norms into the trace arrays (entry t+1 describes the
state after step t).  Updates use the pre-update outer weights, i.e. the
exact simultaneous subgradient step.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def run_steps(W, U, W0, X, Y, eta, sigma, dsigma, loss, drift, unorm, wnorm, start, count):
    for t in range(start, start + count):
        x = X[t]
        y = Y[t]
        z = W @ x
        s = sigma(z)
        n_val = float(U @ s)
        margin = 1.0 - y * n_val
        loss[t] = margin if margin > 0.0 else 0.0
        if margin >= 0.0:
            # subgradient: dU = -y * s, dW_i = -y * u_i * sigma'(z_i) * x
            coef = (eta * y) * (U * dsigma(z))
            W += coef[:, None] * x[None, :]
            U += (eta * y) * s
        drift[t + 1] = np.linalg.norm(W - W0)
        unorm[t + 1] = np.linalg.norm(U)
        wnorm[t + 1] = np.linalg.norm(W)
