"""Central finite-difference verification of analytic gradients.

Every loss in this package that publishes an analytic gradient is checked
against (f(x + eps*d) - f(x - eps*d)) / (2*eps) per coordinate. Evaluation
happens in float64 regardless of the storage dtype of the input, otherwise
the perturbation drowns in float32 rounding noise.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError, DiagnosticError


def grad_check(scalar_fn, x, analytic_grad, eps: float = 1e-5) -> float:
    """Return the max relative error between analytic and numeric gradients.

    scalar_fn maps an array shaped like x to a float. The relative error
    at each coordinate uses denominator max(|analytic|, |numeric|, 1e-8).
    Raises DiagnosticError naming the coordinate if scalar_fn returns a
    non-finite value at any probe point.
    """
    if eps <= 0:
        raise ContractViolationError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    if analytic.shape != x.shape:
        raise ContractViolationError(
            f"gradient shape {analytic.shape} does not match input shape {x.shape}"
        )
    flat = x.ravel()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        probe = flat.copy()
        probe[i] = flat[i] + eps
        f_plus = float(scalar_fn(probe.reshape(x.shape)))
        probe[i] = flat[i] - eps
        f_minus = float(scalar_fn(probe.reshape(x.shape)))
        if not np.isfinite(f_plus) or not np.isfinite(f_minus):
            raise DiagnosticError(f"scalar function returned non-finite value at coordinate {i}")
        numeric[i] = (f_plus - f_minus) / (2.0 * eps)
    numeric = numeric.reshape(x.shape)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
