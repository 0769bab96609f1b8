"""Drift kernel backend selection.

The compiled Cython extension is preferred when it was built; otherwise the
numpy fallback provides the same functions a few times slower.  Both
backends implement identical arithmetic regroupings, so results agree to
floating-point reassociation error.
"""

from . import _driftnp

try:
    from . import _driftc
except ImportError:  # extension not built; numpy fallback
    _driftc = None

BACKEND = "compiled" if _driftc is not None else "numpy"

if _driftc is not None:
    parametric_drift_naive = _driftc.parametric_drift_naive
    parametric_drift_fast = _driftc.parametric_drift_fast
    beta_drift_pairwise_analytic = _driftc.beta_drift_pairwise_analytic
else:
    parametric_drift_naive = _driftnp.parametric_drift_naive
    parametric_drift_fast = _driftnp.parametric_drift_fast
    beta_drift_pairwise_analytic = None

# always available: pairwise loop over an arbitrary vectorized derivative
beta_drift_pairwise_callable = _driftnp.beta_drift_pairwise


def available_backends() -> dict:
    """Importable kernel backends keyed by name (for benchmarks/tests)."""
    backends = {"numpy": _driftnp}
    if _driftc is not None:
        backends["compiled"] = _driftc
    return backends
