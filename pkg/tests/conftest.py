"""Shared test helpers: seeded RNGs and gradient comparison utilities."""

from __future__ import annotations

import numpy as np
import pytest

from styleswap import autodiff as ad


@pytest.fixture
def rng():
    return np.random.default_rng(4125)


def rel_err(got: np.ndarray, want: np.ndarray) -> float:
    """max |got-want| / max(1, |want|), elementwise, as a scalar."""
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = np.maximum(1.0, np.abs(want))
    return float(np.max(np.abs(got - want) / denom))


def tape_gradient(f, x: ad.Tensor) -> np.ndarray:
    """Gradient of scalar-valued f at leaf x via one reverse sweep."""
    x.zero_grad()
    with ad.Tape():
        out = f(x)
        grads = ad.backward(out)
    return grads[x].copy()


def assert_grad_matches_fd(f, x_data, tol: float = 1e-6, h: float = 1e-4):
    """Check reverse-mode gradient of f against central finite differences.

    Runs entirely in float64 so the comparison threshold reflects
    truncation error of the difference stencil, not storage precision.
    """
    x = ad.Tensor(np.asarray(x_data, dtype=np.float64), requires_grad=True)
    got = tape_gradient(f, x)
    want = ad.finite_diff_gradient(lambda t: f(t).item(), x, h=h)
    err = rel_err(got, want)
    assert err < tol, f"gradient mismatch: rel err {err:.3e} >= {tol:.0e}"
