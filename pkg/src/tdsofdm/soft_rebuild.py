"""Soft symbol rebuilding: bit LLRs, posterior symbol means, instantaneous CFR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .modulation import Constellation
from .phy import FrameGrid

# Bins whose rebuilt power falls below this fraction of the constellation
# power carry almost no signal and are excluded from re-estimation.
RELIABILITY_FLOOR = 0.05

_TINY_VAR = 1e-30


@dataclass(frozen=True)
class LlrGrid:
    """Per-bit log-likelihood ratios, shape (num_symbols, n_fft, bits_per_symbol)."""

    values: np.ndarray
    llr_max: float


@dataclass(frozen=True)
class SoftSymbolGrid:
    """Posterior-mean symbols with per-bin power eta and its grid average."""

    x_hat: np.ndarray
    eta: np.ndarray
    eta_bar: float


@dataclass(frozen=True)
class InstantEstimate:
    """Raw per-bin CFR re-estimate before any smoothing.

    weights carry each bin's noise amplification factor: the per-bin error
    variance of values is weights * effective_noise_var wherever mask holds.
    """

    values: np.ndarray
    mask: np.ndarray
    weights: np.ndarray


def demap(z: FrameGrid, h_est, noise_var: float, c: Constellation, llr_max: float = 30.0) -> LlrGrid:
    """Exact per-bit LLRs of equalized cells under Gaussian noise.

    noise_var is the effective pre-equalization noise power; bin k sees
    noise_var/|H[k]|^2 after equalization.  Cells masked out upstream get
    zero LLRs (no information).
    """
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    h = np.asarray(getattr(h_est, "values", h_est), dtype=np.complex128)
    p = np.broadcast_to(np.abs(h) ** 2, z.data.shape)
    ok = p > 0
    if z.mask is not None:
        ok = ok & z.mask
    sigma2 = np.maximum(noise_var / np.where(ok, p, 1.0), _TINY_VAR)

    d = np.abs(z.data[..., None] - c.points) ** 2
    ll = -d / sigma2[..., None]
    m = c.bits_per_symbol
    out = np.empty(z.data.shape + (m,), dtype=np.float64)
    for l in range(m):
        one = c.bit_labels[:, l] == 1
        out[..., l] = logsumexp(ll[..., one], axis=-1) - logsumexp(ll[..., ~one], axis=-1)
    np.clip(out, -llr_max, llr_max, out=out)
    out[~ok] = 0.0
    return LlrGrid(values=out, llr_max=float(llr_max))


def symbol_posteriors(llr: LlrGrid, c: Constellation) -> np.ndarray:
    """Per-cell posterior probability of each constellation point.

    Bits are treated as independent given the LLRs, so each point's
    probability is the product of its label's bit probabilities.
    """
    p1 = expit(llr.values)
    m = c.bits_per_symbol
    mu = c.points.size
    prob = np.ones(llr.values.shape[:-1] + (mu,), dtype=np.float64)
    for l in range(m):
        bit = c.bit_labels[:, l].astype(bool)
        pl = p1[..., l : l + 1]
        prob *= np.where(bit, pl, 1.0 - pl)
    return prob


def soft_symbols(llr: LlrGrid, c: Constellation) -> SoftSymbolGrid:
    """Posterior-mean symbol per cell and its power statistics."""
    prob = symbol_posteriors(llr, c)
    x_hat = prob @ c.points
    eta = np.abs(x_hat) ** 2
    return SoftSymbolGrid(x_hat=x_hat, eta=eta, eta_bar=float(eta.mean()))


def instantaneous_estimate(
    soft: SoftSymbolGrid,
    y: FrameGrid,
    c: Constellation,
    floor: float = RELIABILITY_FLOOR,
) -> InstantEstimate:
    """Per-bin CFR re-estimate from rebuilt symbols.

    Uniform-power constellations normalize by the constellation power, so a
    rebuilt bin of power eta carries noise amplified by eta/eta_alpha^2;
    mixed-power constellations divide by the bin's own rebuilt power, with
    noise amplification 1/eta.  Bins whose rebuilt power falls under
    floor * eta_alpha are marked unreliable and zeroed.
    """
    ea = c.eta_alpha
    reliable = soft.eta >= floor * ea
    if y.mask is not None:
        reliable = reliable & y.mask
    safe_eta = np.where(reliable, soft.eta, 1.0)
    if c.uniform_power:
        values = np.conj(soft.x_hat) * y.data / ea
        weights = soft.eta / ea**2
    else:
        values = np.conj(soft.x_hat) * y.data / safe_eta
        weights = 1.0 / safe_eta
    values = np.where(reliable, values, 0.0)
    weights = np.where(reliable, weights, 0.0)
    return InstantEstimate(values=values, mask=reliable, weights=weights)
