"""Figures of merit.

``gate_fidelity`` is the trace-overlap magnitude ``|Tr(V^dag U)| / d``
(not squared), unlike ``state_fidelity`` which is a squared overlap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

NORM_TOL = 1e-8


@dataclass(frozen=True)
class FidelityValue:
    value: float

    @property
    def infidelity(self) -> float:
        return 1.0 - self.value

    def __float__(self) -> float:
        return self.value


def _mat(u) -> np.ndarray:
    m = np.asarray(u, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    return m


def _unit(psi, label: str) -> np.ndarray:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValidationError(f"{label} has norm {norm:.12g}; expected a unit vector")
    return v


def state_fidelity(u, initial, target) -> FidelityValue:
    """``|<target| U |initial>|^2``."""
    m = _mat(u)
    g1 = _unit(initial, "initial state")
    gt = _unit(target, "target state")
    if not (m.shape[0] == g1.size == gt.size):
        raise ValidationError(
            f"dimension mismatch: U {m.shape}, initial {g1.size}, target {gt.size}")
    amp = np.vdot(gt, m @ g1)
    return FidelityValue(float(abs(amp) ** 2))


def phase_sensitive_fidelity(u, v) -> complex:
    """Complex overlap ``Tr(U^dag V) / d``."""
    a, b = _mat(u), _mat(v)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b) / a.shape[0])


def gate_fidelity(u, v_target) -> FidelityValue:
    return FidelityValue(abs(phase_sensitive_fidelity(v_target, u)))


def ensemble_fidelity(pairs: Sequence[tuple], weights: Sequence[int] | None = None) -> FidelityValue:
    """Magnitude of the multiplicity-weighted mean phase-sensitive block fidelity.

    ``weights[j]`` counts how many identical sectors block ``j`` stands for;
    the normalisation is the total count, so deduplicated and full sums agree.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("ensemble is empty")
    if weights is None:
        weights = [1] * len(pairs)
    weights = list(weights)
    if len(weights) != len(pairs):
        raise ValidationError(f"{len(weights)} weights for {len(pairs)} blocks")
    total = 0j
    for w in weights:
        if int(w) != w or w <= 0:
            raise ValidationError(f"weights must be positive integers, got {w!r}")
    for (u, v), w in zip(pairs, weights):
        total += int(w) * phase_sensitive_fidelity(u, v)
    return FidelityValue(abs(total) / sum(int(w) for w in weights))
