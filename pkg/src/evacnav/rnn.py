"""Random neural network gate used at every CPN node.

One neuron stands for one outgoing link. Steady-state excitation levels
``q`` rank the links; reinforcement learning nudges the excitatory and
inhibitory weights after each acknowledged route.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Collection

import numpy as np

Q_CLAMP = 0.9999


class RnnConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int) -> None:
        super().__init__(f"RNN fixed point did not converge after {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass
class RandomNeuralNetwork:
    w_plus: np.ndarray
    w_minus: np.ndarray
    Lambda: np.ndarray
    lambda_small: np.ndarray
    q: np.ndarray
    T: float = 0.0
    a: float = 0.8
    tolerance: float = 1e-6
    max_iter: int = 10_000

    @property
    def m(self) -> int:
        return len(self.q)

    def rates(self) -> np.ndarray:
        """Total firing rate r(i) of each neuron."""
        return self.w_plus.sum(axis=1) + self.w_minus.sum(axis=1)


_INIT_Q: dict[tuple[int, float], np.ndarray] = {}


def rnn_init(m: int, a: float = 0.8, tolerance: float = 1e-6) -> RandomNeuralNetwork:
    """Symmetric network: every off-diagonal weight 0.5, unit external excitation."""
    if m < 1:
        raise ValueError(f"an RNN needs at least one neuron, got m={m}")
    w = np.full((m, m), 0.5)
    np.fill_diagonal(w, 0.0)
    n = RandomNeuralNetwork(
        w_plus=w,
        w_minus=w.copy(),
        Lambda=np.ones(m),
        lambda_small=np.zeros(m),
        q=np.zeros(m),
        a=a,
        tolerance=tolerance,
    )
    key = (m, tolerance)
    cached = _INIT_Q.get(key)
    if cached is None:
        cached = solve_excitations(n).copy()
        _INIT_Q[key] = cached
    n.q = cached.copy()
    return n


def _excitation_map(n: RandomNeuralNetwork, r: np.ndarray, q: np.ndarray) -> np.ndarray:
    num = q @ n.w_plus + n.Lambda
    den = r + q @ n.w_minus + n.lambda_small
    if den.min() > 0:
        return np.minimum(num / den, Q_CLAMP)
    # a neuron with no outgoing rate and no inhibition saturates (or stays silent)
    safe = np.where(den > 0, den, 1.0)
    out = np.where(den > 0, num / safe, np.where(num > 0, Q_CLAMP, 0.0))
    return np.minimum(out, Q_CLAMP)


def solve_excitations(n: RandomNeuralNetwork) -> np.ndarray:
    """Iterate the steady-state equations from the current ``q`` until they settle."""
    r = n.rates()
    q = n.q
    residual = math.inf
    for _ in range(n.max_iter):
        nxt = _excitation_map(n, r, q)
        residual = float(abs(nxt - q).max())
        q = nxt
        if residual < n.tolerance:
            n.q = q
            return q
    n.q = q
    raise RnnConvergenceError(residual, n.max_iter)


def reinforce(n: RandomNeuralNetwork, winner: int, reward: float) -> RandomNeuralNetwork:
    if not 0 <= winner < n.m:
        raise IndexError(f"winner {winner} out of range for {n.m} neurons")
    if not reward > 0:
        raise ValueError(f"reward must be positive, got {reward}")
    m = n.m
    if m > 1:
        before = n.rates()
        share = reward / (m - 1)
        # k not in {i, winner}: everything off the diagonal and off the winner column
        spread_mask = ~np.eye(m, dtype=bool)
        spread_mask[:, winner] = False
        if reward >= n.T:
            rewarded, spread = n.w_plus, n.w_minus
        else:
            rewarded, spread = n.w_minus, n.w_plus
        col = np.arange(m) != winner
        rewarded[col, winner] += reward
        spread[spread_mask] += share
        after = n.rates()
        scale = np.divide(before, after, out=np.ones(m), where=after > 0)
        n.w_plus *= scale[:, None]
        n.w_minus *= scale[:, None]
    n.T = n.a * n.T + (1.0 - n.a) * reward
    solve_excitations(n)
    return n


def select_next(
    n: RandomNeuralNetwork,
    epsilon: float,
    forbidden: Collection[int],
    rng: random.Random,
) -> int:
    """Epsilon-greedy choice of a neuron outside ``forbidden``."""
    allowed = [i for i in range(n.m) if i not in forbidden]
    if not allowed:
        raise ValueError("every neuron is forbidden")
    if epsilon > 0 and (epsilon >= 1 or rng.random() < epsilon):
        return allowed[rng.randrange(len(allowed))]
    q = n.q
    best = allowed[0]
    for i in allowed[1:]:
        if q[i] > q[best]:
            best = i
    return best
