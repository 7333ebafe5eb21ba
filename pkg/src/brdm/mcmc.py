"""Anytime Metropolis-Hastings decision chains.

The action chain random-walks over the action box with a symmetric Gaussian
proposal (boundary handling by reflection, which keeps the proposal kernel
symmetric; clipping would pile atoms onto the boundary and invalidate the
simplified acceptance rule). Precision follows the annealing schedule
gamma(k) = gamma0 + alpha * log(1 + k), coarse early and fine late. The
prior-selection chain runs the same acceptance rule over a discrete index
set with uniform global proposals and cached utility estimates.

A stopped chain's current state is the decision; resources are counted as
utility evaluations (one for the seed plus one per proposal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .core import WorldModel


@dataclass(frozen=True)
class ChainConfig:
    """Action-chain parameters: annealing, step budget, proposal width."""

    gamma0: float = 1.0
    alpha: float = 5.0
    n_max: int = 100
    proposal_sigma: float = 0.1

    def __post_init__(self):
        if self.gamma0 < 0.0 or self.alpha < 0.0:
            raise ValueError("gamma0 and alpha must be >= 0")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not self.proposal_sigma > 0.0:
            raise ValueError("proposal_sigma must be positive")


@dataclass(frozen=True)
class ChainResult:
    """Trace and decision of one chain run.

    ``trace`` holds one (proposal, proposal utility, accepted) triple per
    step when recorded; ``decision`` is the last accepted state and
    ``evaluations`` counts utility calls (seed + one per step).
    """

    decision: np.ndarray
    trace: tuple[tuple[np.ndarray, float, bool], ...]
    evaluations: int
    acceptance_rate: float
    decision_utility: float
    seed_utility: float


@dataclass(frozen=True)
class SelectionConfig:
    """Prior-selection chain parameters and the per-candidate sample count."""

    gamma_sel0: float = 1.0
    alpha_sel: float = 5.0
    n_max_sel: int = 25
    utility_samples: int = 3

    def __post_init__(self):
        if self.gamma_sel0 < 0.0 or self.alpha_sel < 0.0:
            raise ValueError("gamma_sel0 and alpha_sel must be >= 0")
        if self.n_max_sel < 0:
            raise ValueError("n_max_sel must be >= 0")
        if self.utility_samples < 1:
            raise ValueError("utility_samples must be >= 1")


def anneal_gamma(k: float, gamma0: float, alpha: float) -> float:
    """Precision after k steps: gamma0 + alpha * ln(1 + k)."""
    if k < 0:
        raise ValueError("step index must be >= 0")
    return gamma0 + alpha * math.log1p(k)


def mh_accept_prob(u_new: float, u_old: float, gamma: float) -> float:
    """min{1, exp(gamma (u_new - u_old))}; uphill moves always accepted."""
    x = gamma * (u_new - u_old)
    if x >= 0.0:
        return 1.0
    return math.exp(x)


def reflect01(a: np.ndarray) -> np.ndarray:
    """Fold each coordinate back into [0, 1] by reflection at the walls."""
    r = np.remainder(a, 2.0)
    return np.where(r > 1.0, 2.0 - r, r)


def propose(a: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric Gaussian step from ``a``, reflected into the box."""
    return reflect01(a + rng.normal(0.0, sigma, size=np.shape(a)))


def run_action_chain(
    world: WorldModel,
    w: int,
    seed_action: np.ndarray,
    cfg: ChainConfig,
    rng: np.random.Generator,
    record_trace: bool = True,
) -> ChainResult:
    """Anneal an MH chain over U(w, .) for cfg.n_max steps from ``seed_action``."""
    a = np.asarray(seed_action, dtype=float).copy()
    u = world.utility(w, a)
    seed_u = u

    n = cfg.n_max
    noise = rng.normal(0.0, cfg.proposal_sigma, size=(n, a.size))
    log_unif = np.log(rng.random(n))
    gamma0, alpha = cfg.gamma0, cfg.alpha

    trace: list[tuple[np.ndarray, float, bool]] = []
    accepted = 0
    for k in range(n):
        gamma = gamma0 + alpha * math.log1p(k)
        prop = reflect01(a + noise[k])
        pu = world.utility(w, prop)
        du = pu - u
        ok = du >= 0.0 or log_unif[k] < gamma * du
        if ok:
            a, u = prop, pu
            accepted += 1
        if record_trace:
            trace.append((prop, pu, ok))

    return ChainResult(
        decision=a,
        trace=tuple(trace),
        evaluations=n + 1,
        acceptance_rate=accepted / n,
        decision_utility=u,
        seed_utility=seed_u,
    )


def run_selection_chain(
    candidate_estimates: Sequence[float],
    px: np.ndarray,
    cfg: SelectionConfig,
    rng: np.random.Generator,
) -> int:
    """MH chain over prior indices with uniform global proposals.

    ``candidate_estimates`` holds one cached expected-utility estimate per
    prior; the acceptance rule compares new minus old, matching the action
    chain. The start index is drawn from the multinomial prior ``px``.
    """
    num = len(candidate_estimates)
    if num == 0:
        raise ValueError("need at least one candidate prior")
    x = int(rng.choice(num, p=np.asarray(px, dtype=float)))
    if num == 1 or cfg.n_max_sel == 0:
        return x

    est = [float(v) for v in candidate_estimates]
    props = rng.integers(0, num, size=cfg.n_max_sel)
    log_unif = np.log(rng.random(cfg.n_max_sel))
    for k in range(cfg.n_max_sel):
        gamma = cfg.gamma_sel0 + cfg.alpha_sel * math.log1p(k)
        xp = int(props[k])
        du = est[xp] - est[x]
        if du >= 0.0 or log_unif[k] < gamma * du:
            x = xp
    return x


def dump_trace(result: ChainResult, cfg: ChainConfig, out: IO[str]) -> None:
    """Tab-separated diagnostics: step, action components, utility, gamma, accepted."""
    for k, (action, utility, ok) in enumerate(result.trace):
        gamma = anneal_gamma(k, cfg.gamma0, cfg.alpha)
        coords = "\t".join(format(float(c), ".12g") for c in np.atleast_1d(action))
        out.write(
            f"{k}\t{coords}\t{format(utility, '.12g')}\t{format(gamma, '.12g')}\t{int(ok)}\n"
        )
