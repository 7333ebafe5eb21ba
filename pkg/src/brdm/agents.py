"""Full decision episodes: prior selection, action chain, online prior training.

A system owns one VAE prior per index x. Each episode for a world state w:

1. multi-prior only: estimate E[U(w, .)] per candidate prior from a few
   prior samples, then run the discrete selection chain over the cached
   estimates to pick x (single-prior systems skip this stage);
2. draw the seed action from the selected prior and anneal the action chain
   from it, the final state is the decision;
3. append the decision to the selected prior's ring buffer, bump the
   multinomial selection counts, and (during training) take one VAE
   gradient step on a random batch from that buffer.

Utility-call accounting per episode: the action stage always costs
action_steps + 1 evaluations (seed included); the selection stage adds
utility_samples * num_priors when it runs. Selection-chain proposals reuse
the cached estimates and cost no evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import IO, Sequence

import numpy as np

from .core import WorldModel, make_rng
from .mcmc import ChainConfig, SelectionConfig, run_action_chain, run_selection_chain
from .vae import VaeArch, VaePrior, init_vae, sample_action, sample_actions, train_step

EPISODE_CSV_HEADER = "episode,world,prior,seed_action,decision,utility,seed_utility,evals"


@dataclass(frozen=True)
class BudgetSplit:
    """Fixed step budget split between selection and action chains."""

    total_steps: int = 100
    selection_steps: int = 25
    action_steps: int = 75

    def __post_init__(self):
        if self.selection_steps < 0 or self.action_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.selection_steps + self.action_steps != self.total_steps:
            raise ValueError("selection_steps + action_steps must equal total_steps")

    @staticmethod
    def single(total_steps: int) -> "BudgetSplit":
        """All steps on the action chain; single-prior agents select nothing."""
        return BudgetSplit(total_steps, 0, total_steps)

    @staticmethod
    def fraction(total_steps: int, selection_fraction: float = 0.25) -> "BudgetSplit":
        """Round a fraction of the budget onto the selection chain."""
        sel = int(round(selection_fraction * total_steps))
        return BudgetSplit(total_steps, sel, total_steps - sel)


@dataclass(frozen=True)
class SystemConfig:
    """Everything needed to build a decision system, plus the master seed."""

    num_priors: int = 3
    budget: BudgetSplit = BudgetSplit()
    chain: ChainConfig = ChainConfig()
    selection: SelectionConfig = SelectionConfig()
    vae: VaeArch = VaeArch()
    step_size: float = 0.01
    buffer_size: int = 256
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.num_priors < 1:
            raise ValueError("num_priors must be >= 1")
        if self.buffer_size < 1 or self.batch_size < 1:
            raise ValueError("buffer_size and batch_size must be >= 1")


@dataclass(frozen=True)
class EpisodeRecord:
    """Outcome of one episode; utility gain is utility - seed_utility."""

    world: int
    selected_prior: int
    seed_action: np.ndarray
    decision: np.ndarray
    utility: float
    seed_utility: float
    utility_evaluations: int

    @property
    def delta_u(self) -> float:
        return self.utility - self.seed_utility


@dataclass
class MultinomialPrior:
    """Selection counts with add-one smoothing, so every prior stays reachable."""

    counts: np.ndarray

    @property
    def px(self) -> np.ndarray:
        smoothed = self.counts + 1.0
        return smoothed / smoothed.sum()

    def update(self, x: int) -> None:
        self.counts[x] += 1


class _RingBuffer:
    """Fixed-capacity store of recent decisions with O(1) append."""

    def __init__(self, capacity: int, dim: int):
        self._data = np.empty((capacity, dim))
        self._capacity = capacity
        self._next = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def append(self, a: np.ndarray) -> None:
        self._data[self._next] = a
        self._next = (self._next + 1) % self._capacity
        self._count = min(self._count + 1, self._capacity)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self._count, size=n)
        return self._data[idx]


class DecisionSystem:
    """Mutable agent state: VAE priors, buffers, and the selection multinomial.

    Training mutates the system between episodes, so a system instance is
    single-threaded; run independent (config, seed) instances to parallelize.
    """

    def __init__(
        self,
        world: WorldModel,
        cfg: SystemConfig,
        rng: np.random.Generator | None = None,
    ):
        self.world = world
        self.cfg = cfg
        self.rng = make_rng(cfg.seed) if rng is None else rng
        self.vaes: list[VaePrior] = [
            init_vae(cfg.vae, self.rng, cfg.step_size) for _ in range(cfg.num_priors)
        ]
        self.buffers = [
            _RingBuffer(cfg.buffer_size, cfg.vae.input_dim) for _ in range(cfg.num_priors)
        ]
        self.multinomial = MultinomialPrior(np.zeros(cfg.num_priors, dtype=np.int64))
        self._chain_cfg = (
            replace(cfg.chain, n_max=cfg.budget.action_steps)
            if cfg.budget.action_steps > 0
            else None
        )
        self._selection_cfg = replace(cfg.selection, n_max_sel=cfg.budget.selection_steps)
        self._rho_cum = np.cumsum(world.rho)
        self._select = cfg.num_priors > 1 and cfg.budget.selection_steps > 0
        self._expected_evals = cfg.budget.action_steps + 1
        if self._select:
            self._expected_evals += cfg.selection.utility_samples * cfg.num_priors

    def draw_world(self, rng: np.random.Generator | None = None) -> int:
        rng = self.rng if rng is None else rng
        return int(np.searchsorted(self._rho_cum, rng.random(), side="right"))

    def run_episode(self, w: int, rng: np.random.Generator | None = None) -> EpisodeRecord:
        """One decision episode for world ``w``; updates buffers and counts.

        Does not take a VAE gradient step; :func:`train_system` interleaves
        those, so evaluation episodes leave the weights untouched.
        """
        rng = self.rng if rng is None else rng
        world = self.world
        evals = 0

        if self._select:
            m = self.cfg.selection.utility_samples
            estimates = []
            for prior in self.vaes:
                draws = sample_actions(prior, m, rng)
                estimates.append(sum(world.utility(w, a) for a in draws) / m)
            evals += m * self.cfg.num_priors
            x = run_selection_chain(estimates, self.multinomial.px, self._selection_cfg, rng)
        elif self.cfg.num_priors > 1:
            x = int(rng.choice(self.cfg.num_priors, p=self.multinomial.px))
        else:
            x = 0

        seed = sample_action(self.vaes[x], rng)
        if self._chain_cfg is not None:
            result = run_action_chain(world, w, seed, self._chain_cfg, rng, record_trace=False)
            decision = result.decision
            utility = result.decision_utility
            seed_utility = result.seed_utility
            evals += result.evaluations
        else:
            decision = seed
            utility = seed_utility = world.utility(w, seed)
            evals += 1
        if evals != self._expected_evals:
            raise RuntimeError("utility evaluation accounting drifted")

        self.buffers[x].append(decision)
        self.multinomial.update(x)
        return EpisodeRecord(
            world=w,
            selected_prior=x,
            seed_action=seed,
            decision=decision,
            utility=utility,
            seed_utility=seed_utility,
            utility_evaluations=evals,
        )

    def train_prior(self, x: int, rng: np.random.Generator | None = None) -> None:
        """One gradient step for prior ``x`` on a random batch from its buffer."""
        rng = self.rng if rng is None else rng
        buf = self.buffers[x]
        if len(buf) == 0:
            return
        batch = buf.sample(self.cfg.batch_size, rng)
        train_step(self.vaes[x], batch, rng)


def train_system(
    world: WorldModel,
    cfg: SystemConfig,
    num_episodes: int,
    rng: np.random.Generator | None = None,
) -> tuple[DecisionSystem, list[EpisodeRecord]]:
    """Run episodes with worlds drawn i.i.d. from rho, training as we go."""
    system = DecisionSystem(world, cfg, rng)
    records: list[EpisodeRecord] = []
    for _ in range(num_episodes):
        w = system.draw_world()
        record = system.run_episode(w)
        system.train_prior(record.selected_prior)
        records.append(record)
    return system, records


def _component_str(a: np.ndarray) -> str:
    return ";".join(format(float(c), ".12g") for c in np.atleast_1d(a))


def write_episode_csv(records: Sequence[EpisodeRecord], out: IO[str]) -> None:
    """Episode log export; actions with d > 1 join components with ';'."""
    out.write(EPISODE_CSV_HEADER + "\n")
    for i, r in enumerate(records):
        out.write(
            f"{i},{r.world},{r.selected_prior},{_component_str(r.seed_action)},"
            f"{_component_str(r.decision)},{format(r.utility, '.12g')},"
            f"{format(r.seed_utility, '.12g')},{r.utility_evaluations}\n"
        )


def empirical_expected_utility(records: Sequence[EpisodeRecord]) -> float:
    """Mean decision utility over the log."""
    if not records:
        raise ValueError("empty episode log")
    return sum(r.utility for r in records) / len(records)


def empirical_mutual_information(records: Sequence[EpisodeRecord], bins: int = 100) -> float:
    """Plug-in I(W;A) in bits from decisions histogrammed into equal slices."""
    if not records:
        raise ValueError("empty episode log")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    worlds = np.array([r.world for r in records])
    decisions = np.array([float(r.decision[0]) for r in records])
    num_worlds = int(worlds.max()) + 1
    slot = np.minimum((decisions * bins).astype(int), bins - 1)
    joint = np.zeros((num_worlds, bins))
    np.add.at(joint, (worlds, slot), 1.0)
    joint /= joint.sum()
    pw = joint.sum(axis=1, keepdims=True)
    pa = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0.0, joint * np.log2(joint / (pw * pa)), 0.0)
    return float(terms.sum())


def efficiency_point(
    records: Sequence[EpisodeRecord], bins: int = 100
) -> tuple[float, float]:
    """(mutual information bits, expected utility) for frontier comparison."""
    return empirical_mutual_information(records, bins), empirical_expected_utility(records)
