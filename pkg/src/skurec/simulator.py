"""Convergence simulator for the personalization stage.

Synthetic customers have known sensitivity scores; each iteration generates
noisy, sparse over/under-provisioning signals, propagates them into the
estimated score store, and records how far the estimates are from the truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, EmptyHistoryError, LogTransform, STANDARD_OFFERINGS
from .personalizer import LambdaStore, PropagationConfig, SatisfactionSignal

DEFAULT_SIM_CANDIDATES = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)


@dataclass(frozen=True)
class SimConfig:
    customer_lambdas: dict = field(
        default_factory=lambda: {"Alice": 0.0, "Bob": 1.5, "Charlie": -1.5}
    )
    subscription_lambdas: dict = field(
        default_factory=lambda: {"Dev": -1.0, "Prod1": 0.5, "Prod2": 1.5}
    )
    resource_groups_per_subscription: int = 3
    max_resources_per_group: int = 5
    candidates: tuple = DEFAULT_SIM_CANDIDATES
    stratifications: tuple = STANDARD_OFFERINGS
    sigma: float = 0.1
    signal_rate: float = 0.4
    signal_noise: float = 0.13
    epsilon_mode: str = "multiplicative"  # or "additive"
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.signal_rate <= 1 or not 0 <= self.signal_noise <= 1:
            raise ConfigError("signal rate/noise must be in [0, 1]")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.epsilon_mode not in ("multiplicative", "additive"):
            raise ConfigError("epsilon_mode must be multiplicative or additive")


@dataclass(frozen=True)
class SimResource:
    customer: str
    subscription: str
    resource_group: str
    stratification: str
    base_capacity: float  # stage-2 style draw from the candidate set
    preferred_capacity: float  # the capacity the customer is satisfied with
    lambda_true: float


@dataclass
class IterationMetrics:
    iteration: int
    rmse: float
    p80_error: float
    n_signals: int


@dataclass
class SimState:
    cfg: SimConfig
    resources: list[SimResource]
    store: LambdaStore
    rng: np.random.Generator
    history: list[IterationMetrics] = field(default_factory=list)
    profile_errors: list[dict] = field(default_factory=list)

    def profiles(self) -> list[tuple[str, str]]:
        """Customer profiles carry one true sensitivity score each: one per
        (customer, subscription) pair."""
        seen = []
        for r in self.resources:
            key = (r.customer, r.subscription)
            if key not in seen:
                seen.append(key)
        return seen


def _lattice_snap(value: float, transform: LogTransform = LogTransform()) -> float:
    """Snap onto the power-of-two lattice without clamping.

    The simulator's true preferred capacities can sit beyond the candidate
    range (large positive or negative true scores); clamping the prediction
    there would make boundary resources emit corrective signals forever and
    the estimates diverge, so predictions discretize onto the unbounded
    lattice instead.
    """
    y = transform.transform(value)
    k = math.floor(y)
    # midpoint ties round up, matching the candidate-set rule
    return transform.inverse(k + 1 if y - k >= 0.5 else k)


def init_sim(cfg: SimConfig) -> SimState:
    rng = np.random.default_rng(cfg.seed)
    store = LambdaStore(stratifications=cfg.stratifications)
    resources: list[SimResource] = []
    cands = np.asarray(cfg.candidates, dtype=float)
    for customer, lam_c in cfg.customer_lambdas.items():
        for sub, lam_s in cfg.subscription_lambdas.items():
            lam_true = lam_c + lam_s
            for gi in range(cfg.resource_groups_per_subscription):
                rg = f"rg{gi}"
                store.register(customer, sub, rg)
                n_r = int(rng.integers(1, cfg.max_resources_per_group + 1))
                for _ in range(n_r):
                    st = str(rng.choice(cfg.stratifications))
                    c_star = float(rng.choice(cands))
                    eps = 2.0 ** rng.normal(0.0, cfg.sigma)
                    if cfg.epsilon_mode == "multiplicative":
                        c_bar_star = eps * c_star
                    else:
                        c_bar_star = c_star + (eps - 1.0)
                    # the capacity a customer is satisfied with is itself an
                    # SKU-shaped value, so it sits on the capacity lattice;
                    # without this, signals would never cease even for a
                    # perfectly learned score
                    preferred = _lattice_snap(2.0 ** lam_true * c_bar_star)
                    resources.append(
                        SimResource(
                            customer=customer,
                            subscription=sub,
                            resource_group=rg,
                            stratification=st,
                            base_capacity=c_star,
                            preferred_capacity=preferred,
                            lambda_true=lam_true,
                        )
                    )
    return SimState(cfg=cfg, resources=resources, store=store, rng=rng)


def _record_metrics(state: SimState, n_signals: int) -> None:
    errors: dict[tuple[str, str], float] = {}
    for key in state.profiles():
        customer, sub = key
        members = [
            r for r in state.resources if (r.customer, r.subscription) == key
        ]
        # estimate for the profile: mean over the (RG, stratification) slots
        # that actually hold resources and therefore receive direct feedback
        slots = sorted({(r.resource_group, r.stratification) for r in members})
        lam_hat = float(
            np.mean([state.store.lookup(customer, sub, rg, st) for rg, st in slots])
        )
        errors[key] = abs(members[0].lambda_true - lam_hat)
    errs = np.array(list(errors.values()))
    state.profile_errors.append({k: float(v) for k, v in errors.items()})
    state.history.append(
        IterationMetrics(
            iteration=len(state.history),
            rmse=float(np.sqrt(np.mean(errs**2))),
            p80_error=float(np.percentile(errs, 80)),
            n_signals=n_signals,
        )
    )


def step(state: SimState) -> SimState:
    """One simulation iteration: generate signals, propagate, record."""
    cfg = state.cfg
    rng = state.rng
    signals: list[SatisfactionSignal] = []
    for r in state.resources:
        lam_hat = state.store.lookup(
            r.customer, r.subscription, r.resource_group, r.stratification
        )
        predicted = _lattice_snap(2.0 ** lam_hat * r.base_capacity)
        if predicted > r.preferred_capacity:
            raw = -1.0
        elif predicted < r.preferred_capacity:
            raw = 1.0
        else:
            continue
        if rng.random() >= cfg.signal_rate:
            continue
        if rng.random() < cfg.signal_noise:
            raw = -raw
        signals.append(
            SatisfactionSignal(
                customer=r.customer,
                subscription=r.subscription,
                resource_group=r.resource_group,
                stratification=r.stratification,
                strength=raw,
                source="Synthetic",
            )
        )
    for sig in signals:
        state.store.propagate(sig, cfg.propagation)
    _record_metrics(state, len(signals))
    return state


def run(cfg: SimConfig, iterations: int) -> SimState:
    state = init_sim(cfg)
    for _ in range(iterations):
        step(state)
    return state


def convergence_iteration(
    state: SimState, threshold: float = 0.5, quantile: float = 80.0
) -> int | None:
    """First iteration whose per-profile error quantile falls within the
    threshold, or None if it never does."""
    if not state.history:
        raise EmptyHistoryError("no recorded iterations")
    for m in state.history:
        if m.p80_error <= threshold:
            return m.iteration
    return None
