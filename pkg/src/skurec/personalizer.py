"""Stage 3: per-customer cost/performance sensitivity scores.

Scores live in a nested (customer -> subscription -> resource group ->
stratification) store, default 0.  Satisfaction signals are spread through a
customer's own tree by decayed addition; other customers are never touched.
The score shifts recommendations by whole or fractional powers of the log
base.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from .core import (
    CandidateSet,
    ConfigError,
    LogTransform,
    STANDARD_OFFERINGS,
    discretize,
)

LAMBDA_STORE_FORMAT_VERSION = 1

SIGNAL_SOURCES = ("CRI", "ScaleAction", "Synthetic")

#: Keyword filters for ticket classification.  A ticket matches a filter set
#: when any symptom/subject keyword AND any resolution keyword are present
#: (case-insensitive substring).  The throttle set follows the production
#: filter table; the cost set mirrors its structure.
DEFAULT_KEYWORD_FILTERS = {
    "throttle": {
        "symptoms": [
            "high cpu",
            "high cpu usage",
            "high cpu utilization",
            "high cpu utilisation",
        ],
        "subject": [
            "high cpu",
            "high cpu usage",
            "high cpu utilization",
            "high cpu utilisation",
            "100%",
            "99%",
            "95%",
            "90%",
            "0%",
            "9%",
        ],
        "resolution": [
            "increas",
            "throttl",
            "scale up",
            "scaling up",
            "scaled up",
        ],
    },
    "cost": {
        "symptoms": ["reduce cost", "too expensive", "high cost", "overpaying"],
        "subject": ["reduce cost", "too expensive", "high cost", "lower cost", "cost"],
        "resolution": [
            "scale down",
            "scaling down",
            "scaled down",
            "downgrade",
            "decreas",
        ],
    },
}


@dataclass(frozen=True)
class TicketRecord:
    symptoms: str = ""
    subject: str = ""
    resolution: str = ""


@dataclass(frozen=True)
class SatisfactionSignal:
    customer: str
    subscription: str
    resource_group: str
    stratification: str
    strength: float  # in [-1, 1]
    source: str = "Synthetic"

    def __post_init__(self):
        if not -1 <= self.strength <= 1:
            raise ConfigError("signal strength must be in [-1, 1]")


@dataclass(frozen=True)
class PropagationConfig:
    learning_rate: float = 0.3
    decay_stratification: float = 0.25  # across stratifications, same RG
    decay_resource_group: float = 0.25  # across RGs, same subscription
    decay_subscription: float = 0.25  # across subscriptions, same customer

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        for rho in (
            self.decay_stratification,
            self.decay_resource_group,
            self.decay_subscription,
        ):
            if not 0 <= rho <= 1:
                raise ConfigError("decays must be in [0, 1]")


class LambdaStore:
    """Sensitivity scores keyed by (customer, subscription, RG, stratification).

    Absent entries read as 0.  The store also tracks the known topology
    (which subscriptions/RGs exist per customer) so cross-entity propagation
    knows what to touch.  Mutations are expected to be serialized by the
    caller; reads never mutate.
    """

    def __init__(self, stratifications: Iterable[str] = STANDARD_OFFERINGS):
        self.stratifications = tuple(stratifications)
        self.values: dict[tuple[str, str, str, str], float] = {}
        self.topology: dict[str, dict[str, set[str]]] = {}
        self.version = 0

    def register(self, customer: str, subscription: str, resource_group: str) -> None:
        self.topology.setdefault(customer, {}).setdefault(subscription, set()).add(
            resource_group
        )

    def lookup(
        self, customer: str, subscription: str, resource_group: str, stratification: str
    ) -> float:
        return self.values.get((customer, subscription, resource_group, stratification), 0.0)

    def _add(self, key: tuple[str, str, str, str], delta: float) -> None:
        if delta == 0.0:
            return
        self.values[key] = self.values.get(key, 0.0) + delta

    def propagate(self, sig: SatisfactionSignal, cfg: PropagationConfig) -> None:
        """Decayed additive spread of a signal through the customer's tree.

        Both same-stratification and cross-stratification entries of sibling
        resource groups and subscriptions are updated; other customers'
        entries are untouched.
        """
        cu, su, rg, st = (
            sig.customer,
            sig.subscription,
            sig.resource_group,
            sig.stratification,
        )
        self.register(cu, su, rg)
        s = cfg.learning_rate * sig.strength
        delta = cfg.decay_stratification * s

        self._add((cu, su, rg, st), s)
        for x in self.stratifications:
            if x != st:
                self._add((cu, su, rg, x), delta)
        subs = self.topology.get(cu, {})
        for other_rg in subs.get(su, ()):
            if other_rg == rg:
                continue
            self._add((cu, su, other_rg, st), cfg.decay_resource_group * s)
            for x in self.stratifications:
                if x != st:
                    self._add((cu, su, other_rg, x), cfg.decay_resource_group * delta)
        for other_su, rgs in subs.items():
            if other_su == su:
                continue
            for other_rg in rgs:
                self._add((cu, other_su, other_rg, st), cfg.decay_subscription * s)
                for x in self.stratifications:
                    if x != st:
                        self._add(
                            (cu, other_su, other_rg, x), cfg.decay_subscription * delta
                        )
        self.version += 1

    def to_json(self) -> str:
        nested: dict = {}
        for (cu, su, rg, st), v in sorted(self.values.items()):
            nested.setdefault(cu, {}).setdefault(su, {}).setdefault(rg, {})[st] = v
        topo = {
            cu: {su: sorted(rgs) for su, rgs in subs.items()}
            for cu, subs in self.topology.items()
        }
        return json.dumps(
            {
                "version": LAMBDA_STORE_FORMAT_VERSION,
                "update_count": self.version,
                "stratifications": list(self.stratifications),
                "topology": topo,
                "scores": nested,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "LambdaStore":
        d = json.loads(text)
        store = cls(stratifications=d.get("stratifications", STANDARD_OFFERINGS))
        store.version = int(d.get("update_count", 0))
        for cu, subs in d.get("topology", {}).items():
            for su, rgs in subs.items():
                for rg in rgs:
                    store.register(cu, su, rg)
        for cu, subs in d.get("scores", {}).items():
            for su, rgs in subs.items():
                for rg, sts in rgs.items():
                    for st, v in sts.items():
                        store.values[(cu, su, rg, st)] = float(v)
        return store


def classify_ticket(
    ticket: TicketRecord, filters: dict = DEFAULT_KEYWORD_FILTERS
) -> int:
    """Map a support ticket to a signal strength in {-1, 0, +1}.

    +1 for a throttle (performance) match, -1 for a cost match, 0 otherwise.
    A throttle match takes precedence over a cost match.
    """

    def matches(table: dict) -> bool:
        symptoms = ticket.symptoms.lower()
        subject = ticket.subject.lower()
        resolution = ticket.resolution.lower()
        intent = any(k in symptoms for k in table.get("symptoms", ())) or any(
            k in subject for k in table.get("subject", ())
        )
        resolved = any(k in resolution for k in table.get("resolution", ()))
        return intent and resolved

    if matches(filters["throttle"]):
        return 1
    if matches(filters["cost"]):
        return -1
    return 0


def adjust(
    capacity: float,
    lam: float,
    candidates: CandidateSet,
    transform: LogTransform = LogTransform(),
) -> float:
    """Shift a recommendation by lam powers of the log base, then snap it
    back onto the candidate set."""
    if capacity <= 0:
        raise ConfigError("capacity must be positive")
    shifted = transform.inverse(transform.transform(capacity) + lam)
    return discretize(shifted, candidates.dim(0), transform)
