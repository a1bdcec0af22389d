#!/usr/bin/env python3
"""
Rate and power model for multi-user multi-radio uplinks.

Holds the domain types shared by every solver (system constants, terminals,
radio links, the access point, power allocations) and the pure functions that
evaluate weighted rate, the joint Tx/Rx power consumption and the resulting
energy efficiency of any allocation.

Units: powers are carried in mW everywhere; energy efficiency is reported in
bit/joule, the mW -> W conversion happens only inside ``system_ee``.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Tuple

LOG2 = math.log(2.0)
MW_PER_W = 1000.0

# Links with power at or below this level count as inactive (mW).
ACTIVITY_THRESHOLD_MW = 1e-12

LinkKey = Tuple[str, str]


class DomainError(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class SystemParams:
    """Global physical constants of the radio system."""
    bandwidth_per_link: float
    noise_variance: float
    snr_gap: float = 1.0
    amplifier_efficiency: float = 1.0

    def __post_init__(self):
        if self.bandwidth_per_link <= 0:
            raise DomainError(f"bandwidth_per_link must be positive, got {self.bandwidth_per_link}")
        if self.snr_gap < 1:
            raise DomainError(f"snr_gap must be >= 1, got {self.snr_gap}")
        if self.noise_variance <= 0:
            raise DomainError(f"noise_variance must be positive, got {self.noise_variance}")
        if not 0 < self.amplifier_efficiency <= 1:
            raise DomainError(f"amplifier_efficiency must lie in (0, 1], got {self.amplifier_efficiency}")

    @property
    def effective_noise(self) -> float:
        """Gamma * sigma^2 in mW."""
        return self.snr_gap * self.noise_variance


@dataclass(frozen=True)
class RadioLink:
    link_id: str
    gain: float
    p_max: float

    def __post_init__(self):
        if self.gain < 0:
            raise DomainError(f"link {self.link_id}: gain must be >= 0, got {self.gain}")
        if self.p_max <= 0:
            raise DomainError(f"link {self.link_id}: p_max must be positive, got {self.p_max}")


@dataclass(frozen=True)
class UserTerminal:
    """A terminal with its preassigned, ordered set of radio links."""
    user_id: str
    links: Tuple[RadioLink, ...]
    p_dyn: float
    p_sta: float
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'links', tuple(self.links))
        if self.weight < 0:
            raise DomainError(f"user {self.user_id}: weight must be >= 0, got {self.weight}")
        if self.p_dyn < 0 or self.p_sta < 0:
            raise DomainError(f"user {self.user_id}: circuit powers must be >= 0")
        ids = [link.link_id for link in self.links]
        if len(set(ids)) != len(ids):
            raise DomainError(f"user {self.user_id}: duplicate link ids {ids}")

    def link(self, link_id: str) -> RadioLink:
        for link in self.links:
            if link.link_id == link_id:
                return link
        raise DomainError(f"user {self.user_id} has no link {link_id!r}")


@dataclass(frozen=True)
class AccessPoint:
    p_dyn_rx: float
    p_sta_rx: float

    def __post_init__(self):
        if self.p_dyn_rx < 0 or self.p_sta_rx < 0:
            raise DomainError("access point circuit powers must be >= 0")


@dataclass(frozen=True)
class PowerBreakdown:
    """Consumed power split into its five components (mW)."""
    transmit: float
    user_dynamic: float
    user_static: float
    ap_dynamic: float
    ap_static: float

    @property
    def total(self) -> float:
        return self.transmit + self.user_dynamic + self.user_static + self.ap_dynamic + self.ap_static

    def as_dict(self) -> Dict[str, float]:
        return {
            'transmit': self.transmit,
            'user_dynamic': self.user_dynamic,
            'user_static': self.user_static,
            'ap_dynamic': self.ap_dynamic,
            'ap_static': self.ap_static,
            'total': self.total,
        }


@dataclass
class PowerAllocation:
    """
    Transmit powers keyed by (user_id, link_id), in mW.

    Absent entries mean zero power.
    """
    powers: Dict[LinkKey, float] = field(default_factory=dict)

    def get(self, user_id: str, link_id: str) -> float:
        return self.powers.get((user_id, link_id), 0.0)

    def items(self) -> Iterator[Tuple[LinkKey, float]]:
        return iter(sorted(self.powers.items()))

    def __len__(self) -> int:
        return len(self.powers)

    def active_keys(self, threshold: float = ACTIVITY_THRESHOLD_MW) -> List[LinkKey]:
        return sorted(key for key, p in self.powers.items() if p > threshold)

    def snapped(self, threshold: float = ACTIVITY_THRESHOLD_MW) -> 'PowerAllocation':
        """Copy with every power at or below ``threshold`` set to exactly 0."""
        return PowerAllocation({key: (p if p > threshold else 0.0) for key, p in self.powers.items()})

    def validate(self, users: Iterable[UserTerminal], tolerance: float = 1e-9) -> None:
        """Check every key references an existing pair and respects its box."""
        lookup = {(u.user_id, l.link_id): l for u in users for l in u.links}
        for key, p in self.powers.items():
            if key not in lookup:
                raise DomainError(f"allocation references unknown (user, link) pair {key}")
            p_max = lookup[key].p_max
            if p < 0 or p > p_max * (1 + tolerance):
                raise DomainError(f"power {p} mW for {key} outside [0, {p_max}]")


def check_disjoint_links(users: Iterable[UserTerminal]) -> None:
    """Link sets of distinct users must not overlap."""
    owner: Dict[str, str] = {}
    for user in users:
        for link in user.links:
            if link.link_id in owner and owner[link.link_id] != user.user_id:
                raise DomainError(
                    f"link {link.link_id!r} assigned to both {owner[link.link_id]!r} and {user.user_id!r}")
            owner[link.link_id] = user.user_id


def indicator(x: float, threshold: float = 0.0) -> int:
    """1 if x is strictly above ``threshold``, else 0."""
    if x < 0:
        raise DomainError(f"indicator expects a nonnegative argument, got {x}")
    return 1 if x > threshold else 0


def link_rate(p: float, link: RadioLink, params: SystemParams) -> float:
    """Achievable rate (bit/s) of one link at transmit power ``p`` (mW)."""
    if p < 0 or p > link.p_max * (1 + 1e-9):
        raise DomainError(f"power {p} mW outside [0, {link.p_max}] for link {link.link_id}")
    if p == 0 or link.gain == 0:
        return 0.0
    return params.bandwidth_per_link * math.log2(1.0 + p * link.gain / params.effective_noise)


def user_rate(alloc: PowerAllocation, user: UserTerminal, params: SystemParams) -> float:
    """Unweighted rate of one user (bit/s)."""
    return sum(link_rate(alloc.get(user.user_id, link.link_id), link, params) for link in user.links)


def system_rate(alloc: PowerAllocation, users: List[UserTerminal], params: SystemParams) -> float:
    """Weighted sum rate over all users (bit/s)."""
    return sum(user.weight * user_rate(alloc, user, params) for user in users)


def active_link_count(alloc: PowerAllocation, user: UserTerminal,
                      threshold: float = ACTIVITY_THRESHOLD_MW) -> int:
    return sum(indicator(alloc.get(user.user_id, link.link_id), threshold) for link in user.links)


def total_power(alloc: PowerAllocation, users: List[UserTerminal], ap: AccessPoint,
                params: SystemParams, threshold: float = ACTIVITY_THRESHOLD_MW) -> PowerBreakdown:
    """
    Joint transmitter/receiver power consumption of an allocation.

    The access point's static power is charged unconditionally; a user's
    static power only when at least one of its links is active.
    """
    transmit = 0.0
    user_dynamic = 0.0
    user_static = 0.0
    ap_dynamic = 0.0
    for user in users:
        n_active = active_link_count(alloc, user, threshold)
        transmit += sum(alloc.get(user.user_id, link.link_id) for link in user.links)
        user_dynamic += n_active * user.p_dyn
        user_static += indicator(n_active) * user.p_sta
        ap_dynamic += n_active * ap.p_dyn_rx
    return PowerBreakdown(
        transmit=transmit / params.amplifier_efficiency,
        user_dynamic=user_dynamic,
        user_static=user_static,
        ap_dynamic=ap_dynamic,
        ap_static=ap.p_sta_rx,
    )


def system_ee(alloc: PowerAllocation, users: List[UserTerminal], ap: AccessPoint,
              params: SystemParams) -> float:
    """Weighted system energy efficiency in bit/joule; 0 for a zero denominator."""
    alloc = alloc.snapped()
    denominator_w = total_power(alloc, users, ap, params).total / MW_PER_W
    if denominator_w <= 0:
        return 0.0
    return system_rate(alloc, users, params) / denominator_w


def full_power_allocation(users: List[UserTerminal]) -> PowerAllocation:
    """Every link of every user at its p_max."""
    return PowerAllocation({(u.user_id, l.link_id): l.p_max for u in users for l in u.links})


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)
