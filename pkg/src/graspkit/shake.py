"""Deterministic stand-in for the shake protocol and the shake-until-drop benchmark."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

from .tactile import N_POINTS, N_STEPS, DEFAULT_PARAMS

N_MOVEMENTS = 4
ENDURANCE_CAP_S = 300.0
ENDURANCE_DECAY = 1000.0
DEFAULT_MASK = (1, 2, 3)


class Mode(str, enum.Enum):
    NO_CONTACT = "none"
    FALL = "fall"
    SLIP = "slip"


@dataclass(frozen=True)
class ContactScenario:
    """Ground-truth physical outcome of one grasp.

    ``param`` is the 1-based movement index ``k`` for ``FALL`` and the slip
    magnitude ``m`` for ``SLIP``; it is ignored for ``NO_CONTACT``.
    """

    mode: Mode
    param: float = 0.0
    base_pressure: float = 100.0
    contact_mask: tuple = DEFAULT_MASK
    noise_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "contact_mask", tuple(sorted(set(int(p) for p in self.contact_mask))))
        if self.mode is Mode.FALL and int(self.param) not in (1, 2, 3, 4):
            raise ValueError(f"fall index must be in 1..4, got {self.param}")
        if self.mode is Mode.FALL and self.param != int(self.param):
            raise ValueError("fall index must be an integer")
        if self.mode is Mode.SLIP and not self.param >= 0:
            raise ValueError("slip magnitude must be >= 0")
        if self.mode is not Mode.NO_CONTACT and not self.contact_mask:
            raise ValueError("contact_mask must be nonempty for a contact scenario")
        if any(p < 0 or p >= N_POINTS for p in self.contact_mask):
            raise ValueError("contact_mask entries must be in 0..4")
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")
        if not self.base_pressure > DEFAULT_PARAMS.contact_threshold:
            raise ValueError("base_pressure must exceed the contact threshold")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def no_contact(cls, **kw) -> "ContactScenario":
        return cls(Mode.NO_CONTACT, 0.0, **kw)

    @classmethod
    def fall_after(cls, k: int, **kw) -> "ContactScenario":
        return cls(Mode.FALL, int(k), **kw)

    @classmethod
    def slip(cls, m: float, **kw) -> "ContactScenario":
        return cls(Mode.SLIP, float(m), **kw)

    def summary(self) -> dict:
        return {"mode": self.mode.value, "param": self.param}


@dataclass(frozen=True)
class ShakeProtocol:
    movement_duration_s: float = 2.0
    movements: int = field(default=N_MOVEMENTS, init=False)


@dataclass
class ShakeResult:
    image: np.ndarray
    degenerate: bool = False


def _noise(seed: int, noise_std: float) -> np.ndarray:
    # Philox keyed by the scenario seed: each scenario draws its own stream,
    # so images do not depend on generation order.
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.normal(0.0, 1.0, size=(N_STEPS, N_POINTS)) * noise_std


def _slip_rows(scenario: ContactScenario):
    """Clean (noise-free) rows for a slip whose space-kernel sum is exactly m.

    Each movement moves pressure ``q`` from a donor taxel to its neighbour; the
    next movement reverses it.  One movement of that kind contributes ``a*q``
    to the slip sum, ``a`` depending on where the pair sits on the strip.  If
    the donor cannot supply the required ``q`` it is clamped and the remainder
    is carried as a load surge ``g`` on the receiving taxel, contributing
    ``b*g``.  The per-movement contribution is m/4.
    """
    mask = scenario.contact_mask
    base = np.zeros(N_POINTS)
    base[list(mask)] = scenario.base_pressure
    if max(mask) < N_POINTS - 1:
        donor, receiver = mask[0], mask[0] + 1
    else:
        donor, receiver = mask[-1], mask[-1] - 1

    left, right = min(donor, receiver), max(donor, receiver)
    # contributions of the space-kernel columns touching the pair
    a = 2.0 + (1.0 if left >= 1 else 0.0) + (1.0 if right <= 3 else 0.0)
    recv_edge = (receiver <= 3) if receiver > donor else (receiver - 1 >= 0)
    b = 1.0 + (1.0 if recv_edge else 0.0)

    per_move = scenario.param / N_MOVEMENTS
    q = per_move / a
    degenerate = False
    available = base[donor]
    if q > available:
        q = available
        degenerate = True
    g = (per_move - a * q) / b

    delta = np.zeros(N_POINTS)
    delta[donor] = -q
    delta[receiver] = q + g
    # movements alternate direction, so rows alternate between two states
    rows = [base.copy() if t % 2 == 0 else base + delta for t in range(N_STEPS)]
    return np.array(rows), degenerate


def simulate_shake_ex(scenario: ContactScenario) -> ShakeResult:
    """Synthesize the tactile image for a scenario, with the degenerate flag."""
    degenerate = False
    if scenario.mode is Mode.NO_CONTACT:
        clean = np.zeros((N_STEPS, N_POINTS))
    elif scenario.mode is Mode.FALL:
        k = int(scenario.param)
        clean = np.zeros((N_STEPS, N_POINTS))
        clean[:k, list(scenario.contact_mask)] = scenario.base_pressure
    else:
        clean, degenerate = _slip_rows(scenario)
    if scenario.noise_std > 0:
        img = np.abs(clean + _noise(scenario.seed, scenario.noise_std))
    else:
        img = clean
    return ShakeResult(img, degenerate)


def simulate_shake(scenario: ContactScenario) -> np.ndarray:
    return simulate_shake_ex(scenario).image


def endurance_hold_time(scenario: ContactScenario, protocol: ShakeProtocol = ShakeProtocol()) -> float:
    """Seconds the object survives continuous shaking, capped at 300."""
    if scenario.mode is Mode.NO_CONTACT:
        return 0.0
    if scenario.mode is Mode.FALL:
        return min(int(scenario.param) * protocol.movement_duration_s, ENDURANCE_CAP_S)
    return ENDURANCE_CAP_S * math.exp(-scenario.param / ENDURANCE_DECAY)


def endurance_score(scenario: ContactScenario, protocol: ShakeProtocol = ShakeProtocol()) -> float:
    return endurance_hold_time(scenario, protocol) / ENDURANCE_CAP_S


def sample_scenarios(n: int, mix: Sequence[float], seed: int, *,
                     noise_std: float = 0.5, base_pressure: float = 100.0,
                     slip_range=(1.0, 5000.0)) -> List[ContactScenario]:
    """Seeded scenarios; ``mix`` weights the (no-contact, fall, slip) modes."""
    w = np.asarray(mix, dtype=float)
    if w.shape != (3,) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("mix must be three non-negative weights, not all zero")
    if n <= 0:
        return []
    ss = np.random.SeedSequence(int(seed))
    rng = np.random.default_rng(ss)
    modes = rng.choice(3, size=n, p=w / w.sum())
    lo, hi = np.log(slip_range[0]), np.log(slip_range[1])
    slips = np.exp(rng.uniform(lo, hi, size=n))
    falls = rng.integers(1, N_MOVEMENTS + 1, size=n)
    seeds = rng.integers(0, 2**63, size=n, dtype=np.int64)
    out = []
    for j in range(n):
        kw = dict(noise_std=noise_std, base_pressure=base_pressure, seed=int(seeds[j]))
        if modes[j] == 0:
            out.append(ContactScenario.no_contact(**kw))
        elif modes[j] == 1:
            out.append(ContactScenario.fall_after(int(falls[j]), **kw))
        else:
            out.append(ContactScenario.slip(float(slips[j]), **kw))
    return out


# -- scenario batch file: mode,param,base_pressure,noise_std,seed ------------

def parse_scenario_line(line: str) -> ContactScenario:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != 5:
        raise ValueError(f"expected 5 fields, got {len(parts)}: {line!r}")
    mode, param, base, noise, seed = parts
    return ContactScenario(Mode(mode), float(param or 0), base_pressure=float(base),
                           noise_std=float(noise), seed=int(seed))


def read_scenario_batch(lines: Iterable[str]) -> List[ContactScenario]:
    out = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        out.append(parse_scenario_line(line))
    return out


def format_scenario_line(s: ContactScenario) -> str:
    param = int(s.param) if s.mode is Mode.FALL else s.param
    return f"{s.mode.value},{param!r},{s.base_pressure!r},{s.noise_std!r},{s.seed}"
