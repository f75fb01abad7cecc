"""Network configuration, timing profiles and fading draws.

========================================================================

The slotted amplify-and-forward network has one source, N half-duplex
relays and one destination.  A frame is M + 1 slots of T channel uses
(M a multiple of N); relay i forwards during the slots congruent to i
mod N the packet it heard in the preceding slot.  Timing asynchronism
enters through one of two models:

  * PropagationDelay: integer path delays, nu_i from source to relay i
    and pi_i from relay i to destination (tau_i = nu_i + pi_i, plus an
    optional direct-link delay tau_0).
  * SlotOffset: relay i's local slot clock lags the source's by tau_i
    whole symbols; there are no propagation delays.

theta is the largest total path delay and bounds every misalignment.

Fading is i.i.d. circularly-symmetric complex Gaussian with unit
variance (1/2 per real component), frozen per frame.  ``sample_fades``
gives every (seed, trial_index) pair its own counter-based stream so
Monte Carlo trials can be drawn in any order, in parallel, with
reproducible results.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DelayTooLarge,
    IsolationRequired,
    MismatchedModel,
    NegativeDelay,
    NonMultipleSlots,
    ValidationError,
)

__all__ = [
    "AsyncModel",
    "NetworkConfig",
    "DelayProfile",
    "FadeDraw",
    "validate_config",
    "sample_fades",
    "sample_fade_block",
    "n_fade_coef",
]


class AsyncModel(Enum):
    SYNCHRONOUS = "synchronous"
    PROPAGATION_DELAY = "propagation-delay"
    SLOT_OFFSET = "slot-offset"


# ======================================================================
# configuration
# ======================================================================

@dataclass(frozen=True)
class NetworkConfig:
    n_relays: int                      # N >= 1
    n_slots: int                       # M, a positive multiple of N
    slot_len: int                      # T, channel uses per slot
    guard_len: int = 0                 # x, zero-padding per slot (guarded protocols)
    direct_link: bool = False          # destination also hears the source
    relay_isolated: bool = False       # inter-relay channels absent
    model: AsyncModel = AsyncModel.SYNCHRONOUS


@dataclass(frozen=True)
class DelayProfile:
    """Per-relay timing offsets for one of the two asynchronism models.

    Use the ``propagation`` / ``offset`` constructors; ``theta`` is always
    derived, never stored.
    """

    kind: str                          # "prop" or "offset"
    nu: tuple = ()                     # source -> relay delays (prop)
    pi: tuple = ()                     # relay -> destination delays (prop)
    tau0: int | None = None            # direct-link delay (prop, direct link only)
    tau: tuple = ()                    # slot clock lags (offset)

    @classmethod
    def propagation(cls, nu, pi, tau0=None):
        return cls(kind="prop", nu=tuple(int(v) for v in nu),
                   pi=tuple(int(v) for v in pi),
                   tau0=None if tau0 is None else int(tau0))

    @classmethod
    def offset(cls, tau):
        return cls(kind="offset", tau=tuple(int(v) for v in tau))

    @classmethod
    def zero(cls, n_relays: int):
        """All-zero propagation profile (synchronous operation)."""
        return cls.propagation((0,) * n_relays, (0,) * n_relays)

    def path_delays(self) -> tuple:
        """tau_i per relay: total source -> relay i -> destination delay."""
        if self.kind == "prop":
            return tuple(a + b for a, b in zip(self.nu, self.pi))
        return self.tau

    @property
    def theta(self) -> int:
        delays = self.path_delays()
        if self.kind == "prop" and self.tau0 is not None:
            delays = delays + (self.tau0,)
        return max(delays) if delays else 0

    def is_zero(self) -> bool:
        return self.theta == 0 and all(v == 0 for v in self.nu + self.pi)


# ======================================================================
# validation
# ======================================================================

def validate_config(cfg: NetworkConfig, dp: DelayProfile) -> None:
    """Raise a ValidationError subclass if (cfg, dp) is inconsistent."""
    if cfg.n_relays < 0 or cfg.n_slots < 1 or cfg.slot_len < 1:
        raise ValidationError("n_slots and slot_len must be positive, n_relays >= 0")
    if cfg.n_relays == 0 and not cfg.direct_link:
        # degenerate point-to-point network, only meaningful with g0
        raise ValidationError("a network with no relays needs the direct link")
    if cfg.guard_len < 0:
        raise NegativeDelay("guard_len must be non-negative")
    if cfg.n_relays > 0 and cfg.n_slots % cfg.n_relays != 0:
        raise NonMultipleSlots(
            f"n_slots={cfg.n_slots} is not a multiple of n_relays={cfg.n_relays}")
    if cfg.direct_link and not cfg.relay_isolated:
        raise IsolationRequired("the direct link is only modeled with isolated relays")

    n = cfg.n_relays
    if dp.kind == "prop":
        if len(dp.nu) != n or len(dp.pi) != n:
            raise MismatchedModel(
                f"profile lists {len(dp.nu)}/{len(dp.pi)} relays, config has {n}")
        if any(v < 0 for v in dp.nu + dp.pi) or (dp.tau0 is not None and dp.tau0 < 0):
            raise NegativeDelay("path delays must be non-negative")
    else:
        if len(dp.tau) != n:
            raise MismatchedModel(f"profile lists {len(dp.tau)} relays, config has {n}")
        if any(v < 0 for v in dp.tau):
            raise NegativeDelay("slot offsets must be non-negative")

    if cfg.model is AsyncModel.SYNCHRONOUS:
        if not dp.is_zero():
            raise MismatchedModel("synchronous model paired with nonzero delays")
    elif cfg.model is AsyncModel.PROPAGATION_DELAY:
        if dp.kind != "prop":
            raise MismatchedModel("propagation-delay model needs a propagation profile")
    elif cfg.model is AsyncModel.SLOT_OFFSET:
        if dp.kind != "offset":
            raise MismatchedModel("slot-offset model needs an offset profile")

    if cfg.direct_link:
        if dp.kind == "prop" and dp.tau0 is None:
            raise MismatchedModel("direct link needs tau0 in the propagation profile")
    elif dp.tau0 is not None:
        raise MismatchedModel("tau0 given but the config has no direct link")

    # every protocol and bound in this package needs the delay spread to
    # stay inside one slot, otherwise triangularity breaks down
    if dp.theta >= cfg.slot_len:
        raise DelayTooLarge(f"theta={dp.theta} must be < slot_len={cfg.slot_len}")


# ======================================================================
# fading draws
# ======================================================================
#
# Flat coefficient layout, shared with the numeric kernels:
#   [0]                 g0        direct link
#   [1 .. N]            g_i       source -> relay i
#   [N+1 .. 2N]         h_i       relay i -> destination
#   [2N+1 .. 2N+N^2]    c_ij      relay i -> relay j, row major
#
# Draw order matches the layout; each coefficient consumes two uniforms
# (Box-Muller), so one trial consumes a fixed, config-dependent number of
# Philox counter blocks.  That makes per-trial streams and bulk blocks
# bit-identical.

def n_fade_coef(n_relays: int) -> int:
    return 1 + 2 * n_relays + n_relays * n_relays


def _n_drawn(cfg: NetworkConfig) -> int:
    # isolated networks skip the inter-relay coefficients entirely
    n = 1 + 2 * cfg.n_relays
    if not cfg.relay_isolated:
        n += cfg.n_relays * cfg.n_relays
    return n


def _blocks_per_trial(cfg: NetworkConfig) -> int:
    # Philox emits 4 uint64 words per counter increment; 2 words per coefficient
    return (2 * _n_drawn(cfg) + 3) // 4


def _uniforms_to_cn(u: np.ndarray) -> np.ndarray:
    """Map pairs of uniforms to CN(0, 1) samples, (B, 2k) -> (B, k)."""
    u = u.reshape(u.shape[0], -1, 2)
    mag = np.sqrt(-np.log1p(-u[..., 0]))          # |z|^2 ~ Exp(1), unit mean
    return mag * np.exp(2j * np.pi * u[..., 1])


@dataclass(frozen=True, eq=False)
class FadeDraw:
    """One realization of every channel coefficient in the network."""

    n_relays: int
    vector: np.ndarray                 # flat layout above, complex128

    @property
    def g0(self) -> complex:
        return complex(self.vector[0])

    @property
    def g(self) -> np.ndarray:
        return self.vector[1:1 + self.n_relays]

    @property
    def h(self) -> np.ndarray:
        return self.vector[1 + self.n_relays:1 + 2 * self.n_relays]

    @property
    def gamma_inter(self) -> np.ndarray:
        n = self.n_relays
        return self.vector[1 + 2 * n:].reshape(n, n)


def sample_fade_block(cfg: NetworkConfig, seed: int, start: int, count: int) -> np.ndarray:
    """Fade vectors for trials start .. start+count-1, shape (count, n_fade_coef).

    Row t equals ``sample_fades(cfg, seed, start + t).vector`` exactly.
    """
    if seed < 0 or start < 0:
        raise ValidationError("seed and trial index must be non-negative")
    n = cfg.n_relays
    bpt = _blocks_per_trial(cfg)
    bg = np.random.Philox(key=seed)
    bg.advance(start * bpt)
    u = np.random.Generator(bg).random(count * bpt * 4).reshape(count, bpt * 4)
    drawn = _uniforms_to_cn(u[:, :2 * _n_drawn(cfg)])

    out = np.zeros((count, n_fade_coef(n)), dtype=np.complex128)
    out[:, :1 + 2 * n] = drawn[:, :1 + 2 * n]
    if not cfg.relay_isolated:
        gam = drawn[:, 1 + 2 * n:].reshape(count, n, n).copy()
        gam[:, np.arange(n), np.arange(n)] = 0.0   # self channels do not exist
        out[:, 1 + 2 * n:] = gam.reshape(count, n * n)
    return out


def sample_fades(cfg: NetworkConfig, seed: int, trial_index: int) -> FadeDraw:
    """Deterministic fading draw for one Monte Carlo trial."""
    vec = sample_fade_block(cfg, seed, trial_index, 1)[0]
    return FadeDraw(n_relays=cfg.n_relays, vector=vec)
