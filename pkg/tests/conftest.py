import random

import pytest

from asaf import AsyncModel, DelayProfile, NetworkConfig

ALL_PROTOCOLS = ("sync", "prop-naive", "guard", "guard-dl", "offset", "offset-dl")


def random_instance(rng: random.Random, protocols=ALL_PROTOCOLS,
                    n_max=3, k_max=2, t_max=6, theta_max=3):
    """Random valid (protocol, cfg, dp) triple for property tests."""
    protocol = rng.choice(protocols)
    n = rng.randint(1, n_max)
    m = n * rng.randint(1, k_max)
    t = rng.randint(2, t_max)
    theta = 0 if protocol == "sync" else rng.randint(0, min(theta_max, t - 1))
    dl = protocol.endswith("-dl")
    if protocol in ("offset", "offset-dl"):
        tau = [rng.randint(0, theta) for _ in range(n)]
        if theta:
            tau[rng.randrange(n)] = theta
        dp = DelayProfile.offset(tau)
        model = AsyncModel.SLOT_OFFSET
    else:
        nu = [rng.randint(0, theta) for _ in range(n)]
        pi = [rng.randint(0, theta - v) for v in nu]
        if theta:
            # force the delay spread to actually reach theta somewhere
            hot = rng.randrange(n)
            pi[hot] = theta - nu[hot]
        tau0 = rng.randint(0, theta) if dl else None
        dp = DelayProfile.propagation(nu, pi, tau0=tau0)
        model = (AsyncModel.SYNCHRONOUS if protocol == "sync"
                 else AsyncModel.PROPAGATION_DELAY)
    cfg = NetworkConfig(
        n_relays=n, n_slots=m, slot_len=t,
        guard_len=theta if protocol in ("guard", "guard-dl") else 0,
        direct_link=dl, relay_isolated=dl, model=model)
    return protocol, cfg, dp


@pytest.fixture
def rng():
    return random.Random(20260823)
