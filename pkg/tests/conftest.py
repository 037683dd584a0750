import numpy as np
import pytest

from nomapair import BeamformerSet, PairingMatrix, PairingMode, Scenario, ScenarioConfig, generate_scenario
from nomapair.surrogate import make_iterate


@pytest.fixture
def unit_scenario():
    """K=1, N=1, h=1, sigma^2=1, P=1: closed-form optimum ln 2."""
    return Scenario(K=1, N=1, distances_m=[10.0], channels=[[1.0 + 0j]],
                    noise_w=[1.0], p_max_w=1.0)


def scenario(K=4, N=2, seed=0, p_max_dbm=38.0):
    return generate_scenario(ScenarioConfig(K=K, N=N, seed=seed, p_max_dbm=p_max_dbm))


def random_feasible_alpha(K, rng, lo=0.05, hi=0.95):
    """Strictly feasible relaxed pairing with entries on every upper slot.

    Entries are drawn uniform and rescaled so every degree/chain sum stays
    below a level strictly inside (0, 1).
    """
    u = np.triu(rng.uniform(lo, hi, size=(K, K)), 1)
    sums = [1e-9]
    sums += list(u.sum(axis=0))
    sums += list(u.sum(axis=1))
    for k in range(K):
        for l in range(k + 1, K):
            sums.append(u[k, l] + u[l].sum())
            sums.append(u[k, l] + u[:, k].sum())
    level = rng.uniform(0.3, 0.95)
    return u * (level / max(sums))


def random_w(s, rng, power_frac=None):
    """Matched-filter directions plus a random perturbation at feasible power."""
    norms = np.linalg.norm(s.channels, axis=1)[:, None]
    noise = (rng.standard_normal(s.channels.shape) + 1j * rng.standard_normal(s.channels.shape))
    dirs = s.channels / norms + 0.5 * noise / np.sqrt(2 * s.N)
    dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
    frac = rng.uniform(0.3, 1.0) if power_frac is None else power_frac
    per_user = rng.uniform(0.5, 1.5, size=s.K)
    per_user *= frac * s.p_max_w / per_user.sum()
    return BeamformerSet(np.sqrt(per_user)[:, None] * dirs)


def random_iterate(s, rng, mu_pad=0.0):
    """Random feasible expansion point with an exactly tight mu lift."""
    w = random_w(s, rng)
    alpha = PairingMatrix(random_feasible_alpha(s.K, rng), PairingMode.RELAXED)
    return make_iterate(s, w, alpha, mu_pad=mu_pad)
