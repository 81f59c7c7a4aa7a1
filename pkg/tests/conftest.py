import numpy as np
import pytest

from sffm import InitialDistribution, SffmModel, TandemParams, build_example


@pytest.fixture
def two_phase_model():
    return SffmModel(T=[[-2.0, 2.0], [1.0, -1.0]], c=[1.0, -1.0], r=[1.0, -1.0])


@pytest.fixture
def two_phase_init():
    return InitialDistribution(lam=1.0, nu0=[0.2, 0.6], point_mass=[0.0, 0.2])


@pytest.fixture
def four_phase():
    return build_example(6)


def random_generator(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random irreducible CTMC generator with O(1) rates."""
    T = rng.uniform(0.1, 3.0, size=(n, n))
    np.fill_diagonal(T, 0.0)
    for i in range(n):  # guarantee a cycle
        T[i, (i + 1) % n] += 0.5
    np.fill_diagonal(T, -T.sum(axis=1))
    return T


def make_tandem_instance(p: int, m: int, seed: int) -> TandemParams:
    """Random certified-family parameters with all rates near one, so n-th
    inverse powers of the scaled rates do not amplify roundoff in the
    order-n boundary chain sums."""
    rng = np.random.default_rng(seed)
    b = rng.uniform(0.7, 1.6)
    beta = rng.uniform(0.7, 1.6)
    gamma = rng.uniform(0.8, 1.25)
    T_pm = rng.uniform(0.1, 1.0, size=(p, m))
    T_pm *= (b + beta) / T_pm.sum(axis=1, keepdims=True)
    T_mp = rng.uniform(0.1, 1.0, size=(m, p))
    T_mp *= b / T_mp.sum(axis=1, keepdims=True)
    n = p + m
    lam = beta / gamma
    bound = lam * gamma / (b + lam * gamma)
    P_minus = rng.uniform(0.0, 1.0, size=m)
    P_minus *= rng.uniform(0.1, 0.9) * bound / P_minus.sum()
    return TandemParams(
        b=b, beta=beta, gamma=gamma, T_pm=T_pm, T_mp=T_mp,
        abs_r=rng.uniform(0.8, 1.25, size=n),
        r_signs=rng.choice([-1.0, 1.0], size=n),
        c_signs=np.concatenate([np.ones(p), -np.ones(m)]),
        P_minus=P_minus,
    )
