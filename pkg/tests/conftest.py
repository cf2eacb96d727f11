import numpy as np
import pytest

from crowdpac.crowd import PoolRole, Pools, build_pool
from crowdpac.domain import DistributionSpec, Instance, true_label
from crowdpac.expert import Expert
from crowdpac.metrics import QueryLedger


UNIT = DistributionSpec("uniform", (0.0, 1.0), theta_star=0.5)


def make_pools(alpha=1.0, beta=1.0, label_strategy=None, comparison_strategy=None,
               size=30, seed=0) -> Pools:
    return Pools(
        label=build_pool(PoolRole.LABEL, size, alpha, label_strategy, strategy_seed=seed),
        comparison=build_pool(
            PoolRole.COMPARISON, size, beta, comparison_strategy, strategy_seed=seed
        ),
    )


def brute_sorted_labeled(instances):
    """Independent oracle: sort by (score, id), label by the true sign."""
    ordered = sorted(instances, key=lambda x: (x.score, x.id))
    return [(x, true_label(x)) for x in ordered]


def make_instances(features, id_start=0, theta_star=0.5):
    return [
        Instance(id=id_start + i, feature=f, score=f - theta_star)
        for i, f in enumerate(features)
    ]


def boosting_triple(rng, p, max_support=20):
    """Random finite-support distribution plus a triple honoring the premises.

    Flip sets are grown greedily under each premise's error budget: h1 flips
    marginal mass at most p, h2 flips balanced-conditional mass at most p,
    h3 flips disagreement-conditional mass at most p (and may flip freely
    outside the disagreement event, which stresses the bound hardest).
    Points are integers 0..k-1; returns (support, truth, h1, h2, h3).
    """
    k = int(rng.integers(2, max_support + 1))
    masses = rng.random(k)
    masses = masses / masses.sum()
    truth_row = rng.choice([-1, 1], size=k)

    def greedy(costs, budget):
        flips, spent = set(), 0.0
        for i in rng.permutation(k):
            c = costs[int(i)]
            if c is not None and spent + c <= budget + 1e-15 and rng.random() < 0.7:
                flips.add(int(i))
                spent += c
        return flips

    f1 = greedy(list(masses), p)
    mass_i = sum(masses[i] for i in f1)
    mass_c = 1.0 - mass_i
    costs2 = [
        0.5 * masses[i] / (mass_i if i in f1 else mass_c) for i in range(k)
    ]
    f2 = greedy(costs2, p)
    disagree = f1 ^ f2
    mass_d = sum(masses[i] for i in disagree)
    costs3 = [
        (masses[i] / mass_d if mass_d > 0 else None) if i in disagree else 0.0
        for i in range(k)
    ]
    f3 = greedy(costs3, p)

    support = [(i, float(masses[i])) for i in range(k)]
    truth = lambda i: int(truth_row[i])
    h1 = lambda i: -truth(i) if i in f1 else truth(i)
    h2 = lambda i: -truth(i) if i in f2 else truth(i)
    h3 = lambda i: -truth(i) if i in f3 else truth(i)
    return support, truth, h1, h2, h3


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ledger():
    return QueryLedger()


@pytest.fixture
def expert():
    return Expert()
