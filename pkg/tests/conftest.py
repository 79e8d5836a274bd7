import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sipl.tasks import RewardParams, TaskParameter


def empty_grid(n: int) -> tuple:
    return tuple(tuple(0 for _ in range(n)) for _ in range(n))


def make_task(n=3, obstacles=(), gold=(1, 1), support_i=((0, 0),),
              support_j=((2, 2),), **kw) -> TaskParameter:
    grid = [[0] * n for _ in range(n)]
    for r, c in obstacles:
        grid[r][c] = 1
    fields = dict(
        grid_size=n,
        cells=tuple(tuple(row) for row in grid),
        gold_cell=gold,
        init_support_i=tuple(support_i),
        init_support_j=tuple(support_j),
    )
    fields.update(kw)
    task = TaskParameter(**fields)
    task.validate()
    return task


@pytest.fixture
def task3():
    return make_task()


@pytest.fixture
def task3_det():
    return make_task(move_success_prob=1.0, obs_noise_move=0.0, obs_noise_listen=0.0)


@pytest.fixture
def task4():
    return make_task(n=4, obstacles=((1, 1), (2, 3)), gold=(3, 0),
                     support_i=((0, 0), (0, 1)), support_j=((3, 3), (2, 2)))
