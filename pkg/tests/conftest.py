import numpy as np
import pytest

from cfpower import DiscreteChannelModel

A = (1, 1)

# optimal power matrices reported for the two-level equiprobable model at budget 2
REMARK_P1 = np.array([[0.0, 3.3896, 0.0, 4.6105], [0.0, 2.5853, 0.0, 5.4145]])
REMARK_P2 = np.array([[0.0, 0.0, 2.5853, 5.4145], [0.0, 0.0, 3.3896, 4.6105]])


def example1():
    return DiscreteChannelModel.from_marginals([[1, 3], [0.5, 2]], [[0.6, 0.4], [0.8, 0.2]])


def example2():
    p = [0.1175, 0.2760, 0.6065]
    return DiscreteChannelModel.from_marginals([[0.5, 1, 2.5]] * 2, [p, p])


def example3():
    v = [0.25, 0.5, 0.75, 1, 1.25, 1.5, 2, 2.5, 3, 4]
    p = [0.0308, 0.0867, 0.1277, 0.1483, 0.1487, 0.1332, 0.1893, 0.0914, 0.0328, 0.0111]
    return DiscreteChannelModel.from_marginals([v, v], [p, p])


def remark():
    return DiscreteChannelModel.from_marginals([[0.5, 1]] * 2, [[0.5, 0.5]] * 2)


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def ex2():
    return example2()


@pytest.fixture
def ex3():
    return example3()


@pytest.fixture
def rmk():
    return remark()
