import numpy as np
import pytest

from reliefplan.instance import CostModel, DemandParams, Instance, Network
from reliefplan.markov import AttributeChain, HurricaneState, Interval, MarkovModel


def tiny_instance(kind: str = "det", nu: float = 0.6, m_points: int = 1, alpha_matrix=None, lx_matrix=None,
                  ly_matrix=None) -> Instance:
    """Two intensity levels, two x-cells, two SPs and two DPs."""
    alpha = AttributeChain((0, 1), alpha_matrix if alpha_matrix is not None else [[1.0, 0.0], [0.3, 0.7]])
    lx = AttributeChain((Interval(0.0, 100.0), Interval(100.0, 200.0)),
                        lx_matrix if lx_matrix is not None else [[0.6, 0.4], [0.3, 0.7]])
    if kind == "det":
        model = MarkovModel("det", alpha, lx, None, 3)
        s1 = HurricaneState(1, 1)
    else:
        ly = AttributeChain(
            (Interval(-100.0, -50.0), Interval(-50.0, 0.0), Interval(0.0, float("inf"))),
            ly_matrix if ly_matrix is not None else [[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
        )
        model = MarkovModel("rand", alpha, lx, ly, 3)
        s1 = HurricaneState(1, 1, 0)
    net = Network((100.0, 400.0), [[50.0, 50.0], [150.0, 30.0]], [300.0, 200.0], [[40.0, 120.0], [160.0, 150.0]])
    return Instance(
        net,
        CostModel.from_base(5.0, nu),
        DemandParams(400.0, 300.0, m_points),
        model,
        s1,
        np.zeros(2),
    )


def single_path_instance(kind: str, nu: float = 0.6) -> Instance:
    """Tiny instance whose chain has exactly one trajectory (a degenerate tree)."""
    eye = [[1.0, 0.0], [0.0, 1.0]]
    ly = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
    return tiny_instance(kind, nu, alpha_matrix=eye, lx_matrix=eye, ly_matrix=ly)


def feasible_static_plan(inst: Instance, lay, rng) -> np.ndarray:
    """Random (x, f) plan that only buys from the MDC and never releases negative stock."""
    z = np.zeros(lay.size)
    x_prev = np.asarray(inst.initial_inventory, dtype=float)
    mdc = np.nonzero(inst.arc_from_mdc)[0]
    for t in range(lay.t0, inst.horizon + 1):
        buy = rng.uniform(0, 150, inst.n_sp)
        f = np.zeros(len(inst.arcs))
        f[mdc] = buy
        x = np.minimum(inst.network.capacity, (x_prev + buy) * rng.uniform(0, 1, inst.n_sp))
        z[lay.x(t)], z[lay.f(t)] = x, f
        x_prev = x
    return z


# ------------------------------------------------------ acceptance report

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """``check(label, ok, detail)`` records one acceptance line and asserts ``ok``."""
    lines = request.config.stash[_ACCEPTANCE]

    def check(label: str, ok: bool, detail: str = "") -> None:
        line = f"{label} {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        lines.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_det():
    return tiny_instance("det")


@pytest.fixture
def tiny_rand():
    return tiny_instance("rand")
