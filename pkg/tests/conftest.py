import numpy as np
import pytest

from coolscreen import demo, nncore as nn
from coolscreen.surrogate import Teacher, build_lookup
from helpers import reactant_entries


class DemoWorld:
    """Teacher, reactant grid, lookup table and distilled surrogate for the
    default 200 x (75 + 75) demo configuration."""

    def __init__(self):
        self.cfg = demo.DemoConfig()
        self.sets = demo.make_reactants(self.cfg)
        self.model, self.world, self.teacher_result = demo.build_teacher(self.cfg)
        self.teacher = Teacher(self.model)
        self.table = build_lookup(reactant_entries(self.sets), self.teacher)
        self.distillation = demo.distill(self.cfg, self.sets, self.teacher, self.table)
        self.purchasables = demo.make_purchasables(self.cfg)
        self._oracle = None

    @property
    def oracle(self):
        if self._oracle is None:
            from coolscreen.screening import brute_force_screen

            self._oracle = brute_force_screen(self.sets, self.teacher)
        return self._oracle


@pytest.fixture(scope="session")
def demo_world():
    return DemoWorld()


@pytest.fixture
def rng():
    return nn.make_rng(1234, "tests")


@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory):
    """The shipped demo config run twice into fresh directories."""
    from pathlib import Path

    from coolscreen.pipeline import load_config, run_pipeline

    config = Path(__file__).resolve().parents[1] / "configs" / "demo.json"
    base = tmp_path_factory.mktemp("demo-runs")
    outs = []
    for name in ("first", "second"):
        cfg = load_config(config)
        cfg["out_dir"] = str(base / name)
        code, _ = run_pipeline(cfg)
        outs.append((code, base / name))
    return outs


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
