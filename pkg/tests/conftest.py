import pytest

from gpuburst.reports import write_outputs
from gpuburst.run import run_scenario
from gpuburst.scenario import load_scenario


@pytest.fixture(scope="session")
def paper_run(tmp_path_factory):
    """One desk-scale (0.1) run of the bundled scenario, shared by the
    invariant and acceptance tests; returns (result, output paths)."""
    scenario = load_scenario("paper-feb-run", scale=0.1)
    result = run_scenario(scenario)
    out = tmp_path_factory.mktemp("paper-run")
    paths = write_outputs(result, out)
    return result, paths
