import pytest

from snfusion.cli import main


@pytest.fixture(scope="session")
def sim_dir(tmp_path_factory):
    """Small simulated corpus written through the CLI."""
    out = tmp_path_factory.mktemp("sim")
    rc = main([
        "simulate", "--out", str(out), "--frames", "60", "--seed", "3",
        "--classifier", "resnet:0.9:0.1", "--classifier", "squeeze:0.85:0.15",
        "--oracle", "--mask-quality", "0.9",
    ])
    assert rc == 0
    return out
