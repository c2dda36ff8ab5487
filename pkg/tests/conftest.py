import numpy as np
import pytest

from qbar import synthgen


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Three creators with the default per-creator layout."""
    out = tmp_path_factory.mktemp("small_ds")
    preset = synthgen.DatasetPreset(creators=3)
    result = synthgen.gen_dataset(preset, 11, out)
    return result.manifest_path


@pytest.fixture(scope="session")
def small_detector(small_dataset):
    from qbar import peqad, pipeline
    from qbar.persistence import load_manifest

    manifest = load_manifest(small_dataset)
    det, _ = pipeline.train_detector(manifest, "c000", peqad.TrainConfig(epochs=5))
    return manifest, pipeline.calibrate_detector(det, manifest)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
