from pathlib import Path

import pytest

from dmcam.compiler import compile_dm
from dmcam.encoder import load_encoding
from dmcam.metric import DistanceSpec, MetricKind, build_dm
from dmcam.solver import CurrentRange

DATA_DIR = Path(__file__).parent / "data"

# Published 3-branch encoding of the 2-bit Hamming matrix, hand-entered.
GOLDEN_PATH = DATA_DIR / "hamming2_3fet_golden.json"


@pytest.fixture(scope="session")
def golden_encoding():
    return load_encoding(GOLDEN_PATH)


@pytest.fixture(scope="session")
def hamming_dm():
    return build_dm(DistanceSpec(MetricKind.HAMMING, 2))


@pytest.fixture(scope="session")
def manhattan_dm():
    return build_dm(DistanceSpec(MetricKind.MANHATTAN, 2))


@pytest.fixture(scope="session")
def sq_euclid_dm():
    return build_dm(DistanceSpec(MetricKind.SQ_EUCLIDEAN, 2))


@pytest.fixture(scope="session")
def hamming_compiled(hamming_dm):
    result = compile_dm(hamming_dm, CurrentRange((0, 1, 2)), k_max=4)
    assert result.feasible
    return result


@pytest.fixture(scope="session")
def manhattan_compiled(manhattan_dm):
    result = compile_dm(manhattan_dm, k_max=6)
    assert result.feasible
    return result


@pytest.fixture(scope="session")
def sq_euclid_compiled(sq_euclid_dm):
    result = compile_dm(sq_euclid_dm, k_max=6)
    assert result.feasible
    return result
