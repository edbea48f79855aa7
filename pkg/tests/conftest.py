import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def golden_text() -> str:
    return (FIXTURES / "tender-eval.casl").read_text(encoding="utf-8")


@pytest.fixture
def golden_case(golden_text):
    from cascade import casl

    return casl.parse(golden_text)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240917)
