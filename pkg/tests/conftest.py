import pathlib

import pytest

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def methods_table() -> pathlib.Path:
    return REPO_ROOT / "data" / "cifar100_methods.csv"


@pytest.fixture(scope="session")
def single_gpu_xml() -> str:
    path = pathlib.Path(__file__).parent / "data" / "nvidia_smi_single.xml"
    return path.read_text(encoding="utf-8")
