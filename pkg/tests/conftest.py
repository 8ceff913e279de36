import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the reference module

REPO = Path(__file__).resolve().parent.parent
_CANDIDATES = [
    os.environ.get("RVSNN_MNIST_DIR"),
    REPO / "data" / "mnist",
    "/root/data/mnist",
]


def mnist_dir() -> Path | None:
    for c in _CANDIDATES:
        if c and Path(c).joinpath("train-images-idx3-ubyte").exists():
            return Path(c)
        if c and Path(c).joinpath("train-images-idx3-ubyte.gz").exists():
            return Path(c)
    return None


@pytest.fixture(scope="session")
def mnist_path() -> Path:
    path = mnist_dir()
    if path is None:
        pytest.skip("MNIST IDX files not found (set RVSNN_MNIST_DIR)")
    return path


@pytest.fixture(scope="session")
def mnist_train(mnist_path):
    from rvsnn import mnist

    return mnist.load_dataset(mnist_path, "train")


@pytest.fixture(scope="session")
def mnist_test(mnist_path):
    from rvsnn import mnist

    return mnist.load_dataset(mnist_path, "test")
