import numpy as np
import pytest
import torch


@pytest.fixture(autouse=True)
def _single_thread_determinism():
    torch.manual_seed(0)
    np.random.seed(0)
    yield


def make_sample(task_id=0, scale_id=0, size=16, seed=0, split=None):
    """Small random sample for plumbing tests."""
    from omniseg.datamodel import Sample, Split

    rng = np.random.default_rng(seed)
    image = rng.uniform(0, 1, size=(size, size, 3))
    mask = (rng.uniform(0, 1, size=(size, size)) > 0.7).astype(np.uint8)
    return Sample(image, mask, task_id, scale_id, split=split or Split.TRAIN)
