import numpy as np
import pytest

from activepool.model import ModelConfig, train_from_scratch
from activepool.pool import SyntheticSpec, generate_synthetic


def two_blob_spec(separation: float = 10.0, count: int = 125, seed: int = 11) -> SyntheticSpec:
    return SyntheticSpec(
        num_classes=2,
        samples_per_class=[count, count],
        dimension=2,
        class_centers=[[0.0, 0.0], [separation, separation]],
        class_scales=[1.0, 1.0],
        seed=seed,
    )


@pytest.fixture(scope="session")
def separable_blobs():
    """250 well-separated 2-class points (centers 10 sigma apart)."""
    return generate_synthetic(two_blob_spec())


@pytest.fixture(scope="session")
def blob_model(separable_blobs):
    """A small MLP trained to high accuracy on the separable blobs."""
    ds = separable_blobs
    rng = np.random.default_rng(3)
    order = rng.permutation(len(ds))
    train_ids, val_ids = order[:200], order[200:]
    cfg = ModelConfig(input_dim=2, num_classes=2, hidden_widths=(16, 8),
                      dropout_rate=0.25, epochs=40, weight_init_seed=5)
    return train_from_scratch(
        cfg,
        ds.feature_matrix(train_ids), ds.label_vector(train_ids),
        ds.feature_matrix(val_ids), ds.label_vector(val_ids),
        train_seed=21,
    )
