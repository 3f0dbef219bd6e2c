"""The exporter's committed golden files must load through this package's
readers unchanged: that is the cross-component format contract."""

from pathlib import Path

import numpy as np
import pytest

from lfmix import TrainedHead, evaluate, read_catalog, read_embeddings, shot_split

FIXTURES = Path(__file__).resolve().parent.parent / "exporter" / "fixtures"


@pytest.fixture(scope="module")
def golden():
    data = read_embeddings(FIXTURES / "golden-100.lfme", split_tag="val")
    catalog = read_catalog(FIXTURES / "golden-catalog.json")
    return data, catalog


def test_golden_embeddings_shape(golden):
    data, catalog = golden
    assert len(data) == 100
    assert data.dim == 32
    assert catalog.num_classes == 10
    assert data.class_counts(10).tolist() == [10] * 10
    assert np.allclose(np.linalg.norm(data.features, axis=1), 1.0, atol=1e-6)


def test_golden_catalog_contract(golden):
    _, catalog = golden
    assert catalog.prompt_template == "a photo of a {CLASS}"
    assert catalog.counts.tolist() == [10] * 10
    assert np.allclose(np.linalg.norm(catalog.text_features, axis=1), 1.0, atol=1e-6)


def test_golden_files_drive_full_evaluation(golden):
    data, catalog = golden
    report = evaluate(TrainedHead(dim=32), data, catalog, shot_split(catalog.counts))
    assert report.confusion.sum() == 100
    assert 0.0 <= report.overall <= 100.0
