from __future__ import annotations

import pytest

from anomkit.records import AnomalyRecord, ImageAnnotation, PredictionSet
from anomkit.similarity import SimilarityBackend


def record(
    name: str = "anomaly",
    phenomenon: str = "something looks wrong",
    reasoning: str = "it breaks physics",
    severity: float = 10.0,
    **extra,
) -> AnomalyRecord:
    return AnomalyRecord(
        name=name, phenomenon=phenomenon, reasoning=reasoning, severity=severity, **extra
    )


class TableBackend(SimilarityBackend):
    """Similarity lookup over tabulated (hypothesis, reference) text pairs."""

    backend_id = "table"

    def __init__(self, table: dict[tuple[str, str], float], default: float = 0.0):
        self.table = table
        self.default = default

    def score(self, hypothesis: str, reference: str) -> float:
        return self.table.get((hypothesis, reference), self.default)


def tabulated_instance(phe_table, rea_table, n_preds, n_gts):
    """Build records whose phenomenon/reasoning texts key into score tables.

    ``phe_table[i][j]``/``rea_table[i][j]`` give the similarity of prediction
    ``i`` against ground truth ``j`` in the respective view.
    """
    preds = [record(name=f"p{i}", phenomenon=f"P{i}", reasoning=f"R{i}") for i in range(n_preds)]
    gts = [record(name=f"g{j}", phenomenon=f"GP{j}", reasoning=f"GR{j}") for j in range(n_gts)]
    table: dict[tuple[str, str], float] = {}
    for i in range(n_preds):
        for j in range(n_gts):
            table[(f"P{i}", f"GP{j}")] = phe_table[i][j]
            table[(f"R{i}", f"GR{j}")] = rea_table[i][j]
    return preds, gts, TableBackend(table)


@pytest.fixture
def sample_annotations():
    return [
        ImageAnnotation(
            image_id="img-1",
            image_uri="images/img-1.png",
            anomalies=(record(name="floating chair"), record(name="extra finger", severity=25)),
            source_label="ai",
            generator_tag="genA",
        ),
        ImageAnnotation(
            image_id="img-2",
            image_uri="images/img-2.png",
            anomalies=(record(name="bent shadow", severity=40.5),),
            source_label="real",
            generator_tag="genB",
        ),
    ]


def prediction_from(annotation: ImageAnnotation, label=None) -> PredictionSet:
    return PredictionSet(
        image_id=annotation.image_id,
        anomalies=annotation.anomalies,
        predicted_label=label,
    )
