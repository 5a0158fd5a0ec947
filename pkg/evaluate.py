"""
Scoring harness for typo-squatting detectors.

Two analyses over a labelled test set: macro-F1 for "typo or not" and, among
true typos that were flagged, how often the matched domain is the real source.
ROC curves sweep the detector's score (embedding distance or DLD distance,
lower is more suspicious).
"""

import hashlib
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.metrics import auc, f1_score, roc_curve

from baseline import baseline_classify_batch
from detect import query_batch
from swype import RenderConfig, render_batch
from utils.encoder import forward_batch
from utils.errors import EmptyDataset, LengthMismatch, Misalignment
from utils.io import atomic_path, atomic_write, save_json
from utils.logger import logger

ACTIONS = ("deletion", "insertion", "substitution")


@dataclass
class MetricsReport:
    detector: str
    macro_f1: float
    classification_accuracy: Optional[float]
    auc: float
    n: int
    prevalence: float
    threshold: float
    dataset_digest: str
    per_action_recall: dict
    seed: Optional[int] = None
    config: dict = field(default_factory=dict)
    roc: list = field(default_factory=list, repr=False)

    def to_dict(self):
        data = asdict(self)
        data.pop("roc")
        # strict JSON has no NaN; an undefined AUC is written as null
        if data["auc"] is not None and not math.isfinite(data["auc"]):
            data["auc"] = None
        return data


def macro_f1(predictions, labels):
    """
    Unweighted mean of the typo and benign F1 scores.

    A class absent from both predictions and labels scores 0.
    """
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(labels)} labels")
    if len(labels) == 0:
        raise EmptyDataset("Cannot score an empty prediction list")
    return float(
        f1_score(
            np.asarray(labels, dtype=bool),
            np.asarray(predictions, dtype=bool),
            labels=[False, True],
            average="macro",
            zero_division=0,
        )
    )


def domain_classification_accuracy(results, cases):
    """
    Fraction of flagged true typos whose match is their source domain.

    Returns:
        float or None: None when no true typo was flagged
    """
    if len(results) != len(cases):
        raise Misalignment(f"{len(results)} results for {len(cases)} test cases")
    for i, (result, case) in enumerate(zip(results, cases)):
        if result.query != case.candidate:
            raise Misalignment(f"Result {i} is for {result.query!r}, case is {case.candidate!r}")
    hits = [r.match == c.source for r, c in zip(results, cases) if c.is_typo and r.flagged]
    if not hits:
        return None
    return sum(hits) / len(hits)


def roc_points(scores, labels, lower_is_positive=True):
    """
    Sweep every distinct score as a threshold.

    Args:
        scores (list[float]): Detector scores
        labels (list[bool]): True for the positive (typo) class
        lower_is_positive (bool): Whether small scores mean "more likely typo"

    Returns:
        tuple: ([(fpr, tpr, threshold), ...] from (0, 0) to (1, 1), AUC)
    """
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores for {len(labels)} labels")
    if len(scores) == 0:
        raise EmptyDataset("Cannot build a ROC curve from no scores")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if not np.all(np.isfinite(scores)):
        raise ValueError("ROC scores must be finite")
    if labels.all() or not labels.any():
        logger.warning("ROC curve needs both classes; AUC is undefined")
        return [(0.0, 0.0, math.inf), (1.0, 1.0, -math.inf)], float("nan")

    sign = -1.0 if lower_is_positive else 1.0
    fpr, tpr, thresholds = roc_curve(labels, sign * scores, drop_intermediate=False)
    points = [(float(f), float(t), float(sign * h)) for f, t, h in zip(fpr, tpr, thresholds)]
    return points, float(auc(fpr, tpr))


def dataset_digest(cases):
    """sha256 over the test cases in order; ties a report to the generated set."""
    digest = hashlib.sha256()
    for case in cases:
        row = (case.candidate, case.source, case.label, case.action, case.detail, str(case.kb_distance))
        digest.update(("\t".join(row) + "\n").encode("utf-8"))
    return digest.hexdigest()


class ModelDetector:
    """Encoder + index; score is the distance to the nearest indexed domain."""

    name = "model"

    def __init__(self, model, index, render_config=None):
        self.model = model
        self.index = index
        self.render_config = render_config

    @property
    def threshold(self):
        return self.index.threshold

    def detect(self, candidates):
        return query_batch(candidates, self.index, self.model, render_config=self.render_config)

    def config(self):
        return {"index_size": len(self.index), "fingerprint": self.index.model_fingerprint}


class BaselineDetector:
    """DLD against the checking list; score is the minimum edit distance."""

    name = "dld_baseline"

    def __init__(self, checking_list, threshold=1):
        self.checking_list = list(checking_list)
        self.threshold = threshold

    def detect(self, candidates):
        return baseline_classify_batch(candidates, self.checking_list, self.threshold)

    def config(self):
        return {"checking_list_size": len(self.checking_list)}


def evaluate(detector, cases, seed=None):
    """
    Run `detector` over every test case and score it.

    Args:
        detector (ModelDetector | BaselineDetector): Anything with name, threshold,
            detect(candidates) and config()
        cases (list[LabeledTestCase]): Labelled test set
        seed (int, optional): Echoed into the report

    Returns:
        MetricsReport
    """
    if len(cases) == 0:
        raise EmptyDataset("Empty test set")
    logger.info(f"Evaluating {detector.name} on {len(cases)} test cases")
    results = detector.detect([case.candidate for case in cases])
    labels = [case.is_typo for case in cases]
    predictions = [result.flagged for result in results]

    points, area = roc_points([float(r.distance) for r in results], labels)
    per_action = {}
    for action in ACTIONS:
        flagged = [r.flagged for r, c in zip(results, cases) if c.action == action and c.is_typo]
        per_action[action] = sum(flagged) / len(flagged) if flagged else None

    report = MetricsReport(
        detector=detector.name,
        macro_f1=macro_f1(predictions, labels),
        classification_accuracy=domain_classification_accuracy(results, cases),
        auc=area,
        n=len(cases),
        prevalence=sum(labels) / len(labels),
        threshold=float(detector.threshold),
        dataset_digest=dataset_digest(cases),
        per_action_recall=per_action,
        seed=seed,
        config=detector.config(),
        roc=points,
    )
    logger.info(
        f"{detector.name}: macro-F1 {report.macro_f1:.4f}, AUC {report.auc:.4f}, "
        f"classification accuracy {report.classification_accuracy}"
    )
    return report


def write_report(report, out_dir):
    """
    Write metrics.json and roc.csv into `out_dir`.

    Returns:
        tuple: (metrics path, roc path)
    """
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.json")
    roc_path = os.path.join(out_dir, "roc.csv")
    save_json(metrics_path, report.to_dict())
    frame = pd.DataFrame(report.roc, columns=["fpr", "tpr", "threshold"])
    with atomic_path(roc_path) as tmp_path:
        frame.to_csv(tmp_path, index=False, lineterminator="\n")
    logger.success(f"Wrote {metrics_path} and {roc_path}")
    return metrics_path, roc_path


def export_embeddings(domains, model, out, render_config=RenderConfig()):
    """
    Write `domain<TAB>e1<TAB>...<TAB>e256` rows for external projection tools.

    Returns:
        int: Number of rows written
    """
    if len(domains) == 0:
        raise EmptyDataset("No domains to export")
    canonical = replace(render_config, seed_mode="canonical")
    vectors = forward_batch(render_batch(domains, canonical), model)
    with atomic_write(out) as f:
        for domain, vector in zip(domains, vectors):
            f.write(domain + "\t" + "\t".join(f"{float(v):.9g}" for v in vector) + "\n")
    logger.success(f"Exported {len(domains)} embeddings to {out}")
    return len(domains)
