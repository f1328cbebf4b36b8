"""Tour of the evaluation mathematics on a hand-sized score set.

Run: python demos/metrics_walkthrough.py
"""

import numpy as np

from cxrnet.metrics import (confusion_at_threshold, evaluate_scores,
                            precision_recall_f1, roc_curve_auc)


def main():
    # ten items, positive class scores mostly (not perfectly) higher
    scores = np.array([0.92, 0.85, 0.70, 0.62, 0.55, 0.55, 0.40, 0.30, 0.22, 0.10])
    labels = np.array([1, 1, 1, 0, 1, 0, 0, 1, 0, 0])

    cm = confusion_at_threshold(scores, labels, threshold=0.5)
    print(f"confusion at 0.5: tn={cm.tn} fp={cm.fp} fn={cm.fn} tp={cm.tp}")
    print(f"accuracy {cm.accuracy:.3f} (exactly (tn+tp)/total)")

    for name, m in precision_recall_f1(cm).items():
        print(f"{name:9s} precision={m.precision:.3f} recall={m.recall:.3f} "
              f"f1={m.f1:.3f}")

    points, auc = roc_curve_auc(scores, labels)
    print(f"\nROC sweep ({len(points.thresholds)} thresholds, ties grouped):")
    for t, fpr, tpr in zip(points.thresholds, points.x, points.y):
        print(f"  threshold {t:>5}: fpr={fpr:.2f} tpr={tpr:.2f}")
    print(f"ROC AUC {auc:.4f} (equals the pairwise concordance statistic)")

    report = evaluate_scores(scores, labels)
    print(f"PR AUC {report.pr_auc:.4f}, average precision {report.average_precision:.4f}")
    print("\nwrite_report(report, out_dir) emits report.json + roc.csv + pr.csv;")
    print("the CLI 'evaluate' and 'report' commands wrap exactly these calls.")


if __name__ == "__main__":
    main()
