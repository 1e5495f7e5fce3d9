#!/usr/bin/env python3
"""Generate the bundled credit690 dataset (synthetic, deterministic).

A credit-approval-style binary table: 690 rows, six numeric columns in
natural units, two categorical columns, labels in {-1, +1}.  Class overlap
keeps the task non-separable, and a small fraction of rows are gross
outliers: feature vectors pushed far along the discriminant with flipped
labels, which is what makes the loss distribution heavy-tailed enough to
separate mean-seeking training from robust training.

Usage: python3 tools/make_credit690.py [out.csv]
"""

import csv
import sys
from pathlib import Path

import numpy as np

N = 690
SEED = 20240690
OUTLIERS = 14
OUTLIER_DEPTH = 9.0  # standardized units along the discriminant


def main(out_path):
    rng = np.random.Generator(np.random.PCG64(SEED))

    # standardized latent features
    z = rng.standard_normal((N, 6))
    w_true = np.array([1.0, -0.8, 0.6, 0.0, 0.4, -0.2])
    margin = z @ w_true

    # categorical columns, mildly informative through the latent margin
    housing_levels = np.array(["mortgage", "own", "rent"])
    purpose_levels = np.array(["auto", "business", "education", "home"])
    housing = housing_levels[rng.integers(3, size=N)]
    purpose = purpose_levels[rng.integers(4, size=N)]
    margin = margin + 0.5 * (housing == "own") - 0.5 * (housing == "rent")

    # logistic label noise -> roughly 12-15% overlap
    labels = np.where(margin + 1.2 * rng.logistic(size=N) > 0.0, 1, -1)

    # gross outliers: deep in the negative side, labeled positive
    idx = rng.choice(N, size=OUTLIERS, replace=False)
    depth = OUTLIER_DEPTH * (1.0 + 0.3 * rng.standard_normal(OUTLIERS))
    z[idx] = -np.outer(depth, w_true / np.linalg.norm(w_true))
    z[idx] += 0.3 * rng.standard_normal((OUTLIERS, 6))
    labels[idx] = 1

    # map latents to natural units so min-max scaling has real work to do
    age = np.clip(35.0 + 11.0 * z[:, 0], 18.0, 90.0)
    income = np.exp(10.4 + 0.55 * z[:, 1])
    debt_ratio = np.clip(0.35 + 0.15 * z[:, 2], 0.0, 2.0)
    years_employed = np.clip(8.0 + 5.0 * z[:, 3], 0.0, 45.0)
    balance = 1200.0 * z[:, 4]
    score = np.clip(640.0 + 70.0 * z[:, 5], 300.0, 850.0)

    header = [
        "age",
        "income",
        "debt_ratio",
        "years_employed",
        "balance",
        "credit_score",
        "housing",
        "purpose",
        "label",
    ]
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(N):
            writer.writerow(
                [
                    f"{age[i]:.2f}",
                    f"{income[i]:.2f}",
                    f"{debt_ratio[i]:.4f}",
                    f"{years_employed[i]:.2f}",
                    f"{balance[i]:.2f}",
                    f"{score[i]:.1f}",
                    housing[i],
                    purpose[i],
                    str(labels[i]),
                ]
            )
    print(f"wrote {out_path}: {N} rows, {OUTLIERS} outliers, "
          f"positives={int(np.sum(labels == 1))}")


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else str(
        Path(__file__).resolve().parents[1] / "src/robustmsd/datasets/credit690.csv"
    )
    main(out)
