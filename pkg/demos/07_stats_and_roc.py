"""Evaluation metrics and the two statistical tests.

ROC/AUC on a toy score set, then Jarque-Bera to check a normality
assumption and Kruskal-Wallis to compare groups without it. The worked
example is the machine-output data from Kruskal & Wallis (1952).
"""

import numpy as np

from facestack import (auc_trapezoid, evaluate, jarque_bera, kruskal_wallis,
                       roc_curve)

rng = np.random.default_rng(1)
labels = np.where(rng.random(300) < 0.5, 1, -1)
scores = rng.normal(0, 1, 300) + 1.1 * labels

report = evaluate(scores, labels)
print(f"accuracy {report.accuracy:.3f} "
      f"(female {report.accuracy_female:.3f} / male {report.accuracy_male:.3f})")
print(f"confusion rows=true [female, male]: {report.confusion.tolist()}")
pts = roc_curve(scores, labels)
print(f"roc has {len(pts)} points, auc {auc_trapezoid(pts):.4f}")

# normality first: gaussian data passes, skewed data fails hard
jb_ok = jarque_bera(rng.normal(10, 2, 5000))
jb_bad = jarque_bera(rng.exponential(2.0, 5000))
print(f"\njarque-bera normal sample: JB={jb_ok.statistic:.2f} p={jb_ok.p_value:.3f}")
print(f"jarque-bera exponential sample: JB={jb_bad.statistic:.1f} p={jb_bad.p_value:.2e}")

# three machines, daily output; published worked example
machines = [[340, 345, 330, 342, 338], [339, 333, 344], [347, 343, 349, 355]]
kw = kruskal_wallis([np.asarray(m, dtype=float) for m in machines])
print(f"\nkruskal-wallis on the machines data: H={kw.statistic:.4f} p={kw.p_value:.4f}")

# and on something flagrantly different
kw2 = kruskal_wallis([rng.normal(0, 1, 40), rng.normal(1.5, 1, 40)])
print(f"kruskal-wallis, shifted groups: H={kw2.statistic:.2f} p={kw2.p_value:.2e}")
