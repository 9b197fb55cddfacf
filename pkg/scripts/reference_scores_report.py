#!/usr/bin/env python3
"""Report on the bundled reference score tables.

Prints the macro average of every per-language F1 column in
data/reference_scores/ and cross-checks each token-level row's F1 against
the harmonic mean of its precision and recall, listing rows that are not
self-consistent.

Run: python3 scripts/reference_scores_report.py
"""

import csv
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from deidkit.evaluation import aggregate_macro, f1_from_pr, round_half_up

DATA = ROOT / "data" / "reference_scores"
LANGUAGES = ("en", "de", "it", "fr", "tr", "es", "ro", "ar")


def main() -> int:
    print("macro averages of the per-label F1 columns:")
    for language in LANGUAGES:
        with open(DATA / f"{language}_f1.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        scores = {row["label"]: float(row["f1"]) for row in rows}
        macro = aggregate_macro(scores)
        print(f"  {language}: n={len(scores):<3d} macro={round_half_up(macro):.3f}")

    print("\ntoken-table F1 self-consistency (|f1(P,R) - F1| > 0.005):")
    with open(DATA / "en_token_prf.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    inconsistent = 0
    for row in rows:
        p, r, f1 = (float(row[k]) for k in ("precision", "recall", "f1"))
        computed = f1_from_pr(p, r)
        if abs(computed - f1) > 0.005:
            inconsistent += 1
            print(f"  {row['tag']:<16} recorded={f1:.3f} computed={computed:.4f}")
    if not inconsistent:
        print("  all rows consistent")
    print(f"\n{len(rows)} rows checked, {inconsistent} inconsistent")
    return 0


if __name__ == "__main__":
    sys.exit(main())
