#!/usr/bin/env python3
"""End-to-end demo: detect PHI with rules + the mock model backend, then
mask and obfuscate a sample note, printing the audit trail.

Run: python3 scripts/demo_deid.py [seed]
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from deidkit.annotations import Document
from deidkit.augment import FakeChunkTable
from deidkit.backend import BackendClient, InProcessMockTransport
from deidkit.labels import builtin_label_set
from deidkit.pipeline import detect, leak_check, mask, obfuscate
from deidkit.rules import DEFAULT_EN_RULES, compile_rules

NOTE = (
    "Ms. Linda Martinez (47) was admitted to Mercy on 03/29/2021. "
    "Record 2775283 on file; contact john.doe@example.org, fax: 555-123-4567. "
    "Follow-up with Dr. Watson in Boston, zip 02139."
)

TABLE = FakeChunkTable(
    templates={
        "PATIENT": ({"literal": "Petra Vogel"}, {"literal": "Idris Kone"}),
        "DOCTOR": ({"literal": "Mina Park"},),
        "HOSPITAL": ({"literal": "Lakeside Medical Center"},),
        "CITY": ({"literal": "Fairview"},),
        "ZIP": ({"pattern": "\\d{5}"},),
        "MEDICAL RECORD": ({"pattern": "\\d{7}"},),
        "EMAIL": ({"literal": "contact@example.net"},),
        "FAX": ({"pattern": "555-02\\d{2}"},),
    }
)


def main() -> int:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1234
    labels = builtin_label_set("en")
    rules = compile_rules(DEFAULT_EN_RULES)
    backend = BackendClient(InProcessMockTransport(labels), labels)
    doc = Document("demo-note", NOTE)

    spans = detect(doc, labels, rules, backend)
    print("note:\n ", doc.text, "\n")
    print("detected spans:")
    for span in spans:
        print(f"  {span.label:<15} {span.source.value:<6} {doc.text[span.start:span.end]!r}")

    masked, _ = mask(doc, spans)
    print("\nmasked:\n ", masked)

    obfuscated, surrogate_map, audit = obfuscate(doc, spans, TABLE, seed=seed)
    print("\nobfuscated (seed", seed, "):\n ", obfuscated)
    print("\naudit:")
    print(json.dumps([r.to_dict() for r in audit], indent=2))

    chunks = [doc.text[s.start : s.end] for s in spans]
    leaks = leak_check(masked, chunks) + leak_check(obfuscated, chunks)
    print("\nleak check:", "clean" if not leaks else leaks)
    return 0 if not leaks else 2


if __name__ == "__main__":
    sys.exit(main())
