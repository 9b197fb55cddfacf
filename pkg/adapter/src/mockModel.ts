/**
 * Published MOCK tagging rule (see ../docs/protocol.md): each token is
 * tagged independently; the first matching rule wins and yields B-<label>,
 * anything else is O. Rules for labels outside the configured label set are
 * skipped. Pure: identical request bytes produce identical response bytes.
 */

export const MOCK_MODEL_ID = "mock-v1";
export const MOCK_MAX_BATCH = 16;

export const ENGLISH_MODEL_LABELS = [
  "AGE",
  "CITY",
  "COUNTRY",
  "DATE",
  "DEVICE",
  "DOCTOR",
  "HOSPITAL",
  "IDNUM",
  "LOCATION-OTHER",
  "MEDICAL RECORD",
  "ORGANIZATION",
  "PATIENT",
  "PHONE",
  "PROFESSION",
  "STATE",
  "STREET",
  "USERNAME",
  "ZIP",
];

const GAZETTEER: [string, Set<string>][] = [
  ["PATIENT", new Set(["Linda", "Martinez", "Nguyen", "Soraya"])],
  ["DOCTOR", new Set(["Brown", "Watson", "Okafor"])],
  ["HOSPITAL", new Set(["Mercy", "Hopkins"])],
  ["CITY", new Set(["Boston", "Ankara", "Cluj"])],
];

const PATTERNS: [string, RegExp][] = [
  ["MEDICAL RECORD", /^[0-9]{7}$/],
  ["ZIP", /^[0-9]{5}$/],
  ["USERNAME", /^[a-z]{2,}[0-9]{1,4}$/],
];

/** Tag form of a label: canonical name with spaces removed. */
export function tagName(label: string): string {
  return label.replaceAll(" ", "");
}

export function mockTags(tokenTexts: string[], labels: string[]): string[] {
  const known = new Set(labels);
  return tokenTexts.map((text) => {
    for (const [label, gazetteer] of GAZETTEER) {
      if (known.has(label) && gazetteer.has(text)) {
        return `B-${tagName(label)}`;
      }
    }
    for (const [label, pattern] of PATTERNS) {
      if (known.has(label) && pattern.test(text)) {
        return `B-${tagName(label)}`;
      }
    }
    return "O";
  });
}
