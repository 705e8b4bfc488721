import { describe, expect, it } from "vitest";

import {
  MarginalHistory,
  WIZARD_DEFAULTS,
  classify,
  flaggedCount,
  fmt,
  outcomesComplete,
  validateWizard,
  wizardToRequest,
  type WizardForm,
} from "../src/logic.js";

function filled(overrides: Partial<WizardForm> = {}): WizardForm {
  return { ...WIZARD_DEFAULTS, id: "ward-1", seed: "3", ...overrides };
}

describe("wizard validation", () => {
  it("accepts the default form once id and seed are set", () => {
    expect(validateWizard(filled())).toEqual({});
  });

  it("ships the documented defaults", () => {
    expect(WIZARD_DEFAULTS.n).toBe("70");
    expect(WIZARD_DEFAULTS.q).toBe("0.05");
    expect(WIZARD_DEFAULTS.k).toBe("8");
    expect(WIZARD_DEFAULTS.nMax).toBe("10");
  });

  it("rejects q = 0 before any request is made", () => {
    const errors = validateWizard(filled({ q: "0" }));
    expect(errors.q).toMatch(/between 0 and 1/);
  });

  it("rejects q = 1 and q outside (0, 1)", () => {
    expect(validateWizard(filled({ q: "1" })).q).toBeDefined();
    expect(validateWizard(filled({ q: "1.5" })).q).toBeDefined();
    expect(validateWizard(filled({ q: "-0.1" })).q).toBeDefined();
  });

  it("flags bad identifiers", () => {
    expect(validateWizard(filled({ id: "" })).id).toBeDefined();
    expect(validateWizard(filled({ id: "has space" })).id).toBeDefined();
    expect(validateWizard(filled({ id: "x".repeat(65) })).id).toBeDefined();
    expect(validateWizard(filled({ id: "ok_name-3" })).id).toBeUndefined();
  });

  it("requires integer fields to be integers", () => {
    expect(validateWizard(filled({ seed: "1.5" })).seed).toBeDefined();
    expect(validateWizard(filled({ seed: "-1" })).seed).toBeDefined();
    expect(validateWizard(filled({ n: "0" })).n).toBeDefined();
    expect(validateWizard(filled({ n: "2000" })).n).toBeDefined();
    expect(validateWizard(filled({ k: "0" })).k).toBeDefined();
    expect(validateWizard(filled({ nMax: "0" })).nMax).toBeDefined();
  });

  it("caps pool size at the population size", () => {
    const errors = validateWizard(filled({ n: "5", nMax: "6" }));
    expect(errors.nMax).toMatch(/population/);
  });

  it("requires noise rates in (0, 1]", () => {
    expect(validateWizard(filled({ specificity: "0" })).specificity).toBeDefined();
    expect(validateWizard(filled({ sensitivity: "1.01" })).sensitivity).toBeDefined();
    expect(validateWizard(filled({ sensitivity: "1" })).sensitivity).toBeUndefined();
  });

  it("builds the request payload with numeric types", () => {
    const req = wizardToRequest(filled({ seed: "9", n: "12", q: "0.2" }));
    expect(req).toEqual({
      id: "ward-1",
      seed: 9,
      n: 12,
      k: 8,
      n_max: 10,
      q: 0.2,
      noise: { specificity: 0.97, sensitivity: 0.85 },
      policy: { name: "g-mimax" },
    });
  });
});

describe("threshold classification", () => {
  it("flags marginals strictly above the slider value", () => {
    expect(classify([0.12, 0.1, 0.09], 0.1)).toEqual([true, false, false]);
  });

  it("flags nothing when the slider sits at 1.0", () => {
    expect(classify([0.2, 0.99, 1.0], 1.0)).toEqual([false, false, false]);
  });

  it("counts flagged individuals", () => {
    expect(flaggedCount([0.5, 0.05, 0.7], 0.1)).toBe(2);
  });
});

describe("display formatting", () => {
  it("renders four decimal places", () => {
    expect(fmt(0.05)).toBe("0.0500");
    expect(fmt(0.123456)).toBe("0.1235");
    expect(fmt(1)).toBe("1.0000");
  });
});

describe("outcome completeness", () => {
  it("requires every pool to have a recorded outcome", () => {
    expect(outcomesComplete([0, 1, 1])).toBe(true);
    expect(outcomesComplete([0, null, 1])).toBe(false);
    expect(outcomesComplete([])).toBe(false);
  });
});

describe("marginal history", () => {
  it("keeps one snapshot per cycle and exposes a per-individual trace", () => {
    const h = new MarginalHistory();
    h.record(0, [0.05, 0.05]);
    h.record(1, [0.2, 0.01]);
    h.record(1, [0.25, 0.01]);
    expect(h.cycles()).toEqual([0, 1]);
    expect(h.trace(0)).toEqual([
      { cycle: 0, value: 0.05 },
      { cycle: 1, value: 0.25 },
    ]);
    expect(h.trace(1)).toEqual([
      { cycle: 0, value: 0.05 },
      { cycle: 1, value: 0.01 },
    ]);
  });
});
