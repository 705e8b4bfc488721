// Pure helpers behind the console. The only derivation the client is
// allowed to make from server numbers is threshold classification; all
// other values are displayed as received.

import type { CampaignRequest } from "./api.js";

export interface WizardForm {
  id: string;
  seed: string;
  n: string;
  q: string;
  k: string;
  nMax: string;
  specificity: string;
  sensitivity: string;
  policy: string;
}

export const WIZARD_DEFAULTS: WizardForm = {
  id: "",
  seed: "0",
  n: "70",
  q: "0.05",
  k: "8",
  nMax: "10",
  specificity: "0.97",
  sensitivity: "0.85",
  policy: "g-mimax",
};

export const POLICIES = [
  "g-mimax",
  "g-aucmax",
  "dorfman",
  "binary-dorfman",
  "informative-dorfman",
  "random",
  "random-id",
  "individual",
];

export type FieldErrors = Partial<Record<keyof WizardForm, string>>;

const ID_PATTERN = /^[A-Za-z0-9_-]{1,64}$/;

// mirrors the server-side rules so obvious mistakes never leave the browser
export function validateWizard(form: WizardForm): FieldErrors {
  const errors: FieldErrors = {};
  if (!ID_PATTERN.test(form.id)) {
    errors.id = "letters, digits, - and _ only (1-64 chars)";
  }
  const seed = Number(form.seed);
  if (!Number.isInteger(seed) || seed < 0) {
    errors.seed = "seed must be a non-negative integer";
  }
  const n = Number(form.n);
  if (!Number.isInteger(n) || n < 1 || n > 1024) {
    errors.n = "population must be an integer in 1..1024";
  }
  const q = Number(form.q);
  if (!(q > 0 && q < 1)) {
    errors.q = "prior rate must lie strictly between 0 and 1";
  }
  const k = Number(form.k);
  if (!Number.isInteger(k) || k < 1) {
    errors.k = "tests per cycle must be a positive integer";
  }
  const nMax = Number(form.nMax);
  if (!Number.isInteger(nMax) || nMax < 1) {
    errors.nMax = "max pool size must be a positive integer";
  } else if (Number.isInteger(n) && nMax > n) {
    errors.nMax = "max pool size cannot exceed the population";
  }
  for (const key of ["specificity", "sensitivity"] as const) {
    const v = Number(form[key]);
    if (!(v > 0 && v <= 1)) {
      errors[key] = "must lie in (0, 1]";
    }
  }
  if (!POLICIES.includes(form.policy)) {
    errors.policy = "unknown policy";
  }
  return errors;
}

export function wizardToRequest(form: WizardForm): CampaignRequest {
  return {
    id: form.id,
    seed: Number(form.seed),
    n: Number(form.n),
    k: Number(form.k),
    n_max: Number(form.nMax),
    q: Number(form.q),
    noise: {
      specificity: Number(form.specificity),
      sensitivity: Number(form.sensitivity),
    },
    policy: { name: form.policy },
  };
}

// classification preview: strictly greater than the slider value
export function classify(marginal: number[], threshold: number): boolean[] {
  return marginal.map((m) => m > threshold);
}

export function flaggedCount(marginal: number[], threshold: number): number {
  let count = 0;
  for (const m of marginal) {
    if (m > threshold) count += 1;
  }
  return count;
}

// display precision for every probability shown in the console
export function fmt(value: number): string {
  return value.toFixed(4);
}

export function outcomesComplete(toggles: Array<0 | 1 | null>): boolean {
  return toggles.length > 0 && toggles.every((t) => t === 0 || t === 1);
}

export function describeGroup(members: number[]): string {
  return members.join(" ");
}

// per-cycle marginal snapshots, newest last; every vector came off the wire
export class MarginalHistory {
  private byCycle = new Map<number, number[]>();

  record(cycle: number, marginal: number[]): void {
    this.byCycle.set(cycle, marginal.slice());
  }

  cycles(): number[] {
    return [...this.byCycle.keys()].sort((a, b) => a - b);
  }

  trace(individual: number): Array<{ cycle: number; value: number }> {
    return this.cycles().map((cycle) => ({
      cycle,
      value: this.byCycle.get(cycle)![individual],
    }));
  }
}
