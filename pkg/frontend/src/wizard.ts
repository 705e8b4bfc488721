// Campaign creation form plus the list of existing campaigns.

import { ApiError, CampaignApi } from "./api.js";
import { FieldErrors, validateWizard, WizardForm, wizardToRequest } from "./logic.js";

const FIELD_IDS: Record<keyof WizardForm, string> = {
  id: "f-id",
  seed: "f-seed",
  n: "f-n",
  q: "f-q",
  k: "f-k",
  nMax: "f-nmax",
  specificity: "f-spec",
  sensitivity: "f-sens",
  policy: "f-policy",
};

export class WizardController {
  constructor(
    private doc: Document,
    private api: CampaignApi,
    private navigate: (id: string) => void,
  ) {}

  attach(): void {
    const button = this.doc.getElementById("create-btn");
    if (button instanceof HTMLButtonElement) {
      button.addEventListener("click", () => {
        void this.create();
      });
    }
    void this.refreshList();
  }

  readForm(): WizardForm {
    const form = {} as WizardForm;
    for (const key of Object.keys(FIELD_IDS) as Array<keyof WizardForm>) {
      const el = this.doc.getElementById(FIELD_IDS[key]);
      form[key] =
        el instanceof HTMLInputElement || el instanceof HTMLSelectElement
          ? el.value
          : "";
    }
    return form;
  }

  showErrors(errors: FieldErrors): void {
    for (const key of Object.keys(FIELD_IDS) as Array<keyof WizardForm>) {
      const slot = this.doc.getElementById(`${FIELD_IDS[key]}-error`);
      if (slot) slot.textContent = errors[key] ?? "";
    }
  }

  async create(): Promise<void> {
    const banner = this.doc.getElementById("wizard-error");
    if (banner) banner.textContent = "";
    const form = this.readForm();
    const errors = validateWizard(form);
    this.showErrors(errors);
    if (Object.keys(errors).length > 0) return;
    try {
      const view = await this.api.createCampaign(wizardToRequest(form));
      this.navigate(view.id);
    } catch (err) {
      if (err instanceof ApiError && banner) {
        banner.textContent = err.message;
      } else if (banner) {
        banner.textContent = "could not reach the campaign service";
      }
    }
  }

  async refreshList(): Promise<void> {
    const list = this.doc.getElementById("campaign-list");
    if (!list) return;
    let ids: string[];
    try {
      ids = await this.api.listCampaigns();
    } catch {
      list.textContent = "campaign service unreachable";
      return;
    }
    list.textContent = "";
    if (ids.length === 0) {
      list.textContent = "no campaigns yet";
      return;
    }
    for (const id of ids) {
      const item = this.doc.createElement("li");
      const link = this.doc.createElement("a");
      link.href = `#/c/${encodeURIComponent(id)}`;
      link.textContent = id;
      item.appendChild(link);
      list.appendChild(item);
    }
  }
}
