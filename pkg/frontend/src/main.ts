// Hash router: #/ lists campaigns and hosts the wizard, #/c/<id> opens one.
// Served statically at /ui by the campaign service, so API paths are
// same-origin and relative.

import { CampaignApi } from "./api.js";
import { CampaignController } from "./campaign.js";
import { WizardController } from "./wizard.js";

const api = new CampaignApi("");
let open: CampaignController | null = null;

function show(section: string): void {
  for (const id of ["wizard-view", "campaign-view"]) {
    const el = document.getElementById(id);
    if (el) el.hidden = id !== section;
  }
}

function route(): void {
  if (open) {
    open.stopPolling();
    open = null;
  }
  const match = /^#\/c\/(.+)$/.exec(location.hash);
  if (match) {
    show("campaign-view");
    open = new CampaignController(document, api, decodeURIComponent(match[1]));
    open.attach();
    void open.refresh().catch(() => {
      open?.note(`campaign ${match[1]} could not be loaded`);
    });
    open.startPolling();
  } else {
    show("wizard-view");
    new WizardController(document, api, (id) => {
      location.hash = `#/c/${encodeURIComponent(id)}`;
    }).attach();
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
