// One open campaign: status line, proposal, outcome toggles, marginal chart.
// The controller refreshes on demand and on a polling timer; the server is
// the single source of truth, so a refresh never loses anything.

import { ApiError, CampaignApi, CampaignView } from "./api.js";
import { renderChart } from "./chart.js";
import {
  describeGroup,
  flaggedCount,
  fmt,
  MarginalHistory,
  outcomesComplete,
} from "./logic.js";

export class CampaignController {
  view: CampaignView | null = null;
  history = new MarginalHistory();
  threshold = 0.1;
  private busy = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private doc: Document,
    private api: CampaignApi,
    readonly id: string,
  ) {}

  attach(): void {
    const propose = this.doc.getElementById("propose-btn");
    if (propose instanceof HTMLButtonElement) {
      propose.addEventListener("click", () => {
        void this.propose();
      });
    }
    const submit = this.doc.getElementById("submit-btn");
    if (submit instanceof HTMLButtonElement) {
      submit.addEventListener("click", () => {
        void this.submit();
      });
    }
    const slider = this.doc.getElementById("threshold");
    if (slider instanceof HTMLInputElement) {
      slider.addEventListener("input", () => {
        this.threshold = Number(slider.value);
        this.renderMarginals();
      });
    }
  }

  startPolling(intervalMs = 2500): void {
    this.stopPolling();
    this.timer = setInterval(() => {
      if (!this.busy) void this.refresh();
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async refresh(): Promise<void> {
    this.render(await this.api.getCampaign(this.id));
  }

  async propose(): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      this.render(await this.api.propose(this.id));
      this.note("");
    } catch (err) {
      this.note(err instanceof ApiError ? err.message : "service unreachable");
    } finally {
      this.busy = false;
    }
  }

  readToggles(): Array<0 | 1 | null> {
    const pending = this.view?.pending;
    if (!pending) return [];
    return pending.groups.map((_, idx) => {
      const checked = this.doc.querySelector(
        `input[name="outcome-${idx}"]:checked`,
      );
      if (!(checked instanceof HTMLInputElement)) return null;
      return checked.value === "1" ? 1 : 0;
    });
  }

  async submit(): Promise<void> {
    const pending = this.view?.pending;
    if (!pending || this.busy) return;
    const toggles = this.readToggles();
    if (!outcomesComplete(toggles)) {
      this.note("set every outcome before submitting");
      return;
    }
    this.busy = true;
    this.setSubmitEnabled(false);
    try {
      const view = await this.api.submitResults(
        this.id,
        toggles as number[],
        pending.sequence,
      );
      this.render(view);
      this.note("");
    } catch (err) {
      this.note(err instanceof ApiError ? err.message : "service unreachable");
      this.setSubmitEnabled(true);
    } finally {
      this.busy = false;
    }
  }

  note(text: string): void {
    const slot = this.doc.getElementById("campaign-note");
    if (slot) slot.textContent = text;
  }

  private setSubmitEnabled(enabled: boolean): void {
    const submit = this.doc.getElementById("submit-btn");
    if (submit instanceof HTMLButtonElement) submit.disabled = !enabled;
  }

  render(view: CampaignView): void {
    this.view = view;
    this.history.record(view.cycle, view.marginal);

    const title = this.doc.getElementById("campaign-title");
    if (title) title.textContent = view.id;
    const status = this.doc.getElementById("status-line");
    if (status) {
      status.textContent =
        `${view.status} | cycle ${view.cycle} | ` +
        `${view.tests_performed} tests performed | policy ${view.policy.name}`;
    }

    const propose = this.doc.getElementById("propose-btn");
    if (propose instanceof HTMLButtonElement) {
      propose.disabled = view.status !== "ready-to-propose";
    }

    this.renderPending();
    this.renderMarginals();
    this.renderRanking();
  }

  private renderPending(): void {
    const holder = this.doc.getElementById("pending");
    if (!holder || !this.view) return;
    holder.textContent = "";
    const pending = this.view.pending;
    this.setSubmitEnabled(pending !== null);
    if (!pending) {
      holder.textContent =
        this.view.status === "exhausted"
          ? "the policy has no further tests to propose"
          : "no proposal outstanding";
      return;
    }
    const intro = this.doc.createElement("p");
    intro.textContent = `proposal ${pending.sequence}: enter one outcome per test`;
    holder.appendChild(intro);
    pending.groups.forEach((members, idx) => {
      const row = this.doc.createElement("div");
      row.className = "outcome-row";
      const label = this.doc.createElement("span");
      label.textContent = `test ${idx}: individuals ${describeGroup(members)}`;
      row.appendChild(label);
      for (const value of ["0", "1"]) {
        const wrap = this.doc.createElement("label");
        const radio = this.doc.createElement("input");
        radio.type = "radio";
        radio.name = `outcome-${idx}`;
        radio.value = value;
        wrap.appendChild(radio);
        wrap.appendChild(this.doc.createTextNode(value === "1" ? "pos" : "neg"));
        row.appendChild(wrap);
      }
      holder.appendChild(row);
    });
  }

  renderMarginals(): void {
    const chart = this.doc.getElementById("chart");
    if (!chart || !this.view) return;
    renderChart(chart, this.view.marginal, this.threshold, this.history);
    const readout = this.doc.getElementById("threshold-value");
    if (readout) readout.textContent = this.threshold.toFixed(2);
    const count = this.doc.getElementById("flagged-count");
    if (count) {
      count.textContent = String(flaggedCount(this.view.marginal, this.threshold));
    }
  }

  private renderRanking(): void {
    const list = this.doc.getElementById("ranking");
    if (!list || !this.view) return;
    list.textContent = "";
    for (const i of this.view.ranking.slice(0, 10)) {
      const item = this.doc.createElement("li");
      item.textContent = `individual ${i}: ${fmt(this.view.marginal[i])}`;
      list.appendChild(item);
    }
  }
}
