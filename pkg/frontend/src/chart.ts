// Marginal bar chart with a threshold line and per-cycle trace ticks.
// Pure DOM construction; numbers arrive formatted by the caller.

import { classify, fmt, MarginalHistory } from "./logic.js";

export function renderChart(
  container: HTMLElement,
  marginal: number[],
  threshold: number,
  history: MarginalHistory,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const flagged = classify(marginal, threshold);
  marginal.forEach((value, i) => {
    const slot = doc.createElement("div");
    slot.className = "bar-slot";
    slot.title = `individual ${i}: ${fmt(value)}`;

    const bar = doc.createElement("div");
    bar.className = flagged[i] ? "bar flagged" : "bar";
    bar.style.height = `${Math.max(1, Math.round(value * 100))}%`;
    bar.dataset.individual = String(i);
    bar.dataset.value = fmt(value);
    slot.appendChild(bar);

    // faint ticks mark where this individual sat after earlier cycles
    for (const point of history.trace(i).slice(0, -1)) {
      const tick = doc.createElement("div");
      tick.className = "tick";
      tick.style.bottom = `${Math.round(point.value * 100)}%`;
      tick.title = `cycle ${point.cycle}: ${fmt(point.value)}`;
      slot.appendChild(tick);
    }

    const label = doc.createElement("span");
    label.className = "bar-label";
    label.textContent = String(i);
    slot.appendChild(label);
    container.appendChild(slot);
  });

  const line = doc.createElement("div");
  line.className = "threshold-line";
  line.style.bottom = `${Math.round(threshold * 100)}%`;
  container.appendChild(line);
}
