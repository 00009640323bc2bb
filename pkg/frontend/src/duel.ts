// Duel screen: two selectable candidate cards showing coordinates, the
// posterior mean, and the estimated judgment difficulty at each design.

import { PendingPair, SummaryReply } from "./api.js";
import { SessionController } from "./state.js";

function fmt(xs: number[]): string {
  return "(" + xs.map((v) => v.toPrecision(5)).join(", ") + ")";
}

export interface CardData {
  tag: "challenger" | "reference";
  coords: number[];
  mu: number | null;
  sigma2: number | null;
}

/** Look up mu_f and sigma2_eps for the pending pair from the latest summary
 *  (the pair's rows are appended to the grid by the server). */
export function cardData(
  pair: PendingPair,
  summary: SummaryReply | null,
): CardData[] {
  const find = (x: number[]) =>
    summary?.rows.find((r) => r.x.length === x.length && r.x.every((v, i) => Math.abs(v - x[i]) < 1e-12)) ?? null;
  const c = find(pair.challenger);
  const r = find(pair.reference);
  return [
    {
      tag: "challenger",
      coords: pair.challenger,
      mu: c ? c.mu_f : null,
      sigma2: c ? c.sigma2_eps : null,
    },
    {
      tag: "reference",
      coords: pair.reference,
      mu: r ? r.mu_f : null,
      sigma2: r ? r.sigma2_eps : null,
    },
  ];
}

export function renderDuel(
  root: HTMLElement,
  controller: SessionController,
  summary: SummaryReply | null,
  onAnswered: () => void,
): void {
  root.textContent = "";
  if (!controller.pending) {
    const note = document.createElement("p");
    note.className = "duel-empty";
    note.textContent = "No pair proposed yet.";
    root.appendChild(note);
    return;
  }
  const cards = cardData(controller.pending, summary);
  const locked =
    controller.phase === "submitting" || controller.phase === "retry_offered";
  for (const card of cards) {
    const el = document.createElement("button");
    el.className = `duel-card duel-${card.tag}`;
    el.disabled = locked;
    const title = card.tag === "challenger" ? "Candidate A" : "Candidate B";
    el.innerHTML =
      `<strong>${title}</strong><br>${fmt(card.coords)}<br>` +
      `mean ${card.mu === null ? "?" : card.mu.toFixed(3)}<br>` +
      `judgment difficulty ${card.sigma2 === null ? "?" : card.sigma2.toExponential(2)}`;
    el.addEventListener("click", () => {
      if (controller.phase !== "choosing") return;
      // lock both cards immediately; the server answer unlocks the screen
      for (const b of root.querySelectorAll("button")) {
        (b as HTMLButtonElement).disabled = true;
      }
      controller
        .choose(card.tag)
        .then(onAnswered)
        .catch(() => renderRetryBanner(root, controller, onAnswered));
    });
    root.appendChild(el);
  }
  if (controller.canRetry) {
    renderRetryBanner(root, controller, onAnswered);
  }
}

function renderRetryBanner(
  root: HTMLElement,
  controller: SessionController,
  onAnswered: () => void,
): void {
  const existing = root.querySelector(".retry-banner");
  if (existing) return; // never offer a second concurrent resubmit
  const banner = document.createElement("div");
  banner.className = "retry-banner";
  banner.textContent = `Submission failed (${controller.lastError ?? "network"}). `;
  const btn = document.createElement("button");
  btn.textContent = "Resubmit";
  btn.addEventListener("click", () => {
    banner.remove();
    controller
      .retry()
      .then(onAnswered)
      .catch(() => renderRetryBanner(root, controller, onAnswered));
  });
  banner.appendChild(btn);
  root.appendChild(banner);
}
