// DOM-level behavior of the duel cards and anchor editor under jsdom,
// against a scripted stub backend.

import { beforeEach, describe, expect, it } from "vitest";

import { SessionClient, SummaryReply } from "../src/api.js";
import { AnchorEditor, renderAnchorEditor } from "../src/anchors.js";
import { cardData, renderDuel } from "../src/duel.js";
import { SessionController } from "../src/state.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

const PAIR = { challenger: [0.3], reference: [1.1] };
const PREF_OK = {
  n_duels: 1,
  winner: [0.3],
  incumbent: [0.3],
  incumbent_mean: 0.4,
  mu_challenger: 0.4,
  mu_reference: 0.0,
  sigma2_challenger: 0.004,
  sigma2_reference: 0.1,
};

function flush(): Promise<void> {
  return new Promise((res) => setTimeout(res, 0));
}

describe("duel cards", () => {
  let root: HTMLElement;
  let controller: SessionController;
  let prefStatus: number;
  let prefCalls: number;

  beforeEach(async () => {
    root = document.createElement("div");
    document.body.appendChild(root);
    prefStatus = 200;
    prefCalls = 0;
    const fetchStub = async (url: string | URL | Request, init?: RequestInit) => {
      const path = String(url);
      if (path.endsWith("/duel")) return jsonResponse(200, { ...PAIR, n_duels: 0 });
      if (path.endsWith("/preference")) {
        prefCalls += 1;
        return prefStatus === 200
          ? jsonResponse(200, PREF_OK)
          : jsonResponse(prefStatus, { code: "x", message: "down" });
      }
      if (/\/sessions\/s1$/.test(path)) {
        return jsonResponse(200, {
          id: "s1", status: "active", lower: [0], upper: [2], a: 0.1,
          n_anchors: 2, bandwidth: 0.3, n_duels: 0, pending: null,
        });
      }
      throw new Error(`unexpected ${init?.method ?? "GET"} ${path}`);
    };
    controller = new SessionController(
      new SessionClient("http://t", fetchStub as typeof fetch),
      "s1",
    );
    await controller.refresh();
    await controller.requestDuel();
  });

  it("renders two enabled cards for a pending pair", () => {
    renderDuel(root, controller, null, () => {});
    const cards = root.querySelectorAll<HTMLButtonElement>("button.duel-card");
    expect(cards).toHaveLength(2);
    for (const c of cards) expect(c.disabled).toBe(false);
  });

  it("shows judgment difficulty from the summary rows", () => {
    const summary: SummaryReply = {
      rows: [
        { x: [0.3], mu_f: 0.4, sigma_f: 0.1, sigma2_eps: 0.004, acq: 0.2 },
        { x: [1.1], mu_f: 0.0, sigma_f: 0.9, sigma2_eps: 0.1, acq: 0.1 },
      ],
      incumbent: [0.3],
      incumbent_mean: 0.4,
      pending: PAIR,
    };
    const cards = cardData(PAIR, summary);
    expect(cards[0].sigma2).toBeCloseTo(0.004);
    expect(cards[1].sigma2).toBeCloseTo(0.1);
    renderDuel(root, controller, summary, () => {});
    expect(root.textContent).toContain("judgment difficulty");
  });

  it("one click submits once and advances history", async () => {
    let answered = 0;
    renderDuel(root, controller, null, () => (answered += 1));
    const [card] = root.querySelectorAll<HTMLButtonElement>("button.duel-card");
    card.click();
    await flush();
    await flush();
    expect(prefCalls).toBe(1);
    expect(answered).toBe(1);
    expect(controller.history).toHaveLength(1);
    expect(controller.pending).toBeNull();
  });

  it("locks both cards immediately after a click", async () => {
    renderDuel(root, controller, null, () => {});
    const cards = root.querySelectorAll<HTMLButtonElement>("button.duel-card");
    cards[0].click();
    for (const c of cards) expect(c.disabled).toBe(true);
    await flush();
  });

  it("server error keeps the selection and offers one resubmit", async () => {
    prefStatus = 500;
    renderDuel(root, controller, null, () => {});
    const [card] = root.querySelectorAll<HTMLButtonElement>("button.duel-card");
    card.click();
    await flush();
    await flush();
    expect(controller.phase).toBe("retry_offered");
    const banners = root.querySelectorAll(".retry-banner");
    expect(banners).toHaveLength(1);
    // recovery: resubmit succeeds exactly once
    prefStatus = 200;
    banners[0].querySelector("button")!.click();
    await flush();
    await flush();
    expect(prefCalls).toBe(2);
    expect(controller.history).toHaveLength(1);
  });
});

describe("anchor editor", () => {
  it("flags out-of-domain entries inline before submission", () => {
    const controller = { phase: "collecting_anchors" } as SessionController;
    const editor = new AnchorEditor(controller, [0], [2]);
    expect(editor.stage([2.5])).toMatch(/outside/);
    expect(editor.staged).toHaveLength(0);
    expect(editor.stage([1.5])).toBeNull();
    expect(editor.staged).toHaveLength(1);
  });

  it("click staging maps pixels into the domain", () => {
    const controller = { phase: "collecting_anchors" } as SessionController;
    const editor = new AnchorEditor(controller, [0], [2]);
    const pt = editor.stageFromClick(400, 60, 100, 30);
    expect(pt[0]).toBeCloseTo(0.5, 12);
  });

  it("disables every control once frozen", () => {
    const controller = { phase: "awaiting_duel" } as SessionController;
    const editor = new AnchorEditor(controller, [0], [2]);
    const root = document.createElement("div");
    renderAnchorEditor(root, editor, () => {});
    for (const b of root.querySelectorAll("button")) {
      expect((b as HTMLButtonElement).disabled).toBe(true);
    }
  });

  it("shows the server anchor count and bandwidth after submit", async () => {
    const calls: string[] = [];
    const fetchStub = async (url: string | URL | Request, init?: RequestInit) => {
      calls.push(String(url));
      return new Response(JSON.stringify({ n: 2, bandwidth: 0.31 }), {
        status: 200,
        headers: { "content-type": "application/json" },
      });
    };
    const controller = new SessionController(
      new SessionClient("http://t", fetchStub as typeof fetch),
      "s1",
    );
    controller.phase = "collecting_anchors";
    const editor = new AnchorEditor(controller, [0], [2]);
    editor.stage([0.2]);
    editor.stage([0.4]);
    const root = document.createElement("div");
    renderAnchorEditor(root, editor, () => {});
    (root.querySelector(".anchor-submit") as HTMLButtonElement).click();
    await flush();
    await flush();
    expect(calls.some((c) => c.endsWith("/anchors"))).toBe(true);
    expect(root.querySelector(".anchor-status")!.textContent).toContain("2 anchors");
    expect(root.querySelector(".anchor-status")!.textContent).toContain("0.31");
  });
});
