// App wiring: create/attach a session, then cycle anchors -> duels -> summary.

import { SessionClient } from "./api.js";
import { AnchorEditor, renderAnchorEditor } from "./anchors.js";
import { renderSummary } from "./chart.js";
import { renderDuel } from "./duel.js";
import { SessionController } from "./state.js";

const SERVER = (window as any).HETPBO_SERVER ?? "http://127.0.0.1:8760";

async function boot(): Promise<void> {
  const app = document.getElementById("app");
  if (!app) return;
  app.innerHTML = `
    <section id="setup">
      <h2>Session</h2>
      <label>lower <input id="lower" value="0"></label>
      <label>upper <input id="upper" value="2"></label>
      <label>noise scale a <input id="scale" value="0.1"></label>
      <button id="create">Create session</button>
      <span id="session-id"></span>
    </section>
    <section id="anchors"><h2>Anchors</h2><div id="anchor-root"></div></section>
    <section id="duel"><h2>Duel</h2>
      <button id="next" disabled>Propose duel</button>
      <div id="duel-root"></div>
      <p id="duel-count"></p>
    </section>
    <section id="summary"><h2>Posterior</h2><div id="chart-root"></div></section>
  `;

  const client = new SessionClient(SERVER);
  let controller: SessionController | null = null;
  let editor: AnchorEditor | null = null;

  const anchorRoot = document.getElementById("anchor-root") as HTMLElement;
  const duelRoot = document.getElementById("duel-root") as HTMLElement;
  const chartRoot = document.getElementById("chart-root") as HTMLElement;
  const nextBtn = document.getElementById("next") as HTMLButtonElement;
  const countEl = document.getElementById("duel-count") as HTMLElement;

  async function redraw(): Promise<void> {
    if (!controller || !editor) return;
    const dim = editor.dim;
    renderAnchorEditor(anchorRoot, editor, () => void redraw());
    nextBtn.disabled = controller.phase !== "awaiting_duel";
    countEl.textContent = `${controller.history.length} duels answered`;
    let summary = null;
    if (
      controller.phase !== "collecting_anchors" &&
      controller.phase !== "closed" &&
      !controller.client.busy
    ) {
      try {
        summary = await client.summary(controller.sessionId, 64);
        renderSummary(chartRoot, summary, dim);
      } catch {
        // summary is cosmetic; duel flow continues without it
      }
    }
    renderDuel(duelRoot, controller, summary, () => void redraw());
  }

  document.getElementById("create")?.addEventListener("click", async () => {
    const lower = (document.getElementById("lower") as HTMLInputElement).value
      .split(",")
      .map(Number);
    const upper = (document.getElementById("upper") as HTMLInputElement).value
      .split(",")
      .map(Number);
    const a = Number((document.getElementById("scale") as HTMLInputElement).value);
    const info = await client.createSession({ lower, upper, a });
    controller = new SessionController(client, info.id);
    editor = new AnchorEditor(controller, info.lower, info.upper);
    await controller.refresh();
    const idEl = document.getElementById("session-id");
    if (idEl) idEl.textContent = info.id;
    await redraw();
  });

  nextBtn.addEventListener("click", async () => {
    if (!controller) return;
    nextBtn.disabled = true;
    await controller.requestDuel();
    await redraw();
  });
}

window.addEventListener("load", () => void boot());
