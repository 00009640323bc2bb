// Anchor entry: numeric fields for every dimension plus a click-to-place
// canvas for 1-D/2-D domains. Points are batched into one POST.

import { inDomain, pixelToDomain } from "./canvas.js";
import { SessionController } from "./state.js";

export class AnchorEditor {
  staged: number[][] = [];

  constructor(
    readonly controller: SessionController,
    readonly lower: number[],
    readonly upper: number[],
  ) {}

  get dim(): number {
    return this.lower.length;
  }

  /** Stage a manually entered point; rejects out-of-domain input inline. */
  stage(point: number[]): string | null {
    if (point.length !== this.dim) {
      return `expected ${this.dim} coordinates`;
    }
    if (!inDomain(this.lower, this.upper, point)) {
      return `outside [${this.lower}] .. [${this.upper}]`;
    }
    this.staged.push(point);
    return null;
  }

  stageFromClick(
    width: number,
    height: number,
    px: number,
    py: number,
  ): number[] {
    const point = pixelToDomain(
      { width, height, lower: this.lower, upper: this.upper },
      px,
      py,
    );
    this.staged.push(point);
    return point;
  }

  async submit(): Promise<{ n: number; bandwidth: number | null }> {
    const reply = await this.controller.addAnchors(this.staged);
    this.staged = [];
    return reply;
  }
}

export function renderAnchorEditor(
  root: HTMLElement,
  editor: AnchorEditor,
  onChange: () => void,
): void {
  root.textContent = "";
  const frozen = editor.controller.phase !== "collecting_anchors";

  const form = document.createElement("div");
  form.className = "anchor-form";
  const inputs: HTMLInputElement[] = [];
  for (let i = 0; i < editor.dim; i++) {
    const input = document.createElement("input");
    input.type = "number";
    input.step = "any";
    input.placeholder = `x_${i + 1} in [${editor.lower[i]}, ${editor.upper[i]}]`;
    input.disabled = frozen;
    inputs.push(input);
    form.appendChild(input);
  }
  const warn = document.createElement("span");
  warn.className = "anchor-warning";

  const add = document.createElement("button");
  add.textContent = "Stage anchor";
  add.disabled = frozen;
  add.addEventListener("click", () => {
    const point = inputs.map((i) => Number(i.value));
    const problem = editor.stage(point);
    warn.textContent = problem ?? "";
    if (!problem) onChange();
  });
  form.appendChild(add);
  form.appendChild(warn);
  root.appendChild(form);

  if (editor.dim <= 2) {
    const canvas = document.createElement("canvas");
    canvas.className = "anchor-canvas";
    canvas.width = 400;
    canvas.height = editor.dim === 1 ? 60 : 300;
    if (!frozen) {
      canvas.addEventListener("click", (ev) => {
        const rect = canvas.getBoundingClientRect();
        editor.stageFromClick(
          canvas.width,
          canvas.height,
          ev.clientX - rect.left,
          ev.clientY - rect.top,
        );
        onChange();
      });
    }
    root.appendChild(canvas);
  }

  const staged = document.createElement("p");
  staged.className = "anchor-staged";
  staged.textContent = `${editor.staged.length} staged`;
  root.appendChild(staged);

  const submit = document.createElement("button");
  submit.className = "anchor-submit";
  submit.textContent = "Submit anchors";
  submit.disabled = frozen || editor.staged.length === 0;
  submit.addEventListener("click", () => {
    editor.submit().then((reply) => {
      const status = document.createElement("p");
      status.className = "anchor-status";
      status.textContent =
        `server has ${reply.n} anchors, bandwidth ` +
        (reply.bandwidth === null ? "unset" : reply.bandwidth.toPrecision(4));
      root.appendChild(status);
      onChange();
    });
  });
  root.appendChild(submit);

  const freeze = document.createElement("button");
  freeze.className = "anchor-freeze";
  freeze.textContent = "Freeze anchors";
  freeze.disabled = frozen;
  freeze.addEventListener("click", () => {
    editor.controller.freeze().then(onChange);
  });
  root.appendChild(freeze);
}
