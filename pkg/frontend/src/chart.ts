// Posterior summary display: mean +/- 2 sd band and the estimated noise
// curve on a canvas for 1-D (heat dots for 2-D); incumbent table otherwise.

import { SummaryReply } from "./api.js";

export function renderSummary(root: HTMLElement, summary: SummaryReply, dim: number): void {
  root.textContent = "";
  const inc = document.createElement("p");
  inc.className = "incumbent";
  inc.textContent = summary.incumbent
    ? `incumbent (${summary.incumbent.map((v) => v.toPrecision(5)).join(", ")})` +
      ` with mean ${summary.incumbent_mean?.toFixed(4)}`
    : "no incumbent yet";
  root.appendChild(inc);

  if (dim > 2) {
    renderTable(root, summary);
    return;
  }
  const canvas = document.createElement("canvas");
  canvas.className = "summary-chart";
  canvas.width = 520;
  canvas.height = 240;
  root.appendChild(canvas);
  const ctx = canvas.getContext("2d");
  if (!ctx) return;

  const rows = [...summary.rows].sort((a, b) => a.x[0] - b.x[0]);
  if (!rows.length) return;
  const xs = rows.map((r) => r.x[0]);
  const lo = Math.min(...xs);
  const hi = Math.max(...xs);
  const upper = rows.map((r) => r.mu_f + 2 * r.sigma_f);
  const lowerB = rows.map((r) => r.mu_f - 2 * r.sigma_f);
  const vLo = Math.min(...lowerB);
  const vHi = Math.max(...upper);
  const sx = (x: number) => ((x - lo) / Math.max(hi - lo, 1e-12)) * canvas.width;
  const sy = (v: number) =>
    canvas.height - ((v - vLo) / Math.max(vHi - vLo, 1e-12)) * canvas.height;

  if (dim === 1) {
    ctx.fillStyle = "rgba(100,140,240,0.25)";
    ctx.beginPath();
    rows.forEach((r, i) => {
      const px = sx(r.x[0]);
      i === 0 ? ctx.moveTo(px, sy(upper[i])) : ctx.lineTo(px, sy(upper[i]));
    });
    for (let i = rows.length - 1; i >= 0; i--) {
      ctx.lineTo(sx(rows[i].x[0]), sy(lowerB[i]));
    }
    ctx.closePath();
    ctx.fill();

    ctx.strokeStyle = "#2b4bd7";
    ctx.beginPath();
    rows.forEach((r, i) => {
      const px = sx(r.x[0]);
      i === 0 ? ctx.moveTo(px, sy(r.mu_f)) : ctx.lineTo(px, sy(r.mu_f));
    });
    ctx.stroke();

    const s2 = rows.map((r) => r.sigma2_eps);
    const s2Hi = Math.max(...s2, 1e-12);
    ctx.strokeStyle = "#2e8540";
    ctx.beginPath();
    rows.forEach((r, i) => {
      const px = sx(r.x[0]);
      const py = canvas.height - (r.sigma2_eps / s2Hi) * canvas.height * 0.5;
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
  } else {
    // 2-D: noise-shaded dots, radius by posterior sd
    const s2Hi = Math.max(...rows.map((r) => r.sigma2_eps), 1e-12);
    const ys = rows.map((r) => r.x[1]);
    const yLo = Math.min(...ys);
    const yHi = Math.max(...ys);
    for (const r of rows) {
      const px = sx(r.x[0]);
      const py =
        canvas.height -
        ((r.x[1] - yLo) / Math.max(yHi - yLo, 1e-12)) * canvas.height;
      const shade = Math.round(220 * (r.sigma2_eps / s2Hi));
      ctx.fillStyle = `rgb(${shade}, ${220 - shade}, 120)`;
      ctx.beginPath();
      ctx.arc(px, py, 2 + 4 * r.sigma_f, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

function renderTable(root: HTMLElement, summary: SummaryReply): void {
  const table = document.createElement("table");
  table.className = "summary-table";
  const head = table.insertRow();
  for (const title of ["x", "mu_f", "sigma_f", "sigma2_eps", "acq"]) {
    const th = document.createElement("th");
    th.textContent = title;
    head.appendChild(th);
  }
  const best = [...summary.rows].sort((a, b) => b.mu_f - a.mu_f).slice(0, 12);
  for (const r of best) {
    const row = table.insertRow();
    row.insertCell().textContent = r.x.map((v) => v.toPrecision(4)).join(", ");
    row.insertCell().textContent = r.mu_f.toFixed(4);
    row.insertCell().textContent = r.sigma_f.toFixed(4);
    row.insertCell().textContent = r.sigma2_eps.toExponential(2);
    row.insertCell().textContent = r.acq.toFixed(4);
  }
  root.appendChild(table);
}
