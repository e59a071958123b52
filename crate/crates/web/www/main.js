import init, { background, threshold, perturbation } from "./pkg/epnozzle_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function problem() {
  return {
    gas: { gamma: num("gamma"), b0: num("b0") },
    geometry: { r1: num("r1"), r2: num("r2"), theta0: num("theta0") },
    inlet: { rho0: num("rho0"), u0: num("u0"), p0: num("p0"), e0: num("e0") },
    nodes: num("nodes"),
  };
}

function call(fn, query, out) {
  out.classList.remove("error");
  try {
    return JSON.parse(fn(JSON.stringify(query)));
  } catch (e) {
    out.textContent = String(e.message ?? e);
    out.classList.add("error");
    return null;
  }
}

function linePlot(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pad = 30;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(y1.toPrecision(4), 2, pad - 4);
  ctx.fillText(y0.toPrecision(4), 2, h - pad + 12);
  ctx.fillText("r = " + x0, pad, h - 8);
  ctx.fillText("r = " + x1, w - pad - 40, h - 8);
  ctx.strokeStyle = "#1f5fbf";
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
  ctx.stroke();
}

// diverging blue-white-red map symmetric about zero
function heatmap(canvas, nr, nt, values) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const m = Math.max(...values.map(Math.abs)) || 1;
  const cw = w / nr, ch = h / nt;
  for (let i = 0; i < nr; i++) {
    for (let j = 0; j < nt; j++) {
      const t = values[i * nt + j] / m;
      const a = Math.round(255 * (1 - Math.abs(t)));
      ctx.fillStyle = t >= 0 ? `rgb(255,${a},${a})` : `rgb(${a},${a},255)`;
      ctx.fillRect(i * cw, h - (j + 1) * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }
  ctx.fillStyle = "#000";
  ctx.fillText(`max |value| = ${m.toExponential(3)}`, 6, 14);
}

let lastBackground = null;
let lastPerturbation = null;

function drawBackground() {
  if (lastBackground) linePlot($("bg-plot"), lastBackground.r, lastBackground[$("bg-quantity").value]);
}

function drawPerturbation() {
  if (lastPerturbation) {
    const p = lastPerturbation;
    heatmap($("heatmap"), p.nr, p.nt, p[$("field").value]);
  }
}

await init();

$("run-background").onclick = () => {
  const out = $("bg-out");
  const bg = call(background, problem(), out);
  if (!bg) return;
  lastBackground = bg;
  const m = bg.msq;
  out.textContent =
    `M^2 from ${m[0].toFixed(6)} to ${m[m.length - 1].toFixed(6)}, ` +
    `strictly decreasing: ${bg.strictly_decreasing}, log-ratio condition: ${bg.lemma_condition}`;
  drawBackground();
};
$("bg-quantity").onchange = drawBackground;

$("run-threshold").onclick = () => {
  const out = $("th-out");
  const q = { ...problem(), bracket: [num("lo"), num("hi")], tol: num("tol") };
  const r = call(threshold, q, out);
  if (r) {
    out.textContent = `E* = ${r.e_star} in [${r.lo}, ${r.hi}] after ${r.evaluations} integrations; above it: ${r.failure}`;
  }
};

$("run-perturbation").onclick = () => {
  const out = $("pt-out");
  const q = { ...problem(), amplitude: num("amp"), nr: num("nr"), nt: num("nt") };
  const p = call(perturbation, q, out);
  if (!p) return;
  lastPerturbation = p;
  out.textContent =
    `sigma_p = ${p.sigma_p.toExponential(4)}, |V| = ${p.norm.toExponential(4)}, ` +
    `${p.iterations} iterations, converged: ${p.converged}\n` +
    `increments: ${p.increments.map((x) => x.toExponential(2)).join(", ")}`;
  drawPerturbation();
};
$("field").onchange = drawPerturbation;
