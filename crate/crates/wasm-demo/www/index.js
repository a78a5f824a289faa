import init, { meanfieldComparison, sampleDoubleWell, finiteSpectrum } from "./pkg/teleport_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#bbb";
  ctx.strokeRect(40, 10, w - 50, h - 40);
}

// Draws each series {x, y, color} into the canvas; ylog plots log10(y).
function plot(canvas, series, { ylog = false, xlabel = "", ylabel = "", dots = false } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  axes(ctx, w, h);
  const tf = (v) => (ylog ? Math.log10(v) : v);
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    s.x.forEach((x, k) => {
      const y = tf(s.y[k]);
      if (!Number.isFinite(y)) return;
      xmin = Math.min(xmin, x); xmax = Math.max(xmax, x);
      ymin = Math.min(ymin, y); ymax = Math.max(ymax, y);
    });
  }
  if (ylog) ymin = Math.max(ymin, ymax - 16);
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  const px = (x) => 40 + ((x - xmin) / (xmax - xmin)) * (w - 50);
  const py = (y) => h - 30 - ((Math.max(y, ymin) - ymin) / (ymax - ymin)) * (h - 40);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    if (dots) {
      ctx.fillStyle = s.color;
      s.x.forEach((x, k) => ctx.fillRect(px(x) - 2, py(tf(s.y[k])) - 6, 4, 12));
      continue;
    }
    ctx.beginPath();
    let started = false;
    s.x.forEach((x, k) => {
      const y = tf(s.y[k]);
      if (!Number.isFinite(y)) return;
      if (started) ctx.lineTo(px(x), py(y)); else { ctx.moveTo(px(x), py(y)); started = true; }
    });
    ctx.stroke();
  }
  ctx.fillStyle = "#555";
  ctx.fillText(xlabel, w / 2, h - 8);
  ctx.fillText(ylog ? `log10 ${ylabel}` : ylabel, 2, 20);
  ctx.fillText(xmin.toPrecision(3), 40, h - 18);
  ctx.fillText(xmax.toPrecision(3), w - 40, h - 18);
  ctx.fillText(ymax.toPrecision(3), 2, 34);
  ctx.fillText(ymin.toPrecision(3), 2, h - 30);
}

function guard(out, f) {
  out.classList.remove("err");
  out.textContent = "running...";
  setTimeout(() => {
    try {
      f();
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  }, 10);
}

function runMeanfield() {
  const out = $("mf-out");
  guard(out, () => {
    const r = JSON.parse(meanfieldComparison(num("mf-beta"), num("mf-sigma"), num("mf-tend"), num("mf-points")));
    plot($("mf-e"), [
      { x: r.nonlinear.t, y: r.nonlinear.e, color: "#c33" },
      { x: r.linear.t, y: r.linear.e, color: "#36c" },
    ], { ylog: true, xlabel: "t", ylabel: "E(t)" });
    plot($("mf-rho"), [
      { x: r.x, y: r.target, color: "#888" },
      { x: r.x, y: r.nonlinear_final, color: "#c33" },
      { x: r.x, y: r.linear_final, color: "#36c" },
    ], { xlabel: "x", ylabel: "rho(t_end)" });
    const last = (c) => c.e[c.e.length - 1];
    out.textContent = `E(t_end): interacting ${last(r.nonlinear).toExponential(3)}, Metropolis ${last(r.linear).toExponential(3)}`;
  });
}

function runSampler() {
  const out = $("dw-out");
  guard(out, () => {
    const r = JSON.parse(sampleDoubleWell(num("dw-beta"), num("dw-std"), num("dw-n"), num("dw-steps"), BigInt(num("dw-seed"))));
    const mids = r.edges.slice(1).map((e, k) => 0.5 * (e + r.edges[k]));
    plot($("dw-hist"), [{ x: mids, y: r.density, color: "#c33" }], { xlabel: "x", ylabel: "density" });
    const s = r.stats;
    const tau = s.normalized_tau == null ? `n/a (${s.iat_error})` : s.normalized_tau.toFixed(1);
    out.textContent =
      `acceptance A = ${s.A.toFixed(4)}   teleport T = ${s.T_proposed.toFixed(4)} (accepted ${s.T_accepted.toFixed(4)})\n` +
      `IAT / N = ${tau}   mass right of 0 = ${r.right_fraction.toFixed(3)}`;
  });
}

function runSpectrum() {
  const out = $("sp-out");
  guard(out, () => {
    const r = JSON.parse(finiteSpectrum(num("sp-states"), BigInt(num("sp-seed"))));
    const ev = r.report.eigenvalues;
    plot($("sp-plot"), [{ x: [...ev, 0], y: [...ev.map(() => 0), 0], color: "#c33" }], { xlabel: "eigenvalue (0 marked)", dots: true });
    out.textContent =
      `eigenvalues ${ev.map((v) => v.toFixed(4)).join(", ")}\n` +
      `max |imag| ${r.report.max_imag.toExponential(2)}   alpha ${r.report.alpha.toFixed(4)} <= bound ${r.report.bound.toFixed(4)}: ${r.report.pass}\n` +
      `Metropolized kernel eigenvalues ${r.metropolized.eigenvalues.map((v) => v.toFixed(6)).join(", ")}`;
  });
}

await init();
$("mf-run").onclick = runMeanfield;
$("dw-run").onclick = runSampler;
$("sp-run").onclick = runSpectrum;
runSpectrum();
