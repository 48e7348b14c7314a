import init, { shapeCurve, classifySequence, frameHarmonics, builtinShapes } from "./pkg/softpulse_web.js";

const $ = (id) => document.getElementById(id);

function guarded(outId, f) {
  return () => {
    const out = $(outId);
    out.classList.remove("error");
    try {
      f();
    } catch (e) {
      out.textContent = String(e.message ?? e);
      out.classList.add("error");
    }
  };
}

function plot(canvas, t, series) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 30;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.y);
  const lo = Math.min(0, ...all), hi = Math.max(...all);
  const x = (v) => pad + v * (w - 2 * pad);
  const y = (v) => h - pad - ((v - lo) / (hi - lo || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(x(0), y(0));
  ctx.lineTo(x(1), y(0));
  ctx.stroke();
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    t.forEach((tv, i) => (i ? ctx.lineTo(x(tv), y(s.y[i])) : ctx.moveTo(x(tv), y(s.y[i]))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - pad - 90, pad + 14 * series.indexOf(s));
  }
}

function drawShape() {
  const c = JSON.parse(shapeCurve($("shape-name").value, 401));
  plot($("shape-canvas"), c.t, [
    { y: c.v, color: "#1f77b4", label: "V(t) / Ω" },
    { y: c.theta, color: "#d62728", label: "θ(t) / π" },
  ]);
  const smooth = c.smoothness.map((r) => r.toExponential(1)).join(", ") || "none";
  $("shape-info").textContent = `${c.name}: angle ${c.angle_over_pi.toFixed(6)}π, claimed order ${c.claimed_k}, smoothness residuals ${smooth}`;
}

function classify() {
  const r = JSON.parse(classifySequence($("cls-seq").value, $("cls-shape").value, $("cls-model").value, Number($("cls-k").value)));
  $("cls-info").textContent = `order ${r.order}${r.asterisk ? "*" : ""}${r.capped ? " (capped at k_max)" : ""}`;
  const rows = r.residuals.map((row, k) => `k=${k + 1}  ` + row.map((v) => (v === null ? "-" : v.toExponential(2))).join("  "));
  $("cls-out").textContent = ["clusters: " + r.clusters.join(" | "), ...rows].join("\n");
}

function harmonics() {
  const r = JSON.parse(frameHarmonics($("h-seq").value, $("h-shape").value, $("h-par").value === "odd", Number($("h-m").value)));
  const ok = r.z_refocusing < 1e-6 ? "static z fields refocus" : "static z fields survive";
  $("h-info").textContent = `max |C0(z·)| = ${r.z_refocusing.toExponential(2)} (${ok}); reconstruction residual ${r.reconstruction_residual.toExponential(2)}`;
  $("h-out").textContent = r.csv;
}

await init();
for (const id of ["shape-name", "cls-shape", "h-shape"]) {
  for (const name of JSON.parse(builtinShapes())) {
    $(id).add(new Option(name, name));
  }
}
$("cls-shape").value = "Q1";
$("shape-go").onclick = guarded("shape-info", drawShape);
$("cls-go").onclick = guarded("cls-info", classify);
$("h-go").onclick = guarded("h-info", harmonics);
$("shape-name").onchange = guarded("shape-info", drawShape);
guarded("shape-info", drawShape)();
