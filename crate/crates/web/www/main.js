import init, { solarCurve, trainSynthetic, predict } from "./pkg/pve_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let model = null;

function fail(target, e) {
  target.innerHTML = `<p class="err">${e}</p>`;
}

function lineChart(series, { width = 720, height = 240, pad = 36 } = {}) {
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all), hi = Math.max(...all);
  const span = hi > lo ? hi - lo : 1;
  const n = series[0].values.length;
  const x = (i) => pad + ((width - 2 * pad) * i) / (n - 1);
  const y = (v) => height - pad - ((height - 2 * pad) * (v - lo)) / span;
  const lines = series.map((s) => {
    const pts = s.values.map((v, i) => `${x(i).toFixed(1)},${y(v).toFixed(1)}`).join(" ");
    return `<polyline fill="none" stroke="${s.color}" stroke-width="1.5" points="${pts}"/>`;
  });
  const legend = series.map((s, i) =>
    `<text x="${pad + i * 180}" y="16" font-size="12" fill="${s.color}">${s.name}</text>`);
  return `<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">
    <text x="2" y="${pad}" font-size="10">${hi.toFixed(1)}</text>
    <text x="2" y="${height - pad}" font-size="10">${lo.toFixed(1)}</text>
    ${lines.join("")}${legend.join("")}</svg>`;
}

function plotCurve() {
  try {
    const c = JSON.parse(solarCurve(num("curve-lat")));
    const pts = c.points;
    $("curve-out").innerHTML =
      lineChart([
        { name: "declination (°)", color: "#c60", values: pts.map((p) => p.declination) },
        { name: "elevation at 12:40 (°)", color: "#06c", values: pts.map((p) => p.elevation) },
      ]) +
      lineChart([{ name: "S_mod / S_horiz", color: "#393", values: pts.map((p) => p.gain) }], { height: 160 });
  } catch (e) {
    fail($("curve-out"), e);
  }
}

function confusionTable(names, scored) {
  const head = `<tr><th>actual \\ predicted</th>${names.map((n) => `<th>${n}</th>`).join("")}</tr>`;
  const rows = scored.confusion.map((row, i) =>
    `<tr><th>${names[i]}</th>${row.map((c, j) => `<td class="${i === j ? "hit" : ""}">${c}</td>`).join("")}</tr>`);
  return `<table>${head}${rows.join("")}</table>`;
}

function train() {
  const out = $("train-out");
  try {
    const r = JSON.parse(trainSynthetic(num("train-lat"), num("train-lon"), num("train-seed"), num("train-ratio")));
    model = r.model;
    $("predict-go").disabled = false;
    const edges = r.bin_edges.map((e) => e.toFixed(3)).join(", ");
    out.innerHTML = `
      <p>${r.train_samples} training days, ${r.dropped} incomplete days dropped. Bin edges (kWh): ${edges}</p>
      <p>Held-out split: <b>${r.held_out.accuracy_text}</b> of ${r.held_out.n} days</p>
      ${confusionTable(r.bin_names, r.held_out)}
      <p>Following year: <b>${r.next_year.accuracy_text}</b> of ${r.next_year.n} days</p>
      ${confusionTable(r.bin_names, r.next_year)}`;
  } catch (e) {
    fail(out, e);
  }
}

function runPredict() {
  const out = $("predict-out");
  try {
    const p = JSON.parse(predict(model, num("p-t"), num("p-kt"), num("p-s")));
    const bars = p.proba.map((v) => v.toFixed(4)).join(" / ");
    out.innerHTML = `<p><b>${p.category}</b> (${p.interval})</p><p>posterior: ${bars}</p>`;
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("curve-go").onclick = plotCurve;
$("train-go").onclick = train;
$("predict-go").onclick = runPredict;
plotCurve();
