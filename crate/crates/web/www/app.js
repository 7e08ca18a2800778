import init, { structure_at, integrate, chart_curves, example_defaults } from "./pkg/genpoisson_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function call(f, ...args) {
  const v = JSON.parse(f(...args));
  if (v.error) throw new Error(v.error);
  return v;
}

function show(el, fn) {
  el.classList.remove("err");
  try {
    fn();
  } catch (e) {
    el.textContent = e.message;
    el.classList.add("err");
  }
}

function plot(svg, legend, xs, series) {
  const w = svg.width.baseVal.value, h = svg.height.baseVal.value, pad = 40;
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s.ys) if (Number.isFinite(v)) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  if (!(hi > lo)) { hi = lo + 1; lo -= 1; }
  const x0 = xs[0], x1 = xs[xs.length - 1] === x0 ? x0 + 1 : xs[xs.length - 1];
  const px = (x) => pad + (w - 2 * pad) * (x - x0) / (x1 - x0);
  const py = (y) => h - pad - (h - 2 * pad) * (y - lo) / (hi - lo);
  let out = `<line x1="${pad}" y1="${h - pad}" x2="${w - pad}" y2="${h - pad}" stroke="#999"/>` +
    `<line x1="${pad}" y1="${pad}" x2="${pad}" y2="${h - pad}" stroke="#999"/>` +
    `<text x="${pad}" y="${h - pad + 15}" font-size="11">${x0.toPrecision(3)}</text>` +
    `<text x="${w - pad}" y="${h - pad + 15}" font-size="11" text-anchor="end">${x1.toPrecision(3)}</text>` +
    `<text x="${pad - 4}" y="${pad}" font-size="11" text-anchor="end">${hi.toPrecision(3)}</text>` +
    `<text x="${pad - 4}" y="${h - pad}" font-size="11" text-anchor="end">${lo.toPrecision(3)}</text>`;
  series.forEach((s, k) => {
    const pts = s.ys.map((y, i) => `${px(xs[i]).toFixed(1)},${py(y).toFixed(1)}`).join(" ");
    out += `<polyline fill="none" stroke="${COLORS[k % COLORS.length]}" stroke-width="1.5" points="${pts}"/>`;
  });
  svg.innerHTML = out;
  legend.innerHTML = series.map((s, k) => `<span style="color:${COLORS[k % COLORS.length]}">${s.name}</span>`).join("");
}

const example = () => $("example").value;
const rate = () => Number($("rate").value);
const fmt = (v) => v.toExponential(3);

function loadDefaults() {
  const d = call(example_defaults, example());
  $("point").value = JSON.stringify(d.x0);
  $("x0").value = JSON.stringify(d.x0);
  $("ham").value = d.hamiltonian;
  $("coord").max = d.n;
}

function evaluate() {
  show($("structure"), () => {
    const v = call(structure_at, example(), rate(), $("point").value);
    const j = v.j.map((row) => row.map((x) => x.toFixed(6).padStart(12)).join(" ")).join("\n");
    $("structure").textContent =
      `${v.description}\nJ(x) =\n${j}\nrank ${v.rank}\n` +
      `jacobi residual: raw ${fmt(v.jacobi_raw)}, normalized ${fmt(v.jacobi_normalized)}\n` +
      `casimirs: ${v.casimirs.map((c, i) => `D${i + 1} = ${c.toPrecision(10)}` + (v.casimir_forms[i] ? ` (${v.casimir_forms[i]})` : "")).join(", ") || "none"}\n` +
      `darboux z: [${v.z.map((c) => c.toPrecision(8)).join(", ")}]`;
  });
}

function run() {
  show($("traj-info"), () => {
    const v = call(integrate, example(), rate(), $("ham").value, $("x0").value, $("method").value,
      Number($("tend").value), Number($("dt").value), Number($("tol").value));
    const n = v.states[0].length;
    const series = [];
    for (let i = 0; i < n; i++) series.push({ name: `x${i + 1}`, ys: v.states.map((s) => s[i]) });
    plot($("traj"), $("traj-legend"), v.times, series);
    $("traj-info").textContent =
      `${v.times.length} samples, ${v.accepted} accepted / ${v.rejected} rejected steps\n` +
      `H drift ${fmt(v.h_drift)}\n` +
      `casimir drift ${v.d_drift.map(fmt).join(", ") || "none"}` +
      (v.stopped ? `\nstopped: ${v.stopped}` : "");
  });
}

function curves() {
  show($("chart-info"), () => {
    const v = call(chart_curves, example(), rate(), Number($("coord").value), 400);
    plot($("chart"), $("chart-legend"), v.w, [
      { name: "ψ(w)", ys: v.psi },
      { name: "ξ(w)", ys: v.xi },
      { name: "φ(ξ(w))", ys: v.phi_of_xi },
    ]);
    $("chart-info").textContent =
      `${v.description}\nanchor ${v.anchor}` + (v.xi_formula ? `, ξ(w) = ${v.xi_formula}` : "") +
      `\nmax |φ(ξ(w)) − w| = ${fmt(v.max_round_trip)}`;
  });
}

await init();
$("example").addEventListener("change", () => { loadDefaults(); evaluate(); run(); curves(); });
$("eval").addEventListener("click", evaluate);
$("run").addEventListener("click", run);
$("curves").addEventListener("click", curves);
loadDefaults();
evaluate();
run();
curves();
