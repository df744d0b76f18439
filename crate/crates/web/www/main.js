import init, { simulate_fit, ci_test, type1_sweep } from "./pkg/ci_pcorr_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let lastSim = null;

function report(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.classList.toggle("err", isError);
}

// Axes with a linear or log10 x scale. Returns mapping functions.
function frame(ctx, xr, yr, opts = {}) {
  const { width: w, height: h } = ctx.canvas;
  const pad = { l: 46, r: 10, t: 10, b: 26 };
  const lx = opts.logx ? Math.log10 : (v) => v;
  const [x0, x1] = [lx(xr[0]), lx(xr[1])];
  const sx = (v) => pad.l + ((lx(v) - x0) / (x1 - x0 || 1)) * (w - pad.l - pad.r);
  const sy = (v) => h - pad.b - ((v - yr[0]) / (yr[1] - yr[0] || 1)) * (h - pad.t - pad.b);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const v = yr[0] + ((yr[1] - yr[0]) * i) / 4;
    ctx.fillText(v.toPrecision(2), 4, sy(v) + 4);
  }
  const ticks = opts.xticks || [0, 1, 2, 3, 4].map((i) => xr[0] + ((xr[1] - xr[0]) * i) / 4);
  for (const v of ticks) ctx.fillText(Number(v.toPrecision(3)).toString(), sx(v) - 8, h - 8);
  if (opts.title) ctx.fillText(opts.title, pad.l + 6, pad.t + 14);
  return { sx, sy };
}

function extent(...arrays) {
  let lo = Infinity, hi = -Infinity;
  for (const a of arrays) for (const v of a) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const m = (hi - lo) * 0.05 || 1;
  return [lo - m, hi + m];
}

function line(ctx, xs, ys, m, color, width = 1.5) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(m.sx(x), m.sy(ys[i])) : ctx.moveTo(m.sx(x), m.sy(ys[i]))));
  ctx.stroke();
  ctx.lineWidth = 1;
}

function points(ctx, xs, ys, m, color) {
  ctx.fillStyle = color;
  xs.forEach((x, i) => ctx.fillRect(m.sx(x) - 1.5, m.sy(ys[i]) - 1.5, 3, 3));
}

function plotFit(canvas, x, obs, truth, fit, name) {
  const ctx = canvas.getContext("2d");
  const m = frame(ctx, [0, x[x.length - 1]], extent(obs, truth, fit), { title: `${name}: data, true curve (grey), spline fit (blue)` });
  points(ctx, x, obs, m, "#c55");
  line(ctx, x, truth, m, "#888", 2);
  line(ctx, x, fit, m, "#2460c8", 2);
}

function runSimulation() {
  try {
    const v = JSON.parse(simulate_fit(num("s-n"), num("s-lambda"), num("s-rho"), num("s-fit"), num("s-seed")));
    lastSim = v;
    plotFit($("s-plot-y"), v.x, v.y, v.g, v.g_hat, "y");
    plotFit($("s-plot-z"), v.x, v.z, v.h, v.h_hat, "z");
    report(
      "s-out",
      `r with true curves   ${v.r_oracle.toFixed(4)}\n` +
        `r_hat spline         ${v.r_spline.toFixed(4)}\n` +
        `r_hat linear         ${v.r_linear.toFixed(4)}`
    );
  } catch (e) {
    report("s-out", String(e), true);
  }
}

function parseCsv(text) {
  const rows = text.trim().split(/\r?\n/).map((l) => l.split(",").map((c) => c.trim()));
  const head = rows.shift().map((h) => h.toLowerCase());
  const idx = ["x", "y", "z"].map((k) => head.indexOf(k));
  if (idx.some((i) => i < 0)) throw new Error("header must contain x, y and z");
  const cols = [[], [], []];
  rows.forEach((r, row) =>
    idx.forEach((i, k) => {
      const v = Number(r[i]);
      if (r[i] === undefined || r[i] === "" || !Number.isFinite(v)) throw new Error(`row ${row + 1}, column ${"xyz"[k]}: '${r[i]}'`);
      cols[k].push(v);
    })
  );
  return cols;
}

function copySimulated() {
  if (!lastSim) runSimulation();
  const lines = ["x,y,z"];
  lastSim.x.forEach((x, i) => lines.push(`${x},${lastSim.y[i]},${lastSim.z[i]}`));
  $("t-data").value = lines.join("\n");
  $("t-lambda").value = $("s-fit").value;
}

function runTest() {
  try {
    const [x, y, z] = parseCsv($("t-data").value);
    const v = JSON.parse(ci_test(new Float64Array(x), new Float64Array(y), new Float64Array(z), num("t-lambda"), num("t-b"), num("t-seed")));
    const ctx = $("t-plot").getContext("2d");
    const bins = 40;
    const lo = Math.min(-Math.abs(v.r_hat), ...v.permuted), hi = Math.max(Math.abs(v.r_hat), ...v.permuted);
    const counts = new Array(bins).fill(0);
    for (const p of v.permuted) counts[Math.min(bins - 1, Math.floor(((p - lo) / (hi - lo)) * bins))]++;
    const m = frame(ctx, [lo, hi], [0, Math.max(...counts) * 1.1], { title: "permutation distribution of the correlation; red: observed" });
    const bw = (hi - lo) / bins;
    ctx.fillStyle = "#9bb7e0";
    counts.forEach((c, i) => {
      const x0 = m.sx(lo + i * bw), x1 = m.sx(lo + (i + 1) * bw);
      ctx.fillRect(x0, m.sy(c), x1 - x0 - 1, m.sy(0) - m.sy(c));
    });
    for (const r of [v.r_hat, -v.r_hat]) line(ctx, [r, r], [0, Math.max(...counts) * 1.1], m, r === v.r_hat ? "#c22" : "#e99", 2);
    report("t-out", `n = ${v.n}   r_hat = ${v.r_hat.toFixed(4)}   p = ${v.p_value.toFixed(4)}   (B = ${v.b}, seed ${v.seed})`);
  } catch (e) {
    report("t-out", String(e.message || e), true);
  }
}

function runSweep() {
  const grid = [0.05, 0.1, 0.25, 0.5, 1, 2, 5].map((f) => f * num("w-lambda"));
  report("w-out", "running...");
  // let the status line paint before the synchronous run
  setTimeout(() => {
    try {
      const pts = JSON.parse(type1_sweep(num("w-n"), num("w-lambda"), new Float64Array(grid), num("w-reps"), num("w-seed")));
      const ctx = $("w-plot").getContext("2d");
      const top = Math.max(0.15, ...pts.map((p) => p.rejection_rate + 2 * p.mc_stderr));
      const m = frame(ctx, [grid[0] * 0.8, grid[grid.length - 1] * 1.25], [0, top], {
        logx: true,
        xticks: grid,
        title: "rejection rate at alpha 0.05 (dashed) by fitting lambda, +/- 2 SE",
      });
      ctx.setLineDash([4, 4]);
      line(ctx, [grid[0] * 0.8, grid[grid.length - 1] * 1.25], [0.05, 0.05], m, "#888");
      ctx.setLineDash([]);
      for (const p of pts) line(ctx, [p.fit_lambda, p.fit_lambda], [p.rejection_rate - 2 * p.mc_stderr, p.rejection_rate + 2 * p.mc_stderr], m, "#2460c8");
      line(ctx, pts.map((p) => p.fit_lambda), pts.map((p) => p.rejection_rate), m, "#2460c8", 2);
      points(ctx, pts.map((p) => p.fit_lambda), pts.map((p) => p.rejection_rate), m, "#123");
      report("w-out", pts.map((p) => `fit ${p.fit_lambda.toPrecision(3).padEnd(6)} rate ${p.rejection_rate.toFixed(3)}`).join("\n"));
    } catch (e) {
      report("w-out", String(e), true);
    }
  }, 20);
}

await init();
$("s-run").onclick = runSimulation;
$("s-next").onclick = () => { $("s-seed").value = num("s-seed") + 1; runSimulation(); };
$("t-copy").onclick = copySimulated;
$("t-run").onclick = runTest;
$("w-run").onclick = runSweep;
runSimulation();
copySimulated();
runTest();
