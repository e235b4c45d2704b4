import init, { regime_map, symmetric_trajectory, steady_state_curve, lattice_point } from "./pkg/spin_array_wasm.js";

const G = [-3, 1], W = [0.05, 4], N = 120;
const COLORS = ["#e8b32c", "#c0392b", "#2c6fbb", "#7d3c98", "#ddd"];
const $ = (id) => document.getElementById(id);

function drawMap() {
  const j = parseFloat($("jeff").value);
  $("jeff-out").textContent = j.toFixed(1);
  const codes = regime_map(j, G[0], G[1], N, W[0], W[1], N);
  const ctx = $("map").getContext("2d");
  const cw = ctx.canvas.width / N, ch = ctx.canvas.height / N;
  for (let ix = 0; ix < N; ix++) {
    for (let iy = 0; iy < N; iy++) {
      ctx.fillStyle = COLORS[codes[ix * N + iy]];
      // Ω grows upwards
      ctx.fillRect(ix * cw, ctx.canvas.height - (iy + 1) * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }
}

function axes(ctx, xr, yr, xlabel, ylabel) {
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(40, 10, w - 50, h - 40);
  ctx.fillStyle = "#333";
  ctx.fillText(`${xr[0]}`, 40, h - 15);
  ctx.fillText(`${xr[1]}`, w - 30, h - 15);
  ctx.fillText(xlabel, w / 2, h - 5);
  ctx.fillText(`${yr[1]}`, 5, 18);
  ctx.fillText(`${yr[0]}`, 5, h - 32);
  ctx.fillText(ylabel, 5, h / 2);
  return (x, y) => [40 + ((x - xr[0]) / (xr[1] - xr[0])) * (w - 50), 10 + (1 - (y - yr[0]) / (yr[1] - yr[0])) * (h - 40)];
}

function drawTrajectory(g, w) {
  const j = parseFloat($("jeff").value);
  $("point").textContent = `${g.toFixed(2)}, ${w.toFixed(2)}`;
  const tEnd = 60;
  const data = symmetric_trajectory(j, g, w, 0, 0, -1, tEnd, 0.02);
  const ctx = $("traj").getContext("2d");
  const map = axes(ctx, [0, tEnd], [-1, 1], "γ0 t", "s");
  ["#c0392b", "#27ae60", "#2c6fbb"].forEach((color, k) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    for (let i = 0; i < data.length; i += 4) {
      const [x, y] = map(data[i], data[i + 1 + k]);
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    }
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(["sx", "sy", "sz"][k], ctx.canvas.width - 30, 25 + 12 * k);
  });
}

function drawLattice() {
  const a = parseFloat($("spacing").value);
  $("spacing-out").textContent = a.toFixed(2);
  let p;
  try {
    p = lattice_point($("kind").value, a);
  } catch (e) {
    $("lj").textContent = e.message;
    return;
  }
  $("lj").textContent = p[0].toFixed(4);
  $("lg").textContent = p[1].toFixed(4);
  $("lw").textContent = p[2].toFixed(4);
  const wMax = Math.max(4, 1.5 * p[4]);
  const pts = steady_state_curve(p[0], p[1], 0.01, wMax, 400);
  const ctx = $("curve").getContext("2d");
  const map = axes(ctx, [0, +wMax.toFixed(1)], [-1, 0], "Ω/γ0", "sz");
  ctx.fillStyle = "#2c6fbb";
  for (let i = 0; i < pts.length; i += 4) {
    for (let k = 1; k <= 3; k++) {
      if (Number.isNaN(pts[i + k])) continue;
      const [x, y] = map(pts[i], pts[i + k]);
      ctx.fillRect(x - 1, y - 1, 2, 2);
    }
  }
}

await init();
drawMap();
drawTrajectory(0.5, 2.5);
drawLattice();
$("jeff").addEventListener("input", drawMap);
$("map").addEventListener("click", (ev) => {
  const r = ev.target.getBoundingClientRect();
  const g = G[0] + ((ev.clientX - r.left) / r.width) * (G[1] - G[0]);
  const w = W[0] + (1 - (ev.clientY - r.top) / r.height) * (W[1] - W[0]);
  drawTrajectory(g, w);
});
$("spacing").addEventListener("input", drawLattice);
$("kind").addEventListener("change", drawLattice);
