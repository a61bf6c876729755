import init, { shape_info, ratio_curve, minimizer } from "./pkg/minnorm_web.js";

const $ = (id) => document.getElementById(id);

function inputs() {
  let faces = 0;
  for (const box of $("faces").querySelectorAll("input")) {
    if (box.checked) faces |= 1 << Number(box.value);
  }
  const kind = $("kind").value;
  if (kind === "curl_only") faces = 0;
  if (kind === "trace_only" && faces === 0) faces = 1;
  return {
    family: $("family").value,
    parameter: $("family").value === "reference" ? 1 : Number($("parameter").value),
    kind,
    faces,
    p: Number($("degree").value),
    delta: Number($("delta").value),
    seed: Number($("seed").value) >>> 0,
  };
}

// oblique projection, good enough to see flattening
const project = ([x, y, z]) => [x - 0.35 * y, z + 0.35 * y];

function fit(ctx, pts, pad) {
  const xs = pts.map((p) => p[0]), ys = pts.map((p) => p[1]);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const s = Math.min((ctx.canvas.width - 2 * pad) / (x1 - x0 || 1), (ctx.canvas.height - 2 * pad) / (y1 - y0 || 1));
  return ([x, y]) => [pad + (x - x0) * s, ctx.canvas.height - pad - (y - y0) * s];
}

function drawShape(info) {
  const ctx = $("shape").getContext("2d");
  ctx.clearRect(0, 0, 300, 300);
  const pts = info.vertices.map(project);
  const map = fit(ctx, pts, 30);
  ctx.strokeStyle = "#333";
  for (let i = 0; i < 4; i++) {
    for (let j = i + 1; j < 4; j++) {
      const [a, b] = [map(pts[i]), map(pts[j])];
      ctx.beginPath(); ctx.moveTo(...a); ctx.lineTo(...b); ctx.stroke();
    }
  }
  pts.forEach((p, i) => { const [x, y] = map(p); ctx.fillText(`v${i}`, x + 4, y - 4); });
  $("shape-info").textContent =
    `kappa_K  ${info.kappa.toFixed(3)}\ndiameter ${info.diameter.toFixed(3)}\nrho_K    ${info.insphere_diameter.toFixed(4)}\nvolume   ${info.volume.toFixed(4)}`;
}

function drawCurve(points) {
  const ctx = $("curve").getContext("2d");
  const [w, h, pad] = [320, 300, 36];
  ctx.clearRect(0, 0, w, h);
  const hi = Math.max(1.1, ...points.map((q) => q.ratio)) * 1.05;
  const x = (p) => pad + (p / Math.max(1, points.length - 1)) * (w - 2 * pad);
  const y = (r) => h - pad - ((r - 1) / (hi - 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#000";
  ctx.beginPath(); ctx.moveTo(pad, pad / 2); ctx.lineTo(pad, h - pad); ctx.lineTo(w - pad / 2, h - pad); ctx.stroke();
  ctx.fillText("1", pad - 12, y(1) + 4);
  ctx.fillText(hi.toFixed(2), 2, y(hi) + 10);
  ctx.strokeStyle = "#c0392b"; ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach((q, i) => (i ? ctx.lineTo(x(q.p), y(q.ratio)) : ctx.moveTo(x(q.p), y(q.ratio))));
  ctx.stroke(); ctx.lineWidth = 1;
  points.forEach((q) => { ctx.fillText(String(q.p), x(q.p) - 3, h - pad + 14); });
  $("curve-info").textContent = points
    .map((q) => `p=${q.p}  |u_p|=${q.discrete.toExponential(4)}  ref=${q.reference.toExponential(4)}  ratio=${q.ratio.toFixed(4)}`)
    .join("\n");
}

function drawField(m) {
  const ctx = $("field").getContext("2d");
  ctx.clearRect(0, 0, 300, 300);
  const pts = m.samples.map((s) => [s.point[0], s.point[1]]);
  const map = fit(ctx, pts, 24);
  const longest = Math.max(1e-300, ...m.samples.map((s) => Math.hypot(s.value[0], s.value[1])));
  ctx.strokeStyle = "#2471a3";
  for (const s of m.samples) {
    const [x, y] = map([s.point[0], s.point[1]]);
    const [dx, dy] = [(18 * s.value[0]) / longest, (-18 * s.value[1]) / longest];
    ctx.beginPath(); ctx.moveTo(x, y); ctx.lineTo(x + dx, y + dy); ctx.stroke();
    ctx.fillRect(x - 1, y - 1, 2, 2);
  }
  $("field-info").textContent =
    `norm ${m.norm.toExponential(5)}\nresidual ${m.residual.toExponential(2)}\nrank ${m.rank} of ${m.unknowns} unknowns`;
}

function update() {
  const v = inputs();
  $("parameter-value").textContent = v.parameter.toFixed(2);
  $("status").textContent = "";
  $("status").className = "";
  try {
    drawShape(JSON.parse(shape_info(v.family, v.parameter)));
    drawCurve(JSON.parse(ratio_curve(v.family, v.parameter, v.kind, v.faces, v.p, v.delta, v.seed)));
    drawField(JSON.parse(minimizer(v.family, v.parameter, v.kind, v.p, v.faces, v.seed, 6)));
  } catch (e) {
    $("status").textContent = String(e);
    $("status").className = "error";
  }
}

await init();
for (const el of document.querySelectorAll("select, input")) el.addEventListener("change", update);
$("parameter").addEventListener("input", () => { $("parameter-value").textContent = $("parameter").value; });
update();
