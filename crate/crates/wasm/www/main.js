import init, { lattice_preview, uniaxial_curve, compress_block } from "./pkg/latticegraph_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Oblique projection: x right, z up, y receding.
function project(p) {
  return [p[0] + 0.45 * p[1], p[2] + 0.3 * p[1]];
}

function fit(canvas, points) {
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const pad = 20;
  const s = Math.min((canvas.width - 2 * pad) / (x1 - x0 || 1), (canvas.height - 2 * pad) / (y1 - y0 || 1));
  return ([x, y]) => [pad + (x - x0) * s, canvas.height - pad - (y - y0) * s];
}

function drawEdges(canvas, vertices, edges, color) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const flat = vertices.map(project);
  const to = fit(canvas, flat);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (const [a, b] of edges) {
    const [ax, ay] = to(flat[a]);
    const [bx, by] = to(flat[b]);
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
  }
  ctx.stroke();
}

function drawCurve(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pts = xs.map((x, i) => [x, ys[i]]);
  const to = fit(canvas, [[0, 0], ...pts]);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  const [ox, oy] = to([0, 0]);
  ctx.moveTo(ox, 10);
  ctx.lineTo(ox, oy);
  ctx.lineTo(canvas.width - 10, oy);
  ctx.stroke();
  ctx.strokeStyle = "#1663be";
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach((p, i) => {
    const [x, y] = to(p);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.fillStyle = "#1663be";
  for (const p of pts) {
    const [x, y] = to(p);
    ctx.fillRect(x - 2, y - 2, 4, 4);
  }
}

function run(outId, f) {
  const out = $(outId);
  out.classList.remove("err");
  out.textContent = "working...";
  // Let the status paint before the solver blocks the thread.
  setTimeout(() => {
    try {
      f(out);
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e.message ?? e);
    }
  }, 10);
}

function preview() {
  run("lp-out", (out) => {
    const r = JSON.parse(
      lattice_preview($("lp-type").value, num("lp-nx"), num("lp-ny"), num("lp-nz"), 2.0, num("lp-seg")),
    );
    drawEdges($("lp-canvas"), r.nodes, r.struts, "#333");
    out.textContent =
      `${r.nodes.length} nodes, ${r.struts.length} struts, ${r.total_length.toFixed(1)} mm of strut\n` +
      `reduced graph: ${r.reduced_nodes} nodes, ${r.reduced_edges} edges; mesh: ${r.tets} tets`;
  });
}

function curve() {
  run("uc-out", (out) => {
    const t = performance.now();
    const r = JSON.parse(uniaxial_curve($("uc-type").value, num("uc-d"), num("uc-strain"), num("uc-steps")));
    drawCurve($("uc-canvas"), r.strain, r.force);
    const last = r.force[r.force.length - 1];
    out.textContent =
      `${r.tets} tets, ${r.strain.length - 1} steps in ${((performance.now() - t) / 1000).toFixed(2)} s\n` +
      `force at strain ${r.strain[r.strain.length - 1]}: ${last.toFixed(3)} N`;
  });
}

function block() {
  run("bl-out", (out) => {
    const r = JSON.parse(compress_block(num("bl-nx"), num("bl-ny"), num("bl-nz"), num("bl-strain")));
    drawEdges($("bl-canvas"), r.vertices, r.edges, "#7a2d8c");
    out.textContent =
      `platen force ${r.force.toFixed(3)} N; linear estimate ${r.linear_force.toFixed(3)} N ` +
      `(ratio ${(r.force / r.linear_force).toFixed(3)})`;
  });
}

await init();
$("lp-go").onclick = preview;
$("uc-go").onclick = curve;
$("bl-go").onclick = block;
preview();
