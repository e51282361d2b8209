import init, { scenarios, mesh, spectrum, complex } from "./pkg/wml_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#2ca02c", "#d62728"];

function params() {
  return { name: $("scenario").value, bc: $("bc").value, h: Number($("h").value), t: Number($("t").value) };
}

// Runs a long computation after the status line has repainted.
function busy(label, work) {
  $("status").textContent = label + "...";
  setTimeout(() => {
    try {
      work();
      $("status").textContent = "";
    } catch (e) {
      $("status").textContent = e.message ?? String(e);
    }
  }, 20);
}

function draw(data) {
  const canvas = $("view");
  const ctx = canvas.getContext("2d");
  const xs = data.vertices.map((v) => v[0]);
  const ys = data.vertices.map((v) => v[1]);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const pad = 16;
  const s = (canvas.width - 2 * pad) / Math.max(x1 - x0, y1 - y0);
  const px = (p) => [pad + (p[0] - x0) * s, canvas.height - pad - (p[1] - y0) * s];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#bbb";
  ctx.lineWidth = 0.5;
  ctx.beginPath();
  for (const tri of data.triangles) {
    const [a, b, c] = tri.map((i) => px(data.vertices[i]));
    ctx.moveTo(...a);
    ctx.lineTo(...b);
    ctx.lineTo(...c);
    ctx.closePath();
  }
  ctx.stroke();
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  for (const [a, b] of data.boundary_edges) {
    ctx.moveTo(...px(data.vertices[a]));
    ctx.lineTo(...px(data.vertices[b]));
  }
  ctx.stroke();
  for (const p of data.critical) {
    const [cx, cy] = px([p.x, p.y]);
    ctx.beginPath();
    ctx.arc(cx, cy, 6, 0, 2 * Math.PI);
    ctx.lineWidth = 2.5;
    ctx.strokeStyle = COLORS[p.index];
    ctx.fillStyle = COLORS[p.index];
    if (p.generator) ctx.fill();
    ctx.stroke();
  }
}

function table(head, rows) {
  const th = head.map((h) => `<th>${h}</th>`).join("");
  const body = rows.map((r) => "<tr>" + r.map((c) => `<td>${c}</td>`).join("") + "</tr>").join("");
  return `<table><tr>${th}</tr>${body}</table>`;
}

function showSpectrum(d) {
  const rows = d.eigenvalues.map((ev, j) => [j, d.counts[j], d.expected ? d.expected[j] : "", ...ev.map((v) => v.toExponential(3))]);
  const k = Math.max(...d.eigenvalues.map((e) => e.length));
  const head = ["degree", `# below C0=${d.C0}`, "predicted", ...Array.from({ length: k }, (_, i) => `λ${i + 1}`)];
  $("output").innerHTML = `<h3>T = ${d.T}, h = ${d.h.toFixed(3)}</h3>` + table(head, rows);
}

function matrix(m) {
  if (m.length === 0 || m[0].length === 0) return "(empty)";
  return table([""].concat(m[0].map((_, j) => `c${j}`)), m.map((r, i) => [`r${i}`, ...r]));
}

function showComplex(d) {
  const gens = d.generators
    .map((g, j) => `degree ${j}: ` + (g.map((p) => `(${p.x.toFixed(2)}, ${p.y.toFixed(2)})`).join(", ") || "none"))
    .join("<br>");
  const ineq = table(
    ["k", "alternating Betti sum", "alternating count sum", "holds"],
    d.inequalities.map((r) => [r.k, r.betti_sum, r.count_sum, r.holds ? "yes" : "no"]),
  );
  $("output").innerHTML =
    `<h3>Generators</h3><p>${gens}</p>` +
    `<h3>Boundary maps</h3><p>degree 1 to 0</p>${matrix(d.boundary[0])}<p>degree 2 to 1</p>${matrix(d.boundary[1])}` +
    `<h3>Betti numbers</h3><p>${d.betti.join(", ")}</p>` +
    `<h3>Morse inequalities</h3>${ineq}<p>equality at k = 2: ${d.equality_at_top ? "yes" : "no"}</p>`;
}

await init();
for (const s of JSON.parse(scenarios())) {
  const opt = document.createElement("option");
  opt.value = s.name;
  opt.textContent = `${s.name}: f = ${s.f} on ${s.domain}`;
  $("scenario").append(opt);
}
$("draw").onclick = () => busy("meshing", () => { const p = params(); draw(JSON.parse(mesh(p.name, p.h))); });
$("spectrum").onclick = () =>
  busy("solving", () => { const p = params(); showSpectrum(JSON.parse(spectrum(p.name, p.bc, p.t, p.h))); });
$("complex").onclick = () => busy("tracing flow lines", () => { const p = params(); showComplex(JSON.parse(complex(p.name, p.bc))); });
$("scenario").onchange = $("draw").onclick;
$("draw").onclick();
