import init, { fixtures, repair_fixture, solution_classes } from "./pkg/hrepair_web.js";

const $ = (id) => document.getElementById(id);
let all = [];

function esc(s) {
  return String(s ?? "").replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]);
}

function fill() {
  const f = all.find((x) => x.name === $("fixture").value);
  $("disturbance").innerHTML = f.disturbances.map((d) => `<option>${esc(d)}</option>`).join("");
  $("methods").innerHTML = "Methods: " + f.methods
    .map((m) => `<label><input type="checkbox" value="${esc(m)}" checked> ${esc(m)}</label>`)
    .join("");
}

function args() {
  const methods = [...$("methods").querySelectorAll("input:checked")].map((c) => c.value).join(",");
  return [$("fixture").value, $("disturbance").value, methods, Number($("position").value) | 0, Number($("seed").value) | 0];
}

function run(fn, render) {
  $("error").textContent = "";
  try {
    $("out").innerHTML = render(JSON.parse(fn(...args())));
  } catch (e) {
    $("out").innerHTML = "";
    $("error").textContent = String(e);
  }
}

function showRepair(r) {
  const rows = r.results.map((x) => `<tr><td>${x.strategy}</td><td class="${x.outcome}">${x.outcome}</td>`
    + `<td>${x.changed_nodes ?? ""}</td><td class="plan">${esc(x.plan_after)}</td></tr>`).join("");
  return `<p>Class ${r.class} after <b>${esc(r.disturbance)}</b> at position ${r.position}.</p>
    <table><tr><th>executed</th><td class="plan">${esc(r.executed)}</td></tr>
    <tr><th>remaining</th><td class="plan">${esc(r.remaining)}</td></tr></table>
    <table><tr><th>strategy</th><th>outcome</th><th>changed nodes</th><th>repaired remainder</th></tr>${rows}</table>`;
}

function showClasses(c) {
  const set = (name, s) => `<h3>${name}: ${s.size} tree(s)${s.exhausted ? "" : " (bound reached)"}</h3>`
    + `<pre>${s.trees.map(esc).join("\n") || "(empty)"}</pre>`;
  const checks = c.containments.map((k) => `<tr><td>${esc(k.name)}</td><td>${k.holds ? "holds" : "violated"}</td>`
    + `<td class="plan">${k.counterexample ? esc(k.counterexample.tree) : ""}</td></tr>`).join("");
  return set("Class 2 (rewrite)", c.class2) + set("Class 3 (tree-applicable)", c.class3)
    + set("Class 4 (plan-applicable)", c.class4)
    + `<table><tr><th>containment</th><th>status</th><th>counterexample</th></tr>${checks}</table>`;
}

await init();
all = JSON.parse(fixtures());
$("fixture").innerHTML = all.map((f) => `<option>${esc(f.name)}</option>`).join("");
$("fixture").onchange = fill;
fill();
$("repair").onclick = () => run(repair_fixture, showRepair);
$("classes").onclick = () => run(solution_classes, showClasses);
