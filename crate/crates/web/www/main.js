// Isometric canvas view over the wasm planner. Storage order is x*d*d + z*d + y.
import init, { Scene } from "./pkg/sculpt_web.js";

const $ = (id) => document.getElementById(id);
const canvas = $("view");
const ctx = canvas.getContext("2d");
const COLORS = { 0: ["#8a8f98", "#6d727b", "#a3a8b0"], 1: ["#e59a3c", "#c47d25", "#f0b565"] };

let scene = null;
let states = null;
let dim = 0;
let leaves = null;
let playing = null;

const log = (text) => { $("log").textContent = text; };
const at = (x, y, z) => x * dim * dim + z * dim + y;
const solid = (x, y, z) =>
  x >= 0 && y >= 0 && z >= 0 && x < dim && y < dim && z < dim && states[at(x, y, z)] !== 2;

function projector() {
  const s = Math.min(canvas.width / (1.8 * dim), canvas.height / (2.1 * dim));
  const cx = canvas.width / 2;
  const cy = canvas.height / 2;
  // The grid center lands on the canvas center.
  return (x, y, z) => [cx + (x - y) * 0.866 * s, cy + (x + y) * 0.5 * s - z * s];
}

function quad(p, a, b, c, d, fill) {
  ctx.beginPath();
  ctx.moveTo(...p(...a));
  ctx.lineTo(...p(...b));
  ctx.lineTo(...p(...c));
  ctx.lineTo(...p(...d));
  ctx.closePath();
  ctx.fillStyle = fill;
  ctx.fill();
}

function draw(robot, unreachable) {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!scene) return;
  const p = projector();
  // Back to front: the viewer sits towards +x, +y, +z.
  for (let sum = 0; sum <= 3 * (dim - 1); sum++) {
    for (let x = Math.max(0, sum - 2 * (dim - 1)); x <= Math.min(dim - 1, sum); x++) {
      for (let y = Math.max(0, sum - x - (dim - 1)); y <= Math.min(dim - 1, sum - x); y++) {
        const z = sum - x - y;
        const s = states[at(x, y, z)];
        if (s === 2) continue;
        const [top, left, right] = COLORS[s];
        if (!solid(x, y, z + 1)) quad(p, [x, y, z + 1], [x + 1, y, z + 1], [x + 1, y + 1, z + 1], [x, y + 1, z + 1], top);
        if (!solid(x, y + 1, z)) quad(p, [x, y + 1, z], [x + 1, y + 1, z], [x + 1, y + 1, z + 1], [x, y + 1, z + 1], left);
        if (!solid(x + 1, y, z)) quad(p, [x + 1, y, z], [x + 1, y + 1, z], [x + 1, y + 1, z + 1], [x + 1, y, z + 1], right);
      }
    }
  }
  if ($("overlay").checked && leaves) drawLeaves(p);
  for (const [x, y, z] of unreachable || []) dot(p, x, y, z, "#5b4bd6", 2);
  if (robot) dot(p, robot[0], robot[1], robot[2], "#d7263d", 5);
}

function dot(p, x, y, z, color, r) {
  const [u, v] = p(x + 0.5, y + 0.5, z + 0.5);
  ctx.beginPath();
  ctx.arc(u, v, r, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
}

function drawLeaves(p) {
  ctx.strokeStyle = "rgba(20, 60, 160, 0.35)";
  ctx.lineWidth = 1;
  for (const [x, y, z, n, code] of leaves) {
    if (code === 2 || n === 1) continue;
    const e = [[x, y, z + n], [x + n, y, z + n], [x + n, y + n, z + n], [x, y + n, z + n]];
    ctx.beginPath();
    ctx.moveTo(...p(...e[0]));
    for (const c of e.slice(1)) ctx.lineTo(...p(...c));
    ctx.closePath();
    ctx.stroke();
  }
}

function stop() {
  if (playing) cancelAnimationFrame(playing);
  playing = null;
}

function generate() {
  stop();
  try {
    scene = new Scene($("shape").value, Number($("dim").value));
  } catch (e) {
    log(String(e));
    return;
  }
  dim = scene.dim();
  states = scene.states();
  leaves = null;
  const remove = states.filter((s) => s === 1).length;
  const keep = states.filter((s) => s === 0).length;
  log(`${$("shape").value} ${dim}^3: ${keep} keep, ${remove} remove`);
  draw();
}

function octree() {
  if (!scene) return;
  const info = JSON.parse(scene.octree());
  leaves = info.leaves;
  $("overlay").checked = true;
  log(`${info.blocks} leaf blocks for ${info.voxels} voxels, reduction ${info.reduction_percent.toFixed(1)}%`);
  draw();
}

function plan() {
  if (!scene) return;
  stop();
  states = scene.states();
  const t0 = performance.now();
  let result;
  try {
    result = JSON.parse(scene.plan($("tier").value, Number($("budget").value)));
  } catch (e) {
    log(String(e));
    return;
  }
  const ms = (performance.now() - t0).toFixed(0);
  const head = `${result.tier} tier: ${result.status}, ${result.expansions} expansions, ${ms} ms`;
  if (result.status === "limit") {
    log(`${head}\nbudget exhausted before a plan was found`);
    draw();
    return;
  }
  const path = result.path;
  const perFrame = Math.max(1, Math.ceil(path.length / 240));
  let k = 0;
  const frame = () => {
    const end = Math.min(path.length, k + perFrame);
    for (; k < end; k++) {
      const [x, y, z, cut] = path[k];
      if (cut) states[at(x, y, z)] = 2;
    }
    const last = path[k - 1];
    const done = k >= path.length;
    draw(last, done ? result.unreachable : null);
    log(`${head}\nstep ${k} / ${path.length}` +
      (done ? `\n${result.unreachable.length} of ${result.remove_total} remove voxels unreachable` : ""));
    playing = done ? null : requestAnimationFrame(frame);
  };
  frame();
}

await init();
$("generate").onclick = generate;
$("octree").onclick = octree;
$("plan").onclick = plan;
$("overlay").onchange = () => draw();
generate();
