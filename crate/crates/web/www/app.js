import init, { kernelProfile, sandwichProfile, decayProfile } from "./pkg/roughcert_web.js";

const COLORS = ["#236", "#c33", "#393"];

function num(id) {
  return Number(document.getElementById(id).value);
}

function draw(canvasId, xs, series, logScale) {
  const c = document.getElementById(canvasId);
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const tx = logScale ? Math.log : (v) => v;
  const X = xs.map(tx);
  const Ys = series.map((s) => s.map((v) => (logScale ? Math.log(Math.max(v, 1e-300)) : v)));
  const all = Ys.flat().filter(Number.isFinite);
  const [x0, x1] = [Math.min(...X), Math.max(...X)];
  const [y0, y1] = [Math.min(...all), Math.max(...all)];
  const px = (v) => 40 + ((v - x0) / (x1 - x0 || 1)) * (c.width - 60);
  const py = (v) => c.height - 30 - ((v - y0) / (y1 - y0 || 1)) * (c.height - 50);
  g.strokeStyle = "#000";
  g.strokeRect(40, 20, c.width - 60, c.height - 50);
  Ys.forEach((ys, k) => {
    g.strokeStyle = COLORS[k % COLORS.length];
    g.beginPath();
    ys.forEach((y, i) => (i ? g.lineTo(px(X[i]), py(y)) : g.moveTo(px(X[i]), py(y))));
    g.stroke();
  });
}

function guard(statusId, fn) {
  const status = document.getElementById(statusId);
  try {
    status.textContent = fn();
  } catch (e) {
    status.textContent = "error: " + (e.message ?? e);
  }
}

await init();

document.getElementById("k-go").onclick = () =>
  guard("k-status", () => {
    const p = JSON.parse(kernelProfile(num("k-n"), num("k-r"), num("k-t")));
    draw("k-plot", p.x, [p.kernel, p.comparator], false);
    return `mass ${p.mass.toFixed(6)}  (blue: kernel, red: comparator)`;
  });

document.getElementById("s-go").onclick = () =>
  guard("s-status", () => {
    const p = JSON.parse(sandwichProfile(num("s-n"), num("s-t"), num("s-c"), num("s-w")));
    draw("s-plot", p.x, [p.w, p.lower, p.upper], false);
    return `sandwich ${p.verdict}  (blue: w, red: v_{a0 c0}, green: v_{a0})`;
  });

document.getElementById("d-go").onclick = () =>
  guard("d-status", () => {
    const p = JSON.parse(decayProfile(num("d-n"), num("d-t"), num("d-c"), num("d-w")));
    draw("d-plot", p.radii, [p.oscillations], true);
    const slope = p.slope === null ? "n/a" : p.slope.toFixed(4);
    return `levels ${p.radii.length}  delta_fit ${p.delta_fit.toFixed(4)}  slope ${slope}  ${p.verdict}`;
  });
