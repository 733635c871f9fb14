import init, * as deblur from "./pkg/deblur_wasm.js";

const $ = (id) => document.getElementById(id);
const state = { sharp: null, blurred: null };

function draw(canvas, grid, normalize = false) {
  const { rows, cols } = grid;
  const data = grid.data();
  canvas.width = cols;
  canvas.height = rows;
  let scale = 1;
  if (normalize) scale = 255 / Math.max(...data, 1e-12);
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(cols, rows);
  for (let i = 0; i < data.length; i++) {
    const v = Math.max(0, Math.min(255, Math.round(data[i] * scale)));
    img.data.set([v, v, v, 255], 4 * i);
  }
  ctx.putImageData(img, 0, 0);
}

function psnr(a, b) {
  const x = a.data(), y = b.data();
  let s = 0;
  for (let i = 0; i < x.length; i++) s += (x[i] - y[i]) ** 2;
  return 10 * Math.log10((255 * 255) / (s / x.length));
}

async function fileGrid(file, size) {
  const bitmap = await createImageBitmap(file);
  const c = new OffscreenCanvas(size, size);
  const ctx = c.getContext("2d");
  ctx.drawImage(bitmap, 0, 0, size, size);
  const px = ctx.getImageData(0, 0, size, size).data;
  const data = new Float64Array(size * size);
  for (let i = 0; i < data.length; i++) {
    data[i] = 0.299 * px[4 * i] + 0.587 * px[4 * i + 1] + 0.114 * px[4 * i + 2];
  }
  return { rows: size, cols: size, data: () => data };
}

async function loadSharp() {
  const size = Number($("size").value);
  const file = $("file").files[0];
  state.sharp = file ? await fileGrid(file, size) : deblur.syntheticImage($("image").value, size);
  draw($("sharp"), state.sharp);
}

async function doBlur() {
  await loadSharp();
  const spec = $("kernel").value;
  const { rows, cols } = state.sharp;
  state.blurred = deblur.blur(state.sharp.data(), rows, cols, spec);
  draw($("blurred"), state.blurred);
  draw($("truePsf"), deblur.kernel(spec), true);
  $("blurredCap").textContent = `blurred, PSNR ${psnr(state.blurred, state.sharp).toFixed(2)} dB`;
}

function doRestore() {
  if (!state.blurred) return;
  $("status").textContent = "running...";
  setTimeout(() => {
    const t0 = performance.now();
    try {
      const { rows, cols } = state.blurred;
      const r = deblur.restore(state.blurred.data(), rows, cols, Number($("iters").value), Number($("delta").value));
      const out = r.image();
      draw($("restored"), out);
      draw($("estPsf"), r.psf(), true);
      $("restoredCap").textContent = `restored, PSNR ${psnr(out, state.sharp).toFixed(2)} dB`;
      $("status").textContent = `done in ${((performance.now() - t0) / 1000).toFixed(1)} s`;
    } catch (e) {
      $("status").textContent = `error: ${e.message ?? e}`;
    }
  }, 10);
}

function buildSliders() {
  const sigmas = deblur.defaultSigmas();
  $("sigmas").textContent = Array.from(sigmas).join(", ");
  const box = $("sliders");
  sigmas.forEach((s, i) => {
    const input = document.createElement("input");
    Object.assign(input, { type: "range", min: 0, max: 1, step: 0.01, value: i === 3 ? 1 : 0, title: `σ=${s}` });
    input.addEventListener("input", updateCoeffPsf);
    box.appendChild(input);
  });
  updateCoeffPsf();
}

function updateCoeffPsf() {
  const w = Array.from($("sliders").querySelectorAll("input"), (el) => Number(el.value));
  const total = w.reduce((a, b) => a + b, 0);
  if (total <= 0) return;
  const a = new Float64Array(w.map((v) => v / total));
  draw($("coeffPsf"), deblur.coefficientPsf(a, a), true);
}

await init();
$("blur").addEventListener("click", doBlur);
$("restore").addEventListener("click", doRestore);
buildSliders();
doBlur();
