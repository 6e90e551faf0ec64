import init, { modelHeatmap, worldSnapshot, verifyTree, workedExample } from "./pkg/tpop_web.js";

const $ = (id) => document.getElementById(id);

function show(target, render) {
  const out = $(target);
  try {
    render(out);
  } catch (err) {
    out.innerHTML = "";
    const p = document.createElement("p");
    p.className = "error";
    p.textContent = String(err.message ?? err);
    out.appendChild(p);
  }
}

function drawHeatmap() {
  show("hm-out", (out) => {
    out.innerHTML = modelHeatmap(
      $("hm-theta").value,
      $("hm-metric").value,
      Number($("hm-step").value),
      Number($("hm-trees").value),
      Number($("hm-seed").value),
    );
  });
}

function drawWorld() {
  show("w-out", (out) => {
    out.innerHTML = worldSnapshot(
      Number($("w-ph").value),
      Number($("w-pc").value),
      Number($("w-n").value),
      $("w-theta").value,
      $("w-honest").value === "true",
      Number($("w-seed").value),
    );
  });
}

function runVerify() {
  show("v-out", (out) => {
    const t = $("v-t").value.trim();
    const result = JSON.parse(verifyTree($("v-json").value, t === "" ? undefined : Number(t)));
    const pre = document.createElement("pre");
    pre.textContent = `${result.verdict ? "truthful" : "untruthful"}\n\n${JSON.stringify(result, null, 2)}`;
    out.replaceChildren(pre);
  });
}

await init();
$("v-json").value = workedExample();
$("hm-run").addEventListener("click", drawHeatmap);
$("w-run").addEventListener("click", drawWorld);
$("v-run").addEventListener("click", runVerify);
drawHeatmap();
drawWorld();
runVerify();
