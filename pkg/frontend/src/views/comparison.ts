import type { Store, UiState } from "../state";
import { findProjection, scaleKey, thumbnailSrc } from "../types";
import type { PromptEntry } from "../types";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 420;
const HEIGHT = 300;
const PAD = 24;

function highlightedPrompt(prompt: PromptEntry): DocumentFragment {
  const fragment = document.createDocumentFragment();
  let cursor = 0;
  for (const [start, end] of prompt.keywords_diff) {
    if (start > cursor) fragment.append(prompt.text.slice(cursor, start));
    const mark = document.createElement("mark");
    mark.className = "keyword-diff";
    mark.textContent = prompt.text.slice(start, end);
    fragment.appendChild(mark);
    cursor = end;
  }
  if (cursor < prompt.text.length) fragment.append(prompt.text.slice(cursor));
  return fragment;
}

/** Paired-prompt trajectory chart with step markers synced to the timestep
 * controller; hovering a step shows both thumbnails side by side. */
export function createComparison(store: Store) {
  const element = document.createElement("section");
  element.dataset.view = "comparison";
  element.className = "detail";

  const heading = document.createElement("h3");
  heading.textContent = "Prompt Comparison View";
  const prompts = document.createElement("div");
  prompts.className = "pair-prompts";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("width", String(WIDTH));
  svg.setAttribute("height", String(HEIGHT));
  svg.setAttribute("role", "img");
  const hoverPanel = document.createElement("div");
  hoverPanel.className = "hover-panel";
  const message = document.createElement("p");
  message.className = "comparison-message";
  element.append(heading, prompts, svg, hoverPanel, message);

  function render(state: UiState): void {
    prompts.textContent = "";
    hoverPanel.textContent = "";
    message.textContent = "";
    while (svg.firstChild) svg.removeChild(svg.firstChild);

    const prompt = store.bundle.prompts.find((p) => p.key === state.promptKey)!;
    const projection = findProjection(store.bundle, state.promptKey);
    if (!prompt.pair_key || !projection) {
      message.textContent = "this prompt has no comparison partner";
      return;
    }
    const partner = store.bundle.prompts.find((p) => p.key === prompt.pair_key)!;

    for (const entry of [prompt, partner]) {
      const line = document.createElement("p");
      line.dataset.promptKey = entry.key;
      line.appendChild(highlightedPrompt(entry));
      prompts.appendChild(line);
    }

    const keys = projection.pair;
    const points = keys.flatMap((key) => projection.polylines[key]);
    const xs = points.map((p) => p[0]);
    const ys = points.map((p) => p[1]);
    const minX = Math.min(...xs);
    const maxX = Math.max(...xs);
    const minY = Math.min(...ys);
    const maxY = Math.max(...ys);
    const sx = (x: number) =>
      PAD + ((x - minX) / (maxX - minX || 1)) * (WIDTH - 2 * PAD);
    const sy = (y: number) =>
      HEIGHT - PAD - ((y - minY) / (maxY - minY || 1)) * (HEIGHT - 2 * PAD);

    keys.forEach((key, trackIndex) => {
      const line = projection.polylines[key];
      const path = document.createElementNS(SVG_NS, "polyline");
      path.setAttribute(
        "points",
        line.map(([x, y]) => `${sx(x)},${sy(y)}`).join(" "),
      );
      path.setAttribute("class", `traj traj-${trackIndex}`);
      path.setAttribute("fill", "none");
      svg.appendChild(path);

      line.forEach(([x, y], step) => {
        const circle = document.createElementNS(SVG_NS, "circle");
        circle.setAttribute("cx", String(sx(x)));
        circle.setAttribute("cy", String(sy(y)));
        circle.setAttribute(
          "r",
          step === state.timestep ? "7" : step === state.hoverStep ? "6" : "3.5",
        );
        circle.setAttribute("class", `marker marker-${trackIndex}`);
        circle.dataset.step = String(step);
        circle.dataset.trajectory = key;
        if (step === state.timestep) circle.classList.add("current");
        circle.addEventListener("mouseenter", () => store.setHoverStep(step));
        circle.addEventListener("mouseleave", () => store.setHoverStep(null));
        svg.appendChild(circle);
      });
    });

    const shownStep = state.hoverStep ?? state.timestep;
    const defaultScale = scaleKey(store.bundle.metadata.default_scale);
    for (const key of keys) {
      const card = document.createElement("figure");
      const img = document.createElement("img");
      img.width = 96;
      img.height = 96;
      img.alt = `${key} at step ${shownStep}`;
      img.src = thumbnailSrc(
        store.bundle.runs[key].variants[defaultScale].thumbnails[shownStep],
      );
      const captionEl = document.createElement("figcaption");
      captionEl.textContent = `${key} · step ${shownStep}`;
      card.append(img, captionEl);
      hoverPanel.appendChild(card);
    }
  }

  function update(state: UiState): void {
    element.classList.toggle("expanded", state.expandedView === "comparison");
    element.setAttribute("aria-hidden", String(state.expandedView !== "comparison"));
    render(state);
  }

  return { element, update };
}
