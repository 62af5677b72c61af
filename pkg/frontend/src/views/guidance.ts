import type { Store, UiState } from "../state";
import { thumbnailSrc, scaleKey } from "../types";

/** Slider snapping to the bundle's guidance variants; swapping the scale
 * swaps the displayed thumbnail at the same timestep. */
export function createGuidance(store: Store) {
  const element = document.createElement("section");
  element.dataset.view = "guidance";
  element.className = "detail";

  const scales = [...store.bundle.metadata.guidance_scales].sort((a, b) => a - b);
  element.dataset.scales = scales.join(",");

  const heading = document.createElement("h3");
  heading.textContent = "Interactive Guidance Explanation";
  const blurb = document.createElement("p");
  blurb.textContent =
    "Higher guidance makes the image follow the text prompt more strongly; " +
    "0 ignores the prompt entirely and 1 uses the conditional prediction alone.";

  const sliderRow = document.createElement("div");
  sliderRow.className = "slider-row";
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = String(scales.length - 1);
  slider.step = "1";
  slider.setAttribute("aria-label", "guidance scale");
  const readout = document.createElement("output");
  sliderRow.append(slider, readout);

  const labels = document.createElement("div");
  labels.className = "scale-labels";
  for (const scale of scales) {
    const label = document.createElement("button");
    label.type = "button";
    label.dataset.scale = String(scale);
    label.textContent = String(scale);
    label.addEventListener("click", () => store.setScale(scale));
    labels.appendChild(label);
  }

  const img = document.createElement("img");
  img.dataset.role = "guidance-thumb";
  img.alt = "image representation at the selected guidance scale";
  img.width = 128;
  img.height = 128;

  slider.addEventListener("input", () => {
    store.setScale(scales[Number(slider.value)]);
  });

  element.append(heading, blurb, sliderRow, labels, img);

  function update(state: UiState): void {
    element.classList.toggle("expanded", state.expandedView === "guidance");
    element.setAttribute("aria-hidden", String(state.expandedView !== "guidance"));
    slider.value = String(scales.indexOf(state.scale));
    readout.textContent = `scale ${state.scale}`;
    for (const button of labels.children) {
      (button as HTMLButtonElement).classList.toggle(
        "active",
        Number((button as HTMLButtonElement).dataset.scale) === state.scale,
      );
    }
    const run = store.bundle.runs[state.promptKey];
    img.src = thumbnailSrc(
      run.variants[scaleKey(state.scale)].thumbnails[state.timestep],
    );
  }

  return { element, update };
}
