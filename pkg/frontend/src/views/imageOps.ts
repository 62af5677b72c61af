import type { Store, UiState } from "../state";
import { stepArithmetic } from "../schedule";
import { thumbnailSrc } from "../types";

/** Current-step thumbnail, the upcoming removal, and the step arithmetic. */
export function createImageOps(store: Store) {
  const element = document.createElement("section");
  element.dataset.view = "image_ops";
  element.className = "detail";

  const heading = document.createElement("h3");
  heading.textContent = "Image Operation View";

  const strip = document.createElement("div");
  strip.className = "step-strip";
  const current = document.createElement("img");
  current.dataset.role = "current-thumb";
  current.alt = "image representation at the current step";
  current.width = 128;
  current.height = 128;
  const arrow = document.createElement("div");
  arrow.className = "op-arrow";
  arrow.innerHTML = "predict noise<br>weaken &amp; remove<br>→";
  const next = document.createElement("img");
  next.dataset.role = "next-thumb";
  next.alt = "image representation after this step";
  next.width = 128;
  next.height = 128;
  strip.append(current, arrow, next);

  const math = document.createElement("p");
  math.className = "step-math";
  element.append(heading, strip, math);

  function update(state: UiState): void {
    element.classList.toggle("expanded", state.expandedView === "image_ops");
    element.setAttribute("aria-hidden", String(state.expandedView !== "image_ops"));
    const variant = store.currentVariant();
    current.src = thumbnailSrc(variant.thumbnails[state.timestep]);
    const nextStep = Math.min(state.timestep + 1, store.maxStep);
    next.src = thumbnailSrc(variant.thumbnails[nextStep]);

    const arithmetic = stepArithmetic(
      store.bundle.metadata.schedule,
      state.timestep,
    );
    if (arithmetic) {
      math.textContent =
        `step ${state.timestep} of ${store.maxStep} · train step t=${arithmetic.trainStep} · ` +
        `signal level ᾱ=${arithmetic.alphaBar.toFixed(4)} → ${arithmetic.alphaBarPrev.toFixed(4)}`;
    } else {
      math.textContent = `step ${state.timestep} of ${store.maxStep} · refinement finished`;
    }
  }

  return { element, update };
}
