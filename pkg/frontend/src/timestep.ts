import type { Store, UiState } from "./state";

export const DEFAULT_PLAY_INTERVAL_MS = 100;

/** Slider plus play/pause; one timestep per tick while playing. */
export function createTimestepController(
  store: Store,
  intervalMs: number = DEFAULT_PLAY_INTERVAL_MS,
) {
  const element = document.createElement("div");
  element.dataset.view = "timestep-controller";
  element.className = "timestep-controller";

  const play = document.createElement("button");
  play.type = "button";
  play.setAttribute("aria-label", "play refinement animation");
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = String(store.maxStep);
  slider.step = "1";
  slider.setAttribute("aria-label", "refinement timestep");
  const readout = document.createElement("output");
  element.append(play, slider, readout);

  let timer: ReturnType<typeof setInterval> | null = null;

  function syncTimer(playing: boolean): void {
    if (playing && timer === null) {
      timer = setInterval(() => store.tick(), intervalMs);
    } else if (!playing && timer !== null) {
      clearInterval(timer);
      timer = null;
    }
  }

  play.addEventListener("click", () => store.setPlaying(!store.get().playing));
  slider.addEventListener("input", () => {
    store.setPlaying(false);
    store.setTimestep(Number(slider.value));
  });

  function update(state: UiState): void {
    slider.value = String(state.timestep);
    readout.textContent = `step ${state.timestep} / ${store.maxStep}`;
    play.textContent = state.playing ? "⏸" : "⏵";
    syncTimer(state.playing);
  }

  function dispose(): void {
    syncTimer(false);
  }

  return { element, update, dispose };
}
