import { Store } from "./state";
import type { ExplainerBundle } from "./types";
import { fetchBundle } from "./types";
import { createTimestepController } from "./timestep";
import { createPromptSelector } from "./views/promptSelector";
import { createArchitecture } from "./views/architecture";
import { createTextOps } from "./views/textOps";
import { createLinkage } from "./views/linkage";
import { createImageOps } from "./views/imageOps";
import { createGuidance } from "./views/guidance";
import { createComparison } from "./views/comparison";

export interface App {
  store: Store;
  dispose: () => void;
}

/** Wire every view to one store inside ``root``; pure DOM, no fetching. */
export function createApp(
  root: HTMLElement,
  bundle: ExplainerBundle,
  playIntervalMs?: number,
): App {
  const store = new Store(bundle);
  root.textContent = "";
  root.className = "explainer";

  const header = document.createElement("header");
  const title = document.createElement("h1");
  title.textContent = "Latent Refinement Explainer";
  header.appendChild(title);

  const selector = createPromptSelector(store);
  const controller = createTimestepController(store, playIntervalMs);
  header.append(selector.element, controller.element);

  const architecture = createArchitecture(store);
  const details = document.createElement("div");
  details.className = "details";
  const views = [
    selector,
    controller,
    architecture,
    createTextOps(store),
    createLinkage(store),
    createImageOps(store),
    createGuidance(store),
    createComparison(store),
  ];
  for (const view of views.slice(3)) {
    details.appendChild(view.element);
  }

  root.append(header, architecture.element, details);

  const unsubscribe = store.subscribe((state) => {
    for (const view of views) view.update(state);
  });
  for (const view of views) view.update(store.get());

  return {
    store,
    dispose: () => {
      unsubscribe();
      controller.dispose();
    },
  };
}

/** Browser entry point: fetch the bundle named by ?bundle= (default
 * bundle.json) and mount the app. */
export async function main(root: HTMLElement): Promise<App> {
  const params = new URLSearchParams(window.location.search);
  const url = params.get("bundle") ?? "bundle.json";
  root.textContent = "loading bundle…";
  try {
    const bundle = await fetchBundle(url);
    return createApp(root, bundle);
  } catch (error) {
    root.textContent = `failed to load bundle: ${String(error)}`;
    throw error;
  }
}
