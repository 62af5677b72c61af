import type { ExpandedView, Store, UiState } from "../state";

interface Block {
  view: ExpandedView;
  title: string;
  caption: string;
}

const BLOCKS: Block[] = [
  {
    view: "text_ops",
    title: "Text Representation Generator",
    caption: "prompt → tokens → vectors",
  },
  {
    view: "image_ops",
    title: "Image Representation Refiner",
    caption: "noise refined step by step",
  },
  {
    view: "guidance",
    title: "Guidance Scale",
    caption: "how strongly text steers",
  },
  {
    view: "comparison",
    title: "Prompt Comparison",
    caption: "paired trajectories in 2-D",
  },
];

/** High-level flow diagram; clicking a component expands its detail view. */
export function createArchitecture(store: Store) {
  const element = document.createElement("div");
  element.dataset.view = "architecture";
  element.className = "architecture";

  const flow = document.createElement("div");
  flow.className = "flow";
  const buttons = new Map<ExpandedView, HTMLButtonElement>();

  BLOCKS.forEach((block, index) => {
    if (index === 1) {
      const arrow = document.createElement("span");
      arrow.className = "flow-arrow";
      arrow.textContent = "→";
      flow.appendChild(arrow);
    }
    const button = document.createElement("button");
    button.type = "button";
    button.className = "component";
    button.dataset.expands = block.view;
    const title = document.createElement("strong");
    title.textContent = block.title;
    const caption = document.createElement("small");
    caption.textContent = block.caption;
    button.append(title, caption);
    if (block.view === "image_ops") {
      const loop = document.createElement("span");
      loop.className = "loop-badge";
      loop.textContent = `⟳ ×${store.maxStep}`;
      loop.title = "the refinement loop repeats this component";
      button.appendChild(loop);
    }
    button.addEventListener("click", () => store.expand(block.view));
    buttons.set(block.view, button);
    flow.appendChild(button);
  });

  // the text encoder inside the generator opens the linkage explanation
  const linkageButton = document.createElement("button");
  linkageButton.type = "button";
  linkageButton.className = "component sub";
  linkageButton.dataset.expands = "text_linkage";
  linkageButton.textContent = "Text Encoder · text↔image linkage";
  linkageButton.addEventListener("click", () => store.expand("text_linkage"));

  element.appendChild(flow);
  element.appendChild(linkageButton);

  function update(state: UiState): void {
    for (const [view, button] of buttons) {
      button.classList.toggle("active", state.expandedView === view);
      button.setAttribute("aria-expanded", String(state.expandedView === view));
    }
    linkageButton.classList.toggle("active", state.expandedView === "text_linkage");
    linkageButton.setAttribute(
      "aria-expanded",
      String(state.expandedView === "text_linkage"),
    );
  }

  return { element, update };
}
