import type { Store, UiState } from "../state";
import { scaleKey, thumbnailSrc } from "../types";

/** Text↔image connection grid from the bundle's similarity data. */
export function createLinkage(store: Store) {
  const element = document.createElement("section");
  element.dataset.view = "text_linkage";
  element.className = "detail";

  const heading = document.createElement("h3");
  heading.textContent = "Text-image Linkage Explanation";
  const blurb = document.createElement("p");
  blurb.textContent =
    "Each text representation carries image-related information: brighter " +
    "cells mean the prompt's text vector points closer to that image's vector.";
  const table = document.createElement("table");
  table.className = "linkage-grid";
  element.append(heading, blurb, table);

  function render(state: UiState): void {
    table.textContent = "";
    const linkage = store.bundle.metadata.linkage;
    if (!linkage || linkage.keys.length === 0) {
      const caption = document.createElement("caption");
      caption.textContent = "no linkage data in this bundle";
      table.appendChild(caption);
      return;
    }
    const defaultScale = scaleKey(store.bundle.metadata.default_scale);
    const header = document.createElement("tr");
    header.appendChild(document.createElement("th"));
    for (const key of linkage.keys) {
      const th = document.createElement("th");
      const img = document.createElement("img");
      img.width = 28;
      img.height = 28;
      img.alt = `final image for ${key}`;
      img.src = thumbnailSrc(
        store.bundle.runs[key].variants[defaultScale].final_image,
      );
      th.appendChild(img);
      header.appendChild(th);
    }
    table.appendChild(header);

    const low = Math.min(...linkage.matrix.flat());
    const high = Math.max(...linkage.matrix.flat());
    const range = high - low || 1;
    linkage.keys.forEach((rowKey, i) => {
      const tr = document.createElement("tr");
      tr.classList.toggle("selected", rowKey === state.promptKey);
      const th = document.createElement("th");
      th.textContent = rowKey;
      tr.appendChild(th);
      linkage.matrix[i].forEach((value) => {
        const td = document.createElement("td");
        const strength = (value - low) / range;
        td.style.opacity = String(0.15 + 0.85 * strength);
        td.title = value.toFixed(3);
        td.textContent = value.toFixed(2);
        tr.appendChild(td);
      });
      table.appendChild(tr);
    });
  }

  function update(state: UiState): void {
    element.classList.toggle("expanded", state.expandedView === "text_linkage");
    element.setAttribute("aria-hidden", String(state.expandedView !== "text_linkage"));
    render(state);
  }

  return { element, update };
}
