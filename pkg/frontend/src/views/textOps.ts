import type { Store, UiState } from "../state";

const MARKERS = new Set(["<|startoftext|>", "<|endoftext|>", "<|pad|>"]);

/** Token chips aligned with the character spans they cover in the prompt. */
export function createTextOps(store: Store) {
  const element = document.createElement("section");
  element.dataset.view = "text_ops";
  element.className = "detail";

  const heading = document.createElement("h3");
  heading.textContent = "Text Operation View";
  const promptLine = document.createElement("p");
  promptLine.className = "prompt-line";
  const chipRow = document.createElement("div");
  chipRow.className = "chip-row";
  element.append(heading, promptLine, chipRow);

  function renderPrompt(state: UiState): void {
    const prompt = store.bundle.prompts.find((p) => p.key === state.promptKey)!;
    promptLine.textContent = "";
    let cursor = 0;
    const spans = prompt.tokens.spans;
    for (const [start, end] of spans) {
      if (start > cursor) {
        promptLine.append(prompt.text.slice(cursor, start));
      }
      const mark = document.createElement("mark");
      mark.textContent = prompt.text.slice(Math.max(start, cursor), end);
      promptLine.appendChild(mark);
      cursor = Math.max(cursor, end);
    }
    if (cursor < prompt.text.length) {
      promptLine.append(prompt.text.slice(cursor));
    }

    chipRow.textContent = "";
    let spanIndex = 0;
    prompt.tokens.ids.forEach((id, i) => {
      const text = prompt.tokens.strings[i];
      if (text === undefined) return; // strings stop at the end marker
      const chip = document.createElement("span");
      chip.className = "chip";
      if (MARKERS.has(text)) {
        chip.classList.add("marker");
        chip.textContent = text;
      } else {
        const span = prompt.tokens.spans[spanIndex++];
        chip.textContent = prompt.text.slice(span[0], span[1]);
        chip.title = `covers characters ${span[0]}–${span[1]}`;
      }
      const idBadge = document.createElement("small");
      idBadge.textContent = String(id);
      chip.appendChild(idBadge);
      chipRow.appendChild(chip);
    });
  }

  function update(state: UiState): void {
    element.classList.toggle("expanded", state.expandedView === "text_ops");
    element.setAttribute("aria-hidden", String(state.expandedView !== "text_ops"));
    renderPrompt(state);
  }

  return { element, update };
}
