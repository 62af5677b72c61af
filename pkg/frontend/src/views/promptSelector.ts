import type { Store, UiState } from "../state";

export function createPromptSelector(store: Store) {
  const element = document.createElement("div");
  element.dataset.view = "prompt-selector";
  element.className = "prompt-selector";

  const label = document.createElement("label");
  label.textContent = "Prompt ";
  const select = document.createElement("select");
  select.setAttribute("aria-label", "Prompt");
  for (const prompt of store.bundle.prompts) {
    const option = document.createElement("option");
    option.value = prompt.key;
    option.textContent = prompt.text;
    select.appendChild(option);
  }
  select.addEventListener("change", () => store.selectPrompt(select.value));
  label.appendChild(select);
  element.appendChild(label);

  function update(state: UiState): void {
    select.value = state.promptKey;
  }

  return { element, update };
}
