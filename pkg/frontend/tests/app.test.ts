import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { createApp, type App } from "../src/app";
import { checkBundle, scaleKey, thumbnailSrc } from "../src/types";
import fixture from "./fixtures/bundle.json";

const bundle = checkBundle(fixture);
const STEPS = bundle.metadata.schedule.inference_steps;

let root: HTMLElement;
let app: App;

beforeEach(() => {
  root = document.createElement("div");
  document.body.appendChild(root);
  app = createApp(root, bundle, 100);
});

afterEach(() => {
  app.dispose();
  root.remove();
});

describe("view rendering", () => {
  it("renders all six views after loading the bundle", () => {
    for (const view of [
      "prompt-selector",
      "architecture",
      "text_ops",
      "text_linkage",
      "image_ops",
      "guidance",
      "comparison",
    ]) {
      expect(root.querySelector(`[data-view="${view}"]`), view).not.toBeNull();
    }
    expect(root.querySelector('[data-view="timestep-controller"]')).not.toBeNull();
  });

  it("lists every prompt in the selector", () => {
    const options = root.querySelectorAll('[data-view="prompt-selector"] option');
    expect(options).toHaveLength(bundle.prompts.length);
  });

  it("never shows two detail views at once", () => {
    app.store.expand("guidance");
    expect(root.querySelectorAll(".detail.expanded")).toHaveLength(1);
    app.store.expand("comparison");
    const expanded = root.querySelectorAll(".detail.expanded");
    expect(expanded).toHaveLength(1);
    expect((expanded[0] as HTMLElement).dataset.view).toBe("comparison");
  });

  it("uses only data URIs for images (no network after load)", () => {
    app.store.expand("image_ops");
    app.store.expand("comparison");
    const images = root.querySelectorAll("img");
    expect(images.length).toBeGreaterThan(0);
    for (const img of images) {
      expect(img.src.startsWith("data:image/png;base64,")).toBe(true);
    }
  });

  it("keeps every control keyboard-reachable (native elements)", () => {
    const controls = root.querySelectorAll("button, select, input");
    expect(controls.length).toBeGreaterThan(5);
    for (const control of controls) {
      expect(["BUTTON", "SELECT", "INPUT"]).toContain(control.tagName);
    }
  });
});

describe("timestep scrubbing", () => {
  it("updates the thumbnail at every step from 0 to max", () => {
    app.store.expand("image_ops");
    const img = root.querySelector(
      '[data-role="current-thumb"]',
    ) as HTMLImageElement;
    const variant = bundle.runs[app.store.get().promptKey].variants[
      scaleKey(bundle.metadata.default_scale)
    ];
    const seen = new Set<string>();
    for (let step = 0; step <= STEPS; step++) {
      app.store.setTimestep(step);
      expect(img.src).toBe(thumbnailSrc(variant.thumbnails[step]));
      seen.add(img.src);
    }
    expect(seen.size).toBe(STEPS + 1);
  });

  it("rejects out-of-range timesteps", () => {
    expect(() => app.store.setTimestep(STEPS + 1)).toThrow(RangeError);
    expect(() => app.store.setTimestep(-1)).toThrow(RangeError);
  });

  it("advances one step per interval while playing and wraps", () => {
    vi.useFakeTimers();
    try {
      app.store.setPlaying(true);
      expect(app.store.get().timestep).toBe(0);
      vi.advanceTimersByTime(100);
      expect(app.store.get().timestep).toBe(1);
      vi.advanceTimersByTime(100 * STEPS);
      expect(app.store.get().timestep).toBe(0); // wrapped
      app.store.setPlaying(false);
      vi.advanceTimersByTime(500);
      expect(app.store.get().timestep).toBe(0);
    } finally {
      vi.useRealTimers();
    }
  });

  it("resets the timestep when a prompt is selected", () => {
    app.store.setTimestep(2);
    const select = root.querySelector("select") as HTMLSelectElement;
    select.value = bundle.prompts[1].key;
    select.dispatchEvent(new Event("change"));
    expect(app.store.get().promptKey).toBe(bundle.prompts[1].key);
    expect(app.store.get().timestep).toBe(0);
  });
});

describe("guidance explanation", () => {
  it("exposes exactly the bundle's guidance scales", () => {
    const view = root.querySelector('[data-view="guidance"]') as HTMLElement;
    expect(view.dataset.scales).toBe("0,1,7,20");
    const labels = view.querySelectorAll(".scale-labels button");
    expect([...labels].map((b) => (b as HTMLElement).dataset.scale)).toEqual([
      "0",
      "1",
      "7",
      "20",
    ]);
  });

  it("maps slider positions bijectively onto the scales", () => {
    const slider = root.querySelector(
      '[data-view="guidance"] input[type="range"]',
    ) as HTMLInputElement;
    expect(slider.min).toBe("0");
    expect(slider.max).toBe("3");
    for (const [position, scale] of [
      ["0", 0],
      ["1", 1],
      ["2", 7],
      ["3", 20],
    ] as const) {
      slider.value = position;
      slider.dispatchEvent(new Event("input"));
      expect(app.store.get().scale).toBe(scale);
    }
  });

  it("swapping the scale swaps the thumbnail at the same timestep", () => {
    app.store.expand("guidance");
    app.store.setTimestep(2);
    const img = root.querySelector(
      '[data-role="guidance-thumb"]',
    ) as HTMLImageElement;
    const key = app.store.get().promptKey;
    app.store.setScale(0);
    expect(img.src).toBe(
      thumbnailSrc(bundle.runs[key].variants["0"].thumbnails[2]),
    );
    app.store.setScale(20);
    expect(img.src).toBe(
      thumbnailSrc(bundle.runs[key].variants["20"].thumbnails[2]),
    );
    expect(app.store.get().timestep).toBe(2);
  });

  it("rejects scales that are not bundle variants", () => {
    expect(() => app.store.setScale(3)).toThrow(RangeError);
  });
});

describe("comparison view", () => {
  it("shows coincident step-0 markers for paired prompts", () => {
    app.store.expand("comparison");
    const view = root.querySelector('[data-view="comparison"]') as HTMLElement;
    const pair = bundle.projections[0].pair;
    const markers = pair.map(
      (key) =>
        view.querySelector(
          `circle[data-trajectory="${key}"][data-step="0"]`,
        ) as SVGCircleElement,
    );
    expect(markers[0]).not.toBeNull();
    expect(markers[1]).not.toBeNull();
    expect(markers[0].getAttribute("cx")).toBe(markers[1].getAttribute("cx"));
    expect(markers[0].getAttribute("cy")).toBe(markers[1].getAttribute("cy"));
  });

  it("draws one polyline with steps+1 markers per paired trajectory", () => {
    const view = root.querySelector('[data-view="comparison"]') as HTMLElement;
    expect(view.querySelectorAll("polyline")).toHaveLength(2);
    for (const key of bundle.projections[0].pair) {
      const markers = view.querySelectorAll(`circle[data-trajectory="${key}"]`);
      expect(markers).toHaveLength(STEPS + 1);
    }
  });

  it("highlights the keyword difference between paired prompts", () => {
    const view = root.querySelector('[data-view="comparison"]') as HTMLElement;
    const marks = view.querySelectorAll("mark.keyword-diff");
    expect(marks.length).toBeGreaterThan(0);
    const text = [...marks].map((m) => m.textContent).join(" ");
    expect(text).toContain("pixar");
  });

  it("syncs the emphasized marker with the timestep controller", () => {
    app.store.setTimestep(3);
    const view = root.querySelector('[data-view="comparison"]') as HTMLElement;
    const current = view.querySelectorAll("circle.current");
    expect(current).toHaveLength(2);
    for (const marker of current) {
      expect((marker as SVGCircleElement).dataset.step).toBe("3");
    }
  });

  it("shows both thumbnails side by side for the hovered step", () => {
    const view = root.querySelector('[data-view="comparison"]') as HTMLElement;
    const marker = view.querySelector(
      'circle[data-step="2"]',
    ) as SVGCircleElement;
    marker.dispatchEvent(new Event("mouseenter"));
    const figures = view.querySelectorAll(".hover-panel figure");
    expect(figures).toHaveLength(2);
    for (const figure of figures) {
      expect(figure.textContent).toContain("step 2");
    }
  });

  it("explains when a prompt has no partner", () => {
    const solo = bundle.prompts.find((p) => p.pair_key === null)!;
    app.store.selectPrompt(solo.key);
    const view = root.querySelector('[data-view="comparison"]') as HTMLElement;
    expect(view.textContent).toContain("no comparison partner");
    expect(view.querySelectorAll("polyline")).toHaveLength(0);
  });
});

describe("linkage view", () => {
  it("renders the similarity grid over every prompt", () => {
    app.store.expand("text_linkage");
    const table = root.querySelector(
      '[data-view="text_linkage"] table',
    ) as HTMLTableElement;
    const rows = table.querySelectorAll("tr");
    expect(rows).toHaveLength(bundle.prompts.length + 1); // header + one per prompt
  });
});

describe("text operation view", () => {
  it("aligns token chips with prompt character spans", () => {
    const prompt = bundle.prompts[0];
    const chips = root.querySelectorAll(
      '[data-view="text_ops"] .chip:not(.marker)',
    );
    expect(chips).toHaveLength(prompt.tokens.spans.length);
    prompt.tokens.spans.forEach((span, i) => {
      const expected = prompt.text.slice(span[0], span[1]);
      expect(chips[i].textContent).toContain(expected);
    });
  });
});
