import type { ExplainerBundle } from "./types";
import { scaleKey } from "./types";

export type ExpandedView =
  | "none"
  | "text_ops"
  | "text_linkage"
  | "image_ops"
  | "guidance"
  | "comparison";

export interface UiState {
  promptKey: string;
  timestep: number;
  scale: number;
  expandedView: ExpandedView;
  playing: boolean;
  hoverStep: number | null;
}

type Listener = (state: UiState) => void;

/** Single source of truth for the UI; enforces the state invariants
 * (timestep within range, scale present in the bundle, at most one
 * expanded detail view). */
export class Store {
  readonly bundle: ExplainerBundle;
  readonly maxStep: number;
  private state: UiState;
  private listeners: Listener[] = [];

  constructor(bundle: ExplainerBundle) {
    if (bundle.prompts.length === 0) {
      throw new Error("bundle has no prompts");
    }
    this.bundle = bundle;
    this.maxStep = bundle.metadata.schedule.inference_steps;
    this.state = {
      promptKey: bundle.prompts[0].key,
      timestep: 0,
      scale: bundle.metadata.default_scale,
      expandedView: "none",
      playing: false,
      hoverStep: null,
    };
  }

  get(): UiState {
    return { ...this.state };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    const snapshot = this.get();
    for (const listener of this.listeners) listener(snapshot);
  }

  selectPrompt(key: string): void {
    if (!this.bundle.prompts.some((p) => p.key === key)) {
      throw new RangeError(`unknown prompt key ${key}`);
    }
    this.state.promptKey = key;
    this.state.timestep = 0;
    this.state.hoverStep = null;
    this.emit();
  }

  setTimestep(step: number): void {
    if (!Number.isInteger(step) || step < 0 || step > this.maxStep) {
      throw new RangeError(`timestep ${step} outside [0, ${this.maxStep}]`);
    }
    this.state.timestep = step;
    this.emit();
  }

  setScale(scale: number): void {
    if (!this.bundle.metadata.guidance_scales.includes(scale)) {
      throw new RangeError(`scale ${scale} is not a bundle guidance variant`);
    }
    this.state.scale = scale;
    this.emit();
  }

  expand(view: ExpandedView): void {
    this.state.expandedView = this.state.expandedView === view ? "none" : view;
    this.emit();
  }

  setPlaying(playing: boolean): void {
    this.state.playing = playing;
    this.emit();
  }

  setHoverStep(step: number | null): void {
    this.state.hoverStep = step;
    this.emit();
  }

  /** One animation tick: advance a step, wrapping at the end. */
  tick(): void {
    this.state.timestep = this.state.timestep >= this.maxStep ? 0 : this.state.timestep + 1;
    this.emit();
  }

  currentVariant() {
    const run = this.bundle.runs[this.state.promptKey];
    return run.variants[scaleKey(this.state.scale)];
  }
}
