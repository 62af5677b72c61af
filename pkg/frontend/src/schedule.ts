import type { ScheduleMeta } from "./types";

/** Recompute the cumulative signal coefficients from the bundle's schedule
 * parameters so the step-arithmetic panel can show real numbers. */
export function alphaBars(meta: ScheduleMeta): number[] {
  const { train_steps, beta_start, beta_end, spacing } = meta;
  const betas: number[] = [];
  for (let t = 0; t < train_steps; t++) {
    const frac = train_steps === 1 ? 0 : t / (train_steps - 1);
    if (spacing === "scaled_linear") {
      const sq = Math.sqrt(beta_start) + frac * (Math.sqrt(beta_end) - Math.sqrt(beta_start));
      betas.push(sq * sq);
    } else {
      betas.push(beta_start + frac * (beta_end - beta_start));
    }
  }
  const bars: number[] = [];
  let product = 1.0;
  for (const beta of betas) {
    product *= 1.0 - beta;
    bars.push(product);
  }
  return bars;
}

export function inferenceTimesteps(meta: ScheduleMeta): number[] {
  const stride = meta.train_steps / meta.inference_steps;
  const out: number[] = [];
  for (let i = 0; i < meta.inference_steps; i++) {
    out.push(Math.round(stride * (meta.inference_steps - 1 - i)) + 1);
  }
  return out;
}

export interface StepArithmetic {
  trainStep: number;
  alphaBar: number;
  alphaBarPrev: number;
}

export function stepArithmetic(meta: ScheduleMeta, inferenceStep: number): StepArithmetic | null {
  if (inferenceStep >= meta.inference_steps) return null;
  const bars = alphaBars(meta);
  const timesteps = inferenceTimesteps(meta);
  const t = timesteps[inferenceStep];
  const prev =
    inferenceStep + 1 < timesteps.length ? bars[timesteps[inferenceStep + 1]] : 1.0;
  return { trainStep: t, alphaBar: bars[t], alphaBarPrev: prev };
}
