export type Span = [number, number];

export interface TokenView {
  ids: number[];
  strings: string[];
  spans: Span[];
}

export interface PromptEntry {
  key: string;
  text: string;
  pair_key: string | null;
  keywords_diff: Span[];
  tokens: TokenView;
}

export interface Variant {
  thumbnails: string[];
  final_image: string;
}

export interface Run {
  variants: Record<string, Variant>;
  latents?: string;
}

export interface Projection {
  pair: [string, string];
  polylines: Record<string, [number, number][]>;
}

export interface ScheduleMeta {
  train_steps: number;
  inference_steps: number;
  beta_start: number;
  beta_end: number;
  spacing: string;
  sampler: string;
}

export interface LinkageData {
  keys: string[];
  matrix: number[][];
}

export interface Metadata {
  seed: number;
  schedule: ScheduleMeta;
  encoder: string;
  predictor: string;
  embed_dim: number;
  default_scale: number;
  guidance_scales: number[];
  latent_shape: number[];
  projection: Record<string, number | null>;
  thumbnail: { size: number; mode: string };
  linkage?: LinkageData;
}

export interface ExplainerBundle {
  version: number;
  metadata: Metadata;
  prompts: PromptEntry[];
  runs: Record<string, Run>;
  projections: Projection[];
}

export class BundleFormatError extends Error {}

/** Structural checks on a parsed bundle document. */
export function checkBundle(doc: unknown): ExplainerBundle {
  const bundle = doc as ExplainerBundle;
  if (!bundle || typeof bundle !== "object") {
    throw new BundleFormatError("bundle is not an object");
  }
  if (bundle.version !== 1) {
    throw new BundleFormatError(`unsupported bundle version ${bundle.version}`);
  }
  for (const field of ["metadata", "prompts", "runs", "projections"] as const) {
    if (!(field in bundle)) {
      throw new BundleFormatError(`bundle is missing ${field}`);
    }
  }
  for (const prompt of bundle.prompts) {
    if (!(prompt.key in bundle.runs)) {
      throw new BundleFormatError(`no run for prompt ${prompt.key}`);
    }
  }
  return bundle;
}

export async function fetchBundle(url: string): Promise<ExplainerBundle> {
  const response = await fetch(url);
  if (!response.ok) {
    throw new BundleFormatError(`failed to fetch ${url}: ${response.status}`);
  }
  return checkBundle(await response.json());
}

export function thumbnailSrc(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

export function scaleKey(scale: number): string {
  // mirrors the engine's `%g`-style variant keys
  return String(scale);
}

export function findProjection(
  bundle: ExplainerBundle,
  key: string,
): Projection | null {
  for (const projection of bundle.projections) {
    if (projection.pair.includes(key)) return projection;
  }
  return null;
}
