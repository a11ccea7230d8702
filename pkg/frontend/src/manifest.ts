/**
 * Readers for the JSON manifests written by the geometry engine CLI:
 * the dataset manifest (per-sample normalized volumes and m-view projection
 * stacks) and the learned-stage manifest (paired normalized volume /
 * back-projected images per sample).
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { GtfTensor, readGtf } from "./gtf";

export interface ScaleRecord {
  lo: number;
  hi: number;
  degenerate: boolean;
}

export interface DatasetSample {
  sample_id: string;
  split: string;
  volume_path: string;
  projections_path: string;
  volume_scale: ScaleRecord;
  projection_scale: ScaleRecord;
  phantom_seed: number;
}

export interface DatasetManifest {
  root: string;
  geometry: Record<string, number>;
  seed: number;
  m_gen_views: number;
  samples: DatasetSample[];
}

export function loadDatasetManifest(root: string): DatasetManifest {
  const doc = JSON.parse(fs.readFileSync(path.join(root, "manifest.json"), "utf8"));
  return { root, ...doc };
}

export interface LearnedSample {
  sample_id: string;
  split: string;
  volume_path: string;
  gpi_src_path: string;
  gpi_gen_path: string;
  volume_scale: ScaleRecord;
  projection_scale: ScaleRecord;
  gpi_src_scale: ScaleRecord;
  gpi_gen_scale: ScaleRecord;
}

export interface LearnedManifest {
  root: string;
  geometry: Record<string, number>;
  n_input_views: number;
  m_gen_views: number;
  input_angles_deg: number[];
  seed: number;
  samples: LearnedSample[];
}

export function loadLearnedManifest(root: string): LearnedManifest {
  const doc = JSON.parse(
    fs.readFileSync(path.join(root, "learned_manifest.json"), "utf8"),
  );
  return { root, ...doc };
}

export function loadTensor(root: string, rel: string): GtfTensor {
  return readGtf(path.join(root, rel));
}

/** Map a [-1, 1]-normalized array back to original units. */
export function denormalize(data: Float32Array, scale: ScaleRecord): Float32Array {
  const out = new Float32Array(data.length);
  if (scale.degenerate) {
    out.fill(scale.lo);
    return out;
  }
  const half = 0.5 * (scale.hi - scale.lo);
  for (let i = 0; i < data.length; i++) out[i] = (data[i] + 1.0) * half + scale.lo;
  return out;
}

/** Min-max map onto [-1, 1]; constant input maps to zeros. */
export function normalize(data: Float32Array): { out: Float32Array; scale: ScaleRecord } {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of data) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const out = new Float32Array(data.length);
  if (lo === hi) {
    return { out, scale: { lo, hi, degenerate: true } };
  }
  const s = 2.0 / (hi - lo);
  for (let i = 0; i < data.length; i++) out[i] = (data[i] - lo) * s - 1.0;
  return { out, scale: { lo, hi, degenerate: false } };
}
