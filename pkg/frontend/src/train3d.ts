/**
 * Training loop for the volume refinement stage: plain L1 between the
 * network output and the normalized ground-truth volume, Adam, mini-batch 1.
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "node:fs";
import { l1 } from "./losses";
import { LearnedManifest, loadTensor } from "./manifest";
import { VolumeRefinementNet } from "./models";
import { restoreParams, serializeParams } from "./nn";
import { Rng } from "./rng";

export interface TrainConfig3d {
  iterations: number;
  lr: number;
  width: number;
  seed: number;
}

export const DEFAULT_TRAIN_3D: TrainConfig3d = {
  iterations: 300,
  lr: 2e-4,
  width: 8,
  seed: 0,
};

export interface RefinementSample {
  gpiSrc: Float32Array;
  gpiGen: Float32Array;
  volume: Float32Array;
  dim: number;
}

export function loadRefinementSamples(manifest: LearnedManifest): RefinementSample[] {
  if (manifest.samples.length === 0) throw new Error("no samples with GPI pairs");
  return manifest.samples.map((s) => {
    const src = loadTensor(manifest.root, s.gpi_src_path);
    const gen = loadTensor(manifest.root, s.gpi_gen_path);
    const vol = loadTensor(manifest.root, s.volume_path);
    const dim = vol.dims[0];
    for (const t of [src, gen, vol]) {
      if (t.dims.length !== 3 || t.dims.some((d) => d !== dim)) {
        throw new Error(`expected cubic ${dim}^3 tensors, got ${t.dims}`);
      }
    }
    return { gpiSrc: src.data, gpiGen: gen.data, volume: vol.data, dim };
  });
}

export interface Checkpoint3d {
  kind: "volume-refinement";
  config: TrainConfig3d;
  dim: number;
  iterations: number;
  lossCurve: { iteration: number; l1: number }[];
  evalLoss: number;
  params: number[];
}

function toVolTensor(data: Float32Array, dim: number): tf.Tensor5D {
  return tf.tensor5d(data, [1, dim, dim, dim, 1]);
}

export function refinementLoss(
  net: VolumeRefinementNet,
  sample: RefinementSample,
): number {
  return tf.tidy(() => {
    const pred = net.apply(
      toVolTensor(sample.gpiSrc, sample.dim),
      toVolTensor(sample.gpiGen, sample.dim),
    );
    return l1(pred, toVolTensor(sample.volume, sample.dim)).dataSync()[0];
  });
}

export function trainRefinement(
  samples: RefinementSample[],
  cfg: TrainConfig3d = DEFAULT_TRAIN_3D,
): { net: VolumeRefinementNet; checkpoint: Checkpoint3d } {
  if (samples.length === 0) throw new Error("no samples with GPI pairs");
  const dim = samples[0].dim;
  const net = new VolumeRefinementNet({ dim, width: cfg.width, seed: cfg.seed });
  const opt = tf.train.adam(cfg.lr);
  const rng = new Rng(cfg.seed);
  const vars = net.params();
  const lossCurve: Checkpoint3d["lossCurve"] = [];

  const tensors = samples.map((s) => ({
    a: toVolTensor(s.gpiSrc, dim),
    b: toVolTensor(s.gpiGen, dim),
    y: toVolTensor(s.volume, dim),
  }));
  for (let it = 0; it < cfg.iterations; it++) {
    const t = tensors[rng.int(tensors.length)];
    let val = 0;
    opt.minimize(
      () => {
        const loss = l1(net.apply(t.a, t.b), t.y);
        val = loss.dataSync()[0];
        return loss;
      },
      false,
      vars,
    );
    lossCurve.push({ iteration: it, l1: val });
  }
  tensors.forEach((t) => {
    t.a.dispose();
    t.b.dispose();
    t.y.dispose();
  });

  const checkpoint: Checkpoint3d = {
    kind: "volume-refinement",
    config: cfg,
    dim,
    iterations: cfg.iterations,
    lossCurve,
    evalLoss: refinementLoss(net, samples[0]),
    params: serializeParams(net.allModules()),
  };
  return { net, checkpoint };
}

export function saveCheckpoint3d(path: string, ckpt: Checkpoint3d): void {
  fs.writeFileSync(path, JSON.stringify(ckpt) + "\n");
}

export function loadCheckpoint3d(path: string): { net: VolumeRefinementNet; checkpoint: Checkpoint3d } {
  const ckpt: Checkpoint3d = JSON.parse(fs.readFileSync(path, "utf8"));
  const net = new VolumeRefinementNet({
    dim: ckpt.dim,
    width: ckpt.config.width,
    seed: ckpt.config.seed,
  });
  restoreParams(net.allModules(), ckpt.params);
  return { net, checkpoint: ckpt };
}

/** JSON loss-curve log alongside a checkpoint (framework-agnostic). */
export function saveLossLog(
  path: string,
  curve: { iteration: number }[],
): void {
  fs.writeFileSync(path, JSON.stringify(curve, null, 2) + "\n");
}
