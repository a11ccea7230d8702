/**
 * Minimal layer primitives over raw tf variables.
 *
 * Weights are initialized from our own deterministic PRNG instead of the
 * engine RNG, so a (seed, architecture) pair always produces bit-identical
 * parameters regardless of backend or library version.
 */

import * as tf from "@tensorflow/tfjs";
import { Rng } from "./rng";

export interface Module {
  params(): tf.Variable[];
}

function heInit(rng: Rng, shape: number[], fanIn: number): tf.Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  const vals = rng.normals(n);
  const scale = Math.sqrt(2.0 / fanIn);
  for (let i = 0; i < n; i++) vals[i] *= scale;
  return tf.tensor(vals, shape);
}

export class Dense implements Module {
  w: tf.Variable;
  b: tf.Variable;

  constructor(rng: Rng, inDim: number, outDim: number) {
    this.w = tf.variable(heInit(rng, [inDim, outDim], inDim));
    this.b = tf.variable(tf.zeros([outDim]));
  }

  apply(x: tf.Tensor2D): tf.Tensor2D {
    return tf.add(tf.matMul(x, this.w as tf.Tensor2D), this.b) as tf.Tensor2D;
  }

  params(): tf.Variable[] {
    return [this.w, this.b];
  }
}

export class Conv2d implements Module {
  w: tf.Variable;
  b: tf.Variable;

  constructor(
    rng: Rng,
    inC: number,
    outC: number,
    public kernel: number,
    public stride: number,
  ) {
    const fanIn = kernel * kernel * inC;
    this.w = tf.variable(heInit(rng, [kernel, kernel, inC, outC], fanIn));
    this.b = tf.variable(tf.zeros([outC]));
  }

  apply(x: tf.Tensor4D): tf.Tensor4D {
    const y = tf.conv2d(x, this.w as tf.Tensor4D, this.stride, "same");
    return tf.add(y, this.b) as tf.Tensor4D;
  }

  params(): tf.Variable[] {
    return [this.w, this.b];
  }
}

export class ConvT2d implements Module {
  w: tf.Variable;
  b: tf.Variable;

  constructor(
    rng: Rng,
    public inC: number,
    public outC: number,
    public kernel: number,
    public stride: number,
  ) {
    const fanIn = kernel * kernel * inC;
    this.w = tf.variable(heInit(rng, [kernel, kernel, outC, inC], fanIn));
    this.b = tf.variable(tf.zeros([outC]));
  }

  apply(x: tf.Tensor4D): tf.Tensor4D {
    const [b, h, w] = [x.shape[0], x.shape[1], x.shape[2]];
    const outShape: [number, number, number, number] = [
      b,
      h * this.stride,
      w * this.stride,
      this.outC,
    ];
    const y = tf.conv2dTranspose(x, this.w as tf.Tensor4D, outShape, this.stride, "same");
    return tf.add(y, this.b) as tf.Tensor4D;
  }

  params(): tf.Variable[] {
    return [this.w, this.b];
  }
}

export class Conv3d implements Module {
  w: tf.Variable;
  b: tf.Variable;

  constructor(
    rng: Rng,
    inC: number,
    outC: number,
    public kernel: number,
  ) {
    const fanIn = kernel * kernel * kernel * inC;
    this.w = tf.variable(heInit(rng, [kernel, kernel, kernel, inC, outC], fanIn));
    this.b = tf.variable(tf.zeros([outC]));
  }

  apply(x: tf.Tensor5D): tf.Tensor5D {
    const y = tf.conv3d(x, this.w as tf.Tensor5D, 1, "same");
    return tf.add(y, this.b) as tf.Tensor5D;
  }

  params(): tf.Variable[] {
    return [this.w, this.b];
  }
}

/** Nearest-neighbor 2x upsampling along the three spatial axes.

    Implemented as stack-then-reshape one axis at a time; high-rank tile has
    no registered gradient in the runtime. */
export function upsample3d(x: tf.Tensor5D): tf.Tensor5D {
  let y: tf.Tensor = x;
  for (let axis = 1; axis <= 3; axis++) {
    const s = y.shape.slice();
    const doubled = tf.stack([y, y], axis + 1);
    s[axis] *= 2;
    y = tf.reshape(doubled, s);
  }
  return y as tf.Tensor5D;
}

export function collectParams(modules: Module[]): tf.Variable[] {
  const out: tf.Variable[] = [];
  for (const m of modules) out.push(...m.params());
  return out;
}

/** Flatten all parameters of a module list into one Float32Array. */
export function serializeParams(modules: Module[]): number[] {
  const out: number[] = [];
  for (const v of collectParams(modules)) {
    out.push(...(v.dataSync() as Float32Array));
  }
  return out;
}

export function restoreParams(modules: Module[], flat: number[]): void {
  let at = 0;
  for (const v of collectParams(modules)) {
    const n = v.size;
    const chunk = tf.tensor(flat.slice(at, at + n), v.shape);
    v.assign(chunk);
    chunk.dispose();
    at += n;
  }
  if (at !== flat.length) {
    throw new Error(`checkpoint has ${flat.length} values, model needs ${at}`);
  }
}
