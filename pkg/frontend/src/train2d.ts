/**
 * Training loop for the view-synthesis stage.
 *
 * Alternates a generator-side step (content/attribute encoders + generators,
 * minimizing the weighted cycle + reconstruction + adversarial objective) and
 * a discriminator-side step (ascending the adversarial term). Mini-batch
 * size 1; every random draw comes from one seeded PRNG, so runs are
 * reproducible.
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "node:fs";
import {
  DEFAULT_WEIGHTS,
  LossBreakdown,
  LossWeights,
  advTerm,
  checkWeights,
  compositeLoss,
  l1,
  nonSaturatingGenTerm,
} from "./losses";
import { DatasetManifest, loadTensor } from "./manifest";
import { ViewSynthesisNet } from "./models";
import { restoreParams, serializeParams } from "./nn";
import { Rng } from "./rng";

export interface TrainConfig2d {
  iterations: number;
  nInputViews: number;
  lrGenerator: number;
  lrDiscriminator: number;
  weights: LossWeights;
  nonSaturating: boolean;
  seed: number;
  hidden: number;
  attrDim: number;
  contentChannels: number;
}

export const DEFAULT_TRAIN_2D: TrainConfig2d = {
  iterations: 800,
  nInputViews: 2,
  lrGenerator: 1e-3,
  lrDiscriminator: 1e-3,
  weights: DEFAULT_WEIGHTS,
  nonSaturating: false,
  seed: 0,
  hidden: 8,
  attrDim: 8,
  contentChannels: 8,
};

export interface Checkpoint2d {
  kind: "view-synthesis";
  config: TrainConfig2d;
  m: number;
  height: number;
  width: number;
  iterations: number;
  lossCurve: { iteration: number; total: number; recMean: number }[];
  evalLoss: number;
  params: number[];
}

/** Measured-view angle convention of the geometry engine CLI. */
export function inputAngleSet(n: number): number[] {
  if (n < 1) throw new Error(`need at least one view, got ${n}`);
  if (n === 1) return [0];
  if (n === 2) return [0, 90];
  return Array.from({ length: n }, (_, i) => (i * 360) / n);
}

/** Per-sample training tensors: the m-view stack, channels last. */
export interface ProjectionStack {
  data: Float32Array; // h * w * m, view-major as stored
  m: number;
  height: number;
  width: number;
  angles: number[]; // degrees, one per stored view
}

export function loadTrainingStacks(manifest: DatasetManifest): ProjectionStack[] {
  const train = manifest.samples.filter((s) => s.split === "train");
  if (train.length === 0) throw new Error("empty train split");
  return train.map((s) => {
    const t = loadTensor(manifest.root, s.projections_path);
    const [m, h, w] = t.dims;
    const angles = (t.metadata?.angles_deg ?? null) as number[] | null;
    if (!angles || angles.length !== m) {
      throw new Error(`${s.projections_path}: missing angles_deg sidecar`);
    }
    return { data: t.data, m, height: h, width: w, angles };
  });
}

function stackToTensor(s: ProjectionStack): tf.Tensor4D {
  // stored (view, v, u) -> [1, v, u, view]
  const t = tf.tensor3d(s.data, [s.m, s.height, s.width]);
  const out = tf.expandDims(tf.transpose(t, [1, 2, 0]), 0) as tf.Tensor4D;
  t.dispose();
  return out;
}

/** Channels-last m-view stack where every channel holds the angularly
    nearest measured view. This is the content-encoder input both during
    training and at inference, so the two never see different statistics. */
function nearestFill(
  inputs: Float32Array[],
  inputAnglesDeg: number[],
  targetAnglesDeg: number[],
  hw: number,
): Float32Array {
  const m = targetAnglesDeg.length;
  const stackData = new Float32Array(hw * m);
  for (let j = 0; j < m; j++) {
    let best = 0;
    for (let k = 1; k < inputs.length; k++) {
      if (angDist(inputAnglesDeg[k], targetAnglesDeg[j]) <
          angDist(inputAnglesDeg[best], targetAnglesDeg[j])) {
        best = k;
      }
    }
    for (let p = 0; p < hw; p++) stackData[p * m + j] = inputs[best][p];
  }
  return stackData;
}

/** Measured-view encoder input for one training sample: the nearest-filled
    stack plus the stored indices of the measured views. */
export function encoderInput(
  s: ProjectionStack,
  nInputViews: number,
): { enc: tf.Tensor4D; inputIdx: number[] } {
  const wanted = inputAngleSet(nInputViews);
  const hw = s.height * s.width;
  const inputIdx = wanted.map((a) => {
    const k = s.angles.findIndex((x) => Math.abs(x - a) < 1e-6);
    if (k < 0) {
      throw new Error(`input angle ${a} deg not in stored view set ${s.angles}`);
    }
    return k;
  });
  const inputs = inputIdx.map((k) => s.data.slice(k * hw, (k + 1) * hw));
  const filled = nearestFill(inputs, wanted, s.angles, hw);
  return {
    enc: tf.tensor4d(filled, [1, s.height, s.width, s.m]),
    inputIdx,
  };
}

function viewSlice(stack: tf.Tensor4D, i: number): tf.Tensor4D {
  return tf.slice(stack, [0, 0, 0, i], [-1, -1, -1, 1]) as tf.Tensor4D;
}

/**
 * Full weighted objective plus its term breakdown on one sample with given
 * per-view attribute draws. Used by the generator step and by checkpoint
 * verification.
 */
export function weightedGenLoss(
  model: ViewSynthesisNet,
  encStack: tf.Tensor4D, // nearest-filled measured views, content-encoder input
  truthStack: tf.Tensor4D, // full stored stack, supplies every target
  inputIdx: number[], // stored indices of the measured views
  attrs: tf.Tensor2D[],
  weights: LossWeights,
  nonSaturating: boolean,
): { loss: tf.Scalar; breakdown: LossBreakdown } {
  const m = model.cfg.m;
  const c = model.encodeContent(encStack);

  const cycProjection: tf.Scalar[] = [];
  for (const k of inputIdx) {
    const p = viewSlice(truthStack, k);
    const a = model.encodeAttribute(k, p);
    cycProjection.push(l1(model.generate(k, c, a), p));
  }
  const fakes: tf.Tensor4D[] = [];
  const cycAttribute: tf.Scalar[] = [];
  const rec: tf.Scalar[] = [];
  const advG: tf.Scalar[] = [];
  for (let i = 0; i < m; i++) {
    const g = model.generate(i, c, attrs[i]);
    fakes.push(g);
    cycAttribute.push(l1(model.encodeAttribute(i, g), attrs[i]));
    rec.push(l1(g, viewSlice(truthStack, i)));
    const dFake = model.discriminate(i, g);
    advG.push(
      nonSaturating
        ? nonSaturatingGenTerm(dFake)
        : (tf.mean(tf.log(tf.clipByValue(tf.sub(1, dFake), 1e-7, 1))) as tf.Scalar),
    );
  }
  const cycContent = l1(model.encodeContent(tf.concat(fakes, 3) as tf.Tensor4D), c);

  const breakdown: LossBreakdown = {
    cycProjection: cycProjection.map((x) => x.dataSync()[0]),
    cycAttribute: cycAttribute.map((x) => x.dataSync()[0]),
    cycContent: cycContent.dataSync()[0],
    rec: rec.map((x) => x.dataSync()[0]),
    adv: advG.map((x) => x.dataSync()[0]),
  };
  const sum = (xs: tf.Scalar[]) => tf.addN(xs) as tf.Scalar;
  const loss = tf.addN([
    tf.mul(tf.addN([sum(cycProjection), sum(cycAttribute), cycContent]), weights.cyc),
    tf.mul(sum(rec), weights.rec),
    tf.mul(sum(advG), weights.adv),
  ]) as tf.Scalar;
  return { loss, breakdown };
}

function drawAttrs(rng: Rng, m: number, attrDim: number): tf.Tensor2D[] {
  const out: tf.Tensor2D[] = [];
  for (let i = 0; i < m; i++) {
    out.push(tf.tensor2d(rng.normals(attrDim), [1, attrDim]));
  }
  return out;
}

/** Deterministic held-loss used to verify checkpoint round trips. */
export function evalLoss(
  model: ViewSynthesisNet,
  stacks: ProjectionStack[],
  cfg: TrainConfig2d,
): number {
  return tf.tidy(() => {
    const truth = stackToTensor(stacks[0]);
    const { enc, inputIdx } = encoderInput(stacks[0], cfg.nInputViews);
    const attrs = drawAttrs(new Rng(cfg.seed ^ 0x5eed), model.cfg.m, cfg.attrDim);
    const { loss } = weightedGenLoss(
      model, enc, truth, inputIdx, attrs, cfg.weights, cfg.nonSaturating,
    );
    return loss.dataSync()[0];
  });
}

export function trainViewSynthesis(
  stacks: ProjectionStack[],
  cfg: TrainConfig2d = DEFAULT_TRAIN_2D,
): { model: ViewSynthesisNet; checkpoint: Checkpoint2d } {
  checkWeights(cfg.weights);
  if (stacks.length === 0) throw new Error("empty train split");
  const { m, height, width } = stacks[0];
  const model = new ViewSynthesisNet({
    m,
    height,
    width,
    attrDim: cfg.attrDim,
    contentChannels: cfg.contentChannels,
    hidden: cfg.hidden,
    seed: cfg.seed,
  });
  const genOpt = tf.train.adam(cfg.lrGenerator);
  const discOpt = tf.train.adam(cfg.lrDiscriminator);
  const rng = new Rng(cfg.seed);
  const genVars = model.generatorParams();
  const discVars = model.discriminatorParams();
  const lossCurve: Checkpoint2d["lossCurve"] = [];

  const tensors = stacks.map((s) => ({
    truth: stackToTensor(s),
    ...encoderInput(s, cfg.nInputViews),
  }));
  for (let it = 0; it < cfg.iterations; it++) {
    const { truth, enc, inputIdx } = tensors[rng.int(tensors.length)];
    const attrs = drawAttrs(rng, m, cfg.attrDim);

    let breakdown: LossBreakdown | null = null;
    genOpt.minimize(
      () => {
        const r = weightedGenLoss(
          model, enc, truth, inputIdx, attrs, cfg.weights, cfg.nonSaturating,
        );
        breakdown = r.breakdown;
        return r.loss;
      },
      false,
      genVars,
    );

    if (cfg.weights.adv > 0) {
      // discriminator ascends adv; fakes are constants here (no generator vars
      // in the variable list, and we recompute them outside the gradient tape)
      const fakes = tf.tidy(() => {
        const c = model.encodeContent(enc);
        return attrs.map((a, i) => tf.keep(model.generate(i, c, a)));
      });
      discOpt.minimize(
        () => {
          const terms: tf.Scalar[] = [];
          for (let i = 0; i < m; i++) {
            terms.push(
              advTerm(model.discriminate(i, fakes[i]), model.discriminate(i, viewSlice(truth, i))),
            );
          }
          return tf.neg(tf.addN(terms)) as tf.Scalar;
        },
        false,
        discVars,
      );
      fakes.forEach((f) => f.dispose());
    }

    const b = breakdown!;
    lossCurve.push({
      iteration: it,
      total: compositeLoss(b, cfg.weights),
      recMean: b.rec.reduce((a, x) => a + x, 0) / b.rec.length,
    });
    attrs.forEach((a) => a.dispose());
  }
  tensors.forEach((t) => {
    t.truth.dispose();
    t.enc.dispose();
  });

  const checkpoint: Checkpoint2d = {
    kind: "view-synthesis",
    config: cfg,
    m,
    height,
    width,
    iterations: cfg.iterations,
    lossCurve,
    evalLoss: evalLoss(model, stacks, cfg),
    params: serializeParams(model.allModules()),
  };
  return { model, checkpoint };
}

export function saveCheckpoint2d(path: string, ckpt: Checkpoint2d): void {
  fs.writeFileSync(path, JSON.stringify(ckpt) + "\n");
}

export function loadCheckpoint2d(path: string): { model: ViewSynthesisNet; checkpoint: Checkpoint2d } {
  const ckpt: Checkpoint2d = JSON.parse(fs.readFileSync(path, "utf8"));
  const model = new ViewSynthesisNet({
    m: ckpt.m,
    height: ckpt.height,
    width: ckpt.width,
    attrDim: ckpt.config.attrDim,
    contentChannels: ckpt.config.contentChannels,
    hidden: ckpt.config.hidden,
    seed: ckpt.config.seed,
  });
  restoreParams(model.allModules(), ckpt.params);
  return { model, checkpoint: ckpt };
}

/** Circular angular distance in degrees. */
function angDist(a: number, b: number): number {
  const d = Math.abs(((a - b) % 360 + 360) % 360);
  return Math.min(d, 360 - d);
}

/**
 * Synthesize all m target views from n measured ones.
 *
 * The content encoder expects an m-channel stack; missing channels are filled
 * with the angularly nearest measured view, then every target view is decoded
 * with a fixed (zero) attribute code, so the output is a deterministic
 * function of the inputs.
 */
export function generateViews(
  model: ViewSynthesisNet,
  inputs: Float32Array[], // n arrays of h*w, view order matches inputAnglesDeg
  inputAnglesDeg: number[],
  targetAnglesDeg: number[],
): Float32Array[] {
  const { m, height, width, attrDim } = model.cfg;
  if (targetAnglesDeg.length !== m) {
    throw new Error(
      `model generates ${m} views, target set has ${targetAnglesDeg.length}`,
    );
  }
  if (inputs.length !== inputAnglesDeg.length || inputs.length === 0) {
    throw new Error("inputs and input angles disagree");
  }
  return tf.tidy(() => {
    const hw = height * width;
    const stackData = nearestFill(inputs, inputAnglesDeg, targetAnglesDeg, hw);
    const stack = tf.tensor4d(stackData, [1, height, width, m]);
    const c = model.encodeContent(stack);
    const zeroAttr = tf.zeros([1, attrDim]) as tf.Tensor2D;
    const out: Float32Array[] = [];
    for (let j = 0; j < m; j++) {
      const g = model.generate(j, c, zeroAttr);
      out.push(g.dataSync() as Float32Array);
    }
    return out;
  });
}

/** Baseline: each target view is a copy of the angularly nearest input. */
export function nearestViewBaseline(
  inputs: Float32Array[],
  inputAnglesDeg: number[],
  targetAnglesDeg: number[],
): Float32Array[] {
  return targetAnglesDeg.map((t) => {
    let best = 0;
    for (let k = 1; k < inputs.length; k++) {
      if (angDist(inputAnglesDeg[k], t) < angDist(inputAnglesDeg[best], t)) best = k;
    }
    return inputs[best].slice();
  });
}
