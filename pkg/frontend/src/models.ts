/**
 * The two learned stages.
 *
 * ViewSynthesisNet: a content encoder consumes the full m-view projection
 * stack and emits a spatial content code shared by all views; per-view
 * attribute encoders emit small view-specific codes; per-view generators
 * decode (content, attribute) back to a projection; per-view discriminators
 * drive the adversarial term. At inference the attribute codes are fixed
 * (zeros), so generation is a deterministic function of the inputs.
 *
 * VolumeRefinementNet: a Y-shaped 3D network with two encoder branches (one
 * per back-projected image), a shared decoder whose skip connections
 * concatenate features from both branches, and a 1x1x1 projection with tanh,
 * so outputs are strictly inside (-1, 1).
 */

import * as tf from "@tensorflow/tfjs";
import { Conv2d, Conv3d, ConvT2d, Dense, Module, collectParams, upsample3d } from "./nn";
import { Rng } from "./rng";

export interface ViewSynthesisConfig {
  m: number; // total views
  height: number;
  width: number;
  attrDim: number;
  contentChannels: number;
  hidden: number;
  seed: number;
}

export const DEFAULT_VIEW_CONFIG: Omit<ViewSynthesisConfig, "height" | "width"> = {
  m: 12,
  attrDim: 8,
  contentChannels: 8,
  hidden: 8,
  seed: 0,
};

class AttributeEncoder implements Module {
  c1: Conv2d;
  c2: Conv2d;
  fc: Dense;

  constructor(rng: Rng, hidden: number, attrDim: number) {
    this.c1 = new Conv2d(rng, 1, hidden, 3, 2);
    this.c2 = new Conv2d(rng, hidden, hidden, 3, 2);
    this.fc = new Dense(rng, hidden, attrDim);
  }

  apply(p: tf.Tensor4D): tf.Tensor2D {
    let h = tf.relu(this.c1.apply(p));
    h = tf.relu(this.c2.apply(h as tf.Tensor4D));
    const pooled = tf.mean(h, [1, 2]) as tf.Tensor2D;
    return this.fc.apply(pooled);
  }

  params(): tf.Variable[] {
    return collectParams([this.c1, this.c2, this.fc]);
  }
}

class Generator implements Module {
  mix: Conv2d;
  up1: ConvT2d;
  up2: ConvT2d;

  constructor(rng: Rng, contentChannels: number, attrDim: number, hidden: number) {
    this.mix = new Conv2d(rng, contentChannels + attrDim, hidden, 3, 1);
    this.up1 = new ConvT2d(rng, hidden, hidden, 3, 2);
    this.up2 = new ConvT2d(rng, hidden, 1, 3, 2);
  }

  apply(content: tf.Tensor4D, attr: tf.Tensor2D): tf.Tensor4D {
    const [b, h, w] = [content.shape[0], content.shape[1], content.shape[2]];
    const a = tf.tile(tf.reshape(attr, [b, 1, 1, attr.shape[1]!]), [1, h, w, 1]);
    let x = tf.concat([content, a], 3) as tf.Tensor4D;
    x = tf.relu(this.mix.apply(x)) as tf.Tensor4D;
    x = tf.relu(this.up1.apply(x)) as tf.Tensor4D;
    return tf.tanh(this.up2.apply(x)) as tf.Tensor4D;
  }

  params(): tf.Variable[] {
    return collectParams([this.mix, this.up1, this.up2]);
  }
}

class Discriminator implements Module {
  c1: Conv2d;
  c2: Conv2d;
  fc: Dense;

  constructor(rng: Rng, hidden: number) {
    this.c1 = new Conv2d(rng, 1, hidden, 3, 2);
    this.c2 = new Conv2d(rng, hidden, hidden, 3, 2);
    this.fc = new Dense(rng, hidden, 1);
  }

  apply(p: tf.Tensor4D): tf.Tensor2D {
    let h = tf.relu(this.c1.apply(p));
    h = tf.relu(this.c2.apply(h as tf.Tensor4D));
    const pooled = tf.mean(h, [1, 2]) as tf.Tensor2D;
    return tf.sigmoid(this.fc.apply(pooled)) as tf.Tensor2D;
  }

  params(): tf.Variable[] {
    return collectParams([this.c1, this.c2, this.fc]);
  }
}

export class ViewSynthesisNet {
  cfg: ViewSynthesisConfig;
  contentC1: Conv2d;
  contentC2: Conv2d;
  attrEncoders: AttributeEncoder[];
  generators: Generator[];
  discriminators: Discriminator[];

  constructor(cfg: ViewSynthesisConfig) {
    if (cfg.height % 4 !== 0 || cfg.width % 4 !== 0) {
      throw new Error(`projection dims must be multiples of 4, got ${cfg.height}x${cfg.width}`);
    }
    this.cfg = cfg;
    const rng = new Rng(cfg.seed);
    this.contentC1 = new Conv2d(rng, cfg.m, cfg.hidden, 3, 2);
    this.contentC2 = new Conv2d(rng, cfg.hidden, cfg.contentChannels, 3, 2);
    this.attrEncoders = [];
    this.generators = [];
    this.discriminators = [];
    for (let i = 0; i < cfg.m; i++) {
      this.attrEncoders.push(new AttributeEncoder(rng, cfg.hidden, cfg.attrDim));
      this.generators.push(new Generator(rng, cfg.contentChannels, cfg.attrDim, cfg.hidden));
      this.discriminators.push(new Discriminator(rng, cfg.hidden));
    }
  }

  /** stack: [batch, h, w, m] -> content code [batch, h/4, w/4, contentChannels]. */
  encodeContent(stack: tf.Tensor4D): tf.Tensor4D {
    const h = tf.relu(this.contentC1.apply(stack));
    return tf.tanh(this.contentC2.apply(h as tf.Tensor4D)) as tf.Tensor4D;
  }

  encodeAttribute(view: number, p: tf.Tensor4D): tf.Tensor2D {
    return this.attrEncoders[view].apply(p);
  }

  generate(view: number, content: tf.Tensor4D, attr: tf.Tensor2D): tf.Tensor4D {
    return this.generators[view].apply(content, attr);
  }

  discriminate(view: number, p: tf.Tensor4D): tf.Tensor2D {
    return this.discriminators[view].apply(p);
  }

  generatorParams(): tf.Variable[] {
    const mods: Module[] = [this.contentC1, this.contentC2,
      ...this.attrEncoders, ...this.generators];
    return collectParams(mods);
  }

  discriminatorParams(): tf.Variable[] {
    return collectParams(this.discriminators);
  }

  allModules(): Module[] {
    return [this.contentC1, this.contentC2, ...this.attrEncoders,
      ...this.generators, ...this.discriminators];
  }
}

export interface RefinementConfig {
  dim: number; // cubic volume side, multiple of 2
  width: number;
  seed: number;
}

export class VolumeRefinementNet {
  cfg: RefinementConfig;
  encA1: Conv3d;
  encA2: Conv3d;
  encB1: Conv3d;
  encB2: Conv3d;
  dec1: Conv3d;
  dec2: Conv3d;
  head: Conv3d;

  constructor(cfg: RefinementConfig) {
    if (cfg.dim % 2 !== 0) {
      throw new Error(`volume side must be even, got ${cfg.dim}`);
    }
    this.cfg = cfg;
    const rng = new Rng(cfg.seed);
    const w = cfg.width;
    this.encA1 = new Conv3d(rng, 1, w, 3);
    this.encA2 = new Conv3d(rng, w, w, 3);
    this.encB1 = new Conv3d(rng, 1, w, 3);
    this.encB2 = new Conv3d(rng, w, w, 3);
    this.dec1 = new Conv3d(rng, 2 * w, w, 3);
    this.dec2 = new Conv3d(rng, 3 * w, w, 3);
    this.head = new Conv3d(rng, w, 1, 1);
  }

  /** a, b: [batch, d, d, d, 1] in [-1, 1]; returns same shape in (-1, 1). */
  apply(a: tf.Tensor5D, b: tf.Tensor5D): tf.Tensor5D {
    const fa = tf.relu(this.encA1.apply(a)) as tf.Tensor5D;
    const fb = tf.relu(this.encB1.apply(b)) as tf.Tensor5D;
    const da = tf.maxPool3d(fa, 2, 2, "same");
    const db = tf.maxPool3d(fb, 2, 2, "same");
    const ga = tf.relu(this.encA2.apply(da)) as tf.Tensor5D;
    const gb = tf.relu(this.encB2.apply(db)) as tf.Tensor5D;
    let x = tf.relu(this.dec1.apply(tf.concat([ga, gb], 4) as tf.Tensor5D)) as tf.Tensor5D;
    x = upsample3d(x);
    // skip connections from both encoder branches at full resolution
    x = tf.concat([x, fa, fb], 4) as tf.Tensor5D;
    x = tf.relu(this.dec2.apply(x)) as tf.Tensor5D;
    return tf.tanh(this.head.apply(x)) as tf.Tensor5D;
  }

  allModules(): Module[] {
    return [this.encA1, this.encA2, this.encB1, this.encB2,
      this.dec1, this.dec2, this.head];
  }

  params(): tf.Variable[] {
    return collectParams(this.allModules());
  }
}
