/**
 * Loss bookkeeping for the view-synthesis stage.
 *
 * The total objective is a weighted sum of cycle-consistency terms (input
 * projections through code and back, latent codes through projections and
 * back), per-view L1 reconstruction terms, and per-view adversarial terms:
 *
 *   total = w_cyc * (sum_i^n cycProjection_i + sum_i^m cycAttribute_i
 *                    + cycContent)
 *         + sum_i^m (w_rec * rec_i + w_adv * adv_i)
 *
 * The breakdown is kept as plain numbers so the composition can be audited
 * independently of any tensor framework.
 */

import * as tf from "@tensorflow/tfjs";

export interface LossWeights {
  cyc: number;
  rec: number;
  adv: number;
}

export const DEFAULT_WEIGHTS: LossWeights = { cyc: 1, rec: 20, adv: 1 };

export interface LossBreakdown {
  /** projection cycle terms, one per input view (length n) */
  cycProjection: number[];
  /** attribute-code cycle terms, one per view (length m) */
  cycAttribute: number[];
  /** content-code cycle term */
  cycContent: number;
  /** reconstruction terms, one per view (length m) */
  rec: number[];
  /** adversarial terms, one per view (length m) */
  adv: number[];
}

export function checkWeights(w: LossWeights): void {
  if (w.cyc < 0 || w.rec < 0 || w.adv < 0) {
    throw new Error(`loss weights must be >= 0, got ${JSON.stringify(w)}`);
  }
}

/** Weighted total from a breakdown; pure arithmetic. */
export function compositeLoss(b: LossBreakdown, w: LossWeights = DEFAULT_WEIGHTS): number {
  checkWeights(w);
  if (b.cycAttribute.length !== b.rec.length || b.rec.length !== b.adv.length) {
    throw new Error("breakdown per-view term counts disagree");
  }
  const sum = (xs: number[]) => xs.reduce((a, x) => a + x, 0);
  return (
    w.cyc * (sum(b.cycProjection) + sum(b.cycAttribute) + b.cycContent) +
    sum(b.rec.map((r, i) => w.rec * r + w.adv * b.adv[i]))
  );
}

/** Mean absolute error between two tensors of equal shape. */
export function l1(a: tf.Tensor, b: tf.Tensor): tf.Scalar {
  if (a.shape.join(",") !== b.shape.join(",")) {
    throw new Error(`shape mismatch ${a.shape} vs ${b.shape}`);
  }
  return tf.mean(tf.abs(tf.sub(a, b)));
}

const EPS = 1e-7;

/**
 * Adversarial term for one view: log(1 - D(fake)) + log(D(real)), the
 * quantity the discriminator ascends and the generator descends. Expects
 * discriminator outputs already squashed to (0, 1).
 */
export function advTerm(dFake: tf.Tensor, dReal: tf.Tensor): tf.Scalar {
  const a = tf.mean(tf.log(tf.clipByValue(tf.sub(1, dFake), EPS, 1)));
  const r = tf.mean(tf.log(tf.clipByValue(dReal, EPS, 1)));
  return tf.add(a, r);
}

/** Non-saturating generator objective: -log(D(fake)); optional alternative. */
export function nonSaturatingGenTerm(dFake: tf.Tensor): tf.Scalar {
  return tf.neg(tf.mean(tf.log(tf.clipByValue(dFake, EPS, 1))));
}
