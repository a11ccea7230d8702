import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";
import { loadLearnedManifest } from "../src/manifest";
import { VolumeRefinementNet } from "../src/models";
import {
  Checkpoint3d,
  RefinementSample,
  loadCheckpoint3d,
  loadRefinementSamples,
  refinementLoss,
  trainRefinement,
} from "../src/train3d";

const FIXTURES = path.join(__dirname, "fixtures");

let net: VolumeRefinementNet;
let checkpoint: Checkpoint3d;
let samples: RefinementSample[];

beforeAll(() => {
  const loaded = loadCheckpoint3d(path.join(FIXTURES, "checkpoint3d.json"));
  net = loaded.net;
  checkpoint = loaded.checkpoint;
  samples = loadRefinementSamples(
    loadLearnedManifest(path.join(FIXTURES, "learned")),
  ).slice(0, 5);
});

describe("volume refinement training", () => {
  it("reaches an L1 below 30% of the initial value on 5 samples", () => {
    const first = checkpoint.lossCurve[0].l1;
    const last = checkpoint.lossCurve[checkpoint.lossCurve.length - 1].l1;
    expect(last).toBeLessThan(0.3 * first);
  });

  it("reproduces the checkpointed loss after a save/load roundtrip", () => {
    const replay = refinementLoss(net, samples[0]);
    expect(Math.abs(replay - checkpoint.evalLoss)).toBeLessThan(1e-5);
  });

  it("keeps outputs strictly inside (-1, 1) after training", () => {
    const dim = samples[0].dim;
    const pred = tf.tidy(() => {
      const a = tf.tensor5d(samples[0].gpiSrc, [1, dim, dim, dim, 1]);
      const b = tf.tensor5d(samples[0].gpiGen, [1, dim, dim, dim, 1]);
      return net.apply(a, b).dataSync();
    });
    for (const v of pred) {
      expect(v).toBeGreaterThan(-1);
      expect(v).toBeLessThan(1);
    }
  });

  it("training is deterministic per seed", () => {
    const cfg = { iterations: 3, lr: 2e-4, width: 4, seed: 55 };
    const a = trainRefinement(samples.slice(0, 2), cfg);
    const b = trainRefinement(samples.slice(0, 2), cfg);
    expect(a.checkpoint.lossCurve).toEqual(b.checkpoint.lossCurve);
  });

  it("rejects an empty sample list", () => {
    expect(() => trainRefinement([], { iterations: 1, lr: 1e-4, width: 4, seed: 0 }))
      .toThrow(/no samples/);
  });
});
