/**
 * End-to-end composition: synthesize the dense view set from a few measured
 * projections, hand both view sets to the geometry engine CLI for
 * back-projection (file-based GTF handoff, never in-process), and refine the
 * resulting image pair into the final volume.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { readGtf, writeGtf } from "./gtf";
import { DatasetManifest, denormalize, normalize } from "./manifest";
import { ViewSynthesisNet, VolumeRefinementNet } from "./models";
import { generateViews, inputAngleSet } from "./train2d";

export { inputAngleSet };

export interface GiirOptions {
  viewModel: ViewSynthesisNet | null; // null requires stubViews
  refineNet: VolumeRefinementNet;
  manifest: DatasetManifest;
  sampleId: string;
  nInputViews: number;
  workDir: string;
  python?: string;
  /** Overrides the synthesized views (normalized units); used for stubbing. */
  stubViews?: Float32Array[];
}

export interface GiirResult {
  predNorm: Float32Array;
  truthNorm: Float32Array;
  gpiSrcNorm: Float32Array;
  gpiGenNorm: Float32Array;
  dim: number;
}

function runCli(python: string, args: string[]): void {
  try {
    execFileSync(python, ["-m", "gpitomo.cli", ...args], { stdio: "pipe" });
  } catch (e: unknown) {
    const err = e as { stderr?: Buffer };
    throw new Error(
      `geometry engine call failed (${args.join(" ")}): ` +
        (err.stderr ? err.stderr.toString() : String(e)),
    );
  }
}

export function refine(
  net: VolumeRefinementNet,
  gpiSrcNorm: Float32Array,
  gpiGenNorm: Float32Array,
  dim: number,
): Float32Array {
  return tf.tidy(() => {
    const a = tf.tensor5d(gpiSrcNorm, [1, dim, dim, dim, 1]);
    const b = tf.tensor5d(gpiGenNorm, [1, dim, dim, dim, 1]);
    return net.apply(a, b).dataSync() as Float32Array;
  });
}

export function giirReconstruct(opts: GiirOptions): GiirResult {
  const { manifest, sampleId, nInputViews, workDir } = opts;
  const python = opts.python ?? "python3";
  const sample = manifest.samples.find((s) => s.sample_id === sampleId);
  if (!sample) throw new Error(`sample ${sampleId} not in manifest`);
  fs.mkdirSync(workDir, { recursive: true });

  const proj = readGtf(path.join(manifest.root, sample.projections_path));
  const [m, h, w] = proj.dims;
  const storedAngles = (proj.metadata?.angles_deg ?? null) as number[] | null;
  if (!storedAngles || storedAngles.length !== m) {
    throw new Error(`${sample.projections_path}: missing angles_deg sidecar`);
  }

  const wanted = inputAngleSet(nInputViews);
  const hw = h * w;
  const inputs: Float32Array[] = wanted.map((a) => {
    const k = storedAngles.findIndex((s) => Math.abs(s - a) < 1e-6);
    if (k < 0) {
      throw new Error(`input angle ${a} deg not in stored view set ${storedAngles}`);
    }
    return proj.data.slice(k * hw, (k + 1) * hw);
  });

  let gen: Float32Array[];
  if (opts.stubViews) {
    if (opts.stubViews.length !== m) {
      throw new Error(`stub provides ${opts.stubViews.length} views, need ${m}`);
    }
    gen = opts.stubViews;
  } else {
    if (!opts.viewModel) throw new Error("no view model and no stub views");
    gen = generateViews(opts.viewModel, inputs, wanted, storedAngles);
  }

  // back to original units before handing off to the geometry engine
  const srcRaw = new Float32Array(nInputViews * hw);
  inputs.forEach((p, i) => srcRaw.set(denormalize(p, sample.projection_scale), i * hw));
  const genRaw = new Float32Array(m * hw);
  gen.forEach((p, i) => genRaw.set(denormalize(p, sample.projection_scale), i * hw));

  const geomPath = path.join(workDir, "geom.json");
  fs.writeFileSync(geomPath, JSON.stringify(manifest.geometry) + "\n");
  const srcPath = path.join(workDir, "src_views.gtf");
  const genPath = path.join(workDir, "gen_views.gtf");
  writeGtf(srcPath, [nInputViews, h, w], srcRaw, {
    axis_order: "view,v,u",
    angles_deg: wanted,
  });
  writeGtf(genPath, [m, h, w], genRaw, {
    axis_order: "view,v,u",
    angles_deg: storedAngles,
  });

  const gpiSrcPath = path.join(workDir, "gpi_src.gtf");
  const gpiGenPath = path.join(workDir, "gpi_gen.gtf");
  runCli(python, ["backproject", "--geometry", geomPath,
    "--projections", srcPath, "--out", gpiSrcPath]);
  runCli(python, ["backproject", "--geometry", geomPath,
    "--projections", genPath, "--out", gpiGenPath]);

  const gpiSrc = readGtf(gpiSrcPath);
  const gpiGen = readGtf(gpiGenPath);
  const dim = gpiSrc.dims[0];
  const srcNorm = normalize(gpiSrc.data).out;
  const genNorm = normalize(gpiGen.data).out;

  const predNorm = refine(opts.refineNet, srcNorm, genNorm, dim);
  const truth = readGtf(path.join(manifest.root, sample.volume_path));
  return {
    predNorm,
    truthNorm: truth.data,
    gpiSrcNorm: srcNorm,
    gpiGenNorm: genNorm,
    dim,
  };
}
