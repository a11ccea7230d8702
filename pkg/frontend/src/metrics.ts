/**
 * Scalar quality metrics for cubic volumes, matching the geometry engine's
 * conventions: ranges from the truth argument, SSIM over uniform cubic
 * windows fully inside the array.
 */

export function psnr(pred: Float32Array, truth: Float32Array): number {
  if (pred.length !== truth.length) throw new Error("length mismatch");
  let lo = Infinity;
  let hi = -Infinity;
  let se = 0;
  for (let i = 0; i < truth.length; i++) {
    if (truth[i] < lo) lo = truth[i];
    if (truth[i] > hi) hi = truth[i];
    const d = pred[i] - truth[i];
    se += d * d;
  }
  const rmse = Math.sqrt(se / truth.length);
  if (rmse === 0) return Infinity;
  return 20 * Math.log10((hi - lo) / rmse);
}

export function ssim3d(
  pred: Float32Array,
  truth: Float32Array,
  dim: number,
  window = 7,
): number {
  if (pred.length !== dim ** 3 || truth.length !== dim ** 3) {
    throw new Error("arrays do not match dim^3");
  }
  if (dim < window) throw new Error(`dim ${dim} smaller than window ${window}`);
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of truth) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const r = hi - lo;
  const c1 = (0.01 * r) ** 2;
  const c2 = (0.03 * r) ** 2;
  const at = (z: number, y: number, x: number) => z * dim * dim + y * dim + x;
  const wn = window ** 3;
  let total = 0;
  let count = 0;
  for (let z = 0; z + window <= dim; z++) {
    for (let y = 0; y + window <= dim; y++) {
      for (let x = 0; x + window <= dim; x++) {
        let sp = 0;
        let st = 0;
        let spp = 0;
        let stt = 0;
        let spt = 0;
        for (let dz = 0; dz < window; dz++) {
          for (let dy = 0; dy < window; dy++) {
            for (let dx = 0; dx < window; dx++) {
              const p = pred[at(z + dz, y + dy, x + dx)];
              const t = truth[at(z + dz, y + dy, x + dx)];
              sp += p;
              st += t;
              spp += p * p;
              stt += t * t;
              spt += p * t;
            }
          }
        }
        const mp = sp / wn;
        const mt = st / wn;
        const vp = spp / wn - mp * mp;
        const vt = stt / wn - mt * mt;
        const cov = spt / wn - mp * mt;
        total +=
          ((2 * mp * mt + c1) * (2 * cov + c2)) /
          ((mp * mp + mt * mt + c1) * (vp + vt + c2));
        count++;
      }
    }
  }
  return total / count;
}
