/**
 * Run-length mask codec matching the server's wire format: row-major,
 * alternating run lengths, first run counting background pixels.
 */

export function rleDecode(runs: number[], height: number, width: number): Uint8Array {
  const total = height * width;
  const sum = runs.reduce((a, b) => a + b, 0);
  if (sum !== total) {
    throw new Error(`run lengths sum to ${sum}, expected ${total}`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (run < 0) throw new Error("negative run length");
    if (value === 1) out.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  return out;
}

export function rleEncode(mask: Uint8Array): number[] {
  const runs: number[] = [];
  let value = 0;
  let run = 0;
  for (const px of mask) {
    const bit = px > 0 ? 1 : 0;
    if (bit === value) {
      run += 1;
    } else {
      runs.push(run);
      value = bit;
      run = 1;
    }
  }
  runs.push(run);
  return runs;
}
