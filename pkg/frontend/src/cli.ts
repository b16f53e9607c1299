#!/usr/bin/env node
/** plots <convergence|spectra|bounds|ranks> --input <csv> --output <svg> */

import { FigureKind, render } from "./figures.js";

const KINDS = ["convergence", "spectra", "bounds", "ranks"];

function usage(): never {
  console.error("usage: plots <" + KINDS.join("|") + "> --input <csv> --output <svg> [--linear-y]");
  process.exit(2);
}

export function main(argv: string[]): number {
  const [kind, ...rest] = argv;
  if (!kind || !KINDS.includes(kind)) usage();
  let input: string | undefined;
  let output: string | undefined;
  let logY: boolean | undefined;
  for (let i = 0; i < rest.length; i++) {
    if (rest[i] === "--input") input = rest[++i];
    else if (rest[i] === "--output") output = rest[++i];
    else if (rest[i] === "--linear-y") logY = false;
    else usage();
  }
  if (!input || !output) usage();
  try {
    render({ kind: kind as FigureKind, input, output, logY });
  } catch (err) {
    console.error(`plots: ${(err as Error).message}`);
    return 1;
  }
  return 0;
}

if (process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!)) {
  process.exit(main(process.argv.slice(2)));
}
