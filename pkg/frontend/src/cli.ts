#!/usr/bin/env node
/**
 * byzopt-plot --runs DIR [DIR...] --out FILE_PREFIX [--labels a,b,...]
 *
 * Reads metrics.csv / meta.json from each run directory (read-only) and
 * writes the figure panels as SVG files named FILE_PREFIX-<panel>.svg.
 */
import { loadRun } from "./runs";
import { writePanels } from "./render";

function usage(): never {
  console.error("usage: byzopt-plot --runs DIR [DIR...] --out FILE_PREFIX [--labels a,b,...]");
  process.exit(1);
}

export function main(argv: string[]): number {
  const runs: string[] = [];
  let out = "";
  let labels: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--runs") {
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        runs.push(argv[++i]);
      }
    } else if (arg === "--out") {
      out = argv[++i] ?? "";
    } else if (arg === "--labels") {
      labels = (argv[++i] ?? "").split(",");
    } else {
      usage();
    }
  }
  if (runs.length === 0 || !out) {
    usage();
  }
  try {
    const loaded = runs.map((path, idx) => loadRun({ path, label: labels[idx] ?? "" }));
    const written = writePanels(loaded, out);
    for (const panel of written) {
      console.log(`${panel.file} (${panel.seriesCount} series)`);
    }
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
