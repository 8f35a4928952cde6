/**
 * Run-directory loading and series extraction. A run directory is the
 * simulator CLI's output: metrics.csv plus meta.json. Loading never writes
 * anything back.
 */
import { existsSync, readFileSync } from "fs";
import { basename, join } from "path";
import { MetricsRow, readMetricsCsv } from "./csv";

export interface RunMeta {
  diverged?: boolean;
  diverged_at?: number | null;
  [key: string]: unknown;
}

export interface SeriesSpec {
  label: string;
  path: string;
}

export interface Run {
  label: string;
  path: string;
  rows: MetricsRow[];
  meta: RunMeta;
}

export type Metric = "optimal_gap" | "consensus_error" | "test_accuracy";

export interface Series {
  label: string;
  points: Array<[number, number]>;
  truncated: boolean;
  abortEpoch: number | null;
}

export function loadRun(spec: SeriesSpec): Run {
  const csvPath = join(spec.path, "metrics.csv");
  if (!existsSync(csvPath)) {
    throw new Error(`no metrics.csv under ${spec.path}`);
  }
  const rows = readMetricsCsv(csvPath);
  let meta: RunMeta = {};
  const metaPath = join(spec.path, "meta.json");
  if (existsSync(metaPath)) {
    meta = JSON.parse(readFileSync(metaPath, "utf8")) as RunMeta;
  }
  return { label: spec.label || basename(spec.path), path: spec.path, rows, meta };
}

/**
 * Extract one metric as (epoch, value) points. Non-finite values mark the
 * divergence tail and are dropped; a run flagged as diverged is truncated at
 * its last finite point and annotated with that epoch.
 */
export function seriesFor(run: Run, metric: Metric): Series | null {
  const points: Array<[number, number]> = [];
  for (const row of run.rows) {
    const v = row[metric];
    if (v === null) {
      continue;
    }
    if (!Number.isFinite(v)) {
      break; // divergence tail: truncate at the previous point
    }
    points.push([row.epoch, v]);
  }
  if (points.length === 0) {
    return null;
  }
  const truncated = Boolean(run.meta.diverged);
  return {
    label: run.label,
    points,
    truncated,
    abortEpoch: truncated ? points[points.length - 1][0] : null,
  };
}

export function hasAccuracy(runs: Run[]): boolean {
  return runs.some((r) => r.rows.some((row) => row.test_accuracy !== null));
}
