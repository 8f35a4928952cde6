/**
 * metrics.csv reader. The header is an exact contract with the simulator;
 * anything else aborts with the offending path.
 */
import { readFileSync } from "fs";
import Papa from "papaparse";

export const EXPECTED_HEADER =
  "epoch,iteration,optimal_gap,consensus_error,test_accuracy,wall_time";

export interface MetricsRow {
  epoch: number;
  iteration: number;
  optimal_gap: number;
  consensus_error: number;
  test_accuracy: number | null;
  wall_time: number;
}

/** Python float reprs include inf/-inf/nan, which parseFloat rejects. */
function num(field: string): number {
  const s = field.trim();
  if (s === "inf") return Infinity;
  if (s === "-inf") return -Infinity;
  if (s === "nan" || s === "-nan") return NaN;
  const v = Number(s);
  if (s === "" || Number.isNaN(v)) {
    throw new Error(`unparseable numeric field: ${JSON.stringify(field)}`);
  }
  return v;
}

export function parseMetricsCsv(text: string, path: string): MetricsRow[] {
  const firstLine = text.split(/\r?\n/, 1)[0];
  if (firstLine.trim() !== EXPECTED_HEADER) {
    throw new Error(
      `header mismatch in ${path}: expected "${EXPECTED_HEADER}", got "${firstLine}"`,
    );
  }
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new Error(`CSV parse error in ${path}: ${parsed.errors[0].message}`);
  }
  return parsed.data.slice(1).map((fields) => {
    if (fields.length !== 6) {
      throw new Error(`bad row width in ${path}: ${fields.join(",")}`);
    }
    return {
      epoch: num(fields[0]),
      iteration: num(fields[1]),
      optimal_gap: num(fields[2]),
      consensus_error: num(fields[3]),
      test_accuracy: fields[4].trim() === "" ? null : num(fields[4]),
      wall_time: num(fields[5]),
    };
  });
}

export function readMetricsCsv(path: string): MetricsRow[] {
  return parseMetricsCsv(readFileSync(path, "utf8"), path);
}
