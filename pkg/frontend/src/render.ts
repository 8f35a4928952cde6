/**
 * SVG panel rendering (server-side echarts, no DOM). Three aligned panels:
 * optimal gap and consensus error on a log scale, testing accuracy linear.
 * Diverged runs carry an "aborted" marker at their truncation epoch.
 */
import * as echarts from "echarts";
import { writeFileSync } from "fs";
import { Metric, Run, Series, hasAccuracy, seriesFor } from "./runs";

export interface PanelSpec {
  metric: Metric;
  title: string;
  logY: boolean;
  suffix: string;
}

export const PANELS: PanelSpec[] = [
  { metric: "optimal_gap", title: "Optimal gap vs epochs", logY: true, suffix: "optimal-gap" },
  { metric: "test_accuracy", title: "Testing accuracy vs epochs", logY: false, suffix: "test-accuracy" },
  { metric: "consensus_error", title: "Consensus error vs epochs", logY: true, suffix: "consensus-error" },
];

function toEchartsSeries(s: Series, logY: boolean): echarts.SeriesOption {
  // a log axis cannot place nonpositive values; drop them like a semilog plot
  const pts = logY ? s.points.filter(([, v]) => v > 0) : s.points;
  const series: echarts.SeriesOption = {
    name: s.label,
    type: "line",
    showSymbol: false,
    data: pts,
  };
  if (s.truncated && pts.length > 0) {
    const last = pts[pts.length - 1];
    series.markPoint = {
      symbol: "pin",
      symbolSize: 28,
      label: { show: true, formatter: "aborted", fontSize: 9 },
      data: [{ coord: last, name: "aborted" }],
    };
  }
  return series;
}

export function renderPanel(seriesList: Series[], spec: PanelSpec,
                            width = 640, height = 420): string {
  const chart = echarts.init(null as unknown as HTMLElement, undefined, {
    renderer: "svg",
    ssr: true,
    width,
    height,
  });
  chart.setOption({
    animation: false,
    title: { text: spec.title, left: "center", textStyle: { fontSize: 13 } },
    legend: { bottom: 0, textStyle: { fontSize: 10 } },
    xAxis: { type: "value", name: "epochs", nameLocation: "middle", nameGap: 22 },
    yAxis: { type: spec.logY ? "log" : "value" },
    grid: { left: 64, right: 24, top: 40, bottom: 56 },
    series: seriesList.map((s) => toEchartsSeries(s, spec.logY)),
  });
  const svg = chart.renderToSVGString();
  chart.dispose();
  return svg;
}

export interface RenderedPanel {
  file: string;
  metric: Metric;
  seriesCount: number;
}

/**
 * Write one SVG per panel under outPrefix; the accuracy panel is omitted
 * when no run recorded accuracy values. Inputs are never modified.
 */
export function writePanels(runs: Run[], outPrefix: string): RenderedPanel[] {
  if (runs.length === 0) {
    throw new Error("at least one run directory is required");
  }
  const written: RenderedPanel[] = [];
  for (const spec of PANELS) {
    if (spec.metric === "test_accuracy" && !hasAccuracy(runs)) {
      continue;
    }
    const seriesList = runs
      .map((r) => seriesFor(r, spec.metric))
      .filter((s): s is Series => s !== null);
    const file = `${outPrefix}-${spec.suffix}.svg`;
    writeFileSync(file, renderPanel(seriesList, spec));
    written.push({ file, metric: spec.metric, seriesCount: seriesList.length });
  }
  return written;
}
