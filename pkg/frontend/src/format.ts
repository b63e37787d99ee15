/**
 * Display rounding for values fetched from the API. These are the only
 * transformations the studio applies to distances, errors, accuracies, and
 * confidence intervals — it never recomputes them.
 */
import { AccuracyReport } from "./schemas.js";

export function formatMm(x: number): string {
  return x.toFixed(2);
}

export function formatErrorPercent(x: number): string {
  return x.toFixed(2);
}

export function formatAccuracy(x: number): string {
  return x.toFixed(4);
}

export function formatCiBound(x: number): string {
  return x.toFixed(3);
}

export function formatAccuracyDelta(x: number): string {
  return (x >= 0 ? "+" : "") + x.toFixed(4);
}

/** Same shape as the command-line report footer. */
export function formatSummaryLine(report: Pick<AccuracyReport, "n" | "mean_accuracy" | "ci95">): string {
  return (
    `n = ${report.n}, mean accuracy = ${formatAccuracy(report.mean_accuracy)}, ` +
    `95% CI = (${formatCiBound(report.ci95[0])}, ${formatCiBound(report.ci95[1])})`
  );
}
