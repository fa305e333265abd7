/** Availability chart data: stacked per-month bars from a report summary.
 *
 * The input is the JSON document the platform's report tool emits
 * (`remotelab report --ledger … --json summary.json`).
 */

export interface MonthCounts {
  online: number;
  partial: number;
  offline: number;
}

export interface ReportSummary {
  experiments: Record<
    string,
    { Online: number; Partial: number; Offline: number; online_fraction: number }
  >;
  months?: Record<string, Record<string, { Online: number; Partial: number; Offline: number }>>;
  fleet_online_fraction: number;
}

export interface Bar {
  experimentId: string;
  month: string;
  counts: MonthCounts;
  totalDays: number;
  /* stacked segment heights as fractions of the tallest bar */
  onlineFrac: number;
  partialFrac: number;
  offlineFrac: number;
}

export function buildBars(summary: ReportSummary): Bar[] {
  const months = summary.months ?? {};
  const bars: Bar[] = [];
  let maxDays = 1;
  for (const [experimentId, perMonth] of Object.entries(months)) {
    for (const [month, counts] of Object.entries(perMonth)) {
      const total = counts.Online + counts.Partial + counts.Offline;
      maxDays = Math.max(maxDays, total);
      bars.push({
        experimentId,
        month,
        counts: { online: counts.Online, partial: counts.Partial, offline: counts.Offline },
        totalDays: total,
        onlineFrac: 0,
        partialFrac: 0,
        offlineFrac: 0,
      });
    }
  }
  for (const bar of bars) {
    bar.onlineFrac = bar.counts.online / maxDays;
    bar.partialFrac = bar.counts.partial / maxDays;
    bar.offlineFrac = bar.counts.offline / maxDays;
  }
  bars.sort((a, b) =>
    a.experimentId === b.experimentId
      ? a.month.localeCompare(b.month)
      : a.experimentId.localeCompare(b.experimentId),
  );
  return bars;
}

export function fleetLine(summary: ReportSummary): string {
  return `fleet online ${(summary.fleet_online_fraction * 100).toFixed(1)} %`;
}

export function experimentTotals(summary: ReportSummary): Record<string, MonthCounts> {
  const totals: Record<string, MonthCounts> = {};
  for (const [experimentId, stats] of Object.entries(summary.experiments)) {
    totals[experimentId] = {
      online: stats.Online,
      partial: stats.Partial,
      offline: stats.Offline,
    };
  }
  return totals;
}
