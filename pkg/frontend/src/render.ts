// Pure HTML-string views. Every numeric value is rendered with num(), which
// is String() and nothing else: no rounding, no formatting, no arithmetic.
// That keeps each displayed number byte-traceable to its API field.

import type {
  AccuracyPoint,
  Alert,
  Deployment,
  SuspectMetric,
  SuspectReport,
} from "./types.js";
import { isTerminal } from "./types.js";

export function num(value: number): string {
  return String(value);
}

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const SEVERITY_RANK: Record<string, number> = { critical: 2, warning: 1 };

// critical above warning; newest window first within a severity
export function orderAlerts(alerts: Alert[]): Alert[] {
  return [...alerts].sort(
    (a, b) =>
      (SEVERITY_RANK[b.severity] ?? 0) - (SEVERITY_RANK[a.severity] ?? 0) ||
      b.window.start_tick - a.window.start_tick,
  );
}

export function renderAlertFeed(alerts: Alert[]): string {
  if (alerts.length === 0) {
    return `<p class="empty">no alerts</p>`;
  }
  const rows = orderAlerts(alerts).map((alert) => {
    const link = alert.suspect_report
      ? `<a class="diagnosis-link" href="#/diagnosis/${esc(alert.id)}">diagnosis</a>`
      : "";
    const notes = alert.annotations
      .map((note) => `<span class="annotation">${esc(note)}</span>`)
      .join("");
    return (
      `<li class="alert severity-${esc(alert.severity)}" data-alert-id="${esc(alert.id)}">` +
      `<span class="badge">${esc(alert.severity)}</span>` +
      `<span class="alert-id">${esc(alert.id)}</span>` +
      `<span class="kind">${esc(alert.kind)}</span>` +
      `<span class="window">ticks <span class="tick">${num(alert.window.start_tick)}</span>` +
      ` to <span class="tick">${num(alert.window.end_tick)}</span></span>` +
      `<span class="predicted">predicted <span class="value">${num(
        alert.evidence.predicted_accuracy.point,
      )}</span></span>` +
      notes +
      link +
      `</li>`
    );
  });
  return `<ul class="alert-feed">${rows.join("")}</ul>`;
}

export function renderDeploymentCard(deployment: Deployment): string {
  const terminal = isTerminal(deployment);
  const arms = ["champion", "challenger"] as const;
  const armRows = arms
    .map(
      (arm) =>
        `<tr class="arm" data-arm="${arm}"><th>${arm}</th>` +
        `<td class="posterior-mean">${num(deployment.posterior_means[arm])}</td>` +
        `<td class="traffic-share">${num(deployment.traffic_share[arm])}</td>` +
        `<td class="routed">${num(deployment.routed_counts[arm])}</td></tr>`,
    )
    .join("");
  const button = (verdict: string) =>
    `<button class="act" data-verdict="${verdict}" ` +
    `data-deployment-id="${esc(deployment.deployment_id)}"${terminal ? " disabled" : ""}>` +
    `${verdict}</button>`;
  return (
    `<section class="deployment status-${esc(deployment.status)}" ` +
    `data-deployment-id="${esc(deployment.deployment_id)}">` +
    `<h3>${esc(deployment.deployment_id)}</h3>` +
    `<span class="status">${esc(deployment.status)}</span>` +
    `<span class="reward-source">reward: ${esc(deployment.reward_source)}</span>` +
    `<table class="arms"><thead><tr><th></th><th>posterior mean</th>` +
    `<th>traffic share</th><th>routed</th></tr></thead>` +
    `<tbody>${armRows}</tbody></table>` +
    button("rollback") +
    button("promote") +
    `</section>`
  );
}

export function renderDeployments(deployments: Deployment[]): string {
  if (deployments.length === 0) {
    return `<p class="empty">no deployments</p>`;
  }
  return deployments.map(renderDeploymentCard).join("");
}

export function renderAccuracyTable(points: AccuracyPoint[]): string {
  if (points.length === 0) {
    return `<p class="empty">no evaluated windows</p>`;
  }
  const rows = points
    .map((point) => {
      const actual =
        point.actual === null
          ? `<td class="actual missing">-</td>`
          : `<td class="actual">${num(point.actual)}</td>`;
      return (
        `<tr class="accuracy-row" data-start-tick="${num(point.window.start_tick)}">` +
        `<td class="tick">${num(point.window.start_tick)}</td>` +
        `<td class="tick">${num(point.window.end_tick)}</td>` +
        `<td class="interval-low">${num(point.predicted.interval_low)}</td>` +
        `<td class="point">${num(point.predicted.point)}</td>` +
        `<td class="interval-high">${num(point.predicted.interval_high)}</td>` +
        actual +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="accuracy"><thead><tr><th>from</th><th>to</th>` +
    `<th>interval low</th><th>predicted</th><th>interval high</th>` +
    `<th>actual</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

function directionGlyph(metric: SuspectMetric): string {
  const glyph = metric.direction === "lower_in_bad" ? "&#9660;" : "&#9650;";
  return `<span class="direction ${esc(metric.direction)}">${glyph} ${esc(
    metric.direction.replace(/_/g, " "),
  )}</span>`;
}

export function renderSuspectTable(report: SuspectReport): string {
  const rows = report.ranked
    .map(
      (metric) =>
        `<tr class="suspect" data-metric="${esc(metric.metric_name)}">` +
        `<td class="metric-name">${esc(metric.metric_name)}</td>` +
        `<td class="ks">${num(metric.ks_contrast)}</td>` +
        `<td class="correlation">${num(metric.correlation)}</td>` +
        `<td>${directionGlyph(metric)}</td>` +
        `${metric.annotation ? `<td class="annotation">${esc(metric.annotation)}</td>` : "<td></td>"}` +
        `</tr>`,
    )
    .join("");
  return (
    `<table class="suspects" data-kpi="${esc(report.kpi_name)}">` +
    `<caption>suspects for ${esc(report.kpi_name)}, ` +
    `<span class="n-good">${num(report.n_good)}</span> good vs ` +
    `<span class="n-bad">${num(report.n_bad)}</span> bad</caption>` +
    `<thead><tr><th>metric</th><th>KS</th><th>correlation</th>` +
    `<th>direction</th><th></th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderMetricDetail(report: SuspectReport, metricName: string): string {
  const groups = report.group_summaries[metricName];
  if (!groups) {
    return `<p class="empty">no distribution summary for ${esc(metricName)}</p>`;
  }
  const rows = ["good", "bad"]
    .filter((group) => group in groups)
    .map((group) => {
      const summary = groups[group];
      return (
        `<tr class="group-${group}"><th>${group}</th>` +
        `<td class="mean">${num(summary.mean)}</td>` +
        `<td class="p25">${num(summary.p25)}</td>` +
        `<td class="p50">${num(summary.p50)}</td>` +
        `<td class="p75">${num(summary.p75)}</td></tr>`
      );
    })
    .join("");
  return (
    `<table class="metric-detail" data-metric="${esc(metricName)}">` +
    `<caption>${esc(metricName)} by KPI slice</caption>` +
    `<thead><tr><th></th><th>mean</th><th>p25</th><th>p50</th><th>p75</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderDiagnosisEmpty(alertId: string): string {
  return `<p class="empty">no diagnosis recorded for ${esc(alertId)}</p>`;
}

export function renderErrorBanner(message: string): string {
  return `<div class="banner error">${esc(message)}</div>`;
}

export interface ViewState {
  alerts: Alert[];
  deployments: Deployment[];
  accuracy: AccuracyPoint[];
  diagnosis: { alertId: string; report: SuspectReport | null; metric: string | null } | null;
  error: string | null;
  actionNotice: string | null;
  stale: boolean;
}

export function renderApp(state: ViewState): string {
  const banner = state.error ? renderErrorBanner(state.error) : "";
  const notice = state.actionNotice
    ? `<div class="banner notice">${esc(state.actionNotice)}</div>`
    : "";
  let diagnosis = "";
  if (state.diagnosis) {
    diagnosis = state.diagnosis.report
      ? `<section id="diagnosis">` +
        renderSuspectTable(state.diagnosis.report) +
        (state.diagnosis.metric
          ? renderMetricDetail(state.diagnosis.report, state.diagnosis.metric)
          : "") +
        `</section>`
      : `<section id="diagnosis">${renderDiagnosisEmpty(state.diagnosis.alertId)}</section>`;
  }
  return (
    banner +
    notice +
    `<main class="${state.stale ? "stale" : "fresh"}">` +
    `<section id="alerts"><h2>alerts</h2>${renderAlertFeed(state.alerts)}</section>` +
    `<section id="deployments"><h2>deployments</h2>${renderDeployments(state.deployments)}</section>` +
    `<section id="accuracy"><h2>window accuracy</h2>${renderAccuracyTable(state.accuracy)}</section>` +
    diagnosis +
    `</main>`
  );
}
