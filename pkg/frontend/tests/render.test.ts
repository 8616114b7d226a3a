import { describe, expect, it } from "vitest";

import {
  num,
  orderAlerts,
  renderAccuracyTable,
  renderAlertFeed,
  renderApp,
  renderDeploymentCard,
  renderDiagnosisEmpty,
  renderMetricDetail,
  renderSuspectTable,
  type ViewState,
} from "../src/render";
import type {
  AccuracyPoint,
  Alert,
  Deployment,
  SuspectReport,
} from "../src/types";

import accuracyFixture from "./fixtures/accuracy.json";
import alertsFixture from "./fixtures/alerts.json";
import deploymentFixture from "./fixtures/deployment.json";
import deploymentsFixture from "./fixtures/deployments.json";
import diagnosisFixture from "./fixtures/diagnosis.json";

const alerts = alertsFixture as unknown as Alert[];
const accuracy = accuracyFixture as unknown as AccuracyPoint[];
const deployment = deploymentFixture as unknown as Deployment;
const deployments = deploymentsFixture as unknown as Deployment[];
const diagnosis = diagnosisFixture as unknown as SuspectReport;

/** Every number in a payload, in its canonical String() form. */
function collectNumbers(value: unknown, into = new Set<string>()): Set<string> {
  if (typeof value === "number") {
    into.add(String(value));
  } else if (Array.isArray(value)) {
    for (const item of value) collectNumbers(item, into);
  } else if (value && typeof value === "object") {
    for (const item of Object.values(value)) collectNumbers(item, into);
  }
  return into;
}

/** Decimal tokens that appear anywhere in rendered HTML. */
function extractDecimals(html: string): string[] {
  return html.match(/-?\d+\.\d+(?:e[+-]?\d+)?/gi) ?? [];
}

function alertIdsInOrder(html: string): string[] {
  return [...html.matchAll(/data-alert-id="([^"]+)"/g)].map((m) => m[1]);
}

function makeAlert(overrides: {
  id: string;
  severity: string;
  startTick: number;
  suspect?: SuspectReport | null;
}): Alert {
  return {
    id: overrides.id,
    window: { start_tick: overrides.startTick, end_tick: overrides.startTick + 500 },
    kind: "performance",
    severity: overrides.severity,
    evidence: {
      window: { start_tick: overrides.startTick, end_tick: overrides.startTick + 500 },
      predicted_accuracy: {
        point: 0.5,
        interval_low: 0.4,
        interval_high: 0.6,
        method: "meta_model",
        n: 500,
      },
      feature_psi: {},
      prior_tv: 0.0,
      kpi_deltas: {},
      flags: { performance_drift: true },
      thresholds: {},
    },
    annotations: [],
    suspect_report: overrides.suspect ?? null,
  };
}

describe("alert feed", () => {
  it("ranks critical above warning, newest first within a severity", () => {
    const html = renderAlertFeed(alerts);
    expect(alertIdsInOrder(html)).toEqual([
      "alert_7500_8000",
      "alert_7000_7500",
      "alert_6500_7000",
      "alert_6000_6500",
      "alert_5500_6000",
      "alert_5000_5500",
      "alert_4500_5000",
    ]);
  });

  it("puts an older critical above a newer warning", () => {
    const constructed = [
      makeAlert({ id: "newer_warning", severity: "warning", startTick: 9000 }),
      makeAlert({ id: "older_critical", severity: "critical", startTick: 100 }),
    ];
    expect(orderAlerts(constructed).map((a) => a.id)).toEqual([
      "older_critical",
      "newer_warning",
    ]);
  });

  it("shows an empty state when there are no alerts", () => {
    const html = renderAlertFeed([]);
    expect(html).toContain("no alerts");
    expect(html).not.toContain("<li");
  });

  it("links each alert with a suspect report to its diagnosis view", () => {
    const html = renderAlertFeed(alerts);
    for (const alert of alerts) {
      expect(alert.suspect_report).not.toBeNull();
      expect(html).toContain(`href="#/diagnosis/${alert.id}"`);
    }
  });

  it("omits the diagnosis link when no suspect report is attached", () => {
    const html = renderAlertFeed([
      makeAlert({ id: "bare", severity: "warning", startTick: 0, suspect: null }),
    ]);
    expect(html).not.toContain("diagnosis-link");
  });

  it("renders severity badges", () => {
    const html = renderAlertFeed(alerts);
    expect(html).toContain(`class="alert severity-critical"`);
    expect(html).toContain(`class="alert severity-warning"`);
  });

  it("renders window ticks and predicted accuracy verbatim", () => {
    const html = renderAlertFeed(alerts);
    for (const alert of alerts) {
      expect(html).toContain(`>${num(alert.window.start_tick)}</span>`);
      expect(html).toContain(`>${num(alert.window.end_tick)}</span>`);
      expect(html).toContain(
        `<span class="value">${num(alert.evidence.predicted_accuracy.point)}</span>`,
      );
    }
  });

  it("shows only numbers that exist in the alerts payload", () => {
    const allowed = collectNumbers(alerts);
    for (const token of extractDecimals(renderAlertFeed(alerts))) {
      expect(allowed, `rendered ${token} missing from fixture`).toContain(token);
    }
  });
});

describe("accuracy table", () => {
  it("renders every predicted point, interval bound, and actual verbatim", () => {
    const html = renderAccuracyTable(accuracy);
    for (const point of accuracy) {
      expect(html).toContain(`<td class="point">${num(point.predicted.point)}</td>`);
      expect(html).toContain(
        `<td class="interval-low">${num(point.predicted.interval_low)}</td>`,
      );
      expect(html).toContain(
        `<td class="interval-high">${num(point.predicted.interval_high)}</td>`,
      );
      expect(point.actual).not.toBeNull();
      expect(html).toContain(`<td class="actual">${num(point.actual as number)}</td>`);
      expect(html).toContain(`<td class="tick">${num(point.window.start_tick)}</td>`);
      expect(html).toContain(`<td class="tick">${num(point.window.end_tick)}</td>`);
    }
  });

  it("marks a missing actual instead of inventing a number", () => {
    const constructed: AccuracyPoint[] = [
      {
        window: { start_tick: 0, end_tick: 500 },
        predicted: {
          point: 0.9,
          interval_low: 0.8,
          interval_high: 0.95,
          method: "meta_model",
          n: 500,
        },
        actual: null,
      },
    ];
    const html = renderAccuracyTable(constructed);
    expect(html).toContain(`<td class="actual missing">-</td>`);
  });

  it("shows only numbers that exist in the accuracy payload", () => {
    const allowed = collectNumbers(accuracy);
    for (const token of extractDecimals(renderAccuracyTable(accuracy))) {
      expect(allowed, `rendered ${token} missing from fixture`).toContain(token);
    }
  });

  it("shows an empty state for no windows", () => {
    expect(renderAccuracyTable([])).toContain("no evaluated windows");
  });
});

describe("deployment card", () => {
  it("renders posterior means, traffic shares, and routed counts verbatim", () => {
    const html = renderDeploymentCard(deployment);
    for (const arm of ["champion", "challenger"] as const) {
      expect(html).toContain(
        `<td class="posterior-mean">${num(deployment.posterior_means[arm])}</td>`,
      );
      expect(html).toContain(
        `<td class="traffic-share">${num(deployment.traffic_share[arm])}</td>`,
      );
      expect(html).toContain(`<td class="routed">${num(deployment.routed_counts[arm])}</td>`);
    }
    expect(html).toContain(deployment.deployment_id);
    expect(html).toContain(`<span class="status">${deployment.status}</span>`);
    expect(html).toContain(deployment.reward_source);
  });

  it("enables actions only while the deployment is non-terminal", () => {
    const active = renderDeploymentCard(deployment);
    expect(active).toContain(`data-verdict="rollback"`);
    expect(active).not.toContain("disabled");

    const terminal = renderDeploymentCard({ ...deployment, status: "rolled_back" });
    const buttons = terminal.match(/<button[^>]*>/g) ?? [];
    expect(buttons).toHaveLength(2);
    for (const button of buttons) {
      expect(button).toContain("disabled");
    }
  });

  it("shows only numbers that exist in the deployment payload", () => {
    const allowed = collectNumbers(deployments);
    for (const token of extractDecimals(renderDeploymentCard(deployments[0]))) {
      expect(allowed, `rendered ${token} missing from fixture`).toContain(token);
    }
  });
});

describe("suspect table", () => {
  it("preserves the server ranking", () => {
    const html = renderSuspectTable(diagnosis);
    const order = [...html.matchAll(/data-metric="([^"]+)"/g)].map((m) => m[1]);
    expect(order).toEqual(diagnosis.ranked.map((m) => m.metric_name));
    expect(order[0]).toBe("margin");
  });

  it("renders KS, correlation, and slice sizes verbatim", () => {
    const html = renderSuspectTable(diagnosis);
    for (const metric of diagnosis.ranked) {
      expect(html).toContain(`<td class="ks">${num(metric.ks_contrast)}</td>`);
      expect(html).toContain(`<td class="correlation">${num(metric.correlation)}</td>`);
    }
    expect(html).toContain(`<span class="n-good">${num(diagnosis.n_good)}</span>`);
    expect(html).toContain(`<span class="n-bad">${num(diagnosis.n_bad)}</span>`);
  });

  it("renders a downward glyph for lower_in_bad and upward otherwise", () => {
    const html = renderSuspectTable(diagnosis);
    const lower = diagnosis.ranked.filter((m) => m.direction === "lower_in_bad");
    const higher = diagnosis.ranked.filter((m) => m.direction === "higher_in_bad");
    expect(lower.length).toBeGreaterThan(0);
    expect(higher.length).toBeGreaterThan(0);
    expect(html).toContain(`class="direction lower_in_bad">&#9660; lower in bad`);
    expect(html).toContain(`class="direction higher_in_bad">&#9650; higher in bad`);
  });

  it("shows only numbers that exist in the diagnosis payload", () => {
    const allowed = collectNumbers(diagnosis);
    const html =
      renderSuspectTable(diagnosis) + renderMetricDetail(diagnosis, "margin");
    for (const token of extractDecimals(html)) {
      expect(allowed, `rendered ${token} missing from fixture`).toContain(token);
    }
  });
});

describe("metric detail", () => {
  it("renders good and bad slice summaries verbatim", () => {
    const html = renderMetricDetail(diagnosis, "margin");
    for (const group of ["good", "bad"]) {
      const summary = diagnosis.group_summaries["margin"][group];
      expect(html).toContain(`<td class="mean">${num(summary.mean)}</td>`);
      expect(html).toContain(`<td class="p25">${num(summary.p25)}</td>`);
      expect(html).toContain(`<td class="p50">${num(summary.p50)}</td>`);
      expect(html).toContain(`<td class="p75">${num(summary.p75)}</td>`);
    }
  });

  it("shows an empty state for a metric without summaries", () => {
    expect(renderMetricDetail(diagnosis, "unknown_metric")).toContain(
      "no distribution summary",
    );
  });
});

describe("whole-page view", () => {
  function baseState(): ViewState {
    return {
      alerts,
      deployments,
      accuracy,
      diagnosis: null,
      error: null,
      actionNotice: null,
      stale: false,
    };
  }

  it("renders all sections fresh when healthy", () => {
    const html = renderApp(baseState());
    expect(html).toContain(`<main class="fresh">`);
    expect(html).toContain(`id="alerts"`);
    expect(html).toContain(`id="deployments"`);
    expect(html).toContain(`id="accuracy"`);
    expect(html).not.toContain("banner error");
  });

  it("shows an error banner and marks data stale when the API is down", () => {
    const state = { ...baseState(), error: "API unreachable: boom", stale: true };
    const html = renderApp(state);
    expect(html).toContain("API unreachable: boom");
    expect(html).toContain(`<main class="stale">`);
    expect(html).toContain("alert_7500_8000"); // old data stays visible, marked stale
  });

  it("renders the diagnosis empty state for a missing report", () => {
    const state = {
      ...baseState(),
      diagnosis: { alertId: "alert_9", report: null, metric: null },
    };
    expect(renderApp(state)).toContain("no diagnosis recorded for alert_9");
    expect(renderDiagnosisEmpty("alert_9")).toContain("alert_9");
  });
});
