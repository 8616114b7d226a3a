import type { ApiClient } from "./api.js";
import { renderApp, type ViewState } from "./render.js";
import type { Deployment, SuspectReport } from "./types.js";
import { isTerminal } from "./types.js";

export type ConfirmFn = (message: string) => boolean;

export type ActionOutcome = "done" | "cancelled" | "busy" | "blocked";

// the app only ever assigns innerHTML, so tests can pass a plain object
export interface RenderTarget {
  innerHTML: string;
}

export class ConsoleApp {
  readonly state: ViewState = {
    alerts: [],
    deployments: [],
    accuracy: [],
    diagnosis: null,
    error: null,
    actionNotice: null,
    stale: false,
  };
  actor = "";

  private pollInFlight: Promise<void> | null = null;
  private actionsInFlight = new Set<string>();

  constructor(
    private readonly api: ApiClient,
    private readonly root: RenderTarget,
    private readonly confirmFn: ConfirmFn,
  ) {}

  // concurrent callers share one in-flight refresh
  poll(): Promise<void> {
    if (this.pollInFlight) return this.pollInFlight;
    this.pollInFlight = this.refresh().finally(() => {
      this.pollInFlight = null;
    });
    return this.pollInFlight;
  }

  private async refresh(): Promise<void> {
    try {
      const [alerts, deployments, accuracy] = await Promise.all([
        this.api.alerts(),
        this.api.deployments(),
        this.api.accuracy(),
      ]);
      this.state.alerts = alerts;
      this.state.deployments = deployments;
      this.state.accuracy = accuracy;
      this.state.error = null;
      this.state.stale = false;
    } catch (err) {
      // keep the previous data on screen but never presented as fresh
      this.state.error = `API unreachable: ${(err as Error).message}`;
      this.state.stale = true;
    }
    this.render();
  }

  async openDiagnosis(alertId: string): Promise<void> {
    let report: SuspectReport | null = null;
    try {
      report = await this.api.diagnosis(alertId);
    } catch (err) {
      this.state.error = `diagnosis fetch failed: ${(err as Error).message}`;
      this.render();
      return;
    }
    this.state.diagnosis = {
      alertId,
      report,
      metric: report?.ranked[0]?.metric_name ?? null,
    };
    this.render();
  }

  selectMetric(metricName: string): void {
    if (!this.state.diagnosis?.report) return;
    this.state.diagnosis.metric = metricName;
    this.render();
  }

  async actOnDeployment(
    id: string,
    verdict: "rollback" | "promote",
  ): Promise<ActionOutcome> {
    if (this.actionsInFlight.has(id)) return "busy"; // one mutation per card at a time
    const card = this.state.deployments.find((d) => d.deployment_id === id);
    if (!card || isTerminal(card)) return "blocked";
    if (!this.actor) {
      this.state.actionNotice = "set an operator name before acting";
      this.render();
      return "blocked";
    }
    if (!this.confirmFn(`${verdict} ${id} as ${this.actor}?`)) {
      return "cancelled";
    }
    this.actionsInFlight.add(id);
    const previousStatus = card.status;
    try {
      card.status = verdict === "rollback" ? "rolled_back" : "promoted"; // optimistic
      this.render();
      const result = await this.api.act(id, verdict, this.actor);
      if (result.ok && result.body) {
        this.replaceDeployment(result.body);
        this.state.actionNotice = `${verdict} of ${id} recorded`;
      } else {
        card.status = previousStatus;
        this.state.actionNotice = `${verdict} of ${id} rejected: ${result.reason}`;
        try {
          this.replaceDeployment(await this.api.deployment(id)); // server truth wins
        } catch {
          // reconcile fetch failed too; the reverted card stands
        }
      }
    } finally {
      this.actionsInFlight.delete(id);
      this.render();
    }
    return "done";
  }

  private replaceDeployment(fresh: Deployment): void {
    const index = this.state.deployments.findIndex(
      (d) => d.deployment_id === fresh.deployment_id,
    );
    if (index >= 0) {
      this.state.deployments[index] = fresh;
    } else {
      this.state.deployments.push(fresh);
    }
  }

  render(): void {
    this.root.innerHTML = renderApp(this.state);
  }
}

export function startPolling(app: ConsoleApp, intervalMs = 2000): () => void {
  const timer = setInterval(() => {
    void app.poll();
  }, intervalMs);
  void app.poll();
  return () => clearInterval(timer);
}
