// API payload shapes, mirrored one-to-one from the pipeline's JSON responses.
// The console renders these verbatim and computes nothing from them.

export interface TickWindow {
  start_tick: number;
  end_tick: number;
}

export interface PredictedAccuracy {
  point: number;
  interval_low: number;
  interval_high: number;
  method: string;
  n: number;
}

export interface AlertEvidence {
  window: TickWindow;
  predicted_accuracy: PredictedAccuracy;
  feature_psi: Record<string, number>;
  prior_tv: number;
  kpi_deltas: Record<string, number>;
  flags: Record<string, boolean>;
  thresholds: Record<string, number>;
}

export interface SuspectMetric {
  metric_name: string;
  ks_contrast: number;
  correlation: number;
  direction: string;
  annotation?: string;
}

export interface GroupSummary {
  mean: number;
  p25: number;
  p50: number;
  p75: number;
}

export interface SuspectReport {
  window: TickWindow;
  kpi_name: string;
  ranked: SuspectMetric[];
  n_good: number;
  n_bad: number;
  group_summaries: Record<string, Record<string, GroupSummary>>;
}

export interface Alert {
  id: string;
  window: TickWindow;
  kind: string;
  severity: string;
  evidence: AlertEvidence;
  annotations: string[];
  suspect_report: SuspectReport | null;
}

export interface ArmBook {
  model_id: string;
  alpha: number;
  beta: number;
  prior_alpha: number;
  prior_beta: number;
  pulls: number;
  reward_sum: number;
}

export interface Deployment {
  deployment_id: string;
  status: string;
  champion: ArmBook;
  challenger: ArmBook;
  posterior_means: Record<string, number>;
  traffic_share: Record<string, number>;
  routed_counts: Record<string, number>;
  reward_source: string;
  config: Record<string, number>;
}

export interface AccuracyPoint {
  window: TickWindow;
  predicted: PredictedAccuracy;
  actual: number | null;
}

export const TERMINAL_STATUSES = ["rolled_back", "promoted"];

export function isTerminal(deployment: Deployment): boolean {
  return TERMINAL_STATUSES.includes(deployment.status);
}
