// Browser bootstrap: wires the console app to the page and starts polling.
// All behavior lives in app.ts/render.ts so it stays testable without a DOM.

import { ApiClient } from "./api.js";
import { ConsoleApp, startPolling } from "./app.js";

function readBaseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "http://127.0.0.1:8000";
}

function start(): void {
  const root = document.getElementById("console-root");
  const actorInput = document.getElementById("actor") as HTMLInputElement | null;
  if (!root) throw new Error("missing #console-root");

  const api = new ApiClient(readBaseUrl());
  const app = new ConsoleApp(api, root, (message) => window.confirm(message));

  actorInput?.addEventListener("input", () => {
    app.actor = actorInput.value.trim();
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const actionButton = target.closest<HTMLButtonElement>("button.act");
    if (actionButton && !actionButton.disabled) {
      const id = actionButton.dataset.deploymentId ?? "";
      const verdict = actionButton.dataset.verdict as "rollback" | "promote";
      void app.actOnDeployment(id, verdict);
      return;
    }
    const diagnosisLink = target.closest<HTMLAnchorElement>("a.diagnosis-link");
    if (diagnosisLink) {
      event.preventDefault();
      const alertId = diagnosisLink.getAttribute("href")?.split("/").pop() ?? "";
      void app.openDiagnosis(alertId);
      return;
    }
    const suspectRow = target.closest<HTMLTableRowElement>("tr.suspect");
    if (suspectRow?.dataset.metric) {
      app.selectMetric(suspectRow.dataset.metric);
    }
  });

  startPolling(app);
}

start();
