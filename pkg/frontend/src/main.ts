/**
 * Browser bootstrap: mount the console, wire button clicks to operator
 * commands, and keep one rendering loop alive.
 *
 * The API base defaults to port 8000 on the page's host and can be
 * overridden with ?api=http://host:port to point at any control server.
 */

import { OperatorConsole } from "./app.js";
import { HttpTransport } from "./transport.js";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  if (override !== null) return override;
  return `${window.location.protocol}//${window.location.hostname}:8000`;
}

function mount(): void {
  const root = document.getElementById("console-root");
  if (root === null) throw new Error("missing #console-root mount point");
  const transport = new HttpTransport(apiBase());
  const operator = new OperatorConsole(transport, (html) => {
    root.innerHTML = html;
  });

  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const pacing = target.closest<HTMLButtonElement>("button[data-pacing]");
    if (pacing !== null) {
      void operator.setPaused(pacing.dataset.pacing === "pause");
      return;
    }
    const button = target.closest<HTMLButtonElement>("button[data-command]");
    if (button === null) return;
    const kind = button.dataset.command as string;
    let params: Record<string, unknown> = {};
    if (button.dataset.params !== undefined) {
      params = JSON.parse(button.dataset.params) as Record<string, unknown>;
    } else if (button.dataset.paramsFrom !== undefined) {
      const select = root.querySelector<HTMLSelectElement>(`.${button.dataset.paramsFrom}`);
      if (select !== null) params = { train: select.value };
    }
    void operator.send(kind, params);
  });

  void operator.open();
}

mount();
