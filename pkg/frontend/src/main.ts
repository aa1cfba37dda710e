/**
 * Page wiring: renders the client status panel and the volunteer controls
 * (pause/resume, retry after a failed config fetch, reload when the
 * experiment ends).
 */

import { VolunteerClient, type ClientStatus } from "./client.js";

const app = document.querySelector<HTMLDivElement>("#app");
if (!app) throw new Error("missing #app container");

app.innerHTML = `
  <h1>Donate cycles to a distributed genetic algorithm</h1>
  <p class="blurb">
    Your browser evolves bitstrings locally and trades its best individual
    with the server every few seconds. Close the tab (or pause) any time.
  </p>
  <dl class="panel">
    <dt>Status</dt><dd id="phase">starting</dd>
    <dt>Experiment</dt><dd id="experiment">-</dd>
    <dt>Generation</dt><dd id="generation">0</dd>
    <dt>Segments sent</dt><dd id="segments">0</dd>
    <dt>Best here</dt><dd id="best-local">0</dd>
    <dt>Best anywhere</dt><dd id="best-global">-</dd>
    <dt>Evaluations contributed</dt><dd id="evaluations">0</dd>
  </dl>
  <div class="controls">
    <button id="pause">Pause</button>
    <button id="retry" hidden>Retry</button>
  </div>
  <p id="error" class="error" hidden></p>
  <div id="reload-offer" class="reload" hidden>
    <p>This experiment has finished. Reload to join the next one.</p>
    <button id="reload">Reload and start over</button>
  </div>
`;

const el = (id: string) => document.getElementById(id)!;
const pauseButton = el("pause") as HTMLButtonElement;
const retryButton = el("retry") as HTMLButtonElement;

function render(status: ClientStatus): void {
  el("phase").textContent = status.paused ? `${status.phase} (paused)` : status.phase;
  el("experiment").textContent = status.experimentId === null ? "-" : `#${status.experimentId}`;
  el("generation").textContent = String(status.currentGeneration);
  el("segments").textContent = String(status.segmentsDone);
  el("best-local").textContent = String(status.bestFitnessLocal);
  el("best-global").textContent =
    status.bestFitnessGlobal === null ? "-" : String(status.bestFitnessGlobal);
  el("evaluations").textContent = String(status.evaluationsContributed);

  const error = el("error");
  error.hidden = status.error === null;
  error.textContent = status.error ?? "";
  retryButton.hidden = !(status.phase === "fetching-config" && status.error !== null);
  el("reload-offer").hidden = !status.reloadOffered;
  pauseButton.disabled = status.phase === "stopped";
  pauseButton.textContent = status.paused ? "Resume" : "Pause";
}

const client = new VolunteerClient({ onUpdate: render });

pauseButton.addEventListener("click", () => {
  if (client.status.paused) client.resume();
  else client.pause();
});
retryButton.addEventListener("click", () => {
  void client.run();
});
el("reload").addEventListener("click", () => location.reload());

void client.run();
