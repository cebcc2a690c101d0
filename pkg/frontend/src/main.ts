/** DOM wiring for the counting-task console. */

import { ServiceClient } from "./api.js";
import { generateScene, renderScene } from "./stimulus.js";
import { TrialController, validateRange } from "./trial.js";

const params = new URLSearchParams(window.location.search);
const BASE = params.get("service") ?? "http://127.0.0.1:8000";
const STREAM = params.get("stream") ?? "console";
const TRIALS = Number(params.get("trials") ?? 20);

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const progressEl = document.getElementById("progress")!;
const historyEl = document.getElementById("history")!;
const rangeInput = document.getElementById("range-start") as HTMLInputElement;
const rangeLabel = document.getElementById("range-label")!;
const submitBtn = document.getElementById("submit") as HTMLButtonElement;
const nextBtn = document.getElementById("next") as HTMLButtonElement;
const errorEl = document.getElementById("error")!;

const client = new ServiceClient(BASE);
let trial: TrialController | null = null;
let trialsDone = 0;
let setSize = 3;

function rangeFromInput(): number[] {
  const start = Number(rangeInput.value);
  return Array.from({ length: setSize }, (_, i) => start + i);
}

function showError(message: string): void {
  errorEl.textContent = message;
}

function clearCanvas(): void {
  ctx.fillStyle = "#d8d4cb";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
}

function renderHistory(t: TrialController): void {
  historyEl.innerHTML = t.rounds
    .map(
      (r, i) =>
        `<li>round ${i + 1}: you ${r.humanSet.join("-")}, ` +
        `assistant {${r.aiSet.join(", ")}}</li>`,
    )
    .join("");
}

function onPhase(phase: string, t: TrialController): void {
  errorEl.textContent = "";
  renderHistory(t);
  const day = t.day!;
  if (phase === "viewing") {
    statusEl.textContent = `count the ${day.stimulus.shape_type}s!`;
    renderScene(ctx, generateScene(day.stimulus, canvas.width, canvas.height));
    submitBtn.disabled = true;
  } else if (phase === "entering") {
    clearCanvas();
    statusEl.textContent =
      `round ${t.roundsDone + 1}: enter the start of your ` +
      `${setSize}-number range`;
    submitBtn.disabled = false;
    rangeInput.focus();
  } else if (phase === "submitting") {
    statusEl.textContent = "waiting for the assistant...";
    submitBtn.disabled = true;
  } else if (phase === "finalizing") {
    statusEl.textContent =
      "final answer: enter the start of your final range";
    submitBtn.disabled = false;
  } else if (phase === "revealed") {
    const r = t.reveal!;
    statusEl.textContent =
      `the true count was ${r.ground_truth} - ` +
      (r.outcome.final_had_truth ? "your final range had it!" : "missed it.");
    renderScene(ctx, generateScene(day.stimulus, canvas.width, canvas.height));
    submitBtn.disabled = true;
    nextBtn.disabled = trialsDone >= TRIALS;
  }
  rangeLabel.textContent =
    `range = start..start+${setSize - 1}, counts ` +
    `${day.label_space[0]}..${day.label_space[day.label_space.length - 1]}`;
}

async function startTrial(): Promise<void> {
  nextBtn.disabled = true;
  const session = await client.createSession(STREAM);
  setSize = session.task.set_size;
  trial = new TrialController(client, session.session_id, session.task, {
    onPhase,
    onError: showError,
  });
  trialsDone += 1;
  progressEl.textContent = `trial ${trialsDone} of ${TRIALS}`;
  await trial.begin();
}

submitBtn.addEventListener("click", async () => {
  if (!trial || !trial.day) return;
  const values = rangeFromInput();
  const problem = validateRange(values, trial.day.label_space, setSize);
  if (problem) {
    showError(problem);
    return;
  }
  try {
    if (trial.phase === "finalizing") {
      await trial.finalize(values);
    } else {
      await trial.submitRange(values);
    }
  } catch (error) {
    showError(String(error));
  }
});

nextBtn.addEventListener("click", () => {
  startTrial().catch((error) => showError(String(error)));
});

clearCanvas();
statusEl.textContent = "press next to begin";
nextBtn.disabled = false;
