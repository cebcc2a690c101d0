/**
 * End-to-end: a scripted browser session against a locally spawned
 * service process. Requires the Python package to be installed
 * (`pip install -e ..`); run via `npm run test:e2e`.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient, type StreamState } from "../src/api.js";
import { deriveCount } from "../src/prng.js";
import { generateScene } from "../src/stimulus.js";
import { TrialController, type TrialPhase } from "../src/trial.js";

const PORT = 8700 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;
const STREAM = {
  stream_id: "e2e",
  epsilon: 0.15,
  delta: 0.3,
  eta: 0.1,
  seed: 33,
  oracle: {
    truth_mass: 0.6, concentration: 0.5, truth_kappa: 8.0, confusion_rate: 0.2,
  },
  task: {
    kind: "counting", count_range: [3, 20], set_size: 3, max_rounds: 2,
  },
};

let service: ChildProcess;
const preFinalizeBodies: unknown[] = [];

const realFetch = globalThis.fetch;
let recording = false;

function recordingFetch(input: RequestInfo | URL, init?: RequestInit) {
  return realFetch(input, init).then(async (response) => {
    if (recording && !String(input).endsWith("/finalize")) {
      preFinalizeBodies.push(await response.clone().json());
    }
    return response;
  });
}

function forbiddenKeys(payload: unknown, found: string[] = []): string[] {
  if (Array.isArray(payload)) {
    payload.forEach((v) => forbiddenKeys(v, found));
  } else if (payload && typeof payload === "object") {
    for (const [key, value] of Object.entries(payload)) {
      if (["ground_truth", "truth", "count"].includes(key)) found.push(key);
      forbiddenKeys(value, found);
    }
  }
  return found;
}

function waitForPhase(trial: TrialController, phase: TrialPhase): Promise<void> {
  return new Promise((resolve, reject) => {
    const started = Date.now();
    const poll = () => {
      if (trial.phase === phase) return resolve();
      if (Date.now() - started > 10_000) {
        return reject(new Error(`timed out waiting for phase ${phase}`));
      }
      setTimeout(poll, 20);
    };
    poll();
  });
}

async function expectedAfterUpdate(
  before: StreamState, eCh: number, eComp: number,
): Promise<{ tau: number; lambda: number }> {
  return {
    tau: Math.max(0, before.tau + before.eta * (eCh - before.epsilon)),
    lambda: Math.max(0, before.lambda + before.eta * (eComp - before.delta)),
  };
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "collabcal-e2e-"));
  service = spawn(
    "python3",
    ["-m", "collabcal.cli", "serve", "--port", String(PORT),
     "--data-dir", dataDir],
    { stdio: "ignore" },
  );
  for (let i = 0; i < 100; i++) {
    try {
      const r = await realFetch(`${BASE}/healthz`);
      if (r.ok) break;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
    if (i === 99) throw new Error("service did not come up");
  }
  const created = await realFetch(`${BASE}/streams`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(STREAM),
  });
  if (!created.ok) throw new Error("stream creation failed");
  globalThis.fetch = recordingFetch as typeof fetch;
}, 30_000);

afterAll(() => {
  globalThis.fetch = realFetch;
  service?.kill();
});

describe("scripted console session", () => {
  it("completes the 2-round protocol and advances thresholds once", async () => {
    const client = new ServiceClient(BASE);
    const before = await client.streamState("e2e");

    recording = true;
    const session = await client.createSession("e2e");
    expect(session.task.set_size).toBe(3);
    expect(session.task.exposure_ms).toEqual([1000, 500]);

    const phases: TrialPhase[] = [];
    const trial = new TrialController(
      client, session.session_id, session.task, {
        onPhase: (p) => phases.push(p),
      });
    const day = await trial.begin();

    // the renderer knows what to draw, and the guess plays off it
    const scene = generateScene(day.stimulus);
    const [lo, hi] = day.stimulus.count_range;
    expect(scene.targetCount).toBe(deriveCount(day.stimulus.render_seed, lo, hi));
    const eyeball = Math.min(Math.max(scene.targetCount - 1, lo), hi - 2);

    await waitForPhase(trial, "entering"); // after the 1000 ms exposure
    const turn1 = await trial.submitRange([eyeball, eyeball + 1, eyeball + 2]);

    await waitForPhase(trial, "entering"); // after the 500 ms re-exposure
    const turn2 = await trial.submitRange([eyeball, eyeball + 1, eyeball + 2]);
    expect(turn1.round_index).toBe(1);
    expect(turn2.round_index).toBe(2);
    expect(Array.isArray(turn1.ai_set)).toBe(true);
    expect(Array.isArray(turn2.ai_set)).toBe(true);

    recording = false;
    expect(trial.phase).toBe("finalizing");
    const reveal = await trial.finalize([eyeball, eyeball + 1, eyeball + 2]);
    expect(reveal.ground_truth).toBe(scene.targetCount);

    // ground truth never appeared in any pre-finalize payload
    expect(preFinalizeBodies.length).toBeGreaterThanOrEqual(4);
    for (const body of preFinalizeBodies) {
      expect(forbiddenKeys(body)).toEqual([]);
    }

    // exactly one projected update was applied to the stream
    const after = await client.streamState("e2e");
    const expected = await expectedAfterUpdate(before, reveal.e_ch, reveal.e_comp);
    expect(after.day_counter).toBe(before.day_counter + 1);
    expect(after.tau).toBeCloseTo(expected.tau, 12);
    expect(after.lambda).toBeCloseTo(expected.lambda, 12);
    expect(after.tau).toBeCloseTo(reveal.new_thresholds.tau, 12);

    expect(phases).toEqual([
      "viewing", "entering", "submitting", "viewing", "entering",
      "submitting", "finalizing", "revealed",
    ]);
  }, 30_000);

  it("interleaved clients yield a sequentially consistent trajectory", async () => {
    const client = new ServiceClient(BASE);
    const before = await client.streamState("e2e");

    const s1 = await client.createSession("e2e");
    const s2 = await client.createSession("e2e");
    const d1 = await client.beginDay(s1.session_id);
    const d2 = await client.beginDay(s2.session_id);
    const lo1 = d1.stimulus.count_range[0];
    const lo2 = d2.stimulus.count_range[0];
    // interleave the two sessions' turns
    await client.submitTurn(s1.session_id, [lo1, lo1 + 1, lo1 + 2], 1);
    await client.submitTurn(s2.session_id, [lo2, lo2 + 1, lo2 + 2], 1);
    await client.submitTurn(s1.session_id, [lo1, lo1 + 1, lo1 + 2], 2);
    await client.submitTurn(s2.session_id, [lo2, lo2 + 1, lo2 + 2], 2);
    const f1 = await client.finalize(s1.session_id, [lo1, lo1 + 1, lo1 + 2]);
    const f2 = await client.finalize(s2.session_id, [lo2, lo2 + 1, lo2 + 2]);

    // commit order is the sequential order the trajectory must follow
    expect(f2.day_index).toBe(f1.day_index + 1);
    const mid = await expectedAfterUpdate(before, f1.e_ch, f1.e_comp);
    const end = await expectedAfterUpdate(
      { ...before, tau: mid.tau, lambda: mid.lambda },
      f2.e_ch, f2.e_comp,
    );
    const after = await client.streamState("e2e");
    expect(after.tau).toBeCloseTo(end.tau, 12);
    expect(after.lambda).toBeCloseTo(end.lambda, 12);
    expect(after.day_counter).toBe(before.day_counter + 2);

    // and the audit endpoint still certifies every horizon
    const audit = await (await realFetch(`${BASE}/streams/e2e/audit`)).json();
    expect(audit.pass).toBe(true);
  }, 30_000);
});
