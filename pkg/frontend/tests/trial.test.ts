import { beforeEach, describe, expect, it, vi } from "vitest";

import type { DayStart, ServiceClient, TaskInfo } from "../src/api.js";
import { ApiError } from "../src/api.js";
import { TrialController, validateRange } from "../src/trial.js";

const TASK: TaskInfo = {
  kind: "counting",
  set_size: 3,
  max_rounds: 2,
  count_range: [3, 20],
};

const DAY: DayStart = {
  day_id: "trial-1",
  label_space: Array.from({ length: 18 }, (_, i) => i + 3),
  stimulus: {
    render_seed: 99,
    shape_type: "triangle",
    shape_types: ["triangle"],
    count_range: [3, 20],
    exposure_ms: [1000, 500],
  },
  round_index: 0,
};

class FakeClient {
  turns: Array<{ set: number[]; round: number }> = [];
  finalized: number[][] = [];
  failuresBeforeSuccess = 0;

  async beginDay(): Promise<DayStart> {
    return DAY;
  }

  async submitTurn(_s: string, set: number[], round: number) {
    if (this.failuresBeforeSuccess > 0) {
      this.failuresBeforeSuccess -= 1;
      throw new TypeError("network down");
    }
    const already = this.turns.find((t) => t.round === round);
    if (already) {
      // idempotent echo like the server
      return { round_index: round, ai_set: [5, 6], ai_message: "" };
    }
    this.turns.push({ set, round });
    return { round_index: round, ai_set: [5, 6], ai_message: "" };
  }

  async finalize(_s: string, finalSet: number[]) {
    this.finalized.push(finalSet);
    return {
      day_index: 1,
      ground_truth: 6,
      e_ch: 0 as const,
      e_comp: 0 as const,
      outcome: {
        initial_had_truth: true,
        final_had_truth: true,
        gt_loss: false,
        gt_gain: false,
      },
      new_thresholds: { tau: 0.0, lambda: 0.0 },
    };
  }
}

function controller(client: FakeClient, phases: string[]) {
  const pending: Array<() => void> = [];
  const trial = new TrialController(
    client as unknown as ServiceClient,
    "session-x",
    TASK,
    { onPhase: (p) => phases.push(p) },
    (fn) => pending.push(fn),
  );
  return { trial, firePending: () => pending.splice(0).forEach((fn) => fn()) };
}

describe("validateRange", () => {
  const space = DAY.label_space;

  it("accepts a contiguous in-space triple", () => {
    expect(validateRange([4, 5, 6], space, 3)).toBeNull();
  });

  it("rejects wrong sizes", () => {
    expect(validateRange([4, 5], space, 3)).toMatch(/exactly 3/);
  });

  it("rejects gaps", () => {
    expect(validateRange([4, 6, 8], space, 3)).toMatch(/contiguous/);
  });

  it("rejects out-of-space values", () => {
    expect(validateRange([19, 20, 21], space, 3)).toMatch(/within/);
  });
});

describe("TrialController", () => {
  let client: FakeClient;
  let phases: string[];

  beforeEach(() => {
    client = new FakeClient();
    phases = [];
  });

  it("walks the full two-round protocol", async () => {
    const { trial, firePending } = controller(client, phases);
    await trial.begin();
    expect(trial.phase).toBe("viewing");
    firePending(); // round-1 exposure elapses
    expect(trial.phase).toBe("entering");

    const r1 = await trial.submitRange([4, 5, 6]);
    expect(r1.ai_set).toEqual([5, 6]);
    expect(trial.phase).toBe("viewing"); // round-2 re-flash
    firePending();
    expect(trial.phase).toBe("entering");

    await trial.submitRange([5, 6, 7]);
    expect(trial.phase).toBe("finalizing"); // final assessment entry

    const reveal = await trial.finalize([5, 6, 7]);
    expect(reveal.ground_truth).toBe(6);
    expect(trial.phase).toBe("revealed");
    expect(client.turns.map((t) => t.round)).toEqual([1, 2]);
    expect(client.finalized).toEqual([[5, 6, 7]]);
    expect(phases).toEqual([
      "viewing", "entering", "submitting", "viewing", "entering",
      "submitting", "finalizing", "revealed",
    ]);
  });

  it("blocks invalid ranges without submitting", async () => {
    const errors: string[] = [];
    const trial = new TrialController(
      client as unknown as ServiceClient, "s", TASK,
      { onError: (m) => errors.push(m) },
      (fn) => fn(),
    );
    await trial.begin();
    await expect(trial.submitRange([4, 6, 8])).rejects.toThrow(/contiguous/);
    expect(client.turns).toEqual([]);
    expect(errors[0]).toMatch(/contiguous/);
  });

  it("retries transient failures without double-submitting", async () => {
    client.failuresBeforeSuccess = 1;
    const { trial, firePending } = controller(client, phases);
    await trial.begin();
    firePending();
    const reply = await trial.submitRange([4, 5, 6]);
    expect(reply.round_index).toBe(1);
    expect(client.turns.length).toBe(1);
  });

  it("does not retry protocol rejections", async () => {
    const { trial, firePending } = controller(client, phases);
    await trial.begin();
    firePending();
    const spy = vi
      .spyOn(client, "submitTurn")
      .mockRejectedValue(new ApiError(422, "SetShape", "bad"));
    await expect(trial.submitRange([4, 5, 6])).rejects.toThrow();
    expect(spy).toHaveBeenCalledTimes(1);
  });

  it("refuses ranges outside the entering phase", async () => {
    const { trial } = controller(client, phases);
    await trial.begin(); // still viewing
    await expect(trial.submitRange([4, 5, 6])).rejects.toThrow(/not accepting/);
  });
});
