/**
 * One trial of the counting task as a state machine.
 *
 * begin day -> flash the scene (round-1 exposure) -> range entry ->
 * submit -> show the AI's set -> re-flash (round-2 exposure) -> revised
 * range -> submit -> final assessment -> finalize -> reveal.
 *
 * The image is never visible while a range is being entered. Submissions
 * carry their round index so a retry after a network failure cannot
 * double-submit: the server echoes the acknowledged turn instead.
 */

import type {
  DayStart,
  FinalizeReply,
  ServiceClient,
  TaskInfo,
  TurnReply,
} from "./api.js";

export type TrialPhase =
  | "idle"
  | "viewing"
  | "entering"
  | "submitting"
  | "finalizing"
  | "revealed";

export interface RoundRecord {
  humanSet: number[];
  aiSet: number[];
}

export interface TrialHooks {
  onPhase?: (phase: TrialPhase, trial: TrialController) => void;
  onError?: (message: string) => void;
}

type Scheduler = (fn: () => void, ms: number) => void;

export function validateRange(values: number[], labelSpace: number[],
                              setSize: number): string | null {
  if (values.length !== setSize) {
    return `enter exactly ${setSize} integers`;
  }
  const sorted = [...values].sort((a, b) => a - b);
  for (let i = 1; i < sorted.length; i++) {
    if (sorted[i] - sorted[i - 1] !== 1) {
      return "the range must be contiguous";
    }
  }
  const lo = labelSpace[0];
  const hi = labelSpace[labelSpace.length - 1];
  if (sorted[0] < lo || sorted[sorted.length - 1] > hi) {
    return `the range must stay within ${lo}..${hi}`;
  }
  return null;
}

export class TrialController {
  phase: TrialPhase = "idle";
  day: DayStart | null = null;
  rounds: RoundRecord[] = [];
  reveal: FinalizeReply | null = null;
  private submitting = false;

  constructor(
    private client: ServiceClient,
    private sessionId: string,
    private task: TaskInfo,
    private hooks: TrialHooks = {},
    private schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
    private retries = 2,
  ) {}

  get roundsDone(): number {
    return this.rounds.length;
  }

  get onFinalRound(): boolean {
    return this.roundsDone >= this.task.max_rounds;
  }

  private setPhase(phase: TrialPhase): void {
    this.phase = phase;
    this.hooks.onPhase?.(phase, this);
  }

  async begin(): Promise<DayStart> {
    if (this.phase !== "idle") {
      throw new Error("trial already started");
    }
    this.day = await this.client.beginDay(this.sessionId);
    this.flash(this.day.stimulus.exposure_ms[0]);
    return this.day;
  }

  /** Show the scene for the given exposure, then switch to range entry. */
  private flash(ms: number): void {
    this.setPhase("viewing");
    this.schedule(() => this.setPhase("entering"), ms);
  }

  private async withRetries<T>(call: () => Promise<T>): Promise<T> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      try {
        return await call();
      } catch (error) {
        lastError = error;
        // API errors are protocol outcomes, not transient failures
        if ((error as { status?: number }).status !== undefined) throw error;
      }
    }
    throw lastError;
  }

  /** Submit the current round's range; resolves with the AI's set. */
  async submitRange(values: number[]): Promise<TurnReply> {
    if (!this.day || this.phase !== "entering" || this.submitting) {
      throw new Error("not accepting a range right now");
    }
    const problem = validateRange(values, this.day.label_space,
                                  this.task.set_size);
    if (problem) {
      this.hooks.onError?.(problem);
      throw new Error(problem);
    }
    this.submitting = true;
    this.setPhase("submitting");
    try {
      const reply = await this.withRetries(() =>
        this.client.submitTurn(this.sessionId, values, this.roundsDone + 1));
      this.rounds.push({ humanSet: values, aiSet: reply.ai_set });
      if (this.onFinalRound) {
        this.setPhase("finalizing");
      } else {
        this.flash(this.day.stimulus.exposure_ms[1]);
      }
      return reply;
    } finally {
      this.submitting = false;
    }
  }

  /** Submit the post-dialogue assessment and reveal the truth. */
  async finalize(values: number[]): Promise<FinalizeReply> {
    if (!this.day || this.phase !== "finalizing") {
      throw new Error("nothing to finalize");
    }
    const problem = validateRange(values, this.day.label_space,
                                  this.task.set_size);
    if (problem) {
      this.hooks.onError?.(problem);
      throw new Error(problem);
    }
    this.reveal = await this.withRetries(() =>
      this.client.finalize(this.sessionId, values));
    this.setPhase("revealed");
    return this.reveal;
  }
}
