/** Typed fetch client for the session service. */

export interface Stimulus {
  render_seed: number;
  shape_type: string;
  shape_types: string[];
  count_range: [number, number];
  exposure_ms: [number, number];
}

export interface TaskInfo {
  kind: string;
  set_size: number;
  max_rounds: number;
  count_range?: [number, number];
  contiguous?: boolean;
  shape_types?: string[];
  exposure_ms?: [number, number];
}

export interface SessionInfo {
  session_id: string;
  stream_id: string;
  task: TaskInfo;
}

export interface DayStart {
  day_id: string;
  label_space: number[];
  stimulus: Stimulus;
  round_index: number;
}

export interface TurnReply {
  round_index: number;
  ai_set: number[];
  ai_message: string;
}

export interface OutcomeFlags {
  initial_had_truth: boolean;
  final_had_truth: boolean;
  gt_loss: boolean;
  gt_gain: boolean;
}

export interface FinalizeReply {
  day_index: number;
  ground_truth: number;
  e_ch: 0 | 1;
  e_comp: 0 | 1;
  outcome: OutcomeFlags;
  new_thresholds: { tau: number; lambda: number };
}

export interface StreamState {
  tau: number;
  lambda: number;
  epsilon: number;
  delta: number;
  eta: number;
  day_counter: number;
  cumulative_ch_errors: number;
  cumulative_comp_errors: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json();
  if (!response.ok) {
    const detail = body?.detail ?? {};
    throw new ApiError(response.status, detail.error ?? "Unknown", detail.message ?? "");
  }
  return body as T;
}

export class ServiceClient {
  constructor(private base: string) {}

  createSession(streamId: string): Promise<SessionInfo> {
    return request(this.base, `/streams/${streamId}/sessions`, { method: "POST" });
  }

  beginDay(sessionId: string): Promise<DayStart> {
    return request(this.base, `/sessions/${sessionId}/days`, {
      method: "POST",
      body: JSON.stringify({}),
    });
  }

  submitTurn(
    sessionId: string,
    set: number[],
    roundIndex: number,
    message = "",
  ): Promise<TurnReply> {
    return request(this.base, `/sessions/${sessionId}/turns`, {
      method: "POST",
      body: JSON.stringify({ set, message, round_index: roundIndex }),
    });
  }

  finalize(sessionId: string, finalSet: number[]): Promise<FinalizeReply> {
    return request(this.base, `/sessions/${sessionId}/finalize`, {
      method: "POST",
      body: JSON.stringify({ final_set: finalSet }),
    });
  }

  streamState(streamId: string): Promise<StreamState> {
    return request(this.base, `/streams/${streamId}/state`);
  }
}
