/** Thin fetch wrapper around the study server's JSON endpoints. */

import type {
  AnswerPayload,
  AnswerResponse,
  NextResponse,
  SessionInfo,
  Summary,
} from "./schema.js";

/** Non-2xx reply, carrying the server's error name and validation problems. */
export class ApiError extends Error {
  readonly status: number;
  readonly errorName: string;
  readonly problems: string[];

  constructor(status: number, errorName: string, detail: string, problems: string[]) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
    this.errorName = errorName;
    this.problems = problems;
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = null;
  }
  if (!resp.ok) {
    const rec = (body ?? {}) as Record<string, unknown>;
    const name = typeof rec.error === "string" ? rec.error : "HttpError";
    const detail = typeof rec.detail === "string" ? rec.detail : `HTTP ${resp.status}`;
    const problems = Array.isArray(rec.problems) ? rec.problems.map(String) : [];
    throw new ApiError(resp.status, name, detail, problems);
  }
  return body as T;
}

export class StudyClient {
  private readonly base: string;

  /** base is the server origin, e.g. "" when served from the same host. */
  constructor(base = "") {
    this.base = base.replace(/\/+$/, "");
  }

  async createSession(annotator: string, show = "", seed = 0): Promise<SessionInfo> {
    const params = new URLSearchParams({ annotator, show, seed: String(seed) });
    return asJson(await fetch(`${this.base}/api/session?${params}`));
  }

  async nextItem(sessionId: string): Promise<NextResponse> {
    return asJson(await fetch(`${this.base}/api/session/${sessionId}/next`));
  }

  async submitAnswer(sessionId: string, payload: AnswerPayload): Promise<AnswerResponse> {
    return asJson(
      await fetch(`${this.base}/api/session/${sessionId}/answer`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
  }

  async summary(): Promise<Summary> {
    return asJson(await fetch(`${this.base}/api/summary`));
  }
}
