// Typed client for the session service REST API. Every response is
// rebuilt field by field from the raw JSON, so nothing the server might
// ever add (least of all an answer key) can leak into client state.

export type StrategyInfo = {
  name: string;
  layer: string;
  trainable: boolean;
};

export type PublicQuestion = {
  id: string;
  text: string;
  options: string[];
  difficulty: string;
  topic: string;
  position: number;
  total: number;
};

export type SessionStart = {
  sessionId: string;
  strategy: string;
  length: number;
  question: PublicQuestion;
};

export type OutcomeMark = {
  questionId: string;
  outcome: string;
};

export type SessionSummary = {
  score: number;
  total: number;
  outcomes: OutcomeMark[];
  satisfaction: number | null;
};

export type AnswerReply = {
  correct: boolean | null;
  nextQuestion: PublicQuestion | null;
  summary: SessionSummary | null;
};

export type AnswerRequest = {
  questionId: string;
  choiceIndex?: number;
  dontKnow?: boolean;
  skip?: boolean;
  elapsedMs: number;
  clickCount: number;
  satisfaction?: number;
};

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function asRecord(value: unknown): Record<string, unknown> {
  if (typeof value !== "object" || value === null) {
    throw new ApiError(0, "BadPayload", "expected a JSON object");
  }
  return value as Record<string, unknown>;
}

function readString(record: Record<string, unknown>, key: string): string {
  const value = record[key];
  if (typeof value !== "string") {
    throw new ApiError(0, "BadPayload", `missing string field ${key}`);
  }
  return value;
}

function readNumber(record: Record<string, unknown>, key: string): number {
  const value = record[key];
  if (typeof value !== "number") {
    throw new ApiError(0, "BadPayload", `missing number field ${key}`);
  }
  return value;
}

function parseQuestion(raw: unknown): PublicQuestion {
  const record = asRecord(raw);
  const options = record["options"];
  if (!Array.isArray(options) || options.some((o) => typeof o !== "string")) {
    throw new ApiError(0, "BadPayload", "options must be a string array");
  }
  return {
    id: readString(record, "id"),
    text: readString(record, "text"),
    options: options as string[],
    difficulty: readString(record, "difficulty"),
    topic: readString(record, "topic"),
    position: readNumber(record, "position"),
    total: readNumber(record, "total"),
  };
}

function parseSummary(raw: unknown): SessionSummary {
  const record = asRecord(raw);
  const outcomes = record["outcomes"];
  if (!Array.isArray(outcomes)) {
    throw new ApiError(0, "BadPayload", "summary outcomes must be an array");
  }
  return {
    score: readNumber(record, "score"),
    total: readNumber(record, "total"),
    outcomes: outcomes.map((entry) => {
      const mark = asRecord(entry);
      return {
        questionId: readString(mark, "question_id"),
        outcome: readString(mark, "outcome"),
      };
    }),
    satisfaction:
      typeof record["satisfaction"] === "number"
        ? (record["satisfaction"] as number)
        : null,
  };
}

async function errorFrom(response: Response): Promise<ApiError> {
  let code = "HttpError";
  let message = `request failed with status ${response.status}`;
  try {
    const body = asRecord(await response.json());
    const detail = body["detail"];
    if (typeof detail === "string") {
      message = detail;
    } else if (typeof detail === "object" && detail !== null) {
      const record = detail as Record<string, unknown>;
      if (typeof record["error"] === "string") code = record["error"];
      if (typeof record["message"] === "string") message = record["message"];
    }
  } catch {
    // Non-JSON error body; keep the status-based message.
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new ApiError(0, "Unreachable", `service unreachable: ${cause}`);
    }
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return response.json();
  }

  private post(path: string, body: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async health(): Promise<{ status: string; sessions: number }> {
    const record = asRecord(await this.request("/api/health"));
    return {
      status: readString(record, "status"),
      sessions: readNumber(record, "sessions"),
    };
  }

  async strategies(): Promise<StrategyInfo[]> {
    const raw = await this.request("/api/strategies");
    if (!Array.isArray(raw)) {
      throw new ApiError(0, "BadPayload", "expected a strategy array");
    }
    return raw.map((entry) => {
      const record = asRecord(entry);
      return {
        name: readString(record, "name"),
        layer: readString(record, "layer"),
        trainable: record["trainable"] === true,
      };
    });
  }

  async createSession(
    userId: string,
    topic: string,
    strategy: string,
    length?: number,
  ): Promise<SessionStart> {
    const record = asRecord(
      await this.post("/api/sessions", {
        user_id: userId,
        topic,
        strategy,
        ...(length === undefined ? {} : { length }),
      }),
    );
    return {
      sessionId: readString(record, "session_id"),
      strategy: readString(record, "strategy"),
      length: readNumber(record, "length"),
      question: parseQuestion(record["question"]),
    };
  }

  async answer(sessionId: string, req: AnswerRequest): Promise<AnswerReply> {
    const body: Record<string, unknown> = {
      question_id: req.questionId,
      elapsed_ms: req.elapsedMs,
      click_count: req.clickCount,
    };
    if (req.choiceIndex !== undefined) body["choice_index"] = req.choiceIndex;
    if (req.dontKnow) body["dont_know"] = true;
    if (req.skip) body["skip"] = true;
    if (req.satisfaction !== undefined) body["satisfaction"] = req.satisfaction;

    const record = asRecord(
      await this.post(`/api/sessions/${sessionId}/answer`, body),
    );
    const correct = record["correct"];
    return {
      correct: typeof correct === "boolean" ? correct : null,
      nextQuestion:
        record["next_question"] === undefined || record["next_question"] === null
          ? null
          : parseQuestion(record["next_question"]),
      summary:
        record["summary"] === undefined || record["summary"] === null
          ? null
          : parseSummary(record["summary"]),
    };
  }
}
