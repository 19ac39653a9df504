// Session state machine for the quiz screen. No DOM access here: the
// machine holds one tab's QuizViewState, talks to the service through an
// injected ApiClient, and measures answer times with an injected clock,
// which keeps every transition unit-testable.

import {
  AnswerReply,
  AnswerRequest,
  ApiError,
  PublicQuestion,
  SessionStart,
  SessionSummary,
  StrategyInfo,
} from "./api.js";

/** The slice of the API client the machine needs; stubbed in tests. */
export type QuizApi = {
  strategies(): Promise<StrategyInfo[]>;
  createSession(
    userId: string,
    topic: string,
    strategy: string,
    length?: number,
  ): Promise<SessionStart>;
  answer(sessionId: string, req: AnswerRequest): Promise<AnswerReply>;
};

export type Phase =
  | "boot"
  | "start"
  | "starting"
  | "question"
  | "submitting"
  | "summary"
  | "unreachable";

export type AnswerKind = "choice" | "dont_know" | "skip";

export type HistoryMark = {
  questionId: string;
  kind: AnswerKind;
  correct: boolean | null;
};

export type InlineError = {
  code: string;
  message: string;
};

export type QuizViewState = {
  phase: Phase;
  strategies: StrategyInfo[];
  error: InlineError | null;
  sessionId: string | null;
  strategy: string | null;
  length: number;
  question: PublicQuestion | null;
  selectedIndex: number | null;
  clickCount: number;
  history: HistoryMark[];
  lastFeedback: HistoryMark | null;
  summary: SessionSummary | null;
};

type Clock = () => number;
type Listener = (state: QuizViewState) => void;

const RECOVERABLE_RESET = new Set([
  "UnknownSession",
  "SessionExpired",
  "SessionFinished",
  "QuestionMismatch",
]);

export class QuizMachine {
  private readonly api: QuizApi;
  private readonly clock: Clock;
  private readonly listeners: Listener[] = [];
  private state: QuizViewState;
  private questionShownAt = 0;

  constructor(api: QuizApi, clock?: Clock) {
    this.api = api;
    this.clock = clock ?? (() => Date.now());
    this.state = {
      phase: "boot",
      strategies: [],
      error: null,
      sessionId: null,
      strategy: null,
      length: 0,
      question: null,
      selectedIndex: null,
      clickCount: 0,
      history: [],
      lastFeedback: null,
      summary: null,
    };
  }

  view(): QuizViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      const at = this.listeners.indexOf(listener);
      if (at >= 0) this.listeners.splice(at, 1);
    };
  }

  private emit(changes: Partial<QuizViewState>): void {
    this.state = { ...this.state, ...changes };
    for (const listener of [...this.listeners]) {
      listener(this.state);
    }
  }

  /** Seconds the current question has been on screen, for display. */
  elapsedSeconds(): number {
    if (this.state.phase !== "question" && this.state.phase !== "submitting") {
      return 0;
    }
    return Math.max(0, (this.clock() - this.questionShownAt) / 1000);
  }

  async loadStrategies(): Promise<void> {
    this.emit({ phase: "boot", error: null });
    try {
      const strategies = await this.api.strategies();
      this.emit({ phase: "start", strategies, error: null });
    } catch (error) {
      this.emit({ phase: "unreachable", error: toInline(error) });
    }
  }

  async start(
    userId: string,
    topic: string,
    strategy: string,
    length?: number,
  ): Promise<void> {
    if (this.state.phase !== "start") return;
    this.emit({ phase: "starting", error: null });
    try {
      const opened = await this.api.createSession(
        userId,
        topic,
        strategy,
        length,
      );
      this.emit({
        phase: "question",
        sessionId: opened.sessionId,
        strategy: opened.strategy,
        length: opened.length,
        history: [],
        summary: null,
        lastFeedback: null,
        error: null,
        ...this.renderQuestion(opened.question),
      });
    } catch (error) {
      const inline = toInline(error);
      const phase = inline.code === "Unreachable" ? "unreachable" : "start";
      this.emit({ phase, error: inline });
    }
  }

  /** An option button press: selects the option and counts the click. */
  pressOption(index: number): void {
    const question = this.state.question;
    if (this.state.phase !== "question" || question === null) return;
    if (index < 0 || index >= question.options.length) return;
    this.emit({
      selectedIndex: index,
      clickCount: this.state.clickCount + 1,
    });
  }

  submitChoice(satisfaction?: number): Promise<void> {
    if (this.state.selectedIndex === null) {
      this.emit({
        error: { code: "NoSelection", message: "Pick an option first." },
      });
      return Promise.resolve();
    }
    return this.submit("choice", { satisfaction });
  }

  submitDontKnow(satisfaction?: number): Promise<void> {
    return this.submit("dont_know", { satisfaction });
  }

  submitSkip(satisfaction?: number): Promise<void> {
    return this.submit("skip", { satisfaction });
  }

  private async submit(
    kind: AnswerKind,
    extra: { satisfaction?: number },
  ): Promise<void> {
    const { question, sessionId } = this.state;
    if (this.state.phase !== "question" || !question || !sessionId) {
      return; // Covers the double-submit window: phase is "submitting".
    }
    const elapsed = this.measureElapsed();
    this.emit({ phase: "submitting", error: null });
    try {
      const reply = await this.api.answer(sessionId, {
        questionId: question.id,
        elapsedMs: elapsed,
        clickCount: this.state.clickCount,
        ...(kind === "choice"
          ? { choiceIndex: this.state.selectedIndex ?? 0 }
          : {}),
        ...(kind === "dont_know" ? { dontKnow: true } : {}),
        ...(kind === "skip" ? { skip: true } : {}),
        ...(extra.satisfaction === undefined
          ? {}
          : { satisfaction: extra.satisfaction }),
      });
      const mark: HistoryMark = {
        questionId: question.id,
        kind,
        correct: reply.correct,
      };
      const history = [...this.state.history, mark];
      if (reply.summary !== null) {
        this.emit({
          phase: "summary",
          history,
          lastFeedback: mark,
          summary: reply.summary,
          question: null,
          selectedIndex: null,
        });
      } else if (reply.nextQuestion !== null) {
        this.emit({
          phase: "question",
          history,
          lastFeedback: mark,
          ...this.renderQuestion(reply.nextQuestion),
        });
      } else {
        this.emit({
          phase: "start",
          history,
          lastFeedback: mark,
          question: null,
          error: {
            code: "BadPayload",
            message: "service sent neither a question nor a summary",
          },
        });
      }
    } catch (error) {
      const inline = toInline(error);
      if (RECOVERABLE_RESET.has(inline.code)) {
        // The session is gone or out of step; back to the start screen.
        this.emit({
          phase: "start",
          error: inline,
          sessionId: null,
          question: null,
          selectedIndex: null,
          summary: null,
        });
      } else if (inline.code === "Unreachable") {
        this.emit({ phase: "unreachable", error: inline });
      } else {
        // Validation problems keep the question active for another try.
        this.emit({ phase: "question", error: inline });
      }
    }
  }

  /** Back to the strategy picker, keeping the loaded strategy list. */
  reset(): void {
    this.emit({
      phase: "start",
      error: null,
      sessionId: null,
      question: null,
      selectedIndex: null,
      clickCount: 0,
      history: [],
      lastFeedback: null,
      summary: null,
    });
  }

  private renderQuestion(question: PublicQuestion): Partial<QuizViewState> {
    this.questionShownAt = this.clock();
    return { question, selectedIndex: null, clickCount: 0 };
  }

  private measureElapsed(): number {
    // The injected clock should be monotonic (performance.now in the
    // browser); the floor guards against one that is not.
    return Math.max(0, Math.round(this.clock() - this.questionShownAt));
  }
}

function toInline(error: unknown): InlineError {
  if (error instanceof ApiError) {
    return { code: error.code, message: error.message };
  }
  return { code: "Unexpected", message: String(error) };
}
