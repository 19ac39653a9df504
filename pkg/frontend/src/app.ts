// DOM adapter: renders the machine's view state into a root element and
// forwards button presses back into it. All quiz logic lives in quiz.ts;
// this file only builds elements. The entry script (main.ts) mounts it.

import { HistoryMark, QuizMachine, QuizViewState } from "./quiz.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function markSymbol(mark: HistoryMark): string {
  if (mark.kind === "skip") return "~";
  return mark.correct ? "+" : "x";
}

function renderError(state: QuizViewState, root: HTMLElement): void {
  if (!state.error) return;
  root.appendChild(el("p", "error", state.error.message));
}

function renderBoot(root: HTMLElement): void {
  root.appendChild(el("p", "muted", "Contacting the service..."));
}

function renderUnreachable(
  state: QuizViewState,
  root: HTMLElement,
  machine: QuizMachine,
): void {
  root.appendChild(el("h2", undefined, "Service unavailable"));
  renderError(state, root);
  const retry = el("button", "primary", "Retry");
  retry.onclick = () => void machine.loadStrategies();
  root.appendChild(retry);
}

function renderStart(
  state: QuizViewState,
  root: HTMLElement,
  machine: QuizMachine,
): void {
  root.appendChild(el("h2", undefined, "Start a test"));
  renderError(state, root);

  const form = el("div", "start-form");
  const nameInput = el("input") as HTMLInputElement;
  nameInput.placeholder = "your name";
  nameInput.id = "user-input";
  const topicInput = el("input") as HTMLInputElement;
  topicInput.placeholder = "topic";
  topicInput.id = "topic-input";
  const picker = el("select") as HTMLSelectElement;
  picker.id = "strategy-picker";
  for (const strategy of state.strategies) {
    const option = el("option", undefined,
      `${strategy.name} (${strategy.layer})`) as HTMLOptionElement;
    option.value = strategy.name;
    picker.appendChild(option);
  }
  const go = el("button", "primary", "Begin");
  go.onclick = () => {
    const user = nameInput.value.trim() || "anonymous";
    const topic = topicInput.value.trim();
    void machine.start(user, topic, picker.value);
  };
  form.append(nameInput, topicInput, picker, go);
  root.appendChild(form);
}

function renderFeedback(state: QuizViewState, root: HTMLElement): void {
  const last = state.lastFeedback;
  if (!last) return;
  if (last.kind === "skip") {
    root.appendChild(el("p", "feedback muted", "Skipped."));
  } else if (last.correct) {
    root.appendChild(el("p", "feedback good", "Correct!"));
  } else {
    root.appendChild(el("p", "feedback bad", "Not quite."));
  }
}

function renderQuestion(
  state: QuizViewState,
  root: HTMLElement,
  machine: QuizMachine,
): void {
  const question = state.question;
  if (!question) return;
  const busy = state.phase === "submitting";

  renderFeedback(state, root);
  root.appendChild(
    el("p", "progress", `Question ${question.position} of ${question.total}`),
  );
  root.appendChild(el("h2", "question-text", question.text));
  renderError(state, root);

  const list = el("div", "options");
  question.options.forEach((text, index) => {
    const button = el("button", "option", text);
    if (index === state.selectedIndex) button.classList.add("selected");
    button.disabled = busy;
    button.onclick = () => machine.pressOption(index);
    list.appendChild(button);
  });
  root.appendChild(list);

  const actions = el("div", "actions");
  const submit = el("button", "primary", busy ? "..." : "Submit");
  submit.disabled = busy || state.selectedIndex === null;
  submit.onclick = () => void machine.submitChoice();
  const dontKnow = el("button", "secondary", "I don't know");
  dontKnow.disabled = busy;
  dontKnow.onclick = () => void machine.submitDontKnow();
  const skip = el("button", "ghost", "Skip");
  skip.disabled = busy;
  skip.onclick = () => void machine.submitSkip();
  actions.append(submit, dontKnow, skip);
  root.appendChild(actions);

  const timer = el("p", "timer", "0.0 s");
  timer.id = "timer";
  root.appendChild(timer);
}

function renderSummary(
  state: QuizViewState,
  root: HTMLElement,
  machine: QuizMachine,
): void {
  const summary = state.summary;
  if (!summary) return;
  root.appendChild(el("h2", undefined, "Test complete"));
  root.appendChild(
    el("p", "score", `Score: ${summary.score} / ${summary.total}`),
  );
  const list = el("ol", "marks");
  summary.outcomes.forEach((outcome, index) => {
    const mark = state.history[index];
    const symbol = mark ? markSymbol(mark) : "?";
    list.appendChild(
      el("li", `mark-${outcome.outcome}`,
        `${symbol} ${outcome.questionId}: ${outcome.outcome}`),
    );
  });
  root.appendChild(list);
  const again = el("button", "primary", "Take another test");
  again.onclick = () => machine.reset();
  root.appendChild(again);
}

/**
 * Wire a machine to a root element: every state change re-renders, and a
 * 100 ms ticker keeps the on-screen timer moving. Returns a disposer that
 * stops both.
 */
export function mount(root: HTMLElement, machine: QuizMachine): () => void {
  const render = (state: QuizViewState): void => {
    root.textContent = "";
    switch (state.phase) {
      case "boot":
        renderBoot(root);
        break;
      case "unreachable":
        renderUnreachable(state, root, machine);
        break;
      case "start":
      case "starting":
        renderStart(state, root, machine);
        break;
      case "question":
      case "submitting":
        renderQuestion(state, root, machine);
        break;
      case "summary":
        renderSummary(state, root, machine);
        break;
    }
  };

  const unsubscribe = machine.subscribe(render);
  const ticker = setInterval(() => {
    const timer = root.querySelector("#timer");
    if (timer) timer.textContent = `${machine.elapsedSeconds().toFixed(1)} s`;
  }, 100);
  render(machine.view());

  return () => {
    clearInterval(ticker);
    unsubscribe();
  };
}
