/**
 * End-to-end: the rendered app against the real service. Spawns the Python
 * server on a private port, mounts the production UI into a headless DOM,
 * and clicks through a full five-question quiz with one "I don't know",
 * recording every network payload to prove the answer key never crosses
 * the wire. The page origin is the service origin, as in deployment where
 * the service serves the bundle itself, so requests are same-origin.
 * @vitest-environment happy-dom
 * @vitest-environment-options {"url": "http://127.0.0.1:8731/"}
 */

import { ChildProcess, spawn } from "node:child_process";
import { existsSync } from "node:fs";
import { mkdtemp, rm, writeFile } from "node:fs/promises";
import { get } from "node:http";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { ApiClient } from "../src/api.js";
import { mount } from "../src/app.js";
import { QuizMachine } from "../src/quiz.js";

const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;
const DIST = resolve("dist");

const BANK_CSV = `id,text,opt1,opt2,opt3,opt4,correct_index,difficulty,teacher_level,keywords,topic
q01,What is 2+3?,4,5,6,7,1,basic,1,sums,arithmetic
q02,What is 7+6?,12,14,13,11,2,basic,1,sums,arithmetic
q03,What is 9-4?,5,4,6,3,0,basic,1,sums,arithmetic
q04,What is 6*7?,42,36,48,44,0,basic,2,products,arithmetic
q05,What is 8*9?,81,72,64,79,1,basic,2,products,arithmetic
q06,What is 12*12?,124,154,144,134,2,difficult,3,products,arithmetic
q07,What is 84/7?,14,12,16,13,1,difficult,3,products;sums,arithmetic
`;

const NODES_CSV = `concept_id,question_ids
addition,q01;q02;q03
multiplication,q04;q05;q06;q07
`;

const ARCS_CSV = `from,to,weight
addition,multiplication,1.0
`;

let workdir: string;
let server: ChildProcess | null = null;
let serverLog = "";

// Everything that crosses the wire, request and response alike.
const payloads: string[] = [];

// Reads each response body once and passes a rebuilt Response along, since
// the headless DOM's Response.clone() drains the original.
function recordingFetch(url: string, init?: RequestInit): Promise<Response> {
  if (init?.body) payloads.push(String(init.body));
  return fetch(url, init).then(async (response) => {
    const text = await response.text();
    payloads.push(text);
    return new Response(text, {
      status: response.status,
      headers: { "content-type": "application/json" },
    });
  });
}

// Health polling goes through node's HTTP client directly: the DOM fetch
// would log console noise for every refused connection while the server
// is still starting.
function healthOk(): Promise<boolean> {
  return new Promise((resolve) => {
    const request = get(`${BASE}/api/health`, (response) => {
      response.resume();
      resolve(response.statusCode === 200);
    });
    request.on("error", () => resolve(false));
  });
}

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await healthOk()) return;
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`service never came up; server output:\n${serverLog}`);
}

beforeAll(async () => {
  workdir = await mkdtemp(join(tmpdir(), "quiz-e2e-"));
  await writeFile(join(workdir, "bank.csv"), BANK_CSV);
  await writeFile(join(workdir, "nodes.csv"), NODES_CSV);
  await writeFile(join(workdir, "arcs.csv"), ARCS_CSV);
  const config: Record<string, unknown> = {
    bank_path: join(workdir, "bank.csv"),
    nodes_path: join(workdir, "nodes.csv"),
    arcs_path: join(workdir, "arcs.csv"),
    data_dir: join(workdir, "data"),
    port: PORT,
  };
  if (existsSync(join(DIST, "index.html"))) config["frontend_dir"] = DIST;
  await writeFile(join(workdir, "service.json"), JSON.stringify(config));

  server = spawn("learnpath", ["serve", "--config",
    join(workdir, "service.json")]);
  server.stdout?.on("data", (chunk) => {
    serverLog += String(chunk);
  });
  server.stderr?.on("data", (chunk) => {
    serverLog += String(chunk);
  });
  await waitForHealth(30000);
}, 40000);

afterAll(async () => {
  if (server) {
    server.kill("SIGTERM");
    await new Promise((resolve) => {
      server?.on("exit", resolve);
      setTimeout(resolve, 3000);
    });
  }
  await rm(workdir, { recursive: true, force: true });
});

function textOf(root: HTMLElement, selector: string): string {
  return root.querySelector(selector)?.textContent ?? "";
}

function buttonLabeled(root: HTMLElement, label: string): HTMLButtonElement {
  const match = [...root.querySelectorAll("button")]
    .find((b) => b.textContent === label);
  if (!match) {
    throw new Error(`no button labeled "${label}" in: ${root.textContent}`);
  }
  return match as HTMLButtonElement;
}

async function waitUntil(
  predicate: () => boolean,
  what: string,
  timeoutMs = 10000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

describe("scripted session against the live service", () => {
  test("clicking through a five-question quiz reaches the summary", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    // Relative base, exactly like the deployed entry script.
    const machine = new QuizMachine(new ApiClient("", recordingFetch));
    const dispose = mount(root, machine);
    void machine.loadStrategies();

    await waitUntil(
      () => root.querySelector("#strategy-picker") !== null,
      "the start screen",
    );
    const picker = root.querySelector("#strategy-picker") as HTMLSelectElement;
    expect([...picker.options].map((o) => o.value)).toContain("concept_map");

    (root.querySelector("#user-input") as HTMLInputElement).value =
      "e2e-student";
    (root.querySelector("#topic-input") as HTMLInputElement).value =
      "arithmetic";
    picker.value = "concept_map";
    buttonLabeled(root, "Begin").click();
    await waitUntil(
      () => textOf(root, ".progress") === "Question 1 of 5",
      "the first question",
    );

    // The on-screen timer ticks while the question is up.
    await waitUntil(
      () => textOf(root, "#timer") !== "0.0 s",
      "the timer to move",
      3000,
    );

    const served: string[] = [];
    for (let step = 0; step < 5; step += 1) {
      served.push(textOf(root, ".question-text"));
      if (step === 1) {
        buttonLabeled(root, "I don't know").click();
      } else {
        (root.querySelectorAll("button.option")[step % 4] as HTMLButtonElement)
          .click();
        buttonLabeled(root, "Submit").click();
      }
      const next = `Question ${step + 2} of 5`;
      await waitUntil(
        () => textOf(root, ".progress") === next
          || root.textContent!.includes("Test complete"),
        `progress past step ${step + 1}`,
      );
    }

    expect(root.textContent).toContain("Test complete");
    expect(textOf(root, ".score")).toMatch(/^Score: [0-5] \/ 5$/);
    const marks = [...root.querySelectorAll("ol.marks li")];
    expect(marks).toHaveLength(5);
    expect(marks[1].className).toBe("mark-dont_know");
    expect(new Set(served).size).toBe(5);

    // The answer key must be absent from every request and response.
    expect(payloads.length).toBeGreaterThan(10);
    for (const payload of payloads) {
      expect(payload).not.toContain("correct_index");
    }

    // Answer requests carry sane interaction measurements.
    const answers = payloads
      .filter((p) => p.includes('"click_count"'))
      .map((p) => JSON.parse(p) as {
        elapsed_ms: number;
        click_count: number;
        dont_know?: boolean;
      });
    expect(answers).toHaveLength(5);
    for (const body of answers) {
      expect(body.elapsed_ms).toBeGreaterThanOrEqual(0);
    }
    expect(answers[0].click_count).toBe(1);
    expect(answers[1].dont_know).toBe(true);
    expect(answers[1].click_count).toBe(0);

    dispose();
    root.remove();
  }, 30000);

  test("the service reports the finished session and serves the shell", async () => {
    const health = await fetch(`${BASE}/api/health`);
    const body = (await health.json()) as { sessions: number };
    expect(body.sessions).toBeGreaterThanOrEqual(1);

    if (existsSync(join(DIST, "index.html"))) {
      const page = await fetch(`${BASE}/`);
      expect(page.status).toBe(200);
      expect(await page.text()).toContain('<div id="app">');
    }
  });
});
