// Entry point: builds the real client against the page origin and mounts
// the quiz into #app.

import { ApiClient } from "./api.js";
import { mount } from "./app.js";
import { QuizMachine } from "./quiz.js";

const machine = new QuizMachine(new ApiClient(""), () => performance.now());
const root = document.getElementById("app");
if (root) mount(root, machine);
void machine.loadStrategies();
