// Browser entry point: wire the controller to the page.

import { ApiClient } from "./api.js";
import { App, type InputReader } from "./app.js";
import { mount } from "./dom.js";
import { renderApp } from "./views.js";

function readTextarea(id: string): string {
  const area = document.getElementById(id) as HTMLTextAreaElement | null;
  return area ? area.value : "";
}

const inputs: InputReader = {
  code: () => readTextarea("code"),
  pretestCodes: () => [0, 1, 2].map((i) => readTextarea(`pretest-${i}`)),
  credentials: () => ({
    username: (document.getElementById("username") as HTMLInputElement | null)?.value ?? "",
    password: (document.getElementById("password") as HTMLInputElement | null)?.value ?? "",
  }),
};

const api = new ApiClient("", (url, init) => fetch(url, init));
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}

const app = new App(api, inputs, (state) => {
  mount(root, renderApp(state), (action) => {
    void app.dispatch(action);
  });
});

mount(root, renderApp(app.state), (action) => {
  void app.dispatch(action);
});
