// Browser binding for the view tree: build real DOM nodes and wire actions to
// the dispatcher. Only this module and index.ts touch the document.

import type { Action, UiNode } from "./views.js";

export function toDom(
  node: UiNode,
  doc: Document,
  dispatch: (action: Action) => void,
): HTMLElement {
  const element = doc.createElement(node.tag);
  for (const [key, value] of Object.entries(node.attrs ?? {})) {
    element.setAttribute(key, value);
  }
  if (node.action) {
    const action = node.action;
    element.addEventListener("click", (event) => {
      event.preventDefault();
      dispatch(action);
    });
  }
  for (const child of node.children ?? []) {
    if (typeof child === "string") {
      element.appendChild(doc.createTextNode(child));
    } else {
      element.appendChild(toDom(child, doc, dispatch));
    }
  }
  return element;
}

export function mount(
  root: HTMLElement,
  node: UiNode,
  dispatch: (action: Action) => void,
): void {
  const doc = root.ownerDocument;
  const preserved = new Map<string, string>();
  root.querySelectorAll("textarea").forEach((area) => {
    preserved.set(area.id, (area as HTMLTextAreaElement).value);
  });
  root.replaceChildren(toDom(node, doc, dispatch));
  root.querySelectorAll("textarea").forEach((area) => {
    const saved = preserved.get(area.id);
    if (saved !== undefined) {
      (area as HTMLTextAreaElement).value = saved;
    }
  });
}
