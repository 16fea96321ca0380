// Browser wiring: form submit -> session -> append rendered turn.

import { UiSession } from "./session.js";

export function mountApp(root: Document, baseUrl = ""): UiSession {
  const session = new UiSession(baseUrl);
  const form = root.getElementById("chat-form") as HTMLFormElement;
  const input = root.getElementById("chat-input") as HTMLInputElement;
  const button = root.getElementById("chat-send") as HTMLButtonElement;
  const log = root.getElementById("chat-log") as HTMLElement;

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const query = input.value.trim();
    if (!query || session.busy) {
      return;
    }
    input.disabled = true;
    button.disabled = true;
    void session.send(query).then((turn) => {
      const holder = root.createElement("div");
      holder.innerHTML = turn.html;
      log.appendChild(holder.firstElementChild as Element);
      input.value = "";
      input.disabled = false;
      button.disabled = false;
      input.focus();
      log.scrollTop = log.scrollHeight;
    });
  });
  return session;
}

declare global {
  interface Window {
    __session?: UiSession;
  }
}

if (typeof document !== "undefined" && document.getElementById("chat-form")) {
  window.__session = mountApp(document);
}
