// Wires the session state and wire API into the page: renders the current
// pair with the differing words bold-faced, handles selection and submission
// (keyboard: 1/2 select, Enter submit), and always resynchronizes from the
// server, which is the source of truth for the next item.

import { ApiError, JudgeApi, Side } from "./api.js";
import { SessionState } from "./state.js";
import { PresentationView, progressLabel, renderPair, TASK_INSTRUCTIONS } from "./view.js";

export class AnnotationApp {
  readonly state = new SessionState();

  constructor(
    private readonly api: JudgeApi,
    private readonly token: string,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    this.render();
    await this.resync();
    this.root.ownerDocument.addEventListener("keydown", (event) => {
      this.onKey(event.key);
    });
  }

  async resync(): Promise<void> {
    try {
      const item = await this.api.nextItem(this.token);
      if (item.status === "complete") {
        this.state.showComplete(item.progress);
      } else {
        this.state.showItem(item);
      }
    } catch (err) {
      this.state.showError(err instanceof ApiError
        ? `${err.message} — check the connection and retry.`
        : String(err));
    }
    this.render();
  }

  select(side: Side): void {
    this.state.select(side);
    this.render();
  }

  async submitCurrent(): Promise<void> {
    if (!this.state.canSubmit()) {
      return; // nothing selected: submission stays blocked
    }
    const item = this.state.item;
    const side = this.state.selected;
    if (!item || !item.pair_id || !side) {
      return;
    }
    try {
      await this.api.submit(this.token, item.pair_id, side);
    } catch (err) {
      // network failure: keep the current item and selection, offer a retry
      this.state.showError(err instanceof ApiError
        ? `${err.message} — your choice was kept, retry submitting.`
        : String(err));
      this.render();
      return;
    }
    // success and duplicate both mean: ask the server what comes next
    await this.resync();
  }

  onKey(key: string): void {
    if (key === "1") {
      this.select("A");
    } else if (key === "2") {
      this.select("B");
    } else if (key === "Enter") {
      void this.submitCurrent();
    }
  }

  render(): void {
    const doc = this.root.ownerDocument;
    this.root.textContent = "";
    switch (this.state.phase) {
      case "loading":
        this.root.appendChild(this.text(doc, "p", "Loading…", "loading"));
        return;
      case "error": {
        this.root.appendChild(this.text(doc, "p", this.state.error ?? "error", "error"));
        const retry = this.text(doc, "button", "Retry", "retry");
        retry.addEventListener("click", () => void this.resync());
        this.root.appendChild(retry);
        return;
      }
      case "complete": {
        const total = this.state.progress?.judged ?? 0;
        const done = this.text(
          doc, "p", `All done — you judged ${total} sentence pairs. Thank you!`,
          "complete");
        this.root.appendChild(done);
        return;
      }
      case "item":
        break;
    }
    const item = this.state.item;
    if (!item) {
      return;
    }
    const view = renderPair(item);
    this.root.appendChild(this.text(doc, "p", TASK_INSTRUCTIONS, "instructions"));
    if (view.warning) {
      this.root.appendChild(this.text(doc, "p", view.warning, "warning"));
    }
    this.root.appendChild(this.sentenceCard(doc, view, "A"));
    this.root.appendChild(this.sentenceCard(doc, view, "B"));
    const submit = this.text(doc, "button", "Submit", "submit") as HTMLButtonElement;
    submit.disabled = !this.state.canSubmit();
    submit.addEventListener("click", () => void this.submitCurrent());
    this.root.appendChild(submit);
    this.root.appendChild(this.text(doc, "p", progressLabel(view), "progress"));
  }

  private sentenceCard(doc: Document, view: PresentationView, side: Side): HTMLElement {
    const sentence = side === "A" ? view.sentenceA : view.sentenceB;
    const card = doc.createElement("div");
    card.className = "sentence" + (this.state.selected === side ? " selected" : "");
    card.dataset.side = side;
    const label = this.text(doc, "span", side === "A" ? "1." : "2.", "key-hint");
    card.appendChild(label);
    const body = doc.createElement("span");
    body.setAttribute("dir", sentence.direction);
    for (const segment of sentence.segments) {
      if (segment.bold) {
        const strong = doc.createElement("strong");
        strong.textContent = segment.text;
        body.appendChild(strong);
      } else {
        body.appendChild(doc.createTextNode(segment.text));
      }
    }
    card.appendChild(body);
    card.addEventListener("click", () => this.select(side));
    return card;
  }

  private text(doc: Document, tag: string, content: string, className: string): HTMLElement {
    const el = doc.createElement(tag);
    el.textContent = content;
    el.className = className;
    return el;
  }
}
